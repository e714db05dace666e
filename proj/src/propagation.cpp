/*
 * Copyright 2026 The nngp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "nngp/propagation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "kernel_detail.hpp"
#include "nngp/errors.hpp"
#include "nngp/kernel_ops.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

std::string to_string(Track t) { return t == Track::full ? "full" : "diag"; }

int TopKernel::samples() const {
  if (full) return full->samples();
  if (diag) return diag->samples();
  throw ConfigError("empty top-layer kernel");
}

SpatialShape TopKernel::shape() const {
  if (full) return full->shape();
  if (diag) return diag->shape();
  throw ConfigError("empty top-layer kernel");
}

CovDiag TopKernel::diagonal() const {
  if (diag) return *diag;
  if (full) return diag_of(*full);
  throw ConfigError("empty top-layer kernel");
}

namespace {

bool is_one_hot(std::span<const double> h) {
  return std::count_if(h.begin(), h.end(), [](double v) { return v != 0.0; }) == 1;
}

}  // namespace

Track required_track(const ArchConfig& cfg) {
  for (const auto& layer : cfg.post_ops)
    for (const auto& op : layer)
      if (!op.is_selection()) return Track::full;
  switch (cfg.readout.kind) {
    case ReadoutKind::pool:
      return cfg.connectivity == Connectivity::lcn ? Track::diag : Track::full;
    case ReadoutKind::projection:
      return is_one_hot(cfg.readout.h) ? Track::diag : Track::full;
    default:
      return Track::diag;
  }
}

InputSet network_input(const InputSet& x, const ArchConfig& cfg) {
  if (cfg.connectivity == Connectivity::fcn) return x.flattened_to_channels();
  return x;
}

PropagationTrace propagate(const InputSet& x, const ArchConfig& cfg, PropagationOptions options) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const InputSet input = network_input(x, cfg);
  const Track needed = required_track(cfg);
  const Track track = options.track.value_or(needed);
  if (track == Track::diag && needed == Track::full) {
    throw ConfigError("readout '" + to_string(cfg.readout.kind) +
                      "' needs pixel-pixel covariances; the diag track cannot provide them");
  }

  PropagationTrace trace;
  trace.track = track;
  trace.connectivity = cfg.connectivity;
  trace.shapes.push_back(input.shape());

  auto run = [&](auto k, auto affine, auto post_op) {
    trace.peak_entries = k.entries();
    for (int l = 0; l < cfg.depth; ++l) {
      auto pre = affine(k);
      for (const auto& op : cfg.layer_post_ops(l)) pre = post_op(pre, op);
      auto post = apply_C(pre, cfg.nonlinearity);
      trace.peak_entries = std::max({trace.peak_entries, k.entries() + pre.entries(),
                                     pre.entries() + post.entries()});
      trace.shapes.push_back(post.shape());
      if (options.keep_snapshots) {
        LayerSnapshot snap;
        snap.layer = l;
        snap.shape = post.shape();
        if constexpr (std::is_same_v<decltype(pre), CovFull>) {
          snap.pre_full = pre;
          snap.post_full = post;
        } else {
          snap.pre_diag = pre;
          snap.post_diag = post;
        }
        trace.snapshots.push_back(std::move(snap));
      }
      k = std::move(post);
    }
    return k;
  };

  if (track == Track::full) {
    const bool local = cfg.connectivity == Connectivity::lcn;
    trace.top.full = run(
        input_cov(input),
        [&](const CovFull& k) { return local ? apply_A_lcn(k, cfg) : apply_A(k, cfg); },
        [](const CovFull& k, const LinearPostOp& op) { return apply_B(k, op); });
  } else {
    trace.top.diag = run(
        input_cov_diag(input), [&](const CovDiag& k) { return apply_A_diag(k, cfg); },
        [](const CovDiag& k, const LinearPostOp& op) { return apply_B_diag(k, op); });
  }
  trace.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

// ---------------------------------------------------------------------------
// Readouts

namespace {

// Fills the upper triangle with value(x, x2) and mirrors it.
template <class Value>
Eigen::MatrixXd symmetric_matrix(int n, Value&& value) {
  Eigen::MatrixXd m(n, n);
  parallel_for(0, n, [&](std::ptrdiff_t x) {
    for (int x2 = static_cast<int>(x); x2 < n; ++x2) m(x, x2) = value(static_cast<int>(x), x2);
  });
  for (int x = 0; x < n; ++x)
    for (int x2 = 0; x2 < x; ++x2) m(x, x2) = m(x2, x);
  return m;
}

const double* pair_ptr(const CovDiag& k, int x, int x2) {
  return k.data().data() + (static_cast<std::size_t>(x) * k.samples() + x2) * k.pixels();
}

}  // namespace

ClassKernel readout_vectorize(const TopKernel& top, double sigma_w2, double sigma_b2) {
  const CovDiag k = top.diagonal();
  const int d = k.pixels();
  return {symmetric_matrix(k.samples(),
                           [&](int x, int x2) {
                             return detail::vectorize_value(pair_ptr(k, x, x2), d, sigma_w2, sigma_b2);
                           }),
          ReadoutTag::vectorize};
}

ClassKernel readout_project(const TopKernel& top, std::span<const double> h, double sigma_w2,
                            double sigma_b2) {
  const int d = top.shape().size();
  if (static_cast<int>(h.size()) != d) {
    throw ShapeError("projection vector has " + std::to_string(h.size()) + " entries, expected " +
                     std::to_string(d));
  }
  if (!top.full) {
    if (!is_one_hot(h)) {
      throw ConfigError("projection readout needs the full covariance track");
    }
    const CovDiag k = top.diagonal();
    return {symmetric_matrix(k.samples(),
                             [&](int x, int x2) {
                               return detail::projection_diag_value(pair_ptr(k, x, x2), h.data(), d,
                                                                    sigma_w2, sigma_b2);
                             }),
            ReadoutTag::projection};
  }
  const CovFull& k = *top.full;
  return {symmetric_matrix(k.samples(),
                           [&](int x, int x2) {
                             double acc = 0.0;
                             for (int a = 0; a < d; ++a) {
                               if (h[a] == 0.0) continue;
                               for (int a2 = 0; a2 < d; ++a2) {
                                 if (h[a2] == 0.0) continue;
                                 acc += h[a] * h[a2] * k(x, a, x2, a2);
                               }
                             }
                             return sigma_w2 * acc + sigma_b2;
                           }),
          ReadoutTag::projection};
}

ClassKernel readout_pool(const TopKernel& top, double sigma_w2, double sigma_b2) {
  if (!top.full) throw ConfigError("pool readout needs the full covariance track");
  const int d = top.shape().size();
  const std::vector<double> h(d, 1.0 / d);
  ClassKernel k = readout_project(top, h, sigma_w2, sigma_b2);
  k.tag = ReadoutTag::pool;
  return k;
}

ClassKernel readout_subsample(const TopKernel& top, int pixel, double sigma_w2, double sigma_b2) {
  const int d = top.shape().size();
  if (pixel < 0 || pixel >= d) {
    throw ShapeError("subsample pixel " + std::to_string(pixel) + " outside [0, " +
                     std::to_string(d) + ")");
  }
  const CovDiag k = top.diagonal();
  return {symmetric_matrix(k.samples(),
                           [&](int x, int x2) {
                             return detail::subsample_value(k(x, x2, pixel), sigma_w2, sigma_b2);
                           }),
          ReadoutTag::subsample_pixel};
}

ClassKernel readout_vectorize(const PropagationTrace& trace, const ArchConfig& cfg) {
  return readout_vectorize(trace.top, cfg.readout_sigma_w2(), cfg.readout_sigma_b2());
}

ClassKernel readout_pool(const PropagationTrace& trace, const ArchConfig& cfg) {
  return readout_pool(trace.top, cfg.readout_sigma_w2(), cfg.readout_sigma_b2());
}

ClassKernel readout_project(const PropagationTrace& trace, std::span<const double> h,
                            const ArchConfig& cfg) {
  return readout_project(trace.top, h, cfg.readout_sigma_w2(), cfg.readout_sigma_b2());
}

ClassKernel readout_subsample(const PropagationTrace& trace, int pixel, const ArchConfig& cfg) {
  return readout_subsample(trace.top, pixel, cfg.readout_sigma_w2(), cfg.readout_sigma_b2());
}

ClassKernel lcn_pool_rescale(const ClassKernel& vectorized, double sigma_b2, int pixels) {
  if (pixels < 1) throw ShapeError("rescale needs a positive pixel count");
  ClassKernel out;
  out.matrix = ((vectorized.matrix.array() - sigma_b2) / pixels + sigma_b2).matrix();
  out.tag = ReadoutTag::lcn_pool;
  return out;
}

ClassKernel readout(const TopKernel& top, const ArchConfig& cfg) {
  const double sw2 = cfg.readout_sigma_w2();
  const double sb2 = cfg.readout_sigma_b2();
  switch (cfg.readout.kind) {
    case ReadoutKind::vectorize: return readout_vectorize(top, sw2, sb2);
    case ReadoutKind::pool:
      if (cfg.connectivity == Connectivity::lcn) {
        return lcn_pool_rescale(readout_vectorize(top, sw2, sb2), sb2, top.shape().size());
      }
      return readout_pool(top, sw2, sb2);
    case ReadoutKind::subsample_pixel: return readout_subsample(top, cfg.readout.pixel, sw2, sb2);
    case ReadoutKind::projection: return readout_project(top, cfg.readout.h, sw2, sb2);
  }
  throw ConfigError("unknown readout");
}

ClassKernel readout(const PropagationTrace& trace, const ArchConfig& cfg) {
  return readout(trace.top, cfg);
}

// ---------------------------------------------------------------------------
// PairwiseKernel

PairwiseKernel::PairwiseKernel(const InputSet& x, const ArchConfig& cfg)
    : cfg_(cfg), input_(network_input(x, cfg)), samples_(x.samples()) {
  cfg_.validate();
  if (required_track(cfg_) != Track::diag) {
    throw ConfigError("pairwise kernel evaluation supports diagonal-track readouts only");
  }
  SpatialShape shape = input_.shape();
  for (int l = 0; l < cfg_.depth; ++l) {
    plans_.emplace_back(shape, cfg_);
    shape = plans_.back().output;
    std::vector<std::vector<int>> layer_selections;
    for (const auto& op : cfg_.layer_post_ops(l)) {
      const Eigen::MatrixXd b = op.matrix(shape);
      std::vector<int> src(b.rows());
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        Eigen::Index j = 0;
        b.row(i).maxCoeff(&j);
        src[i] = static_cast<int>(j);
      }
      layer_selections.push_back(std::move(src));
      shape = op.output_shape(shape);
    }
    selections_.push_back(std::move(layer_selections));
    pre_shapes_.push_back(shape);
  }
  const int d_top = shape.size();
  if (cfg_.readout.kind == ReadoutKind::subsample_pixel &&
      (cfg_.readout.pixel < 0 || cfg_.readout.pixel >= d_top)) {
    throw ShapeError("subsample pixel outside the top-layer spatial range");
  }
  if (cfg_.readout.kind == ReadoutKind::projection && static_cast<int>(cfg_.readout.h.size()) != d_top) {
    throw ShapeError("projection vector length does not match the top-layer spatial size");
  }

  self_.resize(samples_);
  parallel_for(0, samples_, [&](std::ptrdiff_t s) {
    std::vector<double> pre;
    std::vector<double> post;
    auto& layers = self_[s];
    layers.resize(cfg_.depth);
    post.resize(input_.pixels());
    input_cov_pair(input_, static_cast<int>(s), static_cast<int>(s), post);
    for (int l = 0; l < cfg_.depth; ++l) {
      const StencilPlan& plan = plans_[l];
      pre.resize(plan.output.size());
      for (int a = 0; a < plan.output.size(); ++a) {
        pre[a] = detail::affine_entry(plan, a, a, cfg_.sigma_w2, cfg_.sigma_b2,
                                      [&](int src, int) { return post[src]; });
      }
      for (const auto& sel : selections_[l]) {
        std::vector<double> picked(sel.size());
        for (std::size_t i = 0; i < sel.size(); ++i) picked[i] = pre[sel[i]];
        pre = std::move(picked);
      }
      layers[l] = pre;
      post.resize(pre.size());
      for (std::size_t a = 0; a < pre.size(); ++a) {
        post[a] = detail::nonlinearity_entry(pre[a], pre[a], pre[a], true, cfg_.nonlinearity);
      }
    }
  });
}

void PairwiseKernel::propagate_pair(int x, int x2, std::vector<double>& pre,
                                    std::vector<double>& post) const {
  post.resize(input_.pixels());
  input_cov_pair(input_, x, x2, post);
  for (int l = 0; l < cfg_.depth; ++l) {
    const StencilPlan& plan = plans_[l];
    pre.resize(plan.output.size());
    for (int a = 0; a < plan.output.size(); ++a) {
      pre[a] = detail::affine_entry(plan, a, a, cfg_.sigma_w2, cfg_.sigma_b2,
                                    [&](int src, int) { return post[src]; });
    }
    for (const auto& sel : selections_[l]) {
      std::vector<double> picked(sel.size());
      for (std::size_t i = 0; i < sel.size(); ++i) picked[i] = pre[sel[i]];
      pre = std::move(picked);
    }
    const auto& self_x = self_[x][l];
    const auto& self_x2 = self_[x2][l];
    post.resize(pre.size());
    for (std::size_t a = 0; a < pre.size(); ++a) {
      post[a] = detail::nonlinearity_entry(self_x[a], pre[a], self_x2[a], x == x2, cfg_.nonlinearity);
    }
  }
}

double PairwiseKernel::entry(int x, int x2) const {
  if (x < 0 || x >= samples_ || x2 < 0 || x2 >= samples_) throw ShapeError("sample index out of range");
  thread_local std::vector<double> pre;
  thread_local std::vector<double> post;
  propagate_pair(x, x2, pre, post);
  const int d = static_cast<int>(post.size());
  const double sw2 = cfg_.readout_sigma_w2();
  const double sb2 = cfg_.readout_sigma_b2();
  switch (cfg_.readout.kind) {
    case ReadoutKind::vectorize: return detail::vectorize_value(post.data(), d, sw2, sb2);
    case ReadoutKind::pool:  // lcn only, see required_track
      return (detail::vectorize_value(post.data(), d, sw2, sb2) - sb2) / d + sb2;
    case ReadoutKind::subsample_pixel: return detail::subsample_value(post[cfg_.readout.pixel], sw2, sb2);
    case ReadoutKind::projection:
      return detail::projection_diag_value(post.data(), cfg_.readout.h.data(), d, sw2, sb2);
  }
  throw ConfigError("unknown readout");
}

Eigen::MatrixXd PairwiseKernel::block(std::span<const int> rows, std::span<const int> cols) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  parallel_for(0, static_cast<std::ptrdiff_t>(rows.size()), [&](std::ptrdiff_t i) {
    for (std::size_t j = 0; j < cols.size(); ++j) m(i, j) = entry(rows[i], cols[j]);
  });
  return m;
}

ClassKernel PairwiseKernel::full() const {
  return {symmetric_matrix(samples_, [&](int x, int x2) { return entry(x, x2); }), tag()};
}

ReadoutTag PairwiseKernel::tag() const {
  switch (cfg_.readout.kind) {
    case ReadoutKind::vectorize: return ReadoutTag::vectorize;
    case ReadoutKind::pool: return ReadoutTag::lcn_pool;
    case ReadoutKind::subsample_pixel: return ReadoutTag::subsample_pixel;
    case ReadoutKind::projection: return ReadoutTag::projection;
  }
  return ReadoutTag::none;
}

// ---------------------------------------------------------------------------
// Phase diagram

std::string to_string(Phase p) {
  switch (p) {
    case Phase::ordered: return "ordered";
    case Phase::chaotic: return "chaotic";
    case Phase::critical_band: return "critical-band";
    case Phase::divergent: return "divergent";
  }
  return "?";
}

namespace {

constexpr double kDivergenceCap = 1e150;
// Successive correlation changes below this are treated as round-off.
constexpr double kRoundOffFloor = 1e-14;

double least_squares_slope(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

PhasePoint phase_point(double sigma_w2, double sigma_b2, Nonlinearity phi, int max_depth,
                       bool keep_traces) {
  if (!(sigma_w2 > 0.0)) throw ConfigError("phase scan needs sigma_w2 > 0");
  if (!(sigma_b2 >= 0.0)) throw ConfigError("phase scan needs sigma_b2 >= 0");
  if (max_depth < 1) throw ConfigError("phase scan needs max_depth >= 1");

  PhasePoint p;
  p.sigma_w2 = sigma_w2;
  p.sigma_b2 = sigma_b2;

  double q = 1.0;
  double cov = kInitialCorrelation;
  std::vector<double> cs{kInitialCorrelation};
  std::vector<double> qs{q};
  bool divergent = false;
  for (int l = 1; l <= max_depth; ++l) {
    const double next_cov = sigma_b2 + sigma_w2 * expected_product({q, cov, q}, phi);
    q = variance_map(q, sigma_w2, sigma_b2, phi);
    cov = next_cov;
    p.depth = l;
    if (!std::isfinite(q) || q > kDivergenceCap) {
      divergent = true;
      break;
    }
    qs.push_back(q);
    cs.push_back(q > 0.0 ? std::clamp(cov / q, -1.0, 1.0) : 1.0);
  }

  p.q_star = q;
  if (keep_traces) {
    p.q_trace = qs;
    p.c_trace = cs;
  }
  if (divergent) {
    p.label = Phase::divergent;
    p.c_star = std::numeric_limits<double>::quiet_NaN();
    p.rate = std::numeric_limits<double>::quiet_NaN();
    return p;
  }
  p.c_star = cs.back();

  // Rate from the geometric decay of successive correlation changes over the
  // last 20% of the usable (above round-off) iterations.
  std::vector<double> steps;
  std::vector<double> logs;
  for (std::size_t l = 1; l < cs.size(); ++l) {
    const double delta = std::abs(cs[l] - cs[l - 1]);
    if (delta > kRoundOffFloor) {
      steps.push_back(static_cast<double>(l));
      logs.push_back(std::log(delta));
    }
  }
  if (steps.size() < 2) {
    p.rate = -std::numeric_limits<double>::infinity();
  } else {
    const std::size_t window = std::max<std::size_t>(2, steps.size() / 5);
    const std::size_t from = steps.size() - window;
    p.rate = least_squares_slope(std::span(steps).subspan(from), std::span(logs).subspan(from));
  }

  if (p.c_star >= 1.0 - kOrderedThreshold) p.label = Phase::ordered;
  else if (std::abs(p.rate) < kCriticalRateThreshold) p.label = Phase::critical_band;
  else p.label = Phase::chaotic;
  return p;
}

std::vector<PhasePoint> phase_scan(std::span<const std::pair<double, double>> grid,
                                   Nonlinearity phi, int max_depth) {
  std::vector<PhasePoint> out(grid.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(grid.size()), [&](std::ptrdiff_t i) {
    out[i] = phase_point(grid[i].first, grid[i].second, phi, max_depth);
  });
  return out;
}

std::vector<std::pair<double, double>> uniform_grid(double w_min, double w_max, int w_steps,
                                                    double b_min, double b_max, int b_steps) {
  if (w_steps < 1 || b_steps < 1) throw ConfigError("grid needs at least one step per axis");
  auto axis = [](double lo, double hi, int steps, int i) {
    return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
  };
  std::vector<std::pair<double, double>> grid;
  grid.reserve(static_cast<std::size_t>(w_steps) * b_steps);
  for (int i = 0; i < w_steps; ++i)
    for (int j = 0; j < b_steps; ++j)
      grid.emplace_back(axis(w_min, w_max, w_steps, i), axis(b_min, b_max, b_steps, j));
  return grid;
}

}  // namespace nngp
