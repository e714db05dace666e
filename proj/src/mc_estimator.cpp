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

#include "nngp/mc_estimator.hpp"

#include <cmath>
#include <optional>

#include "nngp/errors.hpp"
#include "nngp/kernel_ops.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd input_features(const InputSet& x) {
  const int n = x.samples();
  const int d = x.pixels();
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n) * d, x.channels());
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < x.channels(); ++c)
      for (int a = 0; a < d; ++a) y(s * d + a, c) = x.at(s, c, a);
  return y;
}

Eigen::MatrixXd draw_matrix(Eigen::Index rows, Eigen::Index cols, double stddev,
                            const GaussianSampler& sampler) {
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = sampler(stddev);
  return w;
}

Eigen::MatrixXd affine_forward(const Eigen::MatrixXd& y, int samples, const StencilPlan& plan,
                               const ArchConfig& cfg, int width, const GaussianSampler& sampler) {
  const Eigen::Index n_in = y.cols();
  const int d_in = plan.input.size();
  const int d_out = plan.output.size();
  const int taps = plan.taps();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples) * d_out, width);
  const double bias_std = std::sqrt(cfg.sigma_b2);

  if (cfg.connectivity != Connectivity::lcn) {
    std::vector<Eigen::MatrixXd> weights;
    for (int t = 0; t < taps; ++t) {
      weights.push_back(draw_matrix(n_in, width, std::sqrt(plan.weights[t] * cfg.sigma_w2 / n_in), sampler));
    }
    const Eigen::RowVectorXd bias = draw_matrix(1, width, bias_std, sampler);
    Eigen::MatrixXd gathered(z.rows(), n_in);
    for (int t = 0; t < taps; ++t) {
      for (int s = 0; s < samples; ++s) {
        for (int a = 0; a < d_out; ++a) {
          const int src = plan.src(a, t);
          if (src < 0) gathered.row(s * d_out + a).setZero();
          else gathered.row(s * d_out + a) = y.row(s * d_in + src);
        }
      }
      z.noalias() += gathered * weights[t];
    }
    z.rowwise() += bias;
    return z;
  }

  // Locally connected: untied weights and biases per output pixel.
  std::vector<std::vector<Eigen::MatrixXd>> weights(d_out);
  for (int a = 0; a < d_out; ++a)
    for (int t = 0; t < taps; ++t)
      weights[a].push_back(draw_matrix(n_in, width, std::sqrt(plan.weights[t] * cfg.sigma_w2 / n_in), sampler));
  const Eigen::MatrixXd bias = draw_matrix(d_out, width, bias_std, sampler);
  Eigen::MatrixXd gathered(samples, n_in);
  Eigen::MatrixXd za(samples, width);
  for (int a = 0; a < d_out; ++a) {
    za.setZero();
    for (int t = 0; t < taps; ++t) {
      const int src = plan.src(a, t);
      if (src < 0) continue;
      for (int s = 0; s < samples; ++s) gathered.row(s) = y.row(s * d_in + src);
      za.noalias() += gathered * weights[a][t];
    }
    for (int s = 0; s < samples; ++s) z.row(s * d_out + a) = za.row(s) + bias.row(a);
  }
  return z;
}

Eigen::MatrixXd apply_post_op(const Eigen::MatrixXd& z, int samples, const SpatialShape& in,
                              const LinearPostOp& op) {
  const Eigen::MatrixXd b = op.matrix(in);
  const Eigen::Index d_in = b.cols();
  const Eigen::Index d_out = b.rows();
  Eigen::MatrixXd out(samples * d_out, z.cols());
  for (int s = 0; s < samples; ++s) {
    out.middleRows(s * d_out, d_out).noalias() = b * z.middleRows(s * d_in, d_in);
  }
  return out;
}

Eigen::MatrixXd nonlinearity(const Eigen::MatrixXd& z, Nonlinearity phi) {
  switch (phi) {
    case Nonlinearity::relu: return z.cwiseMax(0.0);
    case Nonlinearity::erf: return z.unaryExpr([](double v) { return std::erf(v); });
  }
  return z;
}

}  // namespace

std::mt19937_64 draw_engine(std::uint64_t seed, std::uint64_t draw) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(draw + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32)};
  return std::mt19937_64(seq);
}

ForwardPass forward_sample(const InputSet& x, const ArchConfig& cfg, int width,
                           const GaussianSampler& sampler, bool keep_all_layers) {
  cfg.validate();
  if (width < 1) throw ConfigError("network width must be >= 1");
  const InputSet input = network_input(x, cfg);
  const int samples = input.samples();

  ForwardPass pass;
  SpatialShape shape = input.shape();
  Eigen::MatrixXd y = input_features(input);
  pass.shapes.push_back(shape);
  if (keep_all_layers) pass.post.push_back(y);

  for (int l = 0; l < cfg.depth; ++l) {
    const StencilPlan plan(shape, cfg);
    Eigen::MatrixXd z = affine_forward(y, samples, plan, cfg, width, sampler);
    shape = plan.output;
    for (const auto& op : cfg.layer_post_ops(l)) {
      z = apply_post_op(z, samples, shape, op);
      shape = op.output_shape(shape);
    }
    y = nonlinearity(z, cfg.nonlinearity);
    pass.shapes.push_back(shape);
    if (keep_all_layers) {
      pass.pre.push_back(std::move(z));
      pass.post.push_back(y);
    }
  }
  if (!keep_all_layers) pass.post.push_back(std::move(y));
  return pass;
}

ForwardPass forward_sample(const InputSet& x, const ArchConfig& cfg, int width,
                           std::mt19937_64& rng, bool keep_all_layers) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const GaussianSampler sampler = [&](double stddev) { return stddev * normal(rng); };
  return forward_sample(x, cfg, width, sampler, keep_all_layers);
}

namespace {

/// Binary-counter pairwise summation: the reduction tree depends only on
/// the number of terms.
class PairwiseAccumulator {
 public:
  void add(Eigen::MatrixXd term) {
    int level = 0;
    while (!stack_.empty() && stack_.back().first == level) {
      term = stack_.back().second + term;
      stack_.pop_back();
      ++level;
    }
    stack_.emplace_back(level, std::move(term));
  }

  Eigen::MatrixXd total() const {
    Eigen::MatrixXd sum = stack_.back().second;
    for (auto it = stack_.rbegin() + 1; it != stack_.rend(); ++it) sum = it->second + sum;
    return sum;
  }

 private:
  std::vector<std::pair<int, Eigen::MatrixXd>> stack_;
};

// One draw's sum_c y_c y_c^T, laid out like CovFull (full) or CovDiag (diag,
// as a single column).
Eigen::MatrixXd draw_contribution(const Eigen::MatrixXd& y, int samples, int pixels, Track track) {
  if (track == Track::full) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(y.rows(), y.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(y);
    return g.selfadjointView<Eigen::Lower>();
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples) * samples * pixels, 1);
  Eigen::MatrixXd ya(samples, y.cols());
  for (int a = 0; a < pixels; ++a) {
    for (int s = 0; s < samples; ++s) ya.row(s) = y.row(s * pixels + a);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(samples, samples);
    g.selfadjointView<Eigen::Lower>().rankUpdate(ya);
    g = g.selfadjointView<Eigen::Lower>();
    for (int s = 0; s < samples; ++s)
      for (int s2 = 0; s2 < samples; ++s2) out((static_cast<Eigen::Index>(s) * samples + s2) * pixels + a, 0) = g(s, s2);
  }
  return out;
}

}  // namespace

McKernelEstimate mc_estimate(const InputSet& x, const ArchConfig& cfg, int width, int draws,
                             std::uint64_t seed, Track track) {
  cfg.validate();
  if (width < 1) throw ConfigError("MC width n must be >= 1");
  if (draws < 1) throw ConfigError("MC draw count M must be >= 1");
  for (const auto& layer : cfg.post_ops)
    for (const auto& op : layer)
      if (!op.is_selection() && track == Track::diag)
        throw ConfigError("avg_pool post-ops need the full track");

  McKernelEstimate est;
  est.width = width;
  est.draws = draws;
  est.layer = cfg.depth;
  est.seed = seed;
  est.track = track;

  const InputSet input = network_input(x, cfg);
  if (cfg.depth == 0) {
    // No random layers: the estimate is the input covariance itself.
    if (track == Track::full) est.kernel.full = input_cov(input);
    else est.kernel.diag = input_cov_diag(input);
    return est;
  }

  const int samples = input.samples();
  PairwiseAccumulator acc;
  std::optional<SpatialShape> top_shape;
  const int batch = static_cast<int>(std::max(1u, max_threads()));
  for (int first = 0; first < draws; first += batch) {
    const int count = std::min(batch, draws - first);
    std::vector<Eigen::MatrixXd> terms(count);
    std::vector<SpatialShape> shapes(count);
    parallel_for(0, count, [&](std::ptrdiff_t i) {
      auto rng = draw_engine(seed, static_cast<std::uint64_t>(first + i));
      ForwardPass pass = forward_sample(input, cfg, width, rng, false);
      shapes[i] = pass.shapes.back();
      terms[i] = draw_contribution(pass.post.back(), samples, shapes[i].size(), track);
    });
    for (int i = 0; i < count; ++i) acc.add(std::move(terms[i]));
    top_shape = shapes.front();
  }

  const double scale = 1.0 / (static_cast<double>(draws) * width);
  Eigen::MatrixXd total = acc.total() * scale;
  if (track == Track::full) {
    est.kernel.full = CovFull(std::move(total), samples, *top_shape, cfg.depth);
  } else {
    std::vector<double> data(total.data(), total.data() + total.size());
    est.kernel.diag = CovDiag(std::move(data), samples, *top_shape, cfg.depth);
  }
  return est;
}

double kernel_distance(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols()) {
    throw ShapeError("kernel_distance needs matching shapes");
  }
  const double ref = reference.squaredNorm();
  if (!(ref > 0.0)) throw NumericalError("kernel_distance reference has zero Frobenius norm");
  return (estimate - reference).squaredNorm() / ref;
}

double kernel_distance(const ClassKernel& estimate, const ClassKernel& reference) {
  return kernel_distance(estimate.matrix, reference.matrix);
}

double kernel_distance(const CovFull& estimate, const CovFull& reference) {
  return kernel_distance(estimate.matrix(), reference.matrix());
}

double kernel_distance(const CovDiag& estimate, const CovDiag& reference) {
  const auto e = estimate.data();
  const auto r = reference.data();
  return kernel_distance(Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size())),
                         Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
}

ClassKernel mc_readout(const McKernelEstimate& estimate, const ArchConfig& cfg) {
  const double sw2 = cfg.readout_sigma_w2();
  const double sb2 = cfg.readout_sigma_b2();
  if (cfg.readout.kind == ReadoutKind::pool) return readout_pool(estimate.kernel, sw2, sb2);
  return readout(estimate.kernel, cfg);
}

}  // namespace nngp
