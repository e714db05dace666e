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

#include "nngp/kernel_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernel_detail.hpp"
#include "nngp/errors.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

using std::numbers::pi;

double GaussianMoment2::correlation() const {
  if (var_x <= 0.0 || var_x2 <= 0.0) return 0.0;
  return std::clamp(cov / std::sqrt(var_x * var_x2), -1.0, 1.0);
}

double GaussianMoment2::angle() const { return std::acos(correlation()); }

double expected_square(double var, Nonlinearity phi) {
  if (var <= 0.0) return 0.0;
  switch (phi) {
    case Nonlinearity::relu: return 0.5 * var;
    case Nonlinearity::erf: return (2.0 / pi) * std::asin(2.0 * var / (1.0 + 2.0 * var));
  }
  return 0.0;
}

double expected_product(const GaussianMoment2& m, Nonlinearity phi) {
  // A point mass at zero maps to zero for both nonlinearities.
  if (m.var_x <= 0.0 || m.var_x2 <= 0.0) return 0.0;
  switch (phi) {
    case Nonlinearity::relu: {
      const double norm = std::sqrt(m.var_x * m.var_x2);
      const double c = std::clamp(m.cov / norm, -1.0, 1.0);
      const double theta = std::acos(c);
      return norm / (2.0 * pi) * (std::sin(theta) + (pi - theta) * c);
    }
    case Nonlinearity::erf: {
      const double denom = std::sqrt((1.0 + 2.0 * m.var_x) * (1.0 + 2.0 * m.var_x2));
      return (2.0 / pi) * std::asin(std::clamp(2.0 * m.cov / denom, -1.0, 1.0));
    }
  }
  return 0.0;
}

std::vector<FilterTap> filter_taps(const ArchConfig& cfg, int rank) {
  const int k = cfg.filter_half_width;
  const int width = 2 * k + 1;
  std::vector<FilterTap> taps;
  if (rank == 1) {
    if (!cfg.v.empty() && static_cast<int>(cfg.v.size()) != width) {
      throw ConfigError("1D filters need 2k+1 variance weights");
    }
    for (int i = 0; i < width; ++i) {
      taps.push_back({i - k, 0, cfg.v.empty() ? 1.0 / width : cfg.v[i]});
    }
    return taps;
  }
  const bool outer = static_cast<int>(cfg.v.size()) == width;
  if (!cfg.v.empty() && !outer && static_cast<int>(cfg.v.size()) != width * width) {
    throw ConfigError("2D filters need 2k+1 or (2k+1)^2 variance weights");
  }
  for (int i = 0; i < width; ++i) {
    for (int j = 0; j < width; ++j) {
      double w = 1.0 / (width * width);
      if (outer) w = cfg.v[i] * cfg.v[j];
      else if (!cfg.v.empty()) w = cfg.v[i * width + j];
      taps.push_back({i - k, j - k, w});
    }
  }
  return taps;
}

SpatialShape affine_output_shape(const SpatialShape& in, const ArchConfig& cfg) {
  if (cfg.padding != Padding::valid) return in;
  const int k = cfg.filter_half_width;
  SpatialShape out = in;
  out.height = in.height - 2 * k;
  if (in.rank == 2) out.width = in.width - 2 * k;
  if (out.height < 1 || out.width < 1) {
    throw SpatialCollapseError("valid padding collapses spatial size " + to_string(in) +
                               " below one pixel with k=" + std::to_string(k));
  }
  return out;
}

StencilPlan::StencilPlan(const SpatialShape& in, const ArchConfig& cfg)
    : input(in), output(affine_output_shape(in, cfg)) {
  const auto taps = filter_taps(cfg, in.rank);
  const int k = cfg.filter_half_width;
  weights.reserve(taps.size());
  for (const auto& t : taps) weights.push_back(t.weight);
  source.resize(static_cast<std::size_t>(output.size()) * taps.size());

  auto resolve = [&](int pos, int extent) -> int {
    switch (cfg.padding) {
      case Padding::circular: return ((pos % extent) + extent) % extent;
      case Padding::same: return (pos >= 0 && pos < extent) ? pos : -1;
      case Padding::valid: return pos;
    }
    return -1;
  };
  // Valid padding: output pixel r sits on input pixel r + k.
  const int shift = cfg.padding == Padding::valid ? k : 0;
  const int shift_w = (cfg.padding == Padding::valid && in.rank == 2) ? k : 0;

  for (int r = 0; r < output.height; ++r) {
    for (int c = 0; c < output.width; ++c) {
      const int a = output.index(r, c);
      for (std::size_t t = 0; t < taps.size(); ++t) {
        const int row = resolve(r + shift + taps[t].dh, in.height);
        const int col = resolve(c + shift_w + taps[t].dw, in.width);
        source[a * taps.size() + t] = (row < 0 || col < 0) ? -1 : in.index(row, col);
      }
    }
  }
}

namespace {

CovFull affine_full(const CovFull& k, const ArchConfig& cfg, bool local) {
  cfg.validate();
  const StencilPlan plan(k.shape(), cfg);
  const int n = k.samples();
  const int d_in = k.pixels();
  const int d_out = plan.output.size();
  const Eigen::Index rows = static_cast<Eigen::Index>(n) * d_out;
  Eigen::MatrixXd out(rows, rows);
  const Eigen::MatrixXd& in = k.matrix();
  parallel_for(0, rows, [&](std::ptrdiff_t i) {
    const int x = static_cast<int>(i / d_out);
    const int a = static_cast<int>(i % d_out);
    for (int x2 = 0; x2 < n; ++x2) {
      for (int a2 = 0; a2 < d_out; ++a2) {
        double value = 0.0;
        if (!local || a == a2) {
          value = detail::affine_entry(plan, a, a2, cfg.sigma_w2, cfg.sigma_b2, [&](int s, int s2) {
            return in(x * d_in + s, x2 * d_in + s2);
          });
        }
        out(i, x2 * d_out + a2) = value;
      }
    }
  });
  return CovFull(std::move(out), n, plan.output, k.layer());
}

}  // namespace

CovFull apply_A(const CovFull& k, const ArchConfig& cfg) { return affine_full(k, cfg, false); }

CovFull apply_A_lcn(const CovFull& k, const ArchConfig& cfg) { return affine_full(k, cfg, true); }

CovDiag apply_A_diag(const CovDiag& k, const ArchConfig& cfg) {
  cfg.validate();
  const StencilPlan plan(k.shape(), cfg);
  const int n = k.samples();
  const int d_in = k.pixels();
  const int d_out = plan.output.size();
  std::vector<double> out(static_cast<std::size_t>(n) * n * d_out);
  const auto in = k.data();
  parallel_for(0, static_cast<std::ptrdiff_t>(n) * n, [&](std::ptrdiff_t pair) {
    const double* src = in.data() + pair * d_in;
    double* dst = out.data() + pair * d_out;
    for (int a = 0; a < d_out; ++a) {
      dst[a] = detail::affine_entry(plan, a, a, cfg.sigma_w2, cfg.sigma_b2,
                                    [&](int s, int) { return src[s]; });
    }
  });
  return CovDiag(std::move(out), n, plan.output, k.layer());
}

CovFull apply_C(const CovFull& k, Nonlinearity phi) {
  const Eigen::MatrixXd& in = k.matrix();
  const Eigen::Index rows = in.rows();
  Eigen::MatrixXd out(rows, rows);
  parallel_for(0, rows, [&](std::ptrdiff_t i) {
    for (Eigen::Index j = 0; j < rows; ++j) {
      out(i, j) = detail::nonlinearity_entry(in(i, i), in(i, j), in(j, j), i == j, phi);
    }
  });
  return CovFull(std::move(out), k.samples(), k.shape(), k.layer() + 1);
}

CovDiag apply_C(const CovDiag& k, Nonlinearity phi) {
  const int n = k.samples();
  const int d = k.pixels();
  std::vector<double> out(k.entries());
  parallel_for(0, static_cast<std::ptrdiff_t>(n) * n, [&](std::ptrdiff_t pair) {
    const int x = static_cast<int>(pair / n);
    const int x2 = static_cast<int>(pair % n);
    for (int a = 0; a < d; ++a) {
      out[pair * d + a] = detail::nonlinearity_entry(k(x, x, a), k(x, x2, a), k(x2, x2, a), x == x2, phi);
    }
  });
  return CovDiag(std::move(out), n, k.shape(), k.layer() + 1);
}

namespace {

// For selection operators: the input pixel feeding each output pixel.
std::vector<int> selection_sources(const LinearPostOp& op, const SpatialShape& in) {
  const Eigen::MatrixXd b = op.matrix(in);
  std::vector<int> src(b.rows());
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    Eigen::Index j = 0;
    b.row(i).maxCoeff(&j);
    src[i] = static_cast<int>(j);
  }
  return src;
}

}  // namespace

CovFull apply_B(const CovFull& k, const LinearPostOp& op) {
  const SpatialShape out_shape = op.output_shape(k.shape());
  const int n = k.samples();
  const int d_in = k.pixels();
  const int d_out = out_shape.size();
  const Eigen::Index rows = static_cast<Eigen::Index>(n) * d_out;
  Eigen::MatrixXd out(rows, rows);
  const Eigen::MatrixXd& in = k.matrix();

  if (op.is_selection()) {
    const auto src = selection_sources(op, k.shape());
    for (int x = 0; x < n; ++x)
      for (int a = 0; a < d_out; ++a)
        for (int x2 = 0; x2 < n; ++x2)
          for (int a2 = 0; a2 < d_out; ++a2)
            out(x * d_out + a, x2 * d_out + a2) = in(x * d_in + src[a], x2 * d_in + src[a2]);
  } else {
    const Eigen::MatrixXd b = op.matrix(k.shape());
    for (int x = 0; x < n; ++x) {
      for (int x2 = 0; x2 < n; ++x2) {
        out.block(x * d_out, x2 * d_out, d_out, d_out).noalias() =
            b * in.block(x * d_in, x2 * d_in, d_in, d_in) * b.transpose();
      }
    }
    // Congruence keeps symmetry only up to GEMM rounding; restore it exactly.
    out = (0.5 * (out + out.transpose())).eval();
  }
  return CovFull(std::move(out), n, out_shape, k.layer());
}

CovDiag apply_B_diag(const CovDiag& k, const LinearPostOp& op) {
  if (!op.is_selection()) {
    throw ConfigError(to_string(op.kind) + " mixes pixels and requires the full covariance track");
  }
  const SpatialShape out_shape = op.output_shape(k.shape());
  const auto src = selection_sources(op, k.shape());
  const int n = k.samples();
  const int d_in = k.pixels();
  const int d_out = out_shape.size();
  std::vector<double> out(static_cast<std::size_t>(n) * n * d_out);
  const auto in = k.data();
  for (std::size_t pair = 0; pair < static_cast<std::size_t>(n) * n; ++pair)
    for (int a = 0; a < d_out; ++a) out[pair * d_out + a] = in[pair * d_in + src[a]];
  return CovDiag(std::move(out), n, out_shape, k.layer());
}

double variance_map(double q, double sigma_w2, double sigma_b2, Nonlinearity phi) {
  return sigma_b2 + sigma_w2 * expected_square(q, phi);
}

FixedPointResult moment_fixed_point_q(double sigma_w2, double sigma_b2, Nonlinearity phi) {
  if (!(sigma_w2 > 0.0)) throw ConfigError("sigma_w2 must be > 0");
  if (!(sigma_b2 >= 0.0)) throw ConfigError("sigma_b2 must be >= 0");
  constexpr double kDamping = 0.5;
  constexpr int kMaxIterations = 10000;
  constexpr double kTolerance = 1e-10;

  FixedPointResult result;
  double q = 1.0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    q = (1.0 - kDamping) * q + kDamping * variance_map(q, sigma_w2, sigma_b2, phi);
    result.iterations = it;
    if (!std::isfinite(q)) break;
    if (std::abs(q - variance_map(q, sigma_w2, sigma_b2, phi)) < kTolerance) {
      result.converged = true;
      break;
    }
  }
  result.q = q;
  return result;
}

}  // namespace nngp
