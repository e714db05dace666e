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

#pragma once

#include <vector>

#include "nngp/data_model.hpp"

namespace nngp {

/// Second moments of a zero-mean bivariate Gaussian (u, u').
struct GaussianMoment2 {
  double var_x = 0.0;
  double cov = 0.0;
  double var_x2 = 0.0;

  /// Correlation clamped to [-1, 1]; 0 when either variance vanishes.
  [[nodiscard]] double correlation() const;
  [[nodiscard]] double angle() const;
};

/// E[phi(u) phi(u')] for (u, u') ~ N(0, moment), closed form.
double expected_product(const GaussianMoment2& moment, Nonlinearity phi);
/// E[phi(u)^2] for u ~ N(0, var).
double expected_square(double var, Nonlinearity phi);

/// One filter offset and its variance weight v_beta.
struct FilterTap {
  int dh = 0;
  int dw = 0;
  double weight = 0.0;
};

/// Filter offsets in ascending order (row-major over the hypercube for 2D)
/// with their normalized weights.
std::vector<FilterTap> filter_taps(const ArchConfig& cfg, int rank);

/// Spatial shape after the affine layer for the configured padding.
/// Throws SpatialCollapseError when valid padding leaves no pixels.
SpatialShape affine_output_shape(const SpatialShape& in, const ArchConfig& cfg);

/// For each output pixel and tap, the input pixel read by the
/// cross-correlation, or -1 when the read falls into zero padding.
struct StencilPlan {
  SpatialShape input;
  SpatialShape output;
  std::vector<double> weights;
  std::vector<int> source;  // output.size() x weights.size()

  StencilPlan(const SpatialShape& in, const ArchConfig& cfg);
  [[nodiscard]] int taps() const { return static_cast<int>(weights.size()); }
  [[nodiscard]] int src(int out_pixel, int tap) const { return source[out_pixel * taps() + tap]; }
};

CovFull apply_A(const CovFull& k, const ArchConfig& cfg);
CovFull apply_A_lcn(const CovFull& k, const ArchConfig& cfg);
CovDiag apply_A_diag(const CovDiag& k, const ArchConfig& cfg);

CovFull apply_C(const CovFull& k, Nonlinearity phi);
CovDiag apply_C(const CovDiag& k, Nonlinearity phi);

CovFull apply_B(const CovFull& k, const LinearPostOp& op);
/// Only for selection operators (stride, subsample_slice); avg_pool mixes
/// pixels and needs the full tensor.
CovDiag apply_B_diag(const CovDiag& k, const LinearPostOp& op);

/// The scalar map q -> sigma_b2 + sigma_w2 * E[phi(u)^2], u ~ N(0, q).
double variance_map(double q, double sigma_w2, double sigma_b2, Nonlinearity phi);

struct FixedPointResult {
  double q = 0.0;
  bool converged = false;
  int iterations = 0;
  [[nodiscard]] bool divergent() const { return !converged; }
};

/// Damped fixed-point iteration (damping 0.5, at most 10^4 steps, residual
/// below 1e-10) for the pre-activation variance q*.
FixedPointResult moment_fixed_point_q(double sigma_w2, double sigma_b2, Nonlinearity phi);

}  // namespace nngp
