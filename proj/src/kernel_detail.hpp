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

// Scalar building blocks shared by every propagation route. The full,
// diagonal and tiled paths all go through these so that they agree bit for
// bit.

#include <cmath>

#include "nngp/errors.hpp"
#include "nngp/kernel_ops.hpp"

namespace nngp::detail {

inline constexpr double kNegativeVarianceTolerance = 1e-12;

/// sigma_b2 + sigma_w2 * sum_t w_t K[src(a,t), src(a2,t)], ascending t.
template <class Read>
inline double affine_entry(const StencilPlan& plan, int a, int a2, double sigma_w2,
                           double sigma_b2, Read&& read) {
  double acc = 0.0;
  const int taps = plan.taps();
  for (int t = 0; t < taps; ++t) {
    const int s = plan.src(a, t);
    const int s2 = plan.src(a2, t);
    if (s < 0 || s2 < 0) continue;
    acc += plan.weights[t] * read(s, s2);
  }
  return sigma_b2 + sigma_w2 * acc;
}

inline double checked_variance(double v) {
  if (v < -kNegativeVarianceTolerance || std::isnan(v)) {
    throw NumericalError("negative diagonal moment " + std::to_string(v) +
                         " (upstream kernel is not PSD)");
  }
  return v < 0.0 ? 0.0 : v;
}

/// Nonlinearity map for one entry. `self` marks a variance entry (same
/// sample and pixel), which uses the single-variable formula.
inline double nonlinearity_entry(double var_x, double cov, double var_x2, bool self,
                                 Nonlinearity phi) {
  var_x = checked_variance(var_x);
  if (self) return expected_square(var_x, phi);
  var_x2 = checked_variance(var_x2);
  return expected_product({var_x, cov, var_x2}, phi);
}

// Readout reductions over one sample pair's top-layer pixel diagonal.

inline double vectorize_value(const double* k, int d, double sigma_w2, double sigma_b2) {
  double acc = 0.0;
  for (int a = 0; a < d; ++a) acc += k[a];
  return sigma_w2 * (acc / d) + sigma_b2;
}

inline double subsample_value(double k, double sigma_w2, double sigma_b2) {
  return sigma_w2 * k + sigma_b2;
}

/// Projection with a one-hot (or otherwise diagonal-only) weight vector.
inline double projection_diag_value(const double* k, const double* h, int d, double sigma_w2,
                                    double sigma_b2) {
  double acc = 0.0;
  for (int a = 0; a < d; ++a) {
    if (h[a] != 0.0) acc += h[a] * h[a] * k[a];
  }
  return sigma_w2 * acc + sigma_b2;
}

}  // namespace nngp::detail
