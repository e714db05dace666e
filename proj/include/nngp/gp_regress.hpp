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

#include <span>
#include <vector>

#include <Eigen/Core>

namespace nngp {

/// Exact GP regression inputs. Targets hold one column per class.
struct RegressionProblem {
  Eigen::MatrixXd k_train;      // n_train x n_train
  Eigen::MatrixXd k_cross;      // n_test x n_train
  Eigen::VectorXd k_test_diag;  // n_test
  Eigen::MatrixXd targets;      // n_train x C
  double noise = 0.0;           // sigma_eps^2

  void validate() const;
};

struct PosteriorResult {
  Eigen::MatrixXd mean;      // n_test x C
  Eigen::VectorXd variance;  // n_test, shared by every class
  /// Diagonal term added on top of the noise (0 without a ladder).
  double jitter = 0.0;
  /// Exponent of the ladder rung that succeeded; unset without a ladder.
  int rung_exponent = 0;
  /// Rungs tried, including the successful one.
  int rungs_tried = 0;

  [[nodiscard]] std::vector<int> predicted_labels() const;
};

/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> argmax_labels(const Eigen::MatrixXd& mean);

/// C-dimensional targets: (C-1)/C at the true class, -1/C elsewhere.
Eigen::MatrixXd encode_labels(std::span<const int> labels, int classes);

/// Posterior mean and variance from one Cholesky factorization of
/// K_train + (noise + jitter) I. Throws NumericalError when the
/// factorization meets a non-positive pivot.
PosteriorResult posterior(const RegressionProblem& problem, double jitter = 0.0);

/// Regularization ladder: jitter 10^start, 10^(start+1), ..., 10^stop,
/// optionally scaled by the mean of the training-kernel diagonal.
struct LadderSpec {
  int start_exponent = -10;
  int stop_exponent = 5;
  bool scale_by_mean_diag = false;
};

/// First rung whose factorization succeeds. Throws LadderExhaustedError when
/// every rung fails.
PosteriorResult solve_with_ladder(const RegressionProblem& problem, const LadderSpec& ladder);

/// Fraction of rows whose argmax (ties to the lowest class) matches the label.
double accuracy(const PosteriorResult& result, std::span<const int> labels);
double accuracy(const Eigen::MatrixXd& mean, std::span<const int> labels);

}  // namespace nngp
