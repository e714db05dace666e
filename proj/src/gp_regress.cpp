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

#include "nngp/gp_regress.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "nngp/errors.hpp"

namespace nngp {

void RegressionProblem::validate() const {
  const Eigen::Index n = k_train.rows();
  if (k_train.cols() != n) throw ShapeError("training kernel must be square");
  if (k_cross.cols() != n) throw ShapeError("cross kernel columns must match training samples");
  if (k_test_diag.size() != k_cross.rows()) throw ShapeError("test diagonal must match cross kernel rows");
  if (targets.rows() != n) throw ShapeError("targets must have one row per training sample");
  if (!(noise >= 0.0)) throw ConfigError("noise variance must be >= 0");
}

std::vector<int> PosteriorResult::predicted_labels() const { return argmax_labels(mean); }

std::vector<int> argmax_labels(const Eigen::MatrixXd& mean) {
  std::vector<int> labels(mean.rows());
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < mean.cols(); ++c) {
      if (mean(i, c) > mean(i, best)) best = c;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

Eigen::MatrixXd encode_labels(std::span<const int> labels, int classes) {
  if (classes < 1) throw ConfigError("class count must be >= 1");
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(labels.size()), classes,
                                                -1.0 / classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    }
    t(static_cast<Eigen::Index>(i), labels[i]) = static_cast<double>(classes - 1) / classes;
  }
  return t;
}

PosteriorResult posterior(const RegressionProblem& problem, double jitter) {
  problem.validate();
  Eigen::MatrixXd a = problem.k_train;
  a.diagonal().array() += problem.noise + jitter;

  // Eigen's LLT reports NumericalIssue on the first non-positive pivot.
  const Eigen::LLT<Eigen::MatrixXd> chol(a);
  if (chol.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization failed (non-positive pivot)");
  }

  PosteriorResult result;
  result.jitter = jitter;
  const Eigen::MatrixXd alpha = chol.solve(problem.targets);
  result.mean = problem.k_cross * alpha;
  // sigma^2_* = k(x*,x*) - |L^{-1} k(X,x*)|^2
  const Eigen::MatrixXd v = chol.matrixL().solve(problem.k_cross.transpose());
  result.variance = problem.k_test_diag - v.colwise().squaredNorm().transpose();
  return result;
}

PosteriorResult solve_with_ladder(const RegressionProblem& problem, const LadderSpec& ladder) {
  problem.validate();
  if (ladder.stop_exponent < ladder.start_exponent) {
    throw ConfigError("ladder stop exponent must not precede the start exponent");
  }
  const double scale = ladder.scale_by_mean_diag ? problem.k_train.diagonal().mean() : 1.0;
  int tried = 0;
  for (int e = ladder.start_exponent; e <= ladder.stop_exponent; ++e) {
    ++tried;
    try {
      PosteriorResult r = posterior(problem, std::pow(10.0, e) * scale);
      r.rung_exponent = e;
      r.rungs_tried = tried;
      return r;
    } catch (const NumericalError&) {
      // next rung
    }
  }
  throw LadderExhaustedError("Cholesky failed on every ladder rung 1e" +
                             std::to_string(ladder.start_exponent) + " .. 1e" +
                             std::to_string(ladder.stop_exponent));
}

double accuracy(const Eigen::MatrixXd& mean, std::span<const int> labels) {
  if (static_cast<std::size_t>(mean.rows()) != labels.size()) {
    throw ShapeError("prediction rows and labels differ in count");
  }
  if (labels.empty()) return 0.0;
  const auto predicted = argmax_labels(mean);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double accuracy(const PosteriorResult& result, std::span<const int> labels) {
  return accuracy(result.mean, labels);
}

}  // namespace nngp
