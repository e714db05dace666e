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

#include <cmath>
#include <filesystem>
#include <string>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "nngp/data_model.hpp"

namespace nngp::test {

inline InputSet random_inputs(int samples, int channels, SpatialShape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(samples) * channels * shape.size());
  for (auto& x : v) x = g(rng);
  return InputSet(std::move(v), samples, channels, shape);
}

inline Eigen::MatrixXd random_psd(int n, std::mt19937_64& rng, int rank = -1) {
  std::normal_distribution<double> g(0.0, 1.0);
  const int r = rank < 0 ? n : rank;
  Eigen::MatrixXd f(n, r);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < r; ++j) f(i, j) = g(rng);
  Eigen::MatrixXd k = f * f.transpose() / r;
  return 0.5 * (k + k.transpose());
}

inline CovFull random_cov(int samples, SpatialShape shape, std::mt19937_64& rng, int rank = -1) {
  return CovFull(random_psd(samples * shape.size(), rng, rank), samples, shape);
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// min eigenvalue >= -1e-8 * trace.
inline bool psd_within_tolerance(const Eigen::MatrixXd& m) {
  return min_eigenvalue(m) >= -1e-8 * std::abs(m.trace());
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("nngp-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline ArchConfig make_cnn(int depth, Nonlinearity phi, Padding padding = Padding::circular,
                           double sigma_w2 = 1.5, double sigma_b2 = 0.1) {
  ArchConfig cfg;
  cfg.depth = depth;
  cfg.filter_half_width = 1;
  cfg.nonlinearity = phi;
  cfg.padding = padding;
  cfg.sigma_w2 = sigma_w2;
  cfg.sigma_b2 = sigma_b2;
  return cfg;
}

}  // namespace nngp::test
