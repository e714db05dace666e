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

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "nngp/data_model.hpp"
#include "nngp/propagation.hpp"

namespace nngp {

/// Returns one draw from N(0, stddev^2). Lets tests force specific weights.
using GaussianSampler = std::function<double(double stddev)>;

/// Independent engine for draw `draw` of a run seeded with `seed`. Streams
/// depend only on (seed, draw), so draws can be computed in any order.
std::mt19937_64 draw_engine(std::uint64_t seed, std::uint64_t draw);

/// Activations of one random finite network on every input. Matrices have
/// one row per (sample, pixel), sample-major, and one column per channel.
struct ForwardPass {
  /// post[0] is the input y^0; post[l+1] = phi(pre[l]).
  std::vector<Eigen::MatrixXd> post;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<SpatialShape> shapes;
};

/// Draws weights w ~ N(0, v_beta sigma_w2 / n_in) and biases b ~ N(0,
/// sigma_b2) layer by layer and runs all inputs through the same network.
/// Locally connected networks draw separate weights and biases per output
/// pixel. Draw order per layer: weights (pixel, tap, in-channel,
/// out-channel), then biases.
ForwardPass forward_sample(const InputSet& x, const ArchConfig& cfg, int width,
                           const GaussianSampler& sampler, bool keep_all_layers = true);
ForwardPass forward_sample(const InputSet& x, const ArchConfig& cfg, int width,
                           std::mt19937_64& rng, bool keep_all_layers = true);

struct McKernelEstimate {
  TopKernel kernel;
  int width = 0;
  int draws = 0;
  int layer = 0;
  std::uint64_t seed = 0;
  Track track = Track::full;
};

/// (1 / (M n)) sum_m sum_c y_c(x; theta_m) y_c(x'; theta_m) at the top layer.
/// Per-draw contributions are merged with a fixed pairwise tree, so results
/// depend only on (x, cfg, width, draws, seed, track).
McKernelEstimate mc_estimate(const InputSet& x, const ArchConfig& cfg, int width, int draws,
                             std::uint64_t seed, Track track = Track::full);

/// ||est - ref||_F^2 / ||ref||_F^2.
double kernel_distance(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& reference);
double kernel_distance(const ClassKernel& estimate, const ClassKernel& reference);
double kernel_distance(const CovFull& estimate, const CovFull& reference);
double kernel_distance(const CovDiag& estimate, const CovDiag& reference);

/// Readout algebra applied to the empirical tensor. Unlike the analytic
/// readout, pool always contracts the estimated pixel-pixel covariances,
/// also for locally connected networks.
ClassKernel mc_readout(const McKernelEstimate& estimate, const ArchConfig& cfg);

}  // namespace nngp
