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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nngp/data_model.hpp"
#include "nngp/kernel_ops.hpp"

namespace nngp {

enum class Track { full, diag };
std::string to_string(Track);

/// Top-layer kernel handed to a readout: the full tensor, its pixel
/// diagonal, or both.
struct TopKernel {
  std::optional<CovFull> full;
  std::optional<CovDiag> diag;

  [[nodiscard]] int samples() const;
  [[nodiscard]] SpatialShape shape() const;
  /// Pixel-diagonal view, derived from the full tensor when needed.
  [[nodiscard]] CovDiag diagonal() const;
};

struct LayerSnapshot {
  int layer = 0;
  SpatialShape shape;
  /// Pre-activation kernel (after the affine map and post-ops).
  std::optional<CovFull> pre_full;
  std::optional<CovDiag> pre_diag;
  /// Post-activation kernel K^{layer+1}.
  std::optional<CovFull> post_full;
  std::optional<CovDiag> post_diag;
};

struct PropagationOptions {
  /// Defaults to the cheapest track the configured readout allows.
  std::optional<Track> track;
  bool keep_snapshots = false;
};

/// Result of the depth-L recursion K^{l+1} = C(B(A(K^l))).
struct PropagationTrace {
  Track track = Track::diag;
  Connectivity connectivity = Connectivity::cnn;
  /// Spatial shape of K^0 ... K^L.
  std::vector<SpatialShape> shapes;
  TopKernel top;
  std::vector<LayerSnapshot> snapshots;
  /// Largest number of kernel entries held at once (memory accounting).
  std::size_t peak_entries = 0;
  double elapsed_seconds = 0.0;
};

/// Full track is needed for pooling, for projections that are not one-hot and
/// for average-pooling post-ops.
Track required_track(const ArchConfig& cfg);

/// Input layout seen by the network: fcn connectivity flattens every image
/// into channels over a single pixel.
InputSet network_input(const InputSet& x, const ArchConfig& cfg);

PropagationTrace propagate(const InputSet& x, const ArchConfig& cfg, PropagationOptions options = {});

// Readouts. The sigma values default to the hidden-layer ones unless the
// readout spec overrides them.
ClassKernel readout_vectorize(const TopKernel& top, double sigma_w2, double sigma_b2);
ClassKernel readout_project(const TopKernel& top, std::span<const double> h, double sigma_w2,
                            double sigma_b2);
ClassKernel readout_pool(const TopKernel& top, double sigma_w2, double sigma_b2);
ClassKernel readout_subsample(const TopKernel& top, int pixel, double sigma_w2, double sigma_b2);

ClassKernel readout_vectorize(const PropagationTrace& trace, const ArchConfig& cfg);
ClassKernel readout_pool(const PropagationTrace& trace, const ArchConfig& cfg);
ClassKernel readout_project(const PropagationTrace& trace, std::span<const double> h,
                            const ArchConfig& cfg);
ClassKernel readout_subsample(const PropagationTrace& trace, int pixel, const ArchConfig& cfg);

/// (K_vec - sigma_b2) / d + sigma_b2: the pooled kernel of a locally
/// connected network, d being the spatial size of the last layer.
ClassKernel lcn_pool_rescale(const ClassKernel& vectorized, double sigma_b2, int pixels);

/// Applies cfg.readout; lcn connectivity with pool uses lcn_pool_rescale.
ClassKernel readout(const TopKernel& top, const ArchConfig& cfg);
ClassKernel readout(const PropagationTrace& trace, const ArchConfig& cfg);

/// Memory-lean class kernel for diagonal-track readouts (vectorize,
/// subsample_pixel, one-hot projection). Per-sample self kernels are
/// precomputed once; each sample pair is then propagated with O(d) memory.
/// Entries equal the diag-track propagate + readout results bit for bit.
class PairwiseKernel {
 public:
  PairwiseKernel(const InputSet& x, const ArchConfig& cfg);

  [[nodiscard]] int samples() const { return samples_; }
  [[nodiscard]] double entry(int x, int x2) const;
  /// Kernel between the listed row and column samples.
  [[nodiscard]] Eigen::MatrixXd block(std::span<const int> rows, std::span<const int> cols) const;
  [[nodiscard]] ClassKernel full() const;
  [[nodiscard]] ReadoutTag tag() const;

 private:
  void propagate_pair(int x, int x2, std::vector<double>& pre, std::vector<double>& post) const;

  ArchConfig cfg_;
  InputSet input_;
  int samples_ = 0;
  std::vector<StencilPlan> plans_;
  std::vector<SpatialShape> pre_shapes_;
  std::vector<std::vector<std::vector<int>>> selections_;
  /// self_[x][l]: pixel-diagonal pre-activation variances of sample x at layer l.
  std::vector<std::vector<std::vector<double>>> self_;
};

// ---------------------------------------------------------------------------
// Large-depth behaviour of the fully connected covariance map.

enum class Phase { ordered, chaotic, critical_band, divergent };
std::string to_string(Phase);

struct PhasePoint {
  double sigma_w2 = 0.0;
  double sigma_b2 = 0.0;
  int depth = 0;
  double q_star = 0.0;
  /// NaN for divergent points.
  double c_star = 0.0;
  /// Per-step slope of log|c_l - c_{l-1}| near the end of the run; -inf
  /// when the correlation settled to round-off immediately.
  double rate = 0.0;
  Phase label = Phase::ordered;
  std::vector<double> q_trace;
  std::vector<double> c_trace;
};

inline constexpr double kOrderedThreshold = 1e-6;
inline constexpr double kCriticalRateThreshold = 1e-3;
inline constexpr double kInitialCorrelation = 0.5;

/// Iterates the single-pixel pre-activation map from unit variance and
/// correlation 0.5 for `max_depth` layers.
PhasePoint phase_point(double sigma_w2, double sigma_b2, Nonlinearity phi, int max_depth,
                       bool keep_traces = false);

std::vector<PhasePoint> phase_scan(std::span<const std::pair<double, double>> grid,
                                   Nonlinearity phi, int max_depth);

/// Inclusive uniform grid of (sigma_w2, sigma_b2) pairs, sigma_w2 major.
std::vector<std::pair<double, double>> uniform_grid(double w_min, double w_max, int w_steps,
                                                    double b_min, double b_max, int b_steps);

}  // namespace nngp
