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
#include <vector>

#include <Eigen/Core>

namespace nngp {

enum class Nonlinearity { relu, erf };
enum class Padding { circular, valid, same };
enum class Connectivity { cnn, lcn, fcn };
enum class PostOpKind { stride, avg_pool, subsample_slice };
enum class ReadoutKind { vectorize, pool, subsample_pixel, projection };

/// Tag carried by a sample-by-sample kernel. `lcn_pool` marks the rescaled
/// vectorized kernel used for locally connected networks with pooling.
enum class ReadoutTag { none, vectorize, pool, subsample_pixel, projection, lcn_pool };

std::string to_string(Nonlinearity);
std::string to_string(Padding);
std::string to_string(Connectivity);
std::string to_string(PostOpKind);
std::string to_string(ReadoutKind);
std::string to_string(ReadoutTag);

Nonlinearity parse_nonlinearity(const std::string&);
Padding parse_padding(const std::string&);
Connectivity parse_connectivity(const std::string&);
PostOpKind parse_post_op_kind(const std::string&);
ReadoutKind parse_readout_kind(const std::string&);

/// Spatial extent of an image or activation. 1D data uses `height` as the
/// pixel count and keeps `width == 1`. Pixels are flattened row-major.
struct SpatialShape {
  int rank = 1;
  int height = 1;
  int width = 1;

  static SpatialShape line(int d) { return {1, d, 1}; }
  static SpatialShape grid(int h, int w) { return {2, h, w}; }

  [[nodiscard]] int size() const { return height * width; }
  [[nodiscard]] int index(int row, int col) const { return row * width + col; }
  bool operator==(const SpatialShape&) const = default;
};

std::string to_string(const SpatialShape&);

/// Deterministic linear map on pixel space applied to pre-activations.
///
/// stride:          B_ij = [j == i*s]
/// avg_pool:        B_ij = 1/ws for j in [i*s, i*s + ws)
/// subsample_slice: B_ij = [j == offset + i], keeping `window` pixels
///
/// For 2D shapes the same 1D map is applied along both axes (Kronecker
/// product of the per-axis matrices).
struct LinearPostOp {
  PostOpKind kind = PostOpKind::stride;
  int stride = 1;
  int window = 1;
  int offset = 0;

  [[nodiscard]] int axis_output_size(int d_in) const;
  [[nodiscard]] Eigen::MatrixXd axis_matrix(int d_in) const;
  [[nodiscard]] SpatialShape output_shape(const SpatialShape& in) const;
  [[nodiscard]] Eigen::MatrixXd matrix(const SpatialShape& in) const;
  /// True when every row of B holds a single 1, so the map closes on the
  /// pixel diagonal.
  [[nodiscard]] bool is_selection() const { return kind != PostOpKind::avg_pool; }
  void validate() const;
};

struct ReadoutSpec {
  ReadoutKind kind = ReadoutKind::vectorize;
  int pixel = 0;
  std::vector<double> h;
  std::optional<double> sigma_w2;
  std::optional<double> sigma_b2;
};

struct ArchConfig {
  int depth = 0;
  int filter_half_width = 1;
  /// Filter-variance weights. Empty means uniform. Either 2k+1 entries (1D,
  /// or outer product with itself in 2D) or (2k+1)^2 entries for 2D.
  std::vector<double> v;
  double sigma_w2 = 1.0;
  double sigma_b2 = 0.0;
  Nonlinearity nonlinearity = Nonlinearity::relu;
  Padding padding = Padding::circular;
  Connectivity connectivity = Connectivity::cnn;
  /// post_ops[l] is applied after the affine map of layer l, before the
  /// nonlinearity.
  std::vector<std::vector<LinearPostOp>> post_ops;
  ReadoutSpec readout;

  void validate() const;
  [[nodiscard]] double readout_sigma_w2() const { return readout.sigma_w2.value_or(sigma_w2); }
  [[nodiscard]] double readout_sigma_b2() const { return readout.sigma_b2.value_or(sigma_b2); }
  [[nodiscard]] std::span<const LinearPostOp> layer_post_ops(int layer) const;
  /// Canonical single-line text form; hashed into kernel file headers.
  [[nodiscard]] std::string canonical() const;
};

/// Images with identical channel count and spatial shape. Values are stored
/// sample-major, then channel, then pixel.
class InputSet {
 public:
  InputSet(std::vector<double> values, int samples, int channels, SpatialShape shape,
           std::vector<std::string> ids = {});

  [[nodiscard]] int samples() const { return samples_; }
  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] int pixels() const { return shape_.size(); }
  [[nodiscard]] const SpatialShape& shape() const { return shape_; }
  [[nodiscard]] const std::vector<std::string>& ids() const { return ids_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double at(int sample, int channel, int pixel) const {
    return values_[(static_cast<std::size_t>(sample) * channels_ + channel) * pixels() + pixel];
  }
  [[nodiscard]] std::span<const double> sample(int x) const;

  /// Same data viewed as channels*pixels channels over a single pixel
  /// (the input layout of a fully connected network).
  [[nodiscard]] InputSet flattened_to_channels() const;
  /// Subset of samples in the given order.
  [[nodiscard]] InputSet select(std::span<const int> indices) const;

 private:
  std::vector<double> values_;
  int samples_;
  int channels_;
  SpatialShape shape_;
  std::vector<std::string> ids_;
};

/// Full covariance tensor [K]_{a,a'}(x,x') stored as the |X|d x |X|d
/// matrix with row index x*d + a.
class CovFull {
 public:
  CovFull(Eigen::MatrixXd matrix, int samples, SpatialShape shape, int layer = 0);

  [[nodiscard]] int samples() const { return samples_; }
  [[nodiscard]] int pixels() const { return shape_.size(); }
  [[nodiscard]] const SpatialShape& shape() const { return shape_; }
  [[nodiscard]] int layer() const { return layer_; }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return m_; }
  [[nodiscard]] double operator()(int x, int a, int x2, int a2) const {
    const Eigen::Index d = pixels();
    return m_(x * d + a, x2 * d + a2);
  }
  [[nodiscard]] std::size_t entries() const { return static_cast<std::size_t>(m_.size()); }

 private:
  Eigen::MatrixXd m_;
  int samples_;
  SpatialShape shape_;
  int layer_;
};

/// Pixel-diagonal slice [K]_{a,a}(x,x'), stored as (x*|X| + x')*d + a.
class CovDiag {
 public:
  CovDiag(std::vector<double> data, int samples, SpatialShape shape, int layer = 0);

  [[nodiscard]] int samples() const { return samples_; }
  [[nodiscard]] int pixels() const { return shape_.size(); }
  [[nodiscard]] const SpatialShape& shape() const { return shape_; }
  [[nodiscard]] int layer() const { return layer_; }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] double operator()(int x, int x2, int a) const {
    return data_[(static_cast<std::size_t>(x) * samples_ + x2) * pixels() + a];
  }
  [[nodiscard]] Eigen::MatrixXd slice(int a) const;
  [[nodiscard]] std::size_t entries() const { return data_.size(); }

 private:
  std::vector<double> data_;
  int samples_;
  SpatialShape shape_;
  int layer_;
};

/// Sample-by-sample covariance produced by a readout.
struct ClassKernel {
  Eigen::MatrixXd matrix;
  ReadoutTag tag = ReadoutTag::none;
};

Eigen::MatrixXd flatten_cov(const CovFull& k);
CovFull unflatten_cov(const Eigen::MatrixXd& m, int samples, SpatialShape shape, int layer = 0);
CovDiag diag_of(const CovFull& k);
/// Zero-completion of the off-diagonal pixel entries.
CovFull expand(const CovDiag& k);
/// K^0 = (1/n0) sum_i x_{i,a} x'_{i,a'}.
CovFull input_cov(const InputSet& x);
/// Pixel-diagonal of input_cov without forming the full tensor.
CovDiag input_cov_diag(const InputSet& x);
/// [K^0]_{a,a}(s, s2) for every pixel a, written to `out` (size d).
void input_cov_pair(const InputSet& x, int s, int s2, std::span<double> out);

}  // namespace nngp
