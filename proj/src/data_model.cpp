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

#include "nngp/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nngp/errors.hpp"

namespace nngp {

namespace {

template <class Enum, std::size_t N>
Enum parse_enum(const std::string& text, const char* what,
                const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, value] : table) {
    if (text == name) return value;
  }
  throw ConfigError("unknown " + std::string(what) + " '" + text + "'");
}

constexpr std::pair<const char*, Nonlinearity> kNonlinearities[] = {
    {"relu", Nonlinearity::relu}, {"erf", Nonlinearity::erf}};
constexpr std::pair<const char*, Padding> kPaddings[] = {
    {"circular", Padding::circular}, {"valid", Padding::valid}, {"same", Padding::same}};
constexpr std::pair<const char*, Connectivity> kConnectivities[] = {
    {"cnn", Connectivity::cnn}, {"lcn", Connectivity::lcn}, {"fcn", Connectivity::fcn}};
constexpr std::pair<const char*, PostOpKind> kPostOps[] = {
    {"stride", PostOpKind::stride},
    {"avg_pool", PostOpKind::avg_pool},
    {"subsample_slice", PostOpKind::subsample_slice}};
constexpr std::pair<const char*, ReadoutKind> kReadouts[] = {
    {"vectorize", ReadoutKind::vectorize},
    {"pool", ReadoutKind::pool},
    {"subsample_pixel", ReadoutKind::subsample_pixel},
    {"projection", ReadoutKind::projection}};

template <class Enum, std::size_t N>
std::string name_of(Enum value, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

}  // namespace

std::string to_string(Nonlinearity v) { return name_of(v, kNonlinearities); }
std::string to_string(Padding v) { return name_of(v, kPaddings); }
std::string to_string(Connectivity v) { return name_of(v, kConnectivities); }
std::string to_string(PostOpKind v) { return name_of(v, kPostOps); }
std::string to_string(ReadoutKind v) { return name_of(v, kReadouts); }

std::string to_string(ReadoutTag v) {
  switch (v) {
    case ReadoutTag::none: return "none";
    case ReadoutTag::vectorize: return "vectorize";
    case ReadoutTag::pool: return "pool";
    case ReadoutTag::subsample_pixel: return "subsample_pixel";
    case ReadoutTag::projection: return "projection";
    case ReadoutTag::lcn_pool: return "lcn_pool";
  }
  return "?";
}

Nonlinearity parse_nonlinearity(const std::string& s) { return parse_enum(s, "nonlinearity", kNonlinearities); }
Padding parse_padding(const std::string& s) { return parse_enum(s, "padding", kPaddings); }
Connectivity parse_connectivity(const std::string& s) { return parse_enum(s, "connectivity", kConnectivities); }
PostOpKind parse_post_op_kind(const std::string& s) { return parse_enum(s, "post-op kind", kPostOps); }
ReadoutKind parse_readout_kind(const std::string& s) { return parse_enum(s, "readout kind", kReadouts); }

std::string to_string(const SpatialShape& s) {
  if (s.rank == 1) return std::to_string(s.height);
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

// ---------------------------------------------------------------------------
// LinearPostOp

void LinearPostOp::validate() const {
  if (stride < 1) throw ConfigError("post-op stride must be >= 1");
  if (window < 1) throw ConfigError("post-op window must be >= 1");
  if (offset < 0) throw ConfigError("post-op offset must be >= 0");
}

int LinearPostOp::axis_output_size(int d_in) const {
  validate();
  int out = 0;
  switch (kind) {
    case PostOpKind::stride: out = (d_in - 1) / stride + 1; break;
    case PostOpKind::avg_pool: out = d_in >= window ? (d_in - window) / stride + 1 : 0; break;
    case PostOpKind::subsample_slice: out = offset + window <= d_in ? window : 0; break;
  }
  if (out < 1) {
    throw ShapeError(to_string(kind) + " post-op does not fit spatial size " + std::to_string(d_in));
  }
  return out;
}

Eigen::MatrixXd LinearPostOp::axis_matrix(int d_in) const {
  const int d_out = axis_output_size(d_in);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d_out, d_in);
  for (int i = 0; i < d_out; ++i) {
    switch (kind) {
      case PostOpKind::stride: b(i, i * stride) = 1.0; break;
      case PostOpKind::avg_pool:
        for (int j = i * stride; j < i * stride + window; ++j) b(i, j) = 1.0 / window;
        break;
      case PostOpKind::subsample_slice: b(i, offset + i) = 1.0; break;
    }
  }
  return b;
}

SpatialShape LinearPostOp::output_shape(const SpatialShape& in) const {
  if (in.rank == 1) return SpatialShape::line(axis_output_size(in.height));
  return SpatialShape::grid(axis_output_size(in.height), axis_output_size(in.width));
}

Eigen::MatrixXd LinearPostOp::matrix(const SpatialShape& in) const {
  if (in.rank == 1) return axis_matrix(in.height);
  const Eigen::MatrixXd bh = axis_matrix(in.height);
  const Eigen::MatrixXd bw = axis_matrix(in.width);
  Eigen::MatrixXd b(bh.rows() * bw.rows(), bh.cols() * bw.cols());
  for (Eigen::Index i = 0; i < bh.rows(); ++i)
    for (Eigen::Index j = 0; j < bh.cols(); ++j)
      b.block(i * bw.rows(), j * bw.cols(), bw.rows(), bw.cols()) = bh(i, j) * bw;
  return b;
}

// ---------------------------------------------------------------------------
// ArchConfig

void ArchConfig::validate() const {
  if (depth < 0) throw ConfigError("depth must be >= 0");
  if (filter_half_width < 0) throw ConfigError("filter half-width must be >= 0");
  if (!(sigma_w2 > 0.0) || !std::isfinite(sigma_w2)) throw ConfigError("sigma_w2 must be > 0");
  if (!(sigma_b2 >= 0.0) || !std::isfinite(sigma_b2)) throw ConfigError("sigma_b2 must be >= 0");
  if (connectivity == Connectivity::fcn && filter_half_width != 0) {
    throw ConfigError("fcn connectivity requires filter_half_width = 0");
  }
  if (!v.empty()) {
    const std::size_t taps = 2 * static_cast<std::size_t>(filter_half_width) + 1;
    if (v.size() != taps && v.size() != taps * taps) {
      throw ConfigError("filter weights v must have 2k+1 or (2k+1)^2 entries");
    }
    for (double w : v) {
      if (!(w >= 0.0)) throw ConfigError("filter weights v must be nonnegative");
    }
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("filter weights v must sum to 1");
  }
  if (static_cast<int>(post_ops.size()) > depth) {
    throw ConfigError("post_ops lists more layers than depth");
  }
  for (const auto& layer : post_ops)
    for (const auto& op : layer) op.validate();
  if (readout.sigma_w2 && !(*readout.sigma_w2 > 0.0)) throw ConfigError("readout sigma_w2 must be > 0");
  if (readout.sigma_b2 && !(*readout.sigma_b2 >= 0.0)) throw ConfigError("readout sigma_b2 must be >= 0");
  for (double h : readout.h) {
    if (!std::isfinite(h)) throw ConfigError("projection vector must be finite");
  }
}

std::span<const LinearPostOp> ArchConfig::layer_post_ops(int layer) const {
  if (layer < 0 || layer >= static_cast<int>(post_ops.size())) return {};
  return post_ops[layer];
}

std::string ArchConfig::canonical() const {
  std::ostringstream out;
  out.precision(17);
  out << "depth=" << depth << ";k=" << filter_half_width << ";v=";
  for (double w : v) out << w << ',';
  out << ";sigma_w2=" << sigma_w2 << ";sigma_b2=" << sigma_b2
      << ";nonlinearity=" << to_string(nonlinearity) << ";padding=" << to_string(padding)
      << ";connectivity=" << to_string(connectivity) << ";post_ops=";
  for (std::size_t l = 0; l < post_ops.size(); ++l) {
    for (const auto& op : post_ops[l]) {
      out << l << ':' << to_string(op.kind) << ':' << op.stride << ':' << op.window << ':'
          << op.offset << ',';
    }
  }
  out << ";readout=" << to_string(readout.kind) << ":pixel=" << readout.pixel << ":h=";
  for (double h : readout.h) out << h << ',';
  out << ":sigma_w2=" << readout_sigma_w2() << ":sigma_b2=" << readout_sigma_b2();
  return out.str();
}

// ---------------------------------------------------------------------------
// InputSet

InputSet::InputSet(std::vector<double> values, int samples, int channels, SpatialShape shape,
                   std::vector<std::string> ids)
    : values_(std::move(values)), samples_(samples), channels_(channels), shape_(shape),
      ids_(std::move(ids)) {
  if (samples_ < 1) throw ShapeError("input set needs at least one sample");
  if (channels_ < 1 || shape_.size() < 1) throw ShapeError("input images must be non-empty");
  if (shape_.rank != 1 && shape_.rank != 2) throw ShapeError("spatial rank must be 1 or 2");
  if (shape_.rank == 1 && shape_.width != 1) throw ShapeError("1D shapes keep width 1");
  const std::size_t per_sample = static_cast<std::size_t>(channels_) * shape_.size();
  if (values_.size() != per_sample * samples_) {
    throw ShapeError("input values do not match samples x channels x pixels");
  }
  if (ids_.empty()) {
    ids_.reserve(samples_);
    for (int i = 0; i < samples_; ++i) ids_.push_back(std::to_string(i));
  }
  if (static_cast<int>(ids_.size()) != samples_) throw ShapeError("one id per sample required");
  for (int x = 0; x < samples_; ++x) {
    const auto s = sample(x);
    if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; })) {
      throw ConfigError("sample " + ids_[x] + " is the all-zeros image");
    }
  }
}

std::span<const double> InputSet::sample(int x) const {
  const std::size_t per_sample = static_cast<std::size_t>(channels_) * pixels();
  return std::span<const double>(values_).subspan(x * per_sample, per_sample);
}

InputSet InputSet::flattened_to_channels() const {
  return InputSet(values_, samples_, channels_ * pixels(), SpatialShape::line(1), ids_);
}

InputSet InputSet::select(std::span<const int> indices) const {
  std::vector<double> values;
  std::vector<std::string> ids;
  for (int i : indices) {
    if (i < 0 || i >= samples_) throw ShapeError("sample index out of range");
    const auto s = sample(i);
    values.insert(values.end(), s.begin(), s.end());
    ids.push_back(ids_[i]);
  }
  return InputSet(std::move(values), static_cast<int>(indices.size()), channels_, shape_,
                  std::move(ids));
}

// ---------------------------------------------------------------------------
// Covariance tensors

CovFull::CovFull(Eigen::MatrixXd matrix, int samples, SpatialShape shape, int layer)
    : m_(std::move(matrix)), samples_(samples), shape_(shape), layer_(layer) {
  const Eigen::Index n = static_cast<Eigen::Index>(samples_) * shape_.size();
  if (samples_ < 1 || m_.rows() != n || m_.cols() != n) {
    throw ShapeError("CovFull matrix must be |X|d x |X|d");
  }
}

CovDiag::CovDiag(std::vector<double> data, int samples, SpatialShape shape, int layer)
    : data_(std::move(data)), samples_(samples), shape_(shape), layer_(layer) {
  if (samples_ < 1 ||
      data_.size() != static_cast<std::size_t>(samples_) * samples_ * shape_.size()) {
    throw ShapeError("CovDiag data must hold |X|^2 d entries");
  }
}

Eigen::MatrixXd CovDiag::slice(int a) const {
  Eigen::MatrixXd s(samples_, samples_);
  for (int x = 0; x < samples_; ++x)
    for (int x2 = 0; x2 < samples_; ++x2) s(x, x2) = (*this)(x, x2, a);
  return s;
}

Eigen::MatrixXd flatten_cov(const CovFull& k) { return k.matrix(); }

CovFull unflatten_cov(const Eigen::MatrixXd& m, int samples, SpatialShape shape, int layer) {
  return CovFull(m, samples, shape, layer);
}

CovDiag diag_of(const CovFull& k) {
  const int n = k.samples();
  const int d = k.pixels();
  std::vector<double> data(static_cast<std::size_t>(n) * n * d);
  for (int x = 0; x < n; ++x)
    for (int x2 = 0; x2 < n; ++x2)
      for (int a = 0; a < d; ++a) data[(static_cast<std::size_t>(x) * n + x2) * d + a] = k(x, a, x2, a);
  return CovDiag(std::move(data), n, k.shape(), k.layer());
}

CovFull expand(const CovDiag& k) {
  const int n = k.samples();
  const int d = k.pixels();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * d, static_cast<Eigen::Index>(n) * d);
  for (int x = 0; x < n; ++x)
    for (int x2 = 0; x2 < n; ++x2)
      for (int a = 0; a < d; ++a) m(x * d + a, x2 * d + a) = k(x, x2, a);
  return CovFull(std::move(m), n, k.shape(), k.layer());
}

namespace {

// Shared by the full and diagonal routes so both produce identical bits.
double channel_mean_product(const InputSet& x, int s, int a, int s2, int a2) {
  double acc = 0.0;
  for (int ch = 0; ch < x.channels(); ++ch) acc += x.at(s, ch, a) * x.at(s2, ch, a2);
  return acc / x.channels();
}

}  // namespace

CovFull input_cov(const InputSet& x) {
  const int n = x.samples();
  const int d = x.pixels();
  const Eigen::Index rows = static_cast<Eigen::Index>(n) * d;
  Eigen::MatrixXd k(rows, rows);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < d; ++a)
      for (int s2 = 0; s2 < n; ++s2)
        for (int a2 = 0; a2 < d; ++a2) k(s * d + a, s2 * d + a2) = channel_mean_product(x, s, a, s2, a2);
  return CovFull(std::move(k), n, x.shape(), 0);
}

void input_cov_pair(const InputSet& x, int s, int s2, std::span<double> out) {
  const int d = x.pixels();
  if (static_cast<int>(out.size()) != d) throw ShapeError("input_cov_pair output must hold d values");
  for (int a = 0; a < d; ++a) out[a] = channel_mean_product(x, s, a, s2, a);
}

CovDiag input_cov_diag(const InputSet& x) {
  const int n = x.samples();
  const int d = x.pixels();
  std::vector<double> data(static_cast<std::size_t>(n) * n * d);
  for (int s = 0; s < n; ++s)
    for (int s2 = 0; s2 < n; ++s2)
      input_cov_pair(x, s, s2, std::span<double>(data).subspan((static_cast<std::size_t>(s) * n + s2) * d, d));
  return CovDiag(std::move(data), n, x.shape(), 0);
}

}  // namespace nngp
