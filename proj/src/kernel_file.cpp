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

#include "nngp/kernel_file.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include "nngp/errors.hpp"

namespace nngp {

namespace {

constexpr char kMagic[4] = {'N', 'N', 'G', 'K'};

template <class U>
void put_le(std::vector<unsigned char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : b_(b) {}

  template <class U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(b_.begin() + pos_, b_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw IoError("kernel file truncated");
  }
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

void check_shape(const KernelFile& f, const SpatialShape& shape) {
  if (static_cast<std::uint64_t>(shape.size()) != f.pixels) throw ShapeError("shape does not match stored pixel count");
}

SpatialShape resolve_shape(const KernelFile& f, std::optional<SpatialShape> shape) {
  const SpatialShape s = shape.value_or(SpatialShape::line(static_cast<int>(f.pixels)));
  check_shape(f, s);
  return s;
}

}  // namespace

std::string to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::class_kernel: return "class_kernel";
    case PayloadKind::cov_full: return "cov_full";
    case PayloadKind::cov_diag: return "cov_diag";
  }
  return "?";
}

PayloadKind parse_payload_kind(const std::string& s) {
  if (s == "class_kernel") return PayloadKind::class_kernel;
  if (s == "cov_full") return PayloadKind::cov_full;
  if (s == "cov_diag") return PayloadKind::cov_diag;
  throw ConfigError("unknown payload kind '" + s + "'");
}

std::size_t KernelFile::expected_payload() const {
  switch (kind) {
    case PayloadKind::class_kernel: return samples * samples;
    case PayloadKind::cov_full: return samples * pixels * samples * pixels;
    case PayloadKind::cov_diag: return samples * samples * pixels;
  }
  return 0;
}

std::optional<std::string> KernelFile::metadata_value(const std::string& key) const {
  std::istringstream in(metadata);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos && line.compare(0, eq, key) == 0 && eq == key.size()) return line.substr(eq + 1);
  }
  return std::nullopt;
}

std::uint64_t config_digest(const ArchConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

KernelFile make_kernel_file(const ClassKernel& k, int pixels, std::uint64_t digest, std::string metadata) {
  if (k.matrix.rows() != k.matrix.cols()) throw ShapeError("class kernel must be square");
  KernelFile f;
  f.kind = PayloadKind::class_kernel;
  f.samples = static_cast<std::uint64_t>(k.matrix.rows());
  f.pixels = static_cast<std::uint64_t>(pixels);
  f.tag = k.tag;
  f.digest = digest;
  f.metadata = std::move(metadata);
  f.payload.reserve(k.matrix.size());
  for (Eigen::Index i = 0; i < k.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.matrix.cols(); ++j) f.payload.push_back(k.matrix(i, j));
  }
  return f;
}

KernelFile make_kernel_file(const CovFull& k, std::uint64_t digest, std::string metadata) {
  KernelFile f;
  f.kind = PayloadKind::cov_full;
  f.samples = static_cast<std::uint64_t>(k.samples());
  f.pixels = static_cast<std::uint64_t>(k.pixels());
  f.digest = digest;
  f.metadata = std::move(metadata);
  const Eigen::MatrixXd m = flatten_cov(k);
  f.payload.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) f.payload.push_back(m(i, j));
  }
  return f;
}

KernelFile make_kernel_file(const CovDiag& k, std::uint64_t digest, std::string metadata) {
  KernelFile f;
  f.kind = PayloadKind::cov_diag;
  f.samples = static_cast<std::uint64_t>(k.samples());
  f.pixels = static_cast<std::uint64_t>(k.pixels());
  f.digest = digest;
  f.metadata = std::move(metadata);
  f.payload.assign(k.data().begin(), k.data().end());
  return f;
}

ClassKernel to_class_kernel(const KernelFile& f) {
  if (f.kind != PayloadKind::class_kernel) throw ConfigError("kernel file does not hold a class kernel");
  const auto n = static_cast<Eigen::Index>(f.samples);
  ClassKernel k;
  k.tag = f.tag;
  k.matrix.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k.matrix(i, j) = f.payload[i * n + j];
  }
  return k;
}

CovFull to_cov_full(const KernelFile& f, std::optional<SpatialShape> shape) {
  if (f.kind != PayloadKind::cov_full) throw ConfigError("kernel file does not hold a full tensor");
  const SpatialShape s = resolve_shape(f, shape);
  const auto n = static_cast<Eigen::Index>(f.samples * f.pixels);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = f.payload[i * n + j];
  }
  return unflatten_cov(m, static_cast<int>(f.samples), s);
}

CovDiag to_cov_diag(const KernelFile& f, std::optional<SpatialShape> shape) {
  if (f.kind != PayloadKind::cov_diag) throw ConfigError("kernel file does not hold a diagonal tensor");
  const SpatialShape s = resolve_shape(f, shape);
  return CovDiag(f.payload, static_cast<int>(f.samples), s);
}

std::vector<unsigned char> serialize(const KernelFile& f) {
  if (f.payload.size() != f.expected_payload()) throw ShapeError("payload size does not match header");
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  put_le<std::uint32_t>(out, kKernelFileVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.kind));
  put_le<std::uint64_t>(out, f.samples);
  put_le<std::uint64_t>(out, f.pixels);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.tag));
  put_le<std::uint64_t>(out, f.digest);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.metadata.size()));
  out.insert(out.end(), f.metadata.begin(), f.metadata.end());
  out.reserve(out.size() + 8 * f.payload.size());
  for (double v : f.payload) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

KernelFile deserialize(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != std::string(kMagic, 4)) throw IoError("not a kernel file (bad magic)");
  const auto version = r.le<std::uint32_t>();
  if (version != kKernelFileVersion) throw IoError("unsupported kernel file version " + std::to_string(version));
  KernelFile f;
  const auto kind = r.le<std::uint32_t>();
  if (kind > 2) throw IoError("unknown payload kind " + std::to_string(kind));
  f.kind = static_cast<PayloadKind>(kind);
  f.samples = r.le<std::uint64_t>();
  f.pixels = r.le<std::uint64_t>();
  const auto tag = r.le<std::uint32_t>();
  if (tag > static_cast<std::uint32_t>(ReadoutTag::lcn_pool)) throw IoError("unknown readout tag");
  f.tag = static_cast<ReadoutTag>(tag);
  f.digest = r.le<std::uint64_t>();
  f.metadata = r.bytes(r.le<std::uint32_t>());
  const std::size_t n = f.expected_payload();
  if (r.remaining() != 8 * n) throw IoError("kernel payload length does not match header");
  f.payload.resize(n);
  for (auto& v : f.payload) v = std::bit_cast<double>(r.le<std::uint64_t>());
  return f;
}

void save_kernel(const std::filesystem::path& path, const KernelFile& f) {
  const auto bytes = serialize(f);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

KernelFile load_kernel(const std::filesystem::path& path, std::optional<std::uint64_t> expected_digest, bool force) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  KernelFile f = deserialize(bytes);
  if (expected_digest && *expected_digest != f.digest && !force) {
    throw ConfigError(path.string() + ": architecture digest mismatch (use --force to load anyway)");
  }
  return f;
}

}  // namespace nngp
