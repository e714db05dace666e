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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nngp/data_model.hpp"

namespace nngp {

/// Binary kernel container, little-endian throughout:
///
///   "NNGK" | u32 version | u32 kind | u64 samples | u64 pixels |
///   u32 readout tag | u64 config digest | u32 metadata length | metadata |
///   f64 payload
///
/// Payload order: class kernels row-major |X| x |X|; full tensors row-major
/// in flatten_cov order; diagonal tensors in CovDiag storage order.
enum class PayloadKind : std::uint32_t { class_kernel = 0, cov_full = 1, cov_diag = 2 };
std::string to_string(PayloadKind);
PayloadKind parse_payload_kind(const std::string&);

inline constexpr std::uint32_t kKernelFileVersion = 1;

struct KernelFile {
  PayloadKind kind = PayloadKind::class_kernel;
  std::uint64_t samples = 0;
  std::uint64_t pixels = 1;
  ReadoutTag tag = ReadoutTag::none;
  std::uint64_t digest = 0;
  /// Free-form key=value lines.
  std::string metadata;
  std::vector<double> payload;

  [[nodiscard]] std::size_t expected_payload() const;
  [[nodiscard]] std::optional<std::string> metadata_value(const std::string& key) const;
};

/// 64-bit FNV-1a over ArchConfig::canonical().
std::uint64_t config_digest(const ArchConfig& cfg);

KernelFile make_kernel_file(const ClassKernel& k, int pixels, std::uint64_t digest, std::string metadata);
KernelFile make_kernel_file(const CovFull& k, std::uint64_t digest, std::string metadata);
KernelFile make_kernel_file(const CovDiag& k, std::uint64_t digest, std::string metadata);

ClassKernel to_class_kernel(const KernelFile& f);
/// The file stores only the pixel count; `shape` restores the layout and must
/// match it. Without a shape the tensor is treated as 1D.
CovFull to_cov_full(const KernelFile& f, std::optional<SpatialShape> shape = std::nullopt);
CovDiag to_cov_diag(const KernelFile& f, std::optional<SpatialShape> shape = std::nullopt);

std::vector<unsigned char> serialize(const KernelFile& f);
KernelFile deserialize(const std::vector<unsigned char>& bytes);

void save_kernel(const std::filesystem::path& path, const KernelFile& f);
/// Throws IoError on malformed files. With an expected digest, a mismatch is
/// a ConfigError unless `force` is set.
KernelFile load_kernel(const std::filesystem::path& path, std::optional<std::uint64_t> expected_digest = std::nullopt,
                       bool force = false);

}  // namespace nngp
