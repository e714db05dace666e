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
#include <span>
#include <string>
#include <vector>

#include "nngp/data_model.hpp"

namespace nngp {

/// Labelled images before preprocessing, stored sample, channel, row,
/// column. 1D data has rank 1 with `height` pixels and width 1.
struct RawDataset {
  std::vector<double> pixels;
  int samples = 0;
  int channels = 1;
  int height = 1;
  int width = 1;
  int spatial_rank = 2;
  std::vector<int> labels;
  int classes = 0;
  std::vector<std::string> ids;

  [[nodiscard]] SpatialShape shape() const;
  [[nodiscard]] std::size_t image_size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  [[nodiscard]] std::span<const double> image(int i) const;
  void validate() const;
  /// Samples in the given order.
  [[nodiscard]] RawDataset select(std::span<const int> indices) const;
  [[nodiscard]] std::vector<int> class_histogram() const;
};

inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

/// CIFAR-10 binary batches: per record one label byte then 3x32x32 bytes,
/// channel-major. Pixel values stay in [0, 255].
RawDataset load_cifar_binary(std::span<const std::filesystem::path> paths);

/// IDX image and label files (MNIST layout). Image element types: ubyte
/// (0x08), float32 (0x0D), float64 (0x0E). With spatial_rank 2 the image
/// dims are (N,H,W) or (N,C,H,W); with rank 1 they are (N,d) or (N,C,d).
RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    int spatial_rank = 2);
/// Writes float64 images and ubyte labels in the layout load_idx reads back.
void save_idx(const RawDataset& data, const std::filesystem::path& images,
              const std::filesystem::path& labels);

/// Per-image zero mean and unit variance over all channels and pixels
/// jointly. Throws ConfigError for constant images.
RawDataset normalize_images(const RawDataset& data);
/// normalize_images followed by conversion to an InputSet.
InputSet normalize(const RawDataset& data);
/// Conversion without normalization.
InputSet to_input_set(const RawDataset& data);

/// per_class samples of every class, drawn uniformly per seed, kept in
/// their original order.
RawDataset balanced_subset(const RawDataset& data, int per_class, std::uint64_t seed);

/// Disjoint balanced train and test subsets drawn from one dataset.
std::pair<RawDataset, RawDataset> balanced_split(const RawDataset& data, int train_per_class,
                                                 int test_per_class, std::uint64_t seed);

enum class Resample { bilinear, nearest };
Resample parse_resample(const std::string&);

/// Resizes every image with pixel centres mapped by
/// src = (dst + 0.5) * in / out - 0.5 (align-corners false). Nearest takes
/// the floor of that coordinate. 1D datasets resize along height only.
RawDataset downsample(const RawDataset& data, int target_h, int target_w, Resample method);

struct SynthSpec {
  enum class Kind { blobs, shift_family };
  Kind kind = Kind::blobs;
  int classes = 2;
  /// Blobs: samples per class. Shift family: number of shifts kept per base
  /// image (0 keeps every circular shift).
  int per_class = 4;
  int channels = 1;
  int height = 8;
  int width = 1;
  int spatial_rank = 1;
  /// Blobs: standard deviation of the per-sample noise around each centre.
  double noise = 0.5;
};

SynthSpec::Kind parse_synth_kind(const std::string&);

/// Gaussian blobs around random class centres, or every circular shift of
/// one random base image per class.
RawDataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

/// Circular shift of a single image by (dr, dc) pixels (dc ignored in 1D).
std::vector<double> circular_shift(std::span<const double> image, int channels, const SpatialShape& shape,
                                   int dr, int dc);

}  // namespace nngp
