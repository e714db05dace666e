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

#include "nngp/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "nngp/errors.hpp"

namespace nngp {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

std::uint32_t read_be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

template <class T>
T read_be(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u = (u << 8) | p[i];
  return std::bit_cast<T>(u);
}

struct IdxArray {
  unsigned char type = 0;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

IdxArray parse_idx(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0) throw IoError("not an IDX file: " + path.string());
  IdxArray a;
  a.type = bytes[2];
  const int ndim = bytes[3];
  std::size_t elem = 0;
  switch (a.type) {
    case 0x08: elem = 1; break;
    case 0x0D: elem = 4; break;
    case 0x0E: elem = 8; break;
    default: throw IoError("unsupported IDX element type in " + path.string());
  }
  if (bytes.size() < 4 + 4 * static_cast<std::size_t>(ndim)) throw IoError("truncated IDX header: " + path.string());
  std::size_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    a.dims.push_back(read_be32(&bytes[4 + 4 * i]));
    count *= a.dims.back();
  }
  const std::size_t offset = 4 + 4 * static_cast<std::size_t>(ndim);
  if (bytes.size() != offset + count * elem) throw IoError("IDX payload size mismatch: " + path.string());
  a.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = &bytes[offset + i * elem];
    switch (a.type) {
      case 0x08: a.values[i] = *p; break;
      case 0x0D: a.values[i] = read_be<float>(p); break;
      default: a.values[i] = read_be<double>(p); break;
    }
  }
  return a;
}

std::vector<std::string> default_ids(int n) {
  std::vector<std::string> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = std::to_string(i);
  return ids;
}

// Source index pair and weight for one output coordinate.
struct Tap1 {
  int i0, i1;
  double w1;
};

Tap1 bilinear_tap(int dst, int in, int out) {
  const double scale = static_cast<double>(in) / out;
  double src = (dst + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  int i0 = static_cast<int>(std::floor(src));
  if (i0 > in - 1) i0 = in - 1;
  const int i1 = std::min(i0 + 1, in - 1);
  return {i0, i1, src - i0};
}

int nearest_tap(int dst, int in, int out) {
  const double scale = static_cast<double>(in) / out;
  const double src = (dst + 0.5) * scale - 0.5;
  return std::clamp(static_cast<int>(std::floor(src)), 0, in - 1);
}

}  // namespace

SpatialShape RawDataset::shape() const {
  return spatial_rank == 1 ? SpatialShape::line(height) : SpatialShape::grid(height, width);
}

std::span<const double> RawDataset::image(int i) const {
  return std::span<const double>(pixels).subspan(static_cast<std::size_t>(i) * image_size(), image_size());
}

void RawDataset::validate() const {
  if (samples < 0 || channels < 1 || height < 1 || width < 1) throw ShapeError("dataset dimensions must be positive");
  if (spatial_rank != 1 && spatial_rank != 2) throw ShapeError("spatial rank must be 1 or 2");
  if (spatial_rank == 1 && width != 1) throw ShapeError("1D datasets must have width 1");
  if (pixels.size() != static_cast<std::size_t>(samples) * image_size()) throw ShapeError("pixel buffer size mismatch");
  if (labels.size() != static_cast<std::size_t>(samples)) throw ShapeError("one label per sample required");
  if (!ids.empty() && ids.size() != static_cast<std::size_t>(samples)) throw ShapeError("one id per sample required");
  for (int l : labels) {
    if (l < 0 || l >= classes) throw ConfigError("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
  }
}

RawDataset RawDataset::select(std::span<const int> indices) const {
  RawDataset out = *this;
  out.samples = static_cast<int>(indices.size());
  out.pixels.clear();
  out.labels.clear();
  out.ids.clear();
  out.pixels.reserve(indices.size() * image_size());
  for (int i : indices) {
    if (i < 0 || i >= samples) throw ShapeError("sample index out of range");
    const auto img = image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(labels[i]);
    if (!ids.empty()) out.ids.push_back(ids[i]);
  }
  return out;
}

std::vector<int> RawDataset::class_histogram() const {
  std::vector<int> h(std::max(classes, 0), 0);
  for (int l : labels) ++h.at(l);
  return h;
}

RawDataset load_cifar_binary(std::span<const std::filesystem::path> paths) {
  RawDataset ds;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.spatial_rank = 2;
  ds.classes = 10;
  constexpr std::size_t img = kCifarRecordBytes - 1;
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
      throw IoError(path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                    std::to_string(kCifarRecordBytes));
    }
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    for (std::size_t r = 0; r < n; ++r) {
      const unsigned char* rec = &bytes[r * kCifarRecordBytes];
      if (rec[0] >= 10) throw IoError(path.string() + ": label byte " + std::to_string(rec[0]) + " >= 10");
      ds.labels.push_back(rec[0]);
      ds.ids.push_back(path.filename().string() + ":" + std::to_string(r));
      ds.pixels.insert(ds.pixels.end(), rec + 1, rec + 1 + img);
    }
  }
  ds.samples = static_cast<int>(ds.labels.size());
  return ds;
}

RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, int spatial_rank) {
  IdxArray im = parse_idx(images);
  IdxArray lb = parse_idx(labels);
  if (lb.type != 0x08 || lb.dims.size() != 1) throw IoError("IDX labels must be a 1D ubyte array");
  RawDataset ds;
  ds.spatial_rank = spatial_rank;
  const auto& d = im.dims;
  if (spatial_rank == 2 && d.size() == 3) {
    ds.height = static_cast<int>(d[1]);
    ds.width = static_cast<int>(d[2]);
  } else if (spatial_rank == 2 && d.size() == 4) {
    ds.channels = static_cast<int>(d[1]);
    ds.height = static_cast<int>(d[2]);
    ds.width = static_cast<int>(d[3]);
  } else if (spatial_rank == 1 && d.size() == 2) {
    ds.height = static_cast<int>(d[1]);
  } else if (spatial_rank == 1 && d.size() == 3) {
    ds.channels = static_cast<int>(d[1]);
    ds.height = static_cast<int>(d[2]);
  } else {
    throw IoError("IDX image rank " + std::to_string(d.size()) + " does not fit spatial rank " +
                  std::to_string(spatial_rank));
  }
  ds.samples = static_cast<int>(d[0]);
  if (lb.dims[0] != d[0]) throw IoError("IDX image and label counts differ");
  ds.pixels = std::move(im.values);
  int max_label = -1;
  for (double v : lb.values) {
    ds.labels.push_back(static_cast<int>(v));
    max_label = std::max(max_label, ds.labels.back());
  }
  ds.classes = max_label + 1;
  ds.ids = default_ids(ds.samples);
  ds.validate();
  return ds;
}

void save_idx(const RawDataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  data.validate();
  std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(data.samples)};
  if (data.channels != 1) dims.push_back(data.channels);
  dims.push_back(data.height);
  if (data.spatial_rank == 2) dims.push_back(data.width);
  {
    std::ofstream out(images, std::ios::binary);
    if (!out) throw IoError("cannot write " + images.string());
    const std::array<char, 4> magic{0, 0, 0x0E, static_cast<char>(dims.size())};
    out.write(magic.data(), 4);
    for (auto v : dims) write_be32(out, v);
    for (double v : data.pixels) {
      auto u = std::bit_cast<std::uint64_t>(v);
      std::array<char, 8> b;
      for (int i = 7; i >= 0; --i, u >>= 8) b[i] = static_cast<char>(u & 0xff);
      out.write(b.data(), 8);
    }
    if (!out) throw IoError("write failed: " + images.string());
  }
  std::ofstream out(labels, std::ios::binary);
  if (!out) throw IoError("cannot write " + labels.string());
  const std::array<char, 4> magic{0, 0, 0x08, 1};
  out.write(magic.data(), 4);
  write_be32(out, static_cast<std::uint32_t>(data.samples));
  for (int l : data.labels) {
    if (l > 255) throw IoError("label does not fit in a byte");
    out.put(static_cast<char>(l));
  }
  if (!out) throw IoError("write failed: " + labels.string());
}

RawDataset normalize_images(const RawDataset& data) {
  data.validate();
  RawDataset out = data;
  const std::size_t n = data.image_size();
  for (int i = 0; i < data.samples; ++i) {
    double* p = out.pixels.data() + static_cast<std::size_t>(i) * n;
    const double mean = std::accumulate(p, p + n, 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += (p[j] - mean) * (p[j] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) throw ConfigError("cannot normalize constant image " + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j) p[j] = (p[j] - mean) / sd;
  }
  return out;
}

InputSet to_input_set(const RawDataset& data) {
  data.validate();
  return InputSet(data.pixels, data.samples, data.channels, data.shape(),
                  data.ids.empty() ? default_ids(data.samples) : data.ids);
}

InputSet normalize(const RawDataset& data) { return to_input_set(normalize_images(data)); }

namespace {

std::vector<std::vector<int>> shuffled_class_members(const RawDataset& data, int needed, std::uint64_t seed) {
  data.validate();
  std::vector<std::vector<int>> members(data.classes);
  for (int i = 0; i < data.samples; ++i) members[data.labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  for (int c = 0; c < data.classes; ++c) {
    if (static_cast<int>(members[c].size()) < needed) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                        " samples, " + std::to_string(needed) + " requested");
    }
    // Partial Fisher-Yates with an explicit uniform draw so the selection
    // does not depend on the standard library's shuffle.
    auto& m = members[c];
    for (int j = 0; j < needed; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, m.size() - 1);
      std::swap(m[j], m[pick(rng)]);
    }
    m.resize(needed);
  }
  return members;
}

}  // namespace

RawDataset balanced_subset(const RawDataset& data, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("per_class must be >= 1");
  auto members = shuffled_class_members(data, per_class, seed);
  std::vector<int> chosen;
  for (auto& m : members) chosen.insert(chosen.end(), m.begin(), m.end());
  std::sort(chosen.begin(), chosen.end());
  return data.select(chosen);
}

std::pair<RawDataset, RawDataset> balanced_split(const RawDataset& data, int train_per_class, int test_per_class,
                                                 std::uint64_t seed) {
  if (train_per_class < 1 || test_per_class < 1) throw ConfigError("per-class counts must be >= 1");
  auto members = shuffled_class_members(data, train_per_class + test_per_class, seed);
  std::vector<int> train, test;
  for (auto& m : members) {
    train.insert(train.end(), m.begin(), m.begin() + train_per_class);
    test.insert(test.end(), m.begin() + train_per_class, m.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {data.select(train), data.select(test)};
}

Resample parse_resample(const std::string& s) {
  if (s == "bilinear") return Resample::bilinear;
  if (s == "nearest") return Resample::nearest;
  throw ConfigError("unknown resample method '" + s + "'");
}

RawDataset downsample(const RawDataset& data, int target_h, int target_w, Resample method) {
  data.validate();
  if (target_h < 1 || target_w < 1) throw ConfigError("downsample target must be at least 1x1");
  if (data.spatial_rank == 1 && target_w != 1) throw ConfigError("1D datasets downsample to width 1");
  if (target_h > data.height || target_w > data.width) throw ConfigError("downsample target exceeds source size");

  RawDataset out = data;
  out.height = target_h;
  out.width = target_w;
  out.pixels.assign(static_cast<std::size_t>(data.samples) * out.image_size(), 0.0);
  const int h = data.height, w = data.width;
  for (int i = 0; i < data.samples; ++i) {
    for (int c = 0; c < data.channels; ++c) {
      const double* src = data.pixels.data() + (static_cast<std::size_t>(i) * data.channels + c) * h * w;
      double* dst = out.pixels.data() + (static_cast<std::size_t>(i) * data.channels + c) * target_h * target_w;
      for (int r = 0; r < target_h; ++r) {
        for (int col = 0; col < target_w; ++col) {
          double v;
          if (method == Resample::nearest) {
            v = src[nearest_tap(r, h, target_h) * w + nearest_tap(col, w, target_w)];
          } else {
            const Tap1 tr = bilinear_tap(r, h, target_h);
            const Tap1 tc = bilinear_tap(col, w, target_w);
            const double top = (1.0 - tc.w1) * src[tr.i0 * w + tc.i0] + tc.w1 * src[tr.i0 * w + tc.i1];
            const double bot = (1.0 - tc.w1) * src[tr.i1 * w + tc.i0] + tc.w1 * src[tr.i1 * w + tc.i1];
            v = (1.0 - tr.w1) * top + tr.w1 * bot;
          }
          dst[r * target_w + col] = v;
        }
      }
    }
  }
  return out;
}

SynthSpec::Kind parse_synth_kind(const std::string& s) {
  if (s == "blobs") return SynthSpec::Kind::blobs;
  if (s == "shift_family") return SynthSpec::Kind::shift_family;
  throw ConfigError("unknown synthetic dataset kind '" + s + "'");
}

std::vector<double> circular_shift(std::span<const double> image, int channels, const SpatialShape& shape, int dr,
                                   int dc) {
  const int h = shape.height, w = shape.width;
  std::vector<double> out(image.size());
  for (int c = 0; c < channels; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        const int sr = ((r - dr) % h + h) % h;
        const int sc = shape.rank == 1 ? col : ((col - dc) % w + w) % w;
        out[(static_cast<std::size_t>(c) * h + r) * w + col] = image[(static_cast<std::size_t>(c) * h + sr) * w + sc];
      }
    }
  }
  return out;
}

RawDataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.classes < 1 || spec.channels < 1 || spec.height < 1 || spec.width < 1 || spec.per_class < 0) {
    throw ConfigError("invalid synthetic dataset spec");
  }
  if (spec.spatial_rank == 1 && spec.width != 1) throw ConfigError("1D synthetic data must have width 1");
  RawDataset ds;
  ds.channels = spec.channels;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.spatial_rank = spec.spatial_rank;
  ds.classes = spec.classes;
  const std::size_t n = ds.image_size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (spec.kind == SynthSpec::Kind::blobs) {
    if (spec.per_class < 1) throw ConfigError("blobs need per_class >= 1");
    for (int c = 0; c < spec.classes; ++c) {
      std::vector<double> centre(n);
      for (auto& v : centre) v = gauss(rng);
      for (int j = 0; j < spec.per_class; ++j) {
        for (std::size_t p = 0; p < n; ++p) ds.pixels.push_back(centre[p] + spec.noise * gauss(rng));
        ds.labels.push_back(c);
        ds.ids.push_back("c" + std::to_string(c) + "_" + std::to_string(j));
      }
    }
  } else {
    const SpatialShape shape = ds.shape();
    const int total = shape.size();
    const int keep = spec.per_class == 0 ? total : std::min(spec.per_class, total);
    for (int c = 0; c < spec.classes; ++c) {
      std::vector<double> base(n);
      for (auto& v : base) v = gauss(rng);
      for (int s = 0; s < keep; ++s) {
        const int dr = s / shape.width, dc = s % shape.width;
        const auto img = circular_shift(base, ds.channels, shape, dr, dc);
        ds.pixels.insert(ds.pixels.end(), img.begin(), img.end());
        ds.labels.push_back(c);
        ds.ids.push_back("c" + std::to_string(c) + "_s" + std::to_string(s));
      }
    }
  }
  ds.samples = static_cast<int>(ds.labels.size());
  return ds;
}

}  // namespace nngp
