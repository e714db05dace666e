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

#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "../support.hpp"
#include "nngp/dataset_io.hpp"
#include "nngp/errors.hpp"

using namespace nngp;
using test::TempDir;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

RawDataset labelled(std::vector<int> labels, int classes) {
  RawDataset ds;
  ds.samples = static_cast<int>(labels.size());
  ds.channels = 1;
  ds.height = 2;
  ds.width = 1;
  ds.spatial_rank = 1;
  ds.classes = classes;
  for (int i = 0; i < ds.samples; ++i) {
    ds.pixels.push_back(i);
    ds.pixels.push_back(-i - 1.0);
    ds.ids.push_back(std::to_string(i));
  }
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace

TEST_SUITE("dataset-io") {

TEST_CASE("a one-record CIFAR file") {
  TempDir dir("cifar1");
  std::vector<unsigned char> rec(kCifarRecordBytes);
  rec[0] = 7;
  for (std::size_t i = 1; i < rec.size(); ++i) rec[i] = static_cast<unsigned char>(i % 251);
  const fs::path p = dir.path / "one.bin";
  write_bytes(p, rec);
  const std::array<fs::path, 1> paths{p};
  const RawDataset ds = load_cifar_binary(paths);
  CHECK(ds.samples == 1);
  CHECK(ds.channels == 3);
  CHECK(ds.height == 32);
  CHECK(ds.width == 32);
  CHECK(ds.labels[0] == 7);
  CHECK(ds.classes == 10);
  CHECK(ds.pixels[0] == 1.0);
  CHECK(ds.pixels[1024] == double(1025 % 251));
  CHECK(ds.ids[0] == "one.bin:0");
}

TEST_CASE("truncated CIFAR files and bad labels are rejected") {
  TempDir dir("cifar2");
  const fs::path p = dir.path / "short.bin";
  write_bytes(p, std::vector<unsigned char>(kCifarRecordBytes + 5, 1));
  std::array<fs::path, 1> paths{p};
  CHECK_THROWS_AS(load_cifar_binary(paths), IoError);
  std::vector<unsigned char> rec(kCifarRecordBytes, 0);
  rec[0] = 10;
  write_bytes(p, rec);
  CHECK_THROWS_AS(load_cifar_binary(paths), IoError);
  paths[0] = dir.path / "missing.bin";
  CHECK_THROWS_AS(load_cifar_binary(paths), IoError);
}

TEST_CASE("a full-size CIFAR batch gives the byte-scan class histogram") {
  TempDir dir("cifar3");
  const int records = 10000;
  std::vector<unsigned char> bytes(kCifarRecordBytes * records);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> label(0, 9), pix(0, 255);
  for (int r = 0; r < records; ++r) {
    bytes[r * kCifarRecordBytes] = static_cast<unsigned char>(label(rng));
    for (std::size_t i = 1; i < kCifarRecordBytes; i += 97)
      bytes[r * kCifarRecordBytes + i] = static_cast<unsigned char>(pix(rng));
  }
  const fs::path p = dir.path / "data_batch_1.bin";
  write_bytes(p, bytes);
  std::vector<int> expected(10, 0);
  for (int r = 0; r < records; ++r) ++expected[bytes[r * kCifarRecordBytes]];
  const std::array<fs::path, 1> paths{p};
  const RawDataset ds = load_cifar_binary(paths);
  CHECK(ds.samples == records);
  CHECK(ds.class_histogram() == expected);
  CHECK(ds.pixels.size() == std::size_t(records) * 3072);
}

TEST_CASE("normalization") {
  SUBCASE("two pixels 0 and 2 map to -1 and 1") {
    RawDataset ds = labelled({0}, 1);
    ds.pixels = {0.0, 2.0};
    const RawDataset n = normalize_images(ds);
    CHECK(n.pixels[0] == doctest::Approx(-1.0));
    CHECK(n.pixels[1] == doctest::Approx(1.0));
  }
  SUBCASE("each image has zero mean and unit variance and the map is idempotent") {
    SynthSpec spec;
    spec.channels = 3;
    spec.height = 4;
    spec.width = 4;
    spec.spatial_rank = 2;
    const RawDataset n = normalize_images(synth_dataset(spec, 3));
    for (int i = 0; i < n.samples; ++i) {
      const auto img = n.image(i);
      const double mean = std::accumulate(img.begin(), img.end(), 0.0) / img.size();
      double var = 0.0;
      for (double v : img) var += (v - mean) * (v - mean);
      CHECK(mean == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
      CHECK(var / img.size() == doctest::Approx(1.0).epsilon(1e-12));
    }
    const RawDataset twice = normalize_images(n);
    for (std::size_t i = 0; i < n.pixels.size(); ++i) CHECK(twice.pixels[i] == doctest::Approx(n.pixels[i]));
  }
  SUBCASE("a constant image is rejected") {
    RawDataset ds = labelled({0}, 1);
    ds.pixels = {3.0, 3.0};
    CHECK_THROWS_AS(normalize_images(ds), ConfigError);
  }
  SUBCASE("normalize produces an InputSet with unit mean pixel variance") {
    const RawDataset ds = synth_dataset(SynthSpec{}, 4);
    const InputSet x = normalize(ds);
    const CovDiag k = input_cov_diag(x);
    for (int s = 0; s < x.samples(); ++s) {
      double avg = 0.0;
      for (int a = 0; a < x.pixels(); ++a) avg += k(s, s, a);
      CHECK(avg / x.pixels() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("balanced subsets") {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int j = 0; j < 5; ++j) labels.push_back((c + j) % 3);
  const RawDataset ds = labelled(labels, 3);
  SUBCASE("per-class counts and order preservation") {
    const RawDataset sub = balanced_subset(ds, 2, 11);
    CHECK(sub.samples == 6);
    CHECK(sub.class_histogram() == std::vector<int>{2, 2, 2});
    std::vector<int> positions;
    for (const auto& id : sub.ids) positions.push_back(std::stoi(id));
    CHECK(std::is_sorted(positions.begin(), positions.end()));
    for (std::size_t i = 0; i < positions.size(); ++i) CHECK(sub.labels[i] == ds.labels[positions[i]]);
  }
  SUBCASE("deterministic in the seed") {
    CHECK(balanced_subset(ds, 2, 11).ids == balanced_subset(ds, 2, 11).ids);
    bool any_differs = false;
    for (std::uint64_t s = 0; s < 8 && !any_differs; ++s)
      any_differs = balanced_subset(ds, 2, s).ids != balanced_subset(ds, 2, 11).ids;
    CHECK(any_differs);
  }
  SUBCASE("whole classes and too few samples") {
    CHECK(balanced_subset(ds, 5, 0).samples == 15);
    CHECK_THROWS_AS(balanced_subset(ds, 6, 0), ConfigError);
  }
  SUBCASE("train and test splits are disjoint") {
    const auto [train, test] = balanced_split(ds, 2, 3, 5);
    CHECK(train.class_histogram() == std::vector<int>{2, 2, 2});
    CHECK(test.class_histogram() == std::vector<int>{3, 3, 3});
    for (const auto& id : train.ids) CHECK(std::find(test.ids.begin(), test.ids.end(), id) == test.ids.end());
    CHECK_THROWS_AS(balanced_split(ds, 3, 3, 5), ConfigError);
  }
}

TEST_CASE("downsampling") {
  RawDataset ramp;
  ramp.samples = 1;
  ramp.channels = 1;
  ramp.height = 4;
  ramp.width = 4;
  ramp.classes = 1;
  ramp.labels = {0};
  ramp.ids = {"r"};
  for (int i = 0; i < 16; ++i) ramp.pixels.push_back(i);

  SUBCASE("same size is the identity") {
    for (auto m : {Resample::bilinear, Resample::nearest}) CHECK(downsample(ramp, 4, 4, m).pixels == ramp.pixels);
  }
  SUBCASE("bilinear halving of a 4x4 ramp") {
    const RawDataset d = downsample(ramp, 2, 2, Resample::bilinear);
    CHECK(d.pixels == std::vector<double>{2.5, 4.5, 10.5, 12.5});
  }
  SUBCASE("nearest halving takes the floor of the sample point") {
    const RawDataset d = downsample(ramp, 2, 2, Resample::nearest);
    CHECK(d.pixels == std::vector<double>{0.0, 2.0, 8.0, 10.0});
  }
  SUBCASE("constant images stay constant") {
    RawDataset c = ramp;
    std::fill(c.pixels.begin(), c.pixels.end(), 0.3);
    for (auto [h, w] : {std::pair{1, 1}, std::pair{3, 2}, std::pair{2, 4}}) {
      for (double v : downsample(c, h, w, Resample::bilinear).pixels) CHECK(v == doctest::Approx(0.3));
    }
  }
  SUBCASE("invalid targets") {
    CHECK_THROWS_AS(downsample(ramp, 0, 2, Resample::bilinear), ConfigError);
    CHECK_THROWS_AS(downsample(ramp, 5, 2, Resample::bilinear), ConfigError);
    CHECK(parse_resample("nearest") == Resample::nearest);
    CHECK_THROWS_AS(parse_resample("cubic"), ConfigError);
  }
}

TEST_CASE("synthetic data") {
  SUBCASE("blobs have the requested layout") {
    SynthSpec spec;
    spec.classes = 3;
    spec.per_class = 2;
    const RawDataset ds = synth_dataset(spec, 1);
    CHECK(ds.samples == 6);
    CHECK(ds.class_histogram() == std::vector<int>{2, 2, 2});
    CHECK(ds.shape() == SpatialShape::line(8));
    CHECK(synth_dataset(spec, 1).pixels == ds.pixels);
    CHECK(synth_dataset(spec, 2).pixels != ds.pixels);
  }
  SUBCASE("a shift family holds every circular shift of one base image") {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::shift_family;
    spec.classes = 2;
    spec.per_class = 0;
    spec.height = 5;
    const RawDataset ds = synth_dataset(spec, 3);
    CHECK(ds.samples == 10);
    CHECK(ds.ids[6] == "c1_s1");
    const auto base = ds.image(0);
    for (int s = 0; s < 5; ++s) {
      const auto img = ds.image(s);
      for (int p = 0; p < 5; ++p) CHECK(img[(p + s) % 5] == base[p]);
    }
  }
  SUBCASE("circular_shift on a grid") {
    const std::vector<double> img{0, 1, 2, 3, 4, 5};
    const auto out = circular_shift(img, 1, SpatialShape::grid(2, 3), 1, 1);
    CHECK(out == std::vector<double>{5, 3, 4, 2, 0, 1});
  }
  SUBCASE("invalid specs") {
    SynthSpec spec;
    spec.width = 2;
    CHECK_THROWS_AS(synth_dataset(spec, 0), ConfigError);
    CHECK_THROWS_AS(parse_synth_kind("spirals"), ConfigError);
  }
}

TEST_CASE("IDX round-trip") {
  TempDir dir("idx");
  SynthSpec spec;
  spec.channels = 2;
  spec.height = 3;
  spec.width = 4;
  spec.spatial_rank = 2;
  const RawDataset ds = synth_dataset(spec, 8);
  save_idx(ds, dir.path / "img.idx", dir.path / "lab.idx");
  const RawDataset back = load_idx(dir.path / "img.idx", dir.path / "lab.idx");
  CHECK(back.pixels == ds.pixels);
  CHECK(back.labels == ds.labels);
  CHECK(back.channels == 2);
  CHECK(back.height == 3);
  CHECK(back.width == 4);
  CHECK_THROWS_AS(load_idx(dir.path / "img.idx", dir.path / "nothing.idx"), IoError);
}

TEST_CASE("ubyte IDX images with a rank-3 header") {
  TempDir dir("idx8");
  std::vector<unsigned char> img{0, 0, 0x08, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
  for (int i = 0; i < 8; ++i) img.push_back(static_cast<unsigned char>(i * 10));
  const std::vector<unsigned char> lab{0, 0, 0x08, 1, 0, 0, 0, 2, 1, 0};
  write_bytes(dir.path / "i.idx", img);
  write_bytes(dir.path / "l.idx", lab);
  const RawDataset ds = load_idx(dir.path / "i.idx", dir.path / "l.idx");
  CHECK(ds.samples == 2);
  CHECK(ds.channels == 1);
  CHECK(ds.height == 2);
  CHECK(ds.width == 2);
  CHECK(ds.pixels[7] == 70.0);
  CHECK(ds.labels == std::vector<int>{1, 0});
  CHECK(ds.classes == 2);
}

}  // TEST_SUITE
