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

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nngp/dataset_io.hpp"
#include "nngp/kernel_file.hpp"
#include "nngp/propagation.hpp"
#include "nngp/run_config.hpp"

namespace nngp {

struct CommandContext {
  /// Overrides output.path.
  std::optional<std::filesystem::path> out;
  /// Load kernels whose architecture digest does not match.
  bool force = false;
};

/// Ordered key=value report.
struct Report {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  [[nodiscard]] std::optional<std::string> value(const std::string& key) const;
  [[nodiscard]] std::string to_text() const;
};

/// Training samples first, then test samples.
struct PreparedData {
  InputSet inputs;
  std::vector<int> labels;
  int classes = 0;
  int n_train = 0;
};

/// Loads data.source, draws the balanced subsets and applies downsampling and
/// normalization in the configured order.
PreparedData prepare_data(const RunConfig& cfg);

/// Sidecar with one "label id" line per kernel row.
struct LabelFile {
  int classes = 0;
  int n_train = 0;
  std::vector<int> labels;
  std::vector<std::string> ids;
};
void save_labels(const std::filesystem::path& path, const LabelFile& labels);
LabelFile load_labels(const std::filesystem::path& path);

std::filesystem::path config_sidecar(const std::filesystem::path& kernel);
std::filesystem::path labels_sidecar(const std::filesystem::path& kernel);

/// Analytic kernel of the prepared data, written with .config and .labels
/// sidecars. Returns what was written.
KernelFile cmd_kernel(const RunConfig& cfg, const CommandContext& ctx);
/// Monte Carlo estimate of the same kernel from mc.draws networks of width
/// mc.width seeded with mc.seed.
KernelFile cmd_mc(const RunConfig& cfg, const CommandContext& ctx);
/// GP classification from one joint kernel file: the first n_train rows are
/// the training set, the rest the test set (the training set itself when
/// there are no test rows).
Report cmd_regress(std::span<const std::filesystem::path> kernel_files, const RunConfig& cfg,
                   const CommandContext& ctx);
/// Phase table over the configured grid, written to ctx.out or `table`.
std::vector<PhasePoint> cmd_phase(const RunConfig& cfg, const CommandContext& ctx, std::ostream& table);
/// Synthetic dataset written as <prefix>-images.idx and <prefix>-labels.idx.
RawDataset cmd_datagen(const RunConfig& cfg, const CommandContext& ctx);

}  // namespace nngp
