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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nngp/data_model.hpp"
#include "nngp/dataset_io.hpp"
#include "nngp/gp_regress.hpp"

namespace nngp {

/// INI-style run configuration. Every key lives in a section and is addressed
/// by its dotted name ("arch.depth"); unknown keys are rejected. Every key has
/// a fixed default, seeds included.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_string(const std::string& ini);

  /// Overlays the keys present in an INI document.
  void merge_file(const std::filesystem::path& path);
  void merge_string(const std::string& ini);
  /// Sets one dotted key. Throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);

  [[nodiscard]] const std::string& get(const std::string& key) const;
  [[nodiscard]] double get_double(const std::string& key) const;
  [[nodiscard]] int get_int(const std::string& key) const;
  [[nodiscard]] std::uint64_t get_u64(const std::string& key) const;
  [[nodiscard]] bool get_bool(const std::string& key) const;
  /// Comma-separated numbers; empty string gives an empty list.
  [[nodiscard]] std::vector<double> get_list(const std::string& key) const;
  [[nodiscard]] bool was_set(const std::string& key) const { return set_.count(key) != 0; }

  /// Every key, sections and keys sorted.
  [[nodiscard]] std::string to_ini() const;
  static const std::map<std::string, std::string>& defaults();

  [[nodiscard]] ArchConfig arch() const;
  [[nodiscard]] SynthSpec synth() const;
  [[nodiscard]] LadderSpec ladder() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> set_;
};

/// "layer:stride:s", "layer:avg_pool:window:stride" or
/// "layer:subsample_slice:offset:window", comma separated.
std::vector<std::vector<LinearPostOp>> parse_post_ops(const std::string& text);
std::string format_post_ops(const std::vector<std::vector<LinearPostOp>>& ops);

}  // namespace nngp
