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

#include "nngp/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nngp/errors.hpp"

namespace nngp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

void merge_tree(RunConfig& cfg, const boost::property_tree::ptree& tree) {
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must belong to a section");
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
  }
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> d = {
      {"arch.depth", "3"},
      {"arch.filter_half_width", "1"},
      {"arch.v", ""},
      {"arch.sigma_w2", "1"},
      {"arch.sigma_b2", "0"},
      {"arch.nonlinearity", "relu"},
      {"arch.padding", "circular"},
      {"arch.connectivity", "cnn"},
      {"arch.post_ops", ""},
      {"readout.kind", "vectorize"},
      {"readout.pixel", "0"},
      {"readout.h", ""},
      {"readout.sigma_w2", ""},
      {"readout.sigma_b2", ""},
      {"data.source", "synth"},
      {"data.cifar_paths", ""},
      {"data.idx_images", ""},
      {"data.idx_labels", ""},
      {"data.spatial_rank", "2"},
      {"data.train_per_class", "0"},
      {"data.test_per_class", "0"},
      {"data.subset_seed", "0"},
      {"data.downsample_h", "0"},
      {"data.downsample_w", "0"},
      {"data.resample", "bilinear"},
      {"data.normalize", "true"},
      {"data.order", "downsample_first"},
      {"synth.kind", "blobs"},
      {"synth.classes", "2"},
      {"synth.per_class", "4"},
      {"synth.channels", "1"},
      {"synth.height", "8"},
      {"synth.width", "1"},
      {"synth.spatial_rank", "1"},
      {"synth.noise", "0.5"},
      {"synth.seed", "0"},
      {"propagation.track", "auto"},
      {"output.path", "kernel.nngk"},
      {"output.payload", "class_kernel"},
      {"mc.width", "64"},
      {"mc.draws", "16"},
      {"mc.seed", "0"},
      {"regress.noise", "0"},
      {"regress.ladder", "true"},
      {"regress.ladder_start", "-10"},
      {"regress.ladder_stop", "5"},
      {"regress.ladder_scale", "false"},
      {"regress.labels", ""},
      {"phase.nonlinearity", "erf"},
      {"phase.w_min", "0.1"},
      {"phase.w_max", "5"},
      {"phase.w_steps", "50"},
      {"phase.b_min", "0"},
      {"phase.b_max", "2"},
      {"phase.b_steps", "50"},
      {"phase.depth", "3000"},
      {"run.threads", "0"},
  };
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  RunConfig c;
  c.merge_file(path);
  return c;
}

RunConfig RunConfig::from_string(const std::string& ini) {
  RunConfig c;
  c.merge_string(ini);
  return c;
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  merge_string(buf.str());
}

void RunConfig::merge_string(const std::string& ini) {
  boost::property_tree::ptree tree;
  std::istringstream in(ini);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  merge_tree(*this, tree);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = trim(value);
  set_.insert(key);
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  const std::string& v = get(key);
  if (v.empty()) return out;
  for (const auto& part : split(v, ',')) out.push_back(parse_number<double>(key, part));
  return out;
}

std::string RunConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << '[' << s << "]\n";
      section = s;
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
  return out.str();
}

ArchConfig RunConfig::arch() const {
  ArchConfig a;
  a.depth = get_int("arch.depth");
  a.filter_half_width = get_int("arch.filter_half_width");
  a.v = get_list("arch.v");
  a.sigma_w2 = get_double("arch.sigma_w2");
  a.sigma_b2 = get_double("arch.sigma_b2");
  a.nonlinearity = parse_nonlinearity(get("arch.nonlinearity"));
  a.padding = parse_padding(get("arch.padding"));
  a.connectivity = parse_connectivity(get("arch.connectivity"));
  a.post_ops = parse_post_ops(get("arch.post_ops"));
  a.readout.kind = parse_readout_kind(get("readout.kind"));
  a.readout.pixel = get_int("readout.pixel");
  a.readout.h = get_list("readout.h");
  if (!get("readout.sigma_w2").empty()) a.readout.sigma_w2 = get_double("readout.sigma_w2");
  if (!get("readout.sigma_b2").empty()) a.readout.sigma_b2 = get_double("readout.sigma_b2");
  a.validate();
  return a;
}

SynthSpec RunConfig::synth() const {
  SynthSpec s;
  s.kind = parse_synth_kind(get("synth.kind"));
  s.classes = get_int("synth.classes");
  s.per_class = get_int("synth.per_class");
  s.channels = get_int("synth.channels");
  s.height = get_int("synth.height");
  s.width = get_int("synth.width");
  s.spatial_rank = get_int("synth.spatial_rank");
  s.noise = get_double("synth.noise");
  return s;
}

LadderSpec RunConfig::ladder() const {
  LadderSpec l;
  l.start_exponent = get_int("regress.ladder_start");
  l.stop_exponent = get_int("regress.ladder_stop");
  l.scale_by_mean_diag = get_bool("regress.ladder_scale");
  return l;
}

std::vector<std::vector<LinearPostOp>> parse_post_ops(const std::string& text) {
  std::vector<std::vector<LinearPostOp>> ops;
  if (trim(text).empty()) return ops;
  for (const auto& item : split(text, ',')) {
    const auto f = split(item, ':');
    if (f.size() < 3) throw ConfigError("post-op '" + item + "' needs layer:kind:params");
    const int layer = parse_number<int>("arch.post_ops", f[0]);
    if (layer < 0) throw ConfigError("post-op layer must be >= 0");
    LinearPostOp op;
    op.kind = parse_post_op_kind(f[1]);
    switch (op.kind) {
      case PostOpKind::stride:
        if (f.size() != 3) throw ConfigError("stride post-op takes layer:stride:s");
        op.stride = parse_number<int>("arch.post_ops", f[2]);
        break;
      case PostOpKind::avg_pool:
        if (f.size() != 4) throw ConfigError("avg_pool post-op takes layer:avg_pool:window:stride");
        op.window = parse_number<int>("arch.post_ops", f[2]);
        op.stride = parse_number<int>("arch.post_ops", f[3]);
        break;
      case PostOpKind::subsample_slice:
        if (f.size() != 4) throw ConfigError("subsample_slice post-op takes layer:subsample_slice:offset:window");
        op.offset = parse_number<int>("arch.post_ops", f[2]);
        op.window = parse_number<int>("arch.post_ops", f[3]);
        break;
    }
    op.validate();
    if (ops.size() <= static_cast<std::size_t>(layer)) ops.resize(layer + 1);
    ops[layer].push_back(op);
  }
  return ops;
}

std::string format_post_ops(const std::vector<std::vector<LinearPostOp>>& ops) {
  std::ostringstream out;
  bool first = true;
  for (std::size_t l = 0; l < ops.size(); ++l) {
    for (const auto& op : ops[l]) {
      if (!first) out << ',';
      first = false;
      out << l << ':' << to_string(op.kind) << ':';
      switch (op.kind) {
        case PostOpKind::stride: out << op.stride; break;
        case PostOpKind::avg_pool: out << op.window << ':' << op.stride; break;
        case PostOpKind::subsample_slice: out << op.offset << ':' << op.window; break;
      }
    }
  }
  return out.str();
}

}  // namespace nngp
