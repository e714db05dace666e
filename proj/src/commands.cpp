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

#include "nngp/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nngp/errors.hpp"
#include "nngp/gp_regress.hpp"
#include "nngp/mc_estimator.hpp"

namespace nngp {

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::filesystem::path> path_list(const std::string& text) {
  std::vector<std::filesystem::path> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.emplace_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

RawDataset load_source(const RunConfig& cfg) {
  const std::string& source = cfg.get("data.source");
  if (source == "synth") return synth_dataset(cfg.synth(), cfg.get_u64("synth.seed"));
  if (source == "idx") {
    if (cfg.get("data.idx_images").empty() || cfg.get("data.idx_labels").empty()) {
      throw ConfigError("data.idx_images and data.idx_labels are required for idx data");
    }
    return load_idx(cfg.get("data.idx_images"), cfg.get("data.idx_labels"), cfg.get_int("data.spatial_rank"));
  }
  if (source == "cifar") {
    const auto paths = path_list(cfg.get("data.cifar_paths"));
    if (paths.empty()) throw ConfigError("data.cifar_paths is required for cifar data");
    return load_cifar_binary(paths);
  }
  throw ConfigError("unknown data.source '" + source + "'");
}

RawDataset preprocess(RawDataset ds, const RunConfig& cfg) {
  const int h = cfg.get_int("data.downsample_h");
  const int w = cfg.get_int("data.downsample_w");
  const bool resize = h > 0 || w > 0;
  const bool norm = cfg.get_bool("data.normalize");
  const std::string& order = cfg.get("data.order");
  if (order != "downsample_first" && order != "normalize_first") {
    throw ConfigError("data.order must be downsample_first or normalize_first");
  }
  const auto do_resize = [&](const RawDataset& d) {
    return downsample(d, h > 0 ? h : d.height, w > 0 ? w : d.width, parse_resample(cfg.get("data.resample")));
  };
  if (order == "normalize_first") {
    if (norm) ds = normalize_images(ds);
    if (resize) ds = do_resize(ds);
  } else {
    if (resize) ds = do_resize(ds);
    if (norm) ds = normalize_images(ds);
  }
  return ds;
}

RawDataset concat(const RawDataset& a, const RawDataset& b) {
  RawDataset out = a;
  out.pixels.insert(out.pixels.end(), b.pixels.begin(), b.pixels.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  out.samples += b.samples;
  return out;
}

Track choose_track(const RunConfig& cfg, const ArchConfig& arch, PayloadKind payload) {
  const std::string& t = cfg.get("propagation.track");
  const Track needed = required_track(arch);
  if (t == "diag") {
    if (needed == Track::full) {
      throw ConfigError("readout " + to_string(arch.readout.kind) + " needs the full track, diag was requested");
    }
    if (payload == PayloadKind::cov_full) throw ConfigError("cov_full payload needs the full track");
    return Track::diag;
  }
  if (t == "full") return Track::full;
  if (t != "auto") throw ConfigError("propagation.track must be auto, full or diag");
  return payload == PayloadKind::cov_full ? Track::full : needed;
}

std::string shape_text(const SpatialShape& s) {
  return std::to_string(s.rank) + ":" + std::to_string(s.height) + ":" + std::to_string(s.width);
}

std::filesystem::path output_path(const RunConfig& cfg, const CommandContext& ctx) {
  return ctx.out.value_or(std::filesystem::path(cfg.get("output.path")));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_outputs(const std::filesystem::path& path, const KernelFile& file, const RunConfig& cfg,
                   const PreparedData& data) {
  save_kernel(path, file);
  write_text(config_sidecar(path), cfg.to_ini());
  LabelFile lf;
  lf.classes = data.classes;
  lf.n_train = data.n_train;
  lf.labels = data.labels;
  lf.ids = data.inputs.ids();
  save_labels(labels_sidecar(path), lf);
}

std::string base_metadata(const std::string& command, const PreparedData& data, Track track,
                          const SpatialShape& top) {
  std::ostringstream m;
  m << "command=" << command << '\n'
    << "samples=" << data.inputs.samples() << '\n'
    << "n_train=" << data.n_train << '\n'
    << "classes=" << data.classes << '\n'
    << "track=" << to_string(track) << '\n'
    << "shape=" << shape_text(top) << '\n';
  return m.str();
}

}  // namespace

std::optional<std::string> Report::value(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string Report::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries) out += k + "=" + v + "\n";
  return out;
}

PreparedData prepare_data(const RunConfig& cfg) {
  const RawDataset raw = load_source(cfg);
  const int train_pc = cfg.get_int("data.train_per_class");
  const int test_pc = cfg.get_int("data.test_per_class");
  const std::uint64_t seed = cfg.get_u64("data.subset_seed");
  RawDataset train, test;
  bool has_test = false;
  if (test_pc > 0) {
    if (train_pc < 1) throw ConfigError("data.test_per_class needs data.train_per_class");
    std::tie(train, test) = balanced_split(raw, train_pc, test_pc, seed);
    has_test = true;
  } else if (train_pc > 0) {
    train = balanced_subset(raw, train_pc, seed);
  } else {
    train = raw;
  }
  train = preprocess(std::move(train), cfg);
  if (has_test) test = preprocess(std::move(test), cfg);
  const RawDataset joint = has_test ? concat(train, test) : train;
  return PreparedData{to_input_set(joint), joint.labels, joint.classes, train.samples};
}

std::filesystem::path config_sidecar(const std::filesystem::path& kernel) {
  return std::filesystem::path(kernel.string() + ".config");
}

std::filesystem::path labels_sidecar(const std::filesystem::path& kernel) {
  return std::filesystem::path(kernel.string() + ".labels");
}

void save_labels(const std::filesystem::path& path, const LabelFile& labels) {
  std::ostringstream out;
  out << "classes=" << labels.classes << '\n' << "n_train=" << labels.n_train << '\n';
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    out << labels.labels[i] << ' ' << (i < labels.ids.size() ? labels.ids[i] : std::to_string(i)) << '\n';
  }
  write_text(path, out.str());
}

LabelFile load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels " + path.string());
  LabelFile lf;
  std::string line;
  bool have_classes = false, have_train = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("classes=", 0) == 0) {
      lf.classes = std::stoi(line.substr(8));
      have_classes = true;
    } else if (line.rfind("n_train=", 0) == 0) {
      lf.n_train = std::stoi(line.substr(8));
      have_train = true;
    } else {
      std::istringstream row(line);
      int label;
      std::string id;
      if (!(row >> label)) throw IoError(path.string() + ": malformed label line '" + line + "'");
      row >> id;
      lf.labels.push_back(label);
      lf.ids.push_back(id);
    }
  }
  if (!have_classes || !have_train) throw IoError(path.string() + ": missing classes or n_train header");
  return lf;
}

KernelFile cmd_kernel(const RunConfig& cfg, const CommandContext& ctx) {
  const ArchConfig arch = cfg.arch();
  const PreparedData data = prepare_data(cfg);
  const PayloadKind payload = parse_payload_kind(cfg.get("output.payload"));
  const Track track = choose_track(cfg, arch, payload);
  const std::uint64_t digest = config_digest(arch);

  KernelFile file;
  if (payload == PayloadKind::class_kernel && track == Track::diag) {
    // Pairwise route: same entries as the diag track without holding the
    // |X|^2 d tensor.
    const std::vector<int> first{0};
    const auto probe = propagate(data.inputs.select(first), arch, {.track = Track::diag});
    const SpatialShape top = probe.shapes.back();
    const PairwiseKernel pk(data.inputs, arch);
    file = make_kernel_file(pk.full(), top.size(), digest, base_metadata("kernel", data, track, top));
  } else {
    const auto trace = propagate(data.inputs, arch, {.track = track});
    const SpatialShape top = trace.top.shape();
    const std::string meta = base_metadata("kernel", data, track, top);
    switch (payload) {
      case PayloadKind::class_kernel: file = make_kernel_file(readout(trace, arch), top.size(), digest, meta); break;
      case PayloadKind::cov_full: file = make_kernel_file(*trace.top.full, digest, meta); break;
      case PayloadKind::cov_diag: file = make_kernel_file(trace.top.diagonal(), digest, meta); break;
    }
  }
  write_outputs(output_path(cfg, ctx), file, cfg, data);
  return file;
}

KernelFile cmd_mc(const RunConfig& cfg, const CommandContext& ctx) {
  const ArchConfig arch = cfg.arch();
  const PreparedData data = prepare_data(cfg);
  const PayloadKind payload = parse_payload_kind(cfg.get("output.payload"));
  Track track = choose_track(cfg, arch, payload);
  // The empirical pooled kernel contracts pixel pairs even for lcn.
  if (payload == PayloadKind::class_kernel && arch.readout.kind == ReadoutKind::pool) track = Track::full;
  const int width = cfg.get_int("mc.width");
  const int draws = cfg.get_int("mc.draws");
  const std::uint64_t seed = cfg.get_u64("mc.seed");
  const McKernelEstimate est = mc_estimate(data.inputs, arch, width, draws, seed, track);

  const SpatialShape top = est.kernel.shape();
  std::string meta = base_metadata("mc", data, track, top);
  meta += "width=" + std::to_string(width) + "\ndraws=" + std::to_string(draws) + "\nseed=" + std::to_string(seed) + "\n";
  const std::uint64_t digest = config_digest(arch);
  KernelFile file;
  switch (payload) {
    case PayloadKind::class_kernel: file = make_kernel_file(mc_readout(est, arch), top.size(), digest, meta); break;
    case PayloadKind::cov_full: file = make_kernel_file(*est.kernel.full, digest, meta); break;
    case PayloadKind::cov_diag: file = make_kernel_file(est.kernel.diagonal(), digest, meta); break;
  }
  write_outputs(output_path(cfg, ctx), file, cfg, data);
  return file;
}

Report cmd_regress(std::span<const std::filesystem::path> kernel_files, const RunConfig& cfg,
                   const CommandContext& ctx) {
  if (kernel_files.size() != 1) throw ConfigError("regress expects exactly one joint kernel file");
  const std::filesystem::path& path = kernel_files.front();

  // The kernel's own sidecar config, overlaid with explicitly set keys.
  RunConfig effective;
  if (std::filesystem::exists(config_sidecar(path))) effective = RunConfig::from_file(config_sidecar(path));
  for (const auto& [key, value] : RunConfig::defaults()) {
    (void)value;
    if (cfg.was_set(key)) effective.set(key, cfg.get(key));
  }
  const std::uint64_t digest = config_digest(effective.arch());
  const KernelFile file = load_kernel(path, digest, ctx.force);
  const ClassKernel k = to_class_kernel(file);

  const std::string labels_path = effective.get("regress.labels");
  const LabelFile lf = load_labels(labels_path.empty() ? labels_sidecar(path) : std::filesystem::path(labels_path));
  const auto n = static_cast<int>(file.samples);
  if (static_cast<int>(lf.labels.size()) != n) {
    throw ShapeError("kernel has " + std::to_string(n) + " samples but " + std::to_string(lf.labels.size()) +
                     " labels were given");
  }
  if (lf.n_train < 1 || lf.n_train > n) throw ShapeError("n_train outside [1, samples]");

  const int n_train = lf.n_train;
  const bool self_test = n_train == n;
  const int test_begin = self_test ? 0 : n_train;
  const int n_test = n - test_begin;

  RegressionProblem problem;
  problem.k_train = k.matrix.topLeftCorner(n_train, n_train);
  problem.k_cross = k.matrix.block(test_begin, 0, n_test, n_train);
  problem.k_test_diag = k.matrix.diagonal().segment(test_begin, n_test);
  const std::vector<int> train_labels(lf.labels.begin(), lf.labels.begin() + n_train);
  const std::vector<int> test_labels(lf.labels.begin() + test_begin, lf.labels.end());
  problem.targets = encode_labels(train_labels, lf.classes);
  problem.noise = effective.get_double("regress.noise");

  Report r;
  r.add("command", "regress");
  r.add("kernel", path.string());
  r.add("digest", hex(file.digest));
  r.add("readout", to_string(file.tag));
  r.add("n_train", std::to_string(n_train));
  r.add("n_test", std::to_string(n_test));
  r.add("test_set", self_test ? "train" : "held_out");
  r.add("classes", std::to_string(lf.classes));
  r.add("noise", fmt(problem.noise));

  PosteriorResult result;
  if (effective.get_bool("regress.ladder")) {
    const LadderSpec ladder = effective.ladder();
    r.add("ladder_start", std::to_string(ladder.start_exponent));
    r.add("ladder_stop", std::to_string(ladder.stop_exponent));
    r.add("ladder_scale", ladder.scale_by_mean_diag ? "true" : "false");
    result = solve_with_ladder(problem, ladder);
    for (int e = ladder.start_exponent; e < result.rung_exponent; ++e) r.add("rung." + std::to_string(e), "failed");
    r.add("rung." + std::to_string(result.rung_exponent), "ok");
    r.add("rung_exponent", std::to_string(result.rung_exponent));
  } else {
    r.add("ladder", "off");
    result = posterior(problem);
  }
  r.add("rungs_tried", std::to_string(result.rungs_tried));
  r.add("jitter", fmt(result.jitter));
  r.add("accuracy", fmt(accuracy(result, test_labels)));
  r.add("mean_variance", fmt(result.variance.size() ? result.variance.mean() : 0.0));
  r.add("min_variance", fmt(result.variance.size() ? result.variance.minCoeff() : 0.0));
  if (ctx.out) write_text(*ctx.out, r.to_text());
  return r;
}

std::vector<PhasePoint> cmd_phase(const RunConfig& cfg, const CommandContext& ctx, std::ostream& table) {
  const auto grid = uniform_grid(cfg.get_double("phase.w_min"), cfg.get_double("phase.w_max"),
                                 cfg.get_int("phase.w_steps"), cfg.get_double("phase.b_min"),
                                 cfg.get_double("phase.b_max"), cfg.get_int("phase.b_steps"));
  const auto points = phase_scan(grid, parse_nonlinearity(cfg.get("phase.nonlinearity")), cfg.get_int("phase.depth"));
  std::ostringstream out;
  out << std::setprecision(10) << "sigma_w2 sigma_b2 q_star c_star rate label\n";
  for (const auto& p : points) {
    out << p.sigma_w2 << ' ' << p.sigma_b2 << ' ' << p.q_star << ' ' << p.c_star << ' ' << p.rate << ' '
        << to_string(p.label) << '\n';
  }
  if (ctx.out) {
    write_text(*ctx.out, out.str());
  } else {
    table << out.str();
  }
  return points;
}

RawDataset cmd_datagen(const RunConfig& cfg, const CommandContext& ctx) {
  const RawDataset ds = synth_dataset(cfg.synth(), cfg.get_u64("synth.seed"));
  const std::string prefix = ctx.out ? ctx.out->string() : cfg.get("output.path");
  save_idx(ds, prefix + "-images.idx", prefix + "-labels.idx");
  return ds;
}

}  // namespace nngp
