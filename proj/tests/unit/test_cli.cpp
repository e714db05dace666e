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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "../support.hpp"
#include "nngp/commands.hpp"
#include "nngp/errors.hpp"
#include "nngp/gp_regress.hpp"
#include "nngp/mc_estimator.hpp"

using namespace nngp;
using test::TempDir;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig fcn_config() {
  RunConfig cfg;
  cfg.set("arch.connectivity", "fcn");
  cfg.set("arch.filter_half_width", "0");
  cfg.set("arch.depth", "1");
  cfg.set("arch.nonlinearity", "erf");
  cfg.set("arch.sigma_w2", "1.7562");
  cfg.set("arch.sigma_b2", "0.1841");
  cfg.set("synth.classes", "3");
  cfg.set("synth.per_class", "1");
  return cfg;
}

RunConfig shift_config() {
  RunConfig cfg;
  cfg.set("arch.depth", "2");
  cfg.set("arch.nonlinearity", "relu");
  cfg.set("arch.sigma_w2", "2");
  cfg.set("arch.sigma_b2", "0.1");
  cfg.set("readout.kind", "pool");
  cfg.set("synth.kind", "shift_family");
  cfg.set("synth.classes", "2");
  cfg.set("synth.per_class", "0");
  cfg.set("synth.height", "8");
  cfg.set("synth.seed", "4");
  cfg.set("data.train_per_class", "4");
  cfg.set("data.test_per_class", "4");
  cfg.set("regress.ladder_scale", "true");
  return cfg;
}

double report_double(const Report& r, const std::string& key) {
  const auto v = r.value(key);
  REQUIRE(v.has_value());
  return std::stod(*v);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NNGP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("fcn kernel file round-trips the in-memory matrix bitwise") {
  TempDir dir("kernel");
  const RunConfig cfg = fcn_config();
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  const KernelFile written = cmd_kernel(cfg, ctx);
  CHECK(written.samples == 3);
  CHECK(written.kind == PayloadKind::class_kernel);

  const PreparedData data = prepare_data(cfg);
  const ArchConfig arch = cfg.arch();
  const ClassKernel direct = readout(propagate(data.inputs, arch), arch);
  const ClassKernel loaded = to_class_kernel(load_kernel(*ctx.out, config_digest(arch)));
  CHECK(loaded.matrix.rows() == 3);
  CHECK(loaded.matrix == direct.matrix);
  CHECK(fs::exists(config_sidecar(*ctx.out)));
  CHECK(load_labels(labels_sidecar(*ctx.out)).labels == data.labels);
}

TEST_CASE("the same config twice writes byte-identical files") {
  TempDir dir("determinism");
  const RunConfig cfg = shift_config();
  CommandContext a, b;
  a.out = dir.path / "a.nngk";
  b.out = dir.path / "b.nngk";
  cmd_kernel(cfg, a);
  cmd_kernel(cfg, b);
  CHECK(read_bytes(*a.out) == read_bytes(*b.out));
  CHECK(read_bytes(config_sidecar(*a.out)) == read_bytes(config_sidecar(*b.out)));
  cmd_mc(cfg, a);
  cmd_mc(cfg, b);
  CHECK(read_bytes(*a.out) == read_bytes(*b.out));
}

TEST_CASE("pool readout with a diagonal-only track is a configuration error") {
  TempDir dir("pooldiag");
  RunConfig cfg = shift_config();
  cfg.set("propagation.track", "diag");
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  CHECK_THROWS_AS(cmd_kernel(cfg, ctx), ConfigError);
}

TEST_CASE("every payload kind is written and reloaded") {
  TempDir dir("payloads");
  RunConfig cfg = shift_config();
  cfg.set("readout.kind", "vectorize");
  for (const std::string kind : {"class_kernel", "cov_full", "cov_diag"}) {
    cfg.set("output.payload", kind);
    CommandContext ctx;
    ctx.out = dir.path / (kind + ".nngk");
    const KernelFile f = cmd_kernel(cfg, ctx);
    CHECK(to_string(f.kind) == kind);
    const auto bytes = read_bytes(*ctx.out);
    CHECK(serialize(deserialize(bytes)) == bytes);
    CHECK(f.payload.size() == f.expected_payload());
  }
}

TEST_CASE("Monte Carlo command") {
  TempDir dir("mc");
  RunConfig cfg = fcn_config();
  CommandContext ctx;
  ctx.out = dir.path / "mc.nngk";
  SUBCASE("one unit and one draw loads and can be compared to the analytic kernel") {
    cfg.set("mc.width", "1");
    cfg.set("mc.draws", "1");
    const KernelFile f = cmd_mc(cfg, ctx);
    CHECK(f.metadata_value("width") == "1");
    CHECK(f.metadata_value("draws") == "1");
    CHECK(f.metadata_value("seed") == "0");
    const ClassKernel est = to_class_kernel(load_kernel(*ctx.out));
    CommandContext kctx;
    kctx.out = dir.path / "exact.nngk";
    const ClassKernel exact = to_class_kernel(cmd_kernel(cfg, kctx));
    CHECK(std::isfinite(kernel_distance(est, exact)));
  }
  SUBCASE("different seeds give different payloads of the same shape") {
    cfg.set("mc.seed", "1");
    const KernelFile a = cmd_mc(cfg, ctx);
    cfg.set("mc.seed", "2");
    const KernelFile b = cmd_mc(cfg, ctx);
    CHECK(a.payload.size() == b.payload.size());
    CHECK(a.payload != b.payload);
  }
  SUBCASE("zero draws are rejected") {
    cfg.set("mc.draws", "0");
    CHECK_THROWS_AS(cmd_mc(cfg, ctx), ConfigError);
  }
}

TEST_CASE("pooled kernel on a shift family classifies held-out shifts perfectly") {
  TempDir dir("shift");
  const RunConfig cfg = shift_config();
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  cmd_kernel(cfg, ctx);
  const std::vector<fs::path> files{*ctx.out};
  const Report r = cmd_regress(files, RunConfig{}, CommandContext{});
  CHECK(r.value("test_set") == "held_out");
  CHECK(r.value("n_train") == "8");
  CHECK(r.value("n_test") == "8");
  CHECK(report_double(r, "accuracy") == 1.0);
}

TEST_CASE("zero cross-kernel gives the majority-class rate") {
  TempDir dir("zerocross");
  RunConfig cfg = shift_config();
  cfg.set("readout.kind", "vectorize");
  cfg.set("synth.classes", "3");
  cfg.set("data.train_per_class", "2");
  cfg.set("data.test_per_class", "2");
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  cmd_kernel(cfg, ctx);
  KernelFile f = load_kernel(*ctx.out);
  const int n = static_cast<int>(f.samples);
  for (int i = 6; i < n; ++i)
    for (int j = 0; j < 6; ++j) f.payload[i * n + j] = f.payload[j * n + i] = 0.0;
  save_kernel(*ctx.out, f);
  const std::vector<fs::path> files{*ctx.out};
  const Report r = cmd_regress(files, RunConfig{}, CommandContext{});
  // Every test row ties at zero, so the lowest class wins: 2 of 6 correct.
  CHECK(report_double(r, "accuracy") == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("five-sample regression matches a direct posterior call") {
  TempDir dir("five");
  RunConfig cfg = fcn_config();
  cfg.set("synth.classes", "5");
  cfg.set("regress.noise", "0.01");
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  cmd_kernel(cfg, ctx);
  const std::vector<fs::path> files{*ctx.out};
  const Report r = cmd_regress(files, RunConfig{}, CommandContext{});
  CHECK(r.value("test_set") == "train");

  const ClassKernel k = to_class_kernel(load_kernel(*ctx.out));
  const LabelFile lf = load_labels(labels_sidecar(*ctx.out));
  RegressionProblem p;
  p.k_train = k.matrix;
  p.k_cross = k.matrix;
  p.k_test_diag = k.matrix.diagonal();
  p.targets = encode_labels(lf.labels, lf.classes);
  p.noise = 0.01;
  const PosteriorResult direct = solve_with_ladder(p, LadderSpec{});
  CHECK(report_double(r, "accuracy") == accuracy(direct, lf.labels));
  CHECK(report_double(r, "mean_variance") == direct.variance.mean());
  CHECK(report_double(r, "jitter") == direct.jitter);
}

TEST_CASE("report is written to the output path and reruns are identical") {
  TempDir dir("report");
  const RunConfig cfg = shift_config();
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  cmd_kernel(cfg, ctx);
  const std::vector<fs::path> files{*ctx.out};
  CommandContext rctx;
  rctx.out = dir.path / "report.txt";
  const Report r = cmd_regress(files, RunConfig{}, rctx);
  std::ifstream in(*rctx.out);
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() == r.to_text());
  CHECK(cmd_regress(files, RunConfig{}, CommandContext{}).to_text() == r.to_text());
}

TEST_CASE("label count mismatch is a shape error") {
  TempDir dir("labels");
  const RunConfig cfg = fcn_config();
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  cmd_kernel(cfg, ctx);
  LabelFile lf = load_labels(labels_sidecar(*ctx.out));
  lf.labels.pop_back();
  lf.ids.pop_back();
  lf.n_train = 2;
  save_labels(dir.path / "short.labels", lf);
  RunConfig override_cfg;
  override_cfg.set("regress.labels", (dir.path / "short.labels").string());
  const std::vector<fs::path> files{*ctx.out};
  CHECK_THROWS_AS(cmd_regress(files, override_cfg, CommandContext{}), ShapeError);
}

TEST_CASE("digest mismatch fails unless forced") {
  TempDir dir("digest");
  const RunConfig cfg = fcn_config();
  CommandContext ctx;
  ctx.out = dir.path / "k.nngk";
  const KernelFile f = cmd_kernel(cfg, ctx);
  ArchConfig other = cfg.arch();
  other.sigma_w2 = 2.0;
  CHECK_THROWS_AS(load_kernel(*ctx.out, config_digest(other)), ConfigError);
  CHECK(load_kernel(*ctx.out, config_digest(other), true).payload == f.payload);
  RunConfig changed;
  changed.set("arch.sigma_w2", "2");
  const std::vector<fs::path> files{*ctx.out};
  CHECK_THROWS_AS(cmd_regress(files, changed, CommandContext{}), ConfigError);
  CommandContext forced;
  forced.force = true;
  CHECK_NOTHROW(cmd_regress(files, changed, forced));
}

TEST_CASE("kernel file payloads round-trip bitwise") {
  std::mt19937_64 rng(3);
  const CovFull full = test::random_cov(2, SpatialShape::grid(2, 3), rng);
  const CovDiag diag = diag_of(full);
  ClassKernel ck{test::random_psd(4, rng), ReadoutTag::pool};
  const std::uint64_t digest = 0x1234abcdULL;
  const KernelFile kc = deserialize(serialize(make_kernel_file(ck, 6, digest, "a=b")));
  CHECK(to_class_kernel(kc).matrix == ck.matrix);
  CHECK(to_class_kernel(kc).tag == ReadoutTag::pool);
  CHECK(kc.metadata == "a=b");
  CHECK(kc.digest == digest);
  const KernelFile kf = deserialize(serialize(make_kernel_file(full, digest, "")));
  CHECK(to_cov_full(kf, SpatialShape::grid(2, 3)).matrix() == full.matrix());
  const KernelFile kd = deserialize(serialize(make_kernel_file(diag, digest, "")));
  CHECK(to_cov_diag(kd, SpatialShape::grid(2, 3)).data().size() == diag.data().size());
  CHECK(std::equal(diag.data().begin(), diag.data().end(), to_cov_diag(kd).data().begin()));

  auto bytes = serialize(make_kernel_file(ck, 6, digest, ""));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NNGK");
  bytes.pop_back();
  CHECK_THROWS_AS(deserialize(bytes), IoError);
  bytes = serialize(make_kernel_file(ck, 6, digest, ""));
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize(bytes), IoError);
}

TEST_CASE("run configuration") {
  SUBCASE("unknown keys and sections are rejected") {
    CHECK_THROWS_AS(RunConfig::from_string("[arch]\ndepht = 3\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_string("[nothing]\nx = 1\n"), ConfigError);
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.set("arch.width", "3"), ConfigError);
  }
  SUBCASE("file values and later overrides") {
    RunConfig cfg = RunConfig::from_string("[arch]\ndepth = 5\npost_ops = 0:stride:2, 1:avg_pool:2:2\n");
    CHECK(cfg.arch().depth == 5);
    CHECK(cfg.was_set("arch.depth"));
    CHECK_FALSE(cfg.was_set("arch.sigma_w2"));
    cfg.set("arch.depth", "7");
    CHECK(cfg.arch().depth == 7);
    CHECK(format_post_ops(cfg.arch().post_ops) == "0:stride:2,1:avg_pool:2:2");
    const RunConfig again = RunConfig::from_string(cfg.to_ini());
    CHECK(again.to_ini() == cfg.to_ini());
  }
  SUBCASE("malformed values") {
    RunConfig cfg;
    cfg.set("arch.depth", "three");
    CHECK_THROWS_AS((void)cfg.arch(), ConfigError);
    CHECK_THROWS_AS(parse_post_ops("0:stride"), ConfigError);
    cfg = RunConfig{};
    cfg.set("data.normalize", "maybe");
    CHECK_THROWS_AS((void)cfg.get_bool("data.normalize"), ConfigError);
  }
}

TEST_CASE("phase table") {
  TempDir dir("phase");
  SUBCASE("one cell at the unit fixed point of erf") {
    RunConfig cfg;
    cfg.set("phase.w_min", "1.7562");
    cfg.set("phase.w_max", "1.7562");
    cfg.set("phase.w_steps", "1");
    cfg.set("phase.b_min", "0.1841");
    cfg.set("phase.b_max", "0.1841");
    cfg.set("phase.b_steps", "1");
    std::ostringstream table;
    const auto points = cmd_phase(cfg, CommandContext{}, table);
    REQUIRE(points.size() == 1);
    CHECK(points[0].q_star == doctest::Approx(1.0).epsilon(1e-3));
    std::istringstream rows(table.str());
    std::string header, row;
    std::getline(rows, header);
    std::getline(rows, row);
    CHECK(header == "sigma_w2 sigma_b2 q_star c_star rate label");
    std::istringstream fields(row);
    double w, b, q;
    fields >> w >> b >> q;
    CHECK(q == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("the default grid starts above zero weight variance and is ordered at small weights") {
    RunConfig cfg;
    CommandContext ctx;
    ctx.out = dir.path / "phase.txt";
    std::ostringstream unused;
    const auto points = cmd_phase(cfg, ctx, unused);
    CHECK(unused.str().empty());
    REQUIRE(points.size() == 2500);
    double min_w = 1e9;
    for (const auto& p : points) min_w = std::min(min_w, p.sigma_w2);
    CHECK(min_w == doctest::Approx(0.1));
    // Rows are weight-major: cell (i, j) sits at i * 50 + j.
    for (int j = 1; j < 50; ++j) {
      CHECK(points[j].label == Phase::ordered);
      CHECK(points[49 * 50 + j].label != Phase::ordered);
    }
  }
}

TEST_CASE("dataset generation writes IDX files that load back") {
  TempDir dir("datagen");
  RunConfig cfg;
  cfg.set("synth.classes", "3");
  CommandContext ctx;
  ctx.out = dir.path / "toy";
  const RawDataset ds = cmd_datagen(cfg, ctx);
  const RawDataset back = load_idx(dir.path / "toy-images.idx", dir.path / "toy-labels.idx", 1);
  CHECK(back.pixels == ds.pixels);
  CHECK(back.labels == ds.labels);

  RunConfig from_idx;
  from_idx.set("data.source", "idx");
  from_idx.set("data.idx_images", (dir.path / "toy-images.idx").string());
  from_idx.set("data.idx_labels", (dir.path / "toy-labels.idx").string());
  from_idx.set("data.spatial_rank", "1");
  CHECK(prepare_data(from_idx).inputs.samples() == ds.samples);
}

TEST_CASE("command-line exit codes") {
  TempDir dir("exit");
  const std::string out = (dir.path / "k.nngk").string();
  CHECK(run_cli("kernel --out " + out + " --arch.depth=2 --synth.per_class 2") == 0);
  CHECK(fs::exists(out));
  CHECK(run_cli("regress " + out) == 0);
  CHECK(run_cli("kernel --arch.bogus=1 --out " + out) == 2);
  CHECK(run_cli("kernel --arch.depth=-1 --out " + out) == 2);
  CHECK(run_cli("mc --mc.draws=0 --out " + out) == 2);
  CHECK(run_cli("--threads 2 kernel --arch.padding=valid --arch.depth=9 --out " + out) == 3);
  CHECK(run_cli("regress " + (dir.path / "missing.nngk").string()) == 4);
  CHECK(run_cli("kernel --config " + (dir.path / "missing.ini").string()) == 4);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("regress --regress.ladder_start=3 --regress.ladder_stop=2 " + out) == 2);
}

}  // TEST_SUITE
