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

// Command-line front end: kernel, mc, regress, phase, datagen.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 I/O error.

#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "nngp/commands.hpp"
#include "nngp/errors.hpp"
#include "nngp/parallel.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// Pulls "--section.key=value" and "--section.key value" out of argv; CLI11
// sees only the remaining arguments.
std::vector<std::pair<std::string, std::string>> extract_overrides(std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (i == 0 || a.rfind("--", 0) != 0) {
      rest.push_back(a);
      continue;
    }
    const std::string body = a.substr(2);
    const auto eq = body.find('=');
    const std::string key = body.substr(0, eq);
    if (key.find('.') == std::string::npos) {
      rest.push_back(a);
      continue;
    }
    if (eq != std::string::npos) {
      overrides.emplace_back(key, body.substr(eq + 1));
    } else if (i + 1 < args.size()) {
      overrides.emplace_back(key, args[++i]);
    } else {
      throw nngp::ConfigError("override --" + key + " needs a value");
    }
  }
  args = std::move(rest);
  return overrides;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::pair<std::string, std::string>> overrides;
  try {
    overrides = extract_overrides(args);
  } catch (const nngp::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  CLI::App app{"Neural network Gaussian process kernels"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_path;
  unsigned threads = 0;
  bool force = false;
  app.add_option("--config", config_path, "INI run configuration");
  app.add_option("--out", out_path, "output path (overrides output.path)");
  app.add_option("--threads", threads, "worker thread cap (0 = hardware)");
  app.add_flag("--force", force, "load kernels despite an architecture digest mismatch");
  app.footer("Any config key can be overridden as --section.key=value.");

  auto* kernel = app.add_subcommand("kernel", "analytic kernel of the configured dataset");
  auto* mc = app.add_subcommand("mc", "Monte Carlo kernel estimate from random finite networks");
  auto* regress = app.add_subcommand("regress", "GP classification from a joint kernel file");
  std::vector<std::string> kernel_files;
  regress->add_option("kernels", kernel_files, "kernel file")->required();
  auto* phase = app.add_subcommand("phase", "ordered/chaotic phase table over a weight/bias grid");
  auto* datagen = app.add_subcommand("datagen", "write a synthetic dataset as IDX files");

  // Options may appear before or after the subcommand.
  for (auto* sub : {kernel, mc, regress, phase, datagen}) sub->fallthrough();

  std::vector<const char*> cargv;
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    nngp::RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    const unsigned cap = threads ? threads : static_cast<unsigned>(cfg.get_int("run.threads"));
    nngp::set_max_threads(cap);

    nngp::CommandContext ctx;
    if (!out_path.empty()) ctx.out = out_path;
    ctx.force = force;

    if (kernel->parsed()) {
      const auto f = nngp::cmd_kernel(cfg, ctx);
      std::cout << "wrote " << (ctx.out ? ctx.out->string() : cfg.get("output.path")) << " (" << f.samples
                << " samples, " << nngp::to_string(f.kind) << ")\n";
    } else if (mc->parsed()) {
      const auto f = nngp::cmd_mc(cfg, ctx);
      std::cout << "wrote " << (ctx.out ? ctx.out->string() : cfg.get("output.path")) << " (" << f.samples
                << " samples, " << nngp::to_string(f.kind) << ")\n";
    } else if (regress->parsed()) {
      std::vector<std::filesystem::path> files(kernel_files.begin(), kernel_files.end());
      std::cout << nngp::cmd_regress(files, cfg, ctx).to_text();
    } else if (phase->parsed()) {
      nngp::cmd_phase(cfg, ctx, std::cout);
    } else if (datagen->parsed()) {
      const auto ds = nngp::cmd_datagen(cfg, ctx);
      std::cout << "wrote " << ds.samples << " samples\n";
    }
  } catch (const nngp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nngp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nngp::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
