// Copyright 2026 The Fasten Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fasten/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fasten/bench.hpp"
#include "fasten/config.hpp"
#include "fasten/error.hpp"
#include "fasten/workflows.hpp"

namespace fasten {

namespace {

namespace fs = std::filesystem;

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kNotFound, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

std::unique_ptr<Engine> open_engine(const EngineConfig& c) {
  if (fs::exists(c.snapshot_path)) return Engine::load(c.snapshot_path, c.settings());
  return std::make_unique<Engine>(c.n_servers, c.server_capacity, c.attribute_seed, c.settings());
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deduplicating, replication-balanced block store over a simulated cluster", "fasten"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "Engine config file (single JSON object)");

  std::string user, file, path;
  std::size_t block_size = 0, redundancy = 0, max_servers = 0;
  auto* put = app.add_subcommand("put", "Upload a file; prints the upload report");
  put->add_option("user", user)->required();
  put->add_option("file", file)->required();
  put->add_option("path", path)->required();
  put->add_option("--block-size", block_size);
  put->add_option("--redundancy", redundancy);
  put->add_option("--max-servers", max_servers);

  auto* get = app.add_subcommand("get", "Restore a file to OUT");
  get->add_option("user", user)->required();
  get->add_option("file", file)->required();
  get->add_option("out", path)->required();

  auto* update = app.add_subcommand("update", "Replace a stored file's content");
  update->add_option("user", user)->required();
  update->add_option("file", file)->required();
  update->add_option("path", path)->required();

  auto* del = app.add_subcommand("delete", "Drop a file and reclaim unreferenced blocks");
  del->add_option("user", user)->required();
  del->add_option("file", file)->required();

  std::string mode = "hm";
  double fraction = 0.05;
  std::uint64_t seed = 1;
  auto* audit = app.add_subcommand("audit", "Batch-audit a sample of a file's blocks");
  audit->add_option("user", user)->required();
  audit->add_option("file", file)->required();
  audit->add_option("--mode", mode)->check(CLI::IsMember({"hm", "mht"}));
  audit->add_option("--fraction", fraction)->check(CLI::Range(0.0, 1.0));
  audit->add_option("--seed", seed);

  double fail_fraction = 0.0;
  std::size_t trials = 1000;
  auto* faultsim = app.add_subcommand("faultsim", "Monte Carlo fault tolerance of a stored file");
  faultsim->add_option("user", user)->required();
  faultsim->add_option("file", file)->required();
  faultsim->add_option("--fail-fraction", fail_fraction)->check(CLI::Range(0.0, 1.0));
  faultsim->add_option("--trials", trials)->check(CLI::PositiveNumber);
  faultsim->add_option("--seed", seed);

  std::string experiment;
  bool omit_timing = false;
  auto* bench = app.add_subcommand("bench", "Run an experiment sweep and write CSV");
  bench->add_option("--experiment", experiment)->required()->check(CLI::IsMember(bench_experiments()));
  bench->add_option("--out", path)->required();
  bench->add_option("--seed", seed);
  bench->add_flag("--omit-timing", omit_timing, "Leave out wall-clock metrics");

  auto* snapshot = app.add_subcommand("snapshot", "Write the index snapshot (and slot contents) to PATH");
  snapshot->add_option("path", path)->required();
  auto* restore = app.add_subcommand("restore", "Replace the engine state with the snapshot at PATH");
  restore->add_option("path", path)->required();

  std::vector<ServerId> fail_ids;
  auto* fail = app.add_subcommand("fail", "Mark servers as crashed");
  fail->add_option("servers", fail_ids)->required();
  auto* heal = app.add_subcommand("heal", "Revive every server");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    const EngineConfig config = config_path.empty() ? EngineConfig{} : load_config(config_path);

    if (bench->parsed()) {
      const auto rows = run_bench({experiment, seed, omit_timing}, config);
      std::ofstream csv(path, std::ios::binary | std::ios::trunc);
      if (!csv) throw Error(Errc::kNotFound, "cannot write " + path);
      write_csv(csv, rows);
      out << nlohmann::json{{"experiment", experiment}, {"rows", rows.size()}, {"out", path}}.dump() << '\n';
      return 0;
    }

    if (restore->parsed()) {
      auto engine = Engine::load(path, config.settings());
      engine->save(config.snapshot_path);
      out << nlohmann::json{{"restored", path}}.dump() << '\n';
      return 0;
    }

    auto engine = open_engine(config);
    if (put->parsed()) {
      const Bytes data = read_file(path);
      const auto report = engine->first_upload(
          user, file, data, block_size ? block_size : config.default_block_size,
          redundancy ? redundancy : config.default_redundancy,
          max_servers ? max_servers : config.max_servers_per_user);
      engine->save(config.snapshot_path);
      out << report.to_json() << '\n';
    } else if (get->parsed()) {
      write_file(path, engine->read(user, file));
    } else if (update->parsed()) {
      const auto report = engine->update(user, file, read_file(path));
      engine->save(config.snapshot_path);
      out << report.to_json() << '\n';
    } else if (del->parsed()) {
      engine->remove(user, file);
      engine->save(config.snapshot_path);
      out << nlohmann::json{{"deleted", {user, file}}}.dump() << '\n';
    } else if (audit->parsed()) {
      const auto report = engine->audit(user, file, mode == "hm" ? AuditMode::kHashMap : AuditMode::kMerkle,
                                        fraction, seed);
      out << report.to_json() << '\n';
    } else if (faultsim->parsed()) {
      const FileManifest m = engine->index().get_manifest(user, file);
      const std::size_t n = engine->index().server_count();
      const auto fail_count = static_cast<std::size_t>(std::llround(fail_fraction * static_cast<double>(n)));
      out << nlohmann::json{{"tolerance", random_failure_tolerance(engine->index(), m, trials, seed)},
                            {"fail_fraction", fail_fraction},
                            {"fail_count", fail_count},
                            {"survival_rate", survival_rate(engine->index(), m, fail_count, trials, seed)},
                            {"trials", trials},
                            {"seed", seed}}
                 .dump()
          << '\n';
    } else if (snapshot->parsed()) {
      engine->save(path);
      out << nlohmann::json{{"snapshot", path}}.dump() << '\n';
    } else if (fail->parsed()) {
      FailurePlan plan;
      plan.failed_ids.insert(fail_ids.begin(), fail_ids.end());
      engine->apply_failures(plan);
      engine->save(config.snapshot_path);
      out << nlohmann::json{{"failed", plan.failed_ids}}.dump() << '\n';
    } else if (heal->parsed()) {
      engine->heal();
      engine->save(config.snapshot_path);
      out << nlohmann::json{{"healed", engine->index().server_count()}}.dump() << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 1;
  }
}

}  // namespace fasten
