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

#include "fasten/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>

#include "fasten/audit.hpp"
#include "fasten/cluster.hpp"
#include "fasten/error.hpp"
#include "fasten/random.hpp"
#include "fasten/workflows.hpp"

namespace fasten {

namespace {

constexpr std::size_t kKiB = 1024;
constexpr std::size_t kMiB = 1024 * 1024;
constexpr std::size_t kFaultTrials = 1000;

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

class RowSink {
 public:
  RowSink(const BenchOptions& o, std::vector<BenchRow>& rows) : options_(o), rows_(rows) {}

  void add(const std::string& param, const std::string& metric, double value) {
    if (options_.omit_timing && metric.ends_with("_ms")) return;
    rows_.push_back({options_.experiment, param, metric, value, options_.seed});
  }

 private:
  const BenchOptions& options_;
  std::vector<BenchRow>& rows_;
};

std::uint64_t capacity_for(const EngineConfig& c, std::size_t blocks, std::size_t redundancy,
                           std::size_t servers) {
  return std::max<std::uint64_t>(c.server_capacity, 2 * blocks * redundancy / servers + 16);
}

// Blocks for `bytes` of plaintext at `block_size`.
std::size_t blocks_for(std::size_t bytes, std::size_t block_size) {
  const std::size_t seg = block_size - kCipherOverhead;
  return std::max<std::size_t>(1, (bytes + seg - 1) / seg);
}

void read_write(const BenchOptions& o, const EngineConfig& c, RowSink& sink, std::size_t file_bytes,
                std::size_t block_size, const std::string& param) {
  constexpr std::size_t kRedundancy = 3;
  constexpr std::size_t kServers = 40;
  const Bytes data = random_bytes(file_bytes, o.seed);
  Engine engine(kServers, capacity_for(c, blocks_for(file_bytes, block_size), kRedundancy, kServers),
                c.attribute_seed, c.settings());
  auto start = std::chrono::steady_clock::now();
  const UploadReport r = engine.first_upload("bench", "file", data, block_size, kRedundancy, kServers);
  sink.add(param, "write_ms", ms_since(start));
  start = std::chrono::steady_clock::now();
  const Bytes back = engine.read("bench", "file");
  sink.add(param, "read_ms", ms_since(start));
  if (back != data) throw std::runtime_error("bench read-back mismatch");
  sink.add(param, "n_blocks", static_cast<double>(r.n_blocks));
  sink.add(param, "new_blocks_stored", static_cast<double>(r.new_blocks_stored));
}

void blocksize_rw(const BenchOptions& o, const EngineConfig& c, RowSink& sink) {
  for (std::size_t kib : {4, 8, 16, 32, 64, 128, 256}) {
    read_write(o, c, sink, 16 * kMiB, kib * kKiB, std::to_string(kib) + "KiB");
  }
}

void filesize_rw(const BenchOptions& o, const EngineConfig& c, RowSink& sink) {
  for (std::size_t mib : {1, 2, 4, 8, 16, 32, 64}) {
    read_write(o, c, sink, mib * kMiB, 64 * kKiB, std::to_string(mib) + "MiB");
  }
}

double tolerance_for(const EngineConfig& c, std::size_t servers, std::size_t n_blocks,
                     std::size_t redundancy, std::uint64_t seed) {
  constexpr std::size_t kBlock = 4 * kKiB;
  const Bytes data = random_bytes(n_blocks * (kBlock - kCipherOverhead), seed);
  Engine engine(servers, capacity_for(c, n_blocks, redundancy, servers), c.attribute_seed, c.settings());
  engine.first_upload("bench", "file", data, kBlock, redundancy, servers);
  return random_failure_tolerance(engine.index(), engine.index().get_manifest("bench", "file"),
                                  kFaultTrials, seed);
}

void redundancy_ft(const BenchOptions& o, const EngineConfig& c, RowSink& sink) {
  for (std::size_t r = 1; r <= 8; ++r) {
    sink.add(std::to_string(r), "tolerance", tolerance_for(c, 20, 16, r, o.seed));
  }
}

void servers_ft(const BenchOptions& o, const EngineConfig& c, RowSink& sink) {
  // 240 blocks: every server count in the sweep divides 240 * 5.
  for (std::size_t s = 20; s <= 120; s += 20) {
    sink.add(std::to_string(s), "tolerance", tolerance_for(c, s, 240, 5, o.seed));
  }
}

void update_pct(const BenchOptions& o, const EngineConfig& c, RowSink& sink) {
  constexpr std::size_t kBlock = 32 * kKiB;
  constexpr std::size_t kRedundancy = 5;
  constexpr std::size_t kServers = 20;
  for (std::size_t mib : {1, 4, 16}) {
    const std::string size = std::to_string(mib) + "MiB";
    for (std::size_t pct : {1, 10, 25, 50, 75, 100}) {
      Bytes data = random_bytes(mib * kMiB, o.seed);
      const std::size_t n = blocks_for(data.size(), kBlock);
      Engine engine(kServers, capacity_for(c, 2 * n, kRedundancy, kServers), c.attribute_seed, c.settings());
      auto start = std::chrono::steady_clock::now();
      engine.first_upload("bench", "file", data, kBlock, kRedundancy, kServers);
      const double write_ms = ms_since(start);

      const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(pct * n) / 100.0));
      const auto positions = sample_positions(n, k, o.seed + pct);
      mutate_blocks(data, kBlock, positions, o.seed + pct);
      start = std::chrono::steady_clock::now();
      const UploadReport r = engine.update("bench", "file", data);
      const std::string param = size + ":" + std::to_string(pct);
      sink.add(param, "initial_write_ms", write_ms);
      sink.add(param, "update_ms", ms_since(start));
      sink.add(param, "changed_blocks", static_cast<double>(r.changed_blocks));
      sink.add(param, "new_blocks_stored", static_cast<double>(r.new_blocks_stored));
    }
  }
}

void audit_compare(const BenchOptions& o, const EngineConfig& c, RowSink& sink) {
  constexpr std::size_t kBlock = 64 * kKiB;
  constexpr std::size_t kRedundancy = 3;
  constexpr std::size_t kServers = 40;
  constexpr int kRepeats = 5;
  for (std::size_t mib : {1, 2, 4, 8, 16, 32, 64}) {
    const Bytes data = random_bytes(mib * kMiB, o.seed);
    Engine engine(kServers, capacity_for(c, blocks_for(data.size(), kBlock), kRedundancy, kServers),
                  c.attribute_seed, c.settings());
    engine.first_upload("bench", "file", data, kBlock, kRedundancy, kServers);
    double hm = 1e300, mht = 1e300;
    std::size_t challenged = 0;
    for (int rep = 0; rep < kRepeats; ++rep) {
      const auto a = engine.audit("bench", "file", AuditMode::kHashMap, 0.05, o.seed);
      const auto b = engine.audit("bench", "file", AuditMode::kMerkle, 0.05, o.seed);
      hm = std::min(hm, std::chrono::duration<double, std::milli>(a.elapsed).count());
      mht = std::min(mht, std::chrono::duration<double, std::milli>(b.elapsed).count());
      challenged = a.challenged.size();
    }
    const std::string param = std::to_string(mib) + "MiB";
    sink.add(param, "challenged", static_cast<double>(challenged));
    sink.add(param, "hm_ms", hm);
    sink.add(param, "mht_ms", mht);
  }
}

using Experiment = void (*)(const BenchOptions&, const EngineConfig&, RowSink&);

const std::map<std::string, Experiment>& registry() {
  static const std::map<std::string, Experiment> kExperiments = {
      {"blocksize-rw", &blocksize_rw}, {"filesize-rw", &filesize_rw},
      {"redundancy-ft", &redundancy_ft}, {"servers-ft", &servers_ft},
      {"update-pct", &update_pct},     {"audit-compare", &audit_compare}};
  return kExperiments;
}

}  // namespace

const std::vector<std::string>& bench_experiments() {
  static const std::vector<std::string> kNames = [] {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
  }();
  return kNames;
}

std::vector<BenchRow> run_bench(const BenchOptions& options, const EngineConfig& config) {
  auto it = registry().find(options.experiment);
  if (it == registry().end()) throw Error(Errc::kInvalidArgument, "unknown experiment " + options.experiment);
  std::vector<BenchRow> rows;
  RowSink sink(options, rows);
  it->second(options, config, sink);
  return rows;
}

void write_csv(std::ostream& out, std::span<const BenchRow> rows) {
  out << "experiment,param,metric,value,seed\n";
  char value[64];
  for (const auto& r : rows) {
    std::snprintf(value, sizeof(value), "%.10g", r.value);
    out << r.experiment << ',' << r.param << ',' << r.metric << ',' << value << ',' << r.seed << '\n';
  }
}

Bytes random_bytes(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Bytes out(n);
  std::size_t i = 0;
  while (i < n) {
    std::uint64_t word = rng();
    for (int b = 0; b < 8 && i < n; ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word);
      word >>= 8;
    }
  }
  return out;
}

void mutate_blocks(Bytes& plaintext, std::size_t block_size, std::span<const std::size_t> positions,
                   std::uint64_t seed) {
  if (block_size <= kCipherOverhead) throw Error(Errc::kInvalidBlockSize);
  const std::size_t seg = block_size - kCipherOverhead;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t pos : positions) {
    const std::size_t begin = pos * seg;
    if (begin >= plaintext.size()) throw Error(Errc::kOutOfRange, "block " + std::to_string(pos));
    const std::size_t end = std::min(plaintext.size(), begin + seg);
    // Flip at least one byte so the segment is guaranteed to differ.
    plaintext[begin] ^= static_cast<std::uint8_t>(1 + uniform_below(rng, 255));
    for (std::size_t i = begin + 1; i < end; ++i) plaintext[i] = static_cast<std::uint8_t>(rng());
  }
}

}  // namespace fasten
