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

// Experiment sweeps that emit experiment,param,metric,value,seed rows.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fasten/codec.hpp"
#include "fasten/config.hpp"

namespace fasten {

struct BenchRow {
  std::string experiment;
  std::string param;
  std::string metric;
  double value = 0;
  std::uint64_t seed = 0;
};

struct BenchOptions {
  std::string experiment;
  std::uint64_t seed = 1;
  // Drop wall-clock metrics (names ending in "_ms"); the remaining rows
  // are identical across runs with the same seed.
  bool omit_timing = false;
};

// blocksize-rw, filesize-rw, redundancy-ft, servers-ft, update-pct, audit-compare
const std::vector<std::string>& bench_experiments();

// Every experiment provisions its own engines; nothing on disk is touched.
std::vector<BenchRow> run_bench(const BenchOptions& options, const EngineConfig& config);

void write_csv(std::ostream& out, std::span<const BenchRow> rows);

// Seeded workload helpers.
Bytes random_bytes(std::size_t n, std::uint64_t seed);
// Rewrites the plaintext segments behind the given block positions so
// exactly those cipher blocks change.
void mutate_blocks(Bytes& plaintext, std::size_t block_size, std::span<const std::size_t> positions,
                   std::uint64_t seed);

}  // namespace fasten
