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

// In-process simulation of the data-server fleet.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "fasten/codec.hpp"
#include "fasten/index.hpp"

namespace fasten {

struct FailurePlan {
  std::set<ServerId> failed_ids;
  std::uint64_t seed = 0;

  // `count` distinct servers out of 0..n_servers-1, chosen by seed.
  static FailurePlan random(std::size_t n_servers, std::size_t count, std::uint64_t seed);
};

/// Simulated data servers with crash-stop failures.
///
/// store/fetch on distinct servers may run concurrently; each server
/// serializes its own slots. apply_failures/heal take the fleet lock
/// exclusively. Failed servers keep their contents.
class Cluster {
 public:
  // Servers 0..n_servers-1, all alive and empty, with load uniform in
  // [0, 1) and distance uniform in [1, 100) drawn from attribute_seed.
  Cluster(std::size_t n_servers, std::uint64_t capacity, std::uint64_t attribute_seed);
  // Empty servers mirroring directory entries (ids must be 0..n-1).
  explicit Cluster(std::span<const ServerDirectoryEntry> directory);

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  std::size_t size() const { return servers_.size(); }
  std::vector<ServerDirectoryEntry> directory() const;

  bool alive(ServerId id) const;
  std::uint64_t capacity(ServerId id) const;

  void store(ServerId id, SlotAddress address, Bytes block);
  Bytes fetch(ServerId id, SlotAddress address) const;
  // Frees a slot; allowed on failed servers.
  void release(ServerId id, SlotAddress address);
  std::size_t stored_blocks() const;

  void apply_failures(const FailurePlan& plan);
  void heal();

  // Test hook: overwrite slot bytes in place, bypassing the index.
  void corrupt(ServerId id, SlotAddress address, Bytes bytes);

  // One line-delimited JSON record per occupied slot.
  void write_slots(std::ostream& out) const;
  void read_slots(std::istream& in);

 private:
  struct SimServer {
    std::uint64_t capacity = 0;
    double load = 0;
    double distance = 0;
    bool alive = true;
    mutable std::mutex mu;
    std::unordered_map<SlotAddress, Bytes> slots;
  };

  SimServer& at(ServerId id);
  const SimServer& at(ServerId id) const;

  mutable std::shared_mutex fleet_mu_;
  std::vector<std::unique_ptr<SimServer>> servers_;
};

// True when every tag of `manifest` keeps a placement outside `failed`.
bool recoverable_without(const IndexServer& index, const FileManifest& manifest,
                         const std::set<ServerId>& failed);

/// Fault-tolerance estimate over the index's placements.
///
/// Each trial walks a seeded random permutation of all servers and fails
/// each one in turn unless doing so would leave some block of the file
/// with no surviving copy. The number failed is the trial's k; the result
/// is mean(k) / n_servers.
double random_failure_tolerance(const IndexServer& index, const FileManifest& manifest,
                                std::size_t trials, std::uint64_t seed);

// Fraction of trials in which `fail_count` random servers can fail
// without losing the file.
double survival_rate(const IndexServer& index, const FileManifest& manifest,
                     std::size_t fail_count, std::size_t trials, std::uint64_t seed);

}  // namespace fasten
