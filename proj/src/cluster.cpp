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

#include "fasten/cluster.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "fasten/error.hpp"
#include "fasten/random.hpp"

namespace fasten {

namespace {

std::string where(ServerId id, SlotAddress a) {
  return "server " + std::to_string(id) + " address " + std::to_string(a);
}

}  // namespace

FailurePlan FailurePlan::random(std::size_t n_servers, std::size_t count, std::uint64_t seed) {
  FailurePlan plan;
  plan.seed = seed;
  for (std::size_t s : sample_positions(n_servers, count, seed)) {
    plan.failed_ids.insert(static_cast<ServerId>(s));
  }
  return plan;
}

Cluster::Cluster(std::size_t n_servers, std::uint64_t capacity, std::uint64_t attribute_seed) {
  if (n_servers == 0) throw Error(Errc::kInvalidArgument, "cluster needs at least one server");
  Rng rng(attribute_seed);
  servers_.reserve(n_servers);
  for (std::size_t i = 0; i < n_servers; ++i) {
    auto s = std::make_unique<SimServer>();
    s->capacity = capacity;
    s->load = unit_real(rng);
    s->distance = 1.0 + 99.0 * unit_real(rng);
    servers_.push_back(std::move(s));
  }
}

Cluster::Cluster(std::span<const ServerDirectoryEntry> directory) {
  servers_.reserve(directory.size());
  for (std::size_t i = 0; i < directory.size(); ++i) {
    if (directory[i].server_id != i) {
      throw Error(Errc::kInvalidArgument, "server ids must be dense and ordered");
    }
    auto s = std::make_unique<SimServer>();
    s->capacity = directory[i].capacity;
    s->load = directory[i].load;
    s->distance = directory[i].distance;
    s->alive = directory[i].alive;
    servers_.push_back(std::move(s));
  }
}

Cluster::SimServer& Cluster::at(ServerId id) {
  if (id >= servers_.size()) throw Error(Errc::kNoSuchServer, std::to_string(id));
  return *servers_[id];
}

const Cluster::SimServer& Cluster::at(ServerId id) const {
  if (id >= servers_.size()) throw Error(Errc::kNoSuchServer, std::to_string(id));
  return *servers_[id];
}

std::vector<ServerDirectoryEntry> Cluster::directory() const {
  std::shared_lock fleet(fleet_mu_);
  std::vector<ServerDirectoryEntry> out;
  out.reserve(servers_.size());
  for (std::size_t i = 0; i < servers_.size(); ++i) {
    const auto& s = *servers_[i];
    ServerDirectoryEntry e(static_cast<ServerId>(i), s.capacity, s.load, s.distance);
    e.alive = s.alive;
    out.push_back(std::move(e));
  }
  return out;
}

bool Cluster::alive(ServerId id) const {
  std::shared_lock fleet(fleet_mu_);
  return at(id).alive;
}

std::uint64_t Cluster::capacity(ServerId id) const { return at(id).capacity; }

void Cluster::store(ServerId id, SlotAddress address, Bytes block) {
  std::shared_lock fleet(fleet_mu_);
  auto& s = at(id);
  if (!s.alive) throw Error(Errc::kUnavailable, "server " + std::to_string(id));
  if (address >= s.capacity) throw Error(Errc::kOutOfRange, where(id, address));
  if (block.empty()) throw Error(Errc::kInvalidArgument, "empty block");
  std::lock_guard lock(s.mu);
  if (!s.slots.emplace(address, std::move(block)).second) {
    throw Error(Errc::kSlotConflict, where(id, address));
  }
}

Bytes Cluster::fetch(ServerId id, SlotAddress address) const {
  std::shared_lock fleet(fleet_mu_);
  const auto& s = at(id);
  if (!s.alive) throw Error(Errc::kUnavailable, "server " + std::to_string(id));
  std::lock_guard lock(s.mu);
  auto it = s.slots.find(address);
  if (it == s.slots.end()) throw Error(Errc::kEmptySlot, where(id, address));
  return it->second;
}

void Cluster::release(ServerId id, SlotAddress address) {
  std::shared_lock fleet(fleet_mu_);
  auto& s = at(id);
  std::lock_guard lock(s.mu);
  if (s.slots.erase(address) == 0) throw Error(Errc::kEmptySlot, where(id, address));
}

std::size_t Cluster::stored_blocks() const {
  std::shared_lock fleet(fleet_mu_);
  std::size_t n = 0;
  for (const auto& s : servers_) {
    std::lock_guard lock(s->mu);
    n += s->slots.size();
  }
  return n;
}

void Cluster::apply_failures(const FailurePlan& plan) {
  std::unique_lock fleet(fleet_mu_);
  for (ServerId id : plan.failed_ids) {
    if (id >= servers_.size()) throw Error(Errc::kNoSuchServer, std::to_string(id));
  }
  for (ServerId id : plan.failed_ids) servers_[id]->alive = false;
}

void Cluster::heal() {
  std::unique_lock fleet(fleet_mu_);
  for (auto& s : servers_) s->alive = true;
}

void Cluster::corrupt(ServerId id, SlotAddress address, Bytes bytes) {
  std::shared_lock fleet(fleet_mu_);
  auto& s = at(id);
  std::lock_guard lock(s.mu);
  auto it = s.slots.find(address);
  if (it == s.slots.end()) throw Error(Errc::kEmptySlot, where(id, address));
  it->second = std::move(bytes);
}

void Cluster::write_slots(std::ostream& out) const {
  std::shared_lock fleet(fleet_mu_);
  for (std::size_t i = 0; i < servers_.size(); ++i) {
    const auto& s = *servers_[i];
    std::lock_guard lock(s.mu);
    std::vector<SlotAddress> addresses;
    addresses.reserve(s.slots.size());
    for (const auto& [a, bytes] : s.slots) addresses.push_back(a);
    std::sort(addresses.begin(), addresses.end());
    for (SlotAddress a : addresses) {
      nlohmann::json j{{"server", i}, {"address", a}, {"data", to_hex(ByteView(s.slots.at(a)))}};
      out << j.dump() << '\n';
    }
  }
}

void Cluster::read_slots(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      const auto id = j.at("server").get<ServerId>();
      const auto address = j.at("address").get<SlotAddress>();
      Bytes data = bytes_from_hex(j.at("data").get<std::string>());
      std::unique_lock fleet(fleet_mu_);
      auto& s = at(id);
      if (address >= s.capacity || !s.slots.emplace(address, std::move(data)).second) {
        throw Error(Errc::kSlotConflict, where(id, address));
      }
    } catch (const std::exception& e) {
      throw Error(Errc::kCorruptSnapshot, "slot line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Fault-tolerance measurement

namespace {

// Per-file view: which distinct tags each server holds and how many
// copies every distinct tag has.
struct FileHoldings {
  std::vector<std::vector<std::size_t>> tags_on_server;  // server -> distinct-tag ids
  std::vector<std::size_t> copies;                       // distinct-tag id -> copies
};

FileHoldings holdings_of(const IndexServer& index, const FileManifest& manifest, std::size_t n_servers) {
  FileHoldings h;
  h.tags_on_server.resize(n_servers);
  std::unordered_map<BlockTag, std::size_t> ids;
  for (const auto& tag : manifest.ordered_tags) {
    if (!ids.emplace(tag, ids.size()).second) continue;
    const std::size_t id = ids.size() - 1;
    std::size_t copies = 0;
    for (const auto& p : index.get_placements(tag)) {
      if (p.server_id < n_servers) {
        h.tags_on_server[p.server_id].push_back(id);
        ++copies;
      }
    }
    h.copies.push_back(copies);
  }
  return h;
}

}  // namespace

bool recoverable_without(const IndexServer& index, const FileManifest& manifest,
                         const std::set<ServerId>& failed) {
  for (const auto& tag : manifest.ordered_tags) {
    bool found = false;
    for (const auto& p : index.get_placements(tag)) {
      if (!failed.contains(p.server_id)) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

double random_failure_tolerance(const IndexServer& index, const FileManifest& manifest,
                                std::size_t trials, std::uint64_t seed) {
  const std::size_t n = index.server_count();
  if (n == 0 || trials == 0) return 0.0;
  const FileHoldings h = holdings_of(index, manifest, n);
  if (std::find(h.copies.begin(), h.copies.end(), 0) != h.copies.end()) return 0.0;
  Rng rng(seed);
  std::vector<ServerId> order(n);
  double total_failed = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<ServerId>(i);
    shuffle_in_place(std::span<ServerId>(order), rng);
    std::vector<std::size_t> alive_copies = h.copies;
    std::size_t failed = 0;
    for (ServerId s : order) {
      const auto& held = h.tags_on_server[s];
      const bool last_copy = std::any_of(held.begin(), held.end(),
                                         [&](std::size_t tag) { return alive_copies[tag] <= 1; });
      if (last_copy) continue;
      for (std::size_t tag : held) --alive_copies[tag];
      ++failed;
    }
    total_failed += static_cast<double>(failed);
  }
  return total_failed / static_cast<double>(trials) / static_cast<double>(n);
}

double survival_rate(const IndexServer& index, const FileManifest& manifest,
                     std::size_t fail_count, std::size_t trials, std::uint64_t seed) {
  const std::size_t n = index.server_count();
  if (trials == 0) return 0.0;
  const FileHoldings h = holdings_of(index, manifest, n);
  Rng rng(seed);
  std::vector<ServerId> order(n);
  std::size_t survived = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<ServerId>(i);
    shuffle_in_place(std::span<ServerId>(order), rng);
    std::vector<std::size_t> alive_copies = h.copies;
    bool lost = false;
    for (std::size_t k = 0; k < std::min(fail_count, n) && !lost; ++k) {
      for (std::size_t tag : h.tags_on_server[order[k]]) {
        if (--alive_copies[tag] == 0) lost = true;
      }
    }
    if (!lost) ++survived;
  }
  return static_cast<double>(survived) / static_cast<double>(trials);
}

}  // namespace fasten
