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

// Index server state: file manifests, the tag -> placement map and the
// data-server directory, with line-delimited JSON snapshots.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fasten/codec.hpp"

namespace fasten {

using ServerId = std::uint32_t;
using SlotAddress = std::uint64_t;

struct Placement {
  ServerId server_id = 0;
  SlotAddress address = 0;

  friend auto operator<=>(const Placement&, const Placement&) = default;
};

struct FileManifest {
  std::string user_id;
  std::string file_id;
  std::vector<BlockTag> ordered_tags;
  std::vector<ConvergentKey> block_keys;  // parallel to ordered_tags
  std::size_t block_size = 0;
  std::size_t redundancy_factor = 1;
  std::size_t max_servers = 1;
  Digest merkle_root{};
  BlockTag file_tag;
  std::size_t original_len = 0;  // unpadded ciphertext length
  std::size_t pad_len = 0;

  friend bool operator==(const FileManifest&, const FileManifest&) = default;
};

/// One data server as the index sees it. Slot occupancy lives here; the
/// stored bytes live in the cluster.
class ServerDirectoryEntry {
 public:
  ServerDirectoryEntry() = default;
  ServerDirectoryEntry(ServerId id, std::uint64_t capacity, double load, double distance)
      : server_id(id), capacity(capacity), load(load), distance(distance) {}

  ServerId server_id = 0;
  std::uint64_t capacity = 0;
  double load = 0.0;      // normalized 0..1
  double distance = 0.0;  // arbitrary non-negative units
  bool alive = true;

  const std::set<SlotAddress>& occupied() const { return occupied_; }
  bool is_occupied(SlotAddress a) const { return occupied_.contains(a); }
  std::uint64_t remaining_capacity() const { return capacity - occupied_.size(); }

  // Lowest address not currently occupied; capacity when full.
  SlotAddress lowest_free() const;

  void occupy(SlotAddress a);
  void release(SlotAddress a);

  friend bool operator==(const ServerDirectoryEntry& a, const ServerDirectoryEntry& b) {
    return a.server_id == b.server_id && a.capacity == b.capacity && a.load == b.load &&
           a.distance == b.distance && a.alive == b.alive && a.occupied_ == b.occupied_;
  }

 private:
  std::set<SlotAddress> occupied_;
  // Free addresses below high_water_; everything at or above it is free.
  std::set<SlotAddress> holes_;
  SlotAddress high_water_ = 0;
};

/// The index server.
///
/// Every public member is internally synchronized: readers share a lock,
/// mutators take it exclusively. Multi-step sequences that must be atomic
/// (an upload) are serialized by the caller.
class IndexServer {
 public:
  IndexServer() = default;
  IndexServer(const IndexServer&) = delete;
  IndexServer& operator=(const IndexServer&) = delete;

  // Server directory.
  void add_server(ServerDirectoryEntry entry);
  std::vector<ServerDirectoryEntry> servers() const;  // ordered by id
  ServerDirectoryEntry server(ServerId id) const;
  std::size_t server_count() const;
  void set_alive(ServerId id, bool alive);

  // Lowest free address on `id`. Reserves nothing.
  SlotAddress allocate_slot(ServerId id) const;

  // Block index. An empty result means "No record found".
  std::vector<Placement> get_placements(const BlockTag& tag) const;
  void record_placement(const BlockTag& tag, Placement p);
  void remove_placement(const BlockTag& tag, Placement p);
  std::size_t block_count() const;
  std::vector<BlockTag> tags() const;  // sorted

  // Manifests. put_manifest overwrites an existing (user, file) entry.
  void put_manifest(FileManifest m);
  FileManifest get_manifest(const std::string& user_id, const std::string& file_id) const;
  bool has_manifest(const std::string& user_id, const std::string& file_id) const;
  void remove_manifest(const std::string& user_id, const std::string& file_id);
  std::vector<std::string> list_files(const std::string& user_id) const;
  std::vector<FileManifest> manifests() const;
  // Owners (user, file) of every manifest whose file_tag matches.
  std::vector<std::pair<std::string, std::string>> find_file_tag(const BlockTag& file_tag) const;
  // Number of tag occurrences across all manifests.
  std::size_t ref_count(const BlockTag& tag) const;

  // Empty when referential integrity and one-copy-per-server hold.
  std::vector<std::string> integrity_violations() const;

  void write_snapshot(std::ostream& out) const;
  void snapshot(const std::filesystem::path& path) const;
  // Replaces the whole state. Throws Error(kCorruptSnapshot) naming the
  // offending line; the current state is untouched on failure.
  void read_snapshot(std::istream& in);
  void restore(const std::filesystem::path& path);

 private:
  using ManifestKey = std::pair<std::string, std::string>;

  ServerDirectoryEntry& entry_locked(ServerId id);
  const ServerDirectoryEntry& entry_locked(ServerId id) const;
  void add_refs_locked(const FileManifest& m);
  void drop_refs_locked(const FileManifest& m);

  mutable std::shared_mutex mu_;
  std::map<ServerId, ServerDirectoryEntry> servers_;
  std::unordered_map<BlockTag, std::vector<Placement>> blocks_;
  std::map<ManifestKey, FileManifest> manifests_;
  std::unordered_map<BlockTag, std::size_t> refs_;
};

}  // namespace fasten
