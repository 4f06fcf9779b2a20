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

// User-level operations: upload, update, read, delete and the dedup
// decisions around them.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "fasten/audit.hpp"
#include "fasten/cluster.hpp"
#include "fasten/codec.hpp"
#include "fasten/index.hpp"
#include "fasten/placement.hpp"

namespace fasten {

enum class FileDedup { kNew, kDuplicateOwned, kDuplicateUnowned };

std::string_view file_dedup_name(FileDedup d);

struct UploadReport {
  std::string user_id;
  std::string file_id;
  std::size_t n_blocks = 0;
  std::size_t changed_blocks = 0;     // blocks that went through placement
  std::size_t new_blocks_stored = 0;  // physical copies written
  std::size_t dedup_hits = 0;         // copies satisfied by existing placements
  std::set<ServerId> servers_used;
  FileDedup file_dedup = FileDedup::kNew;
  std::chrono::nanoseconds elapsed{0};

  std::size_t placement_demand() const { return new_blocks_stored + dedup_hits; }
  std::string to_json() const;
};

struct UpdateDiff {
  std::vector<std::size_t> changed_positions;
  std::vector<BlockTag> old_tags;
  std::vector<BlockTag> new_tags;
};

// Positions where the tag differs, plus every position past the shorter list.
UpdateDiff diff_tags(std::span<const BlockTag> old_tags, std::span<const BlockTag> new_tags);

struct EngineSettings {
  RatingWeights weights;
  double preferred_query_size = 256.0 * 1024;
};

/// The storage engine: index server plus simulated cluster.
///
/// One mutating operation runs at a time; reads and audits share.
class Engine {
 public:
  Engine(std::size_t n_servers, std::uint64_t capacity, std::uint64_t attribute_seed,
         EngineSettings settings = {});

  // State written by save(): the index snapshot at `path` and the slot
  // contents next to it (slots_path(path)).
  static std::unique_ptr<Engine> load(const std::filesystem::path& path, EngineSettings settings = {});
  void save(const std::filesystem::path& path) const;
  static std::filesystem::path slots_path(const std::filesystem::path& path);

  UploadReport first_upload(const std::string& user_id, const std::string& file_id,
                            ByteView plaintext, std::size_t block_size, std::size_t redundancy,
                            std::size_t max_servers);
  UploadReport update(const std::string& user_id, const std::string& file_id, ByteView new_plaintext);
  Bytes read(const std::string& user_id, const std::string& file_id) const;
  void remove(const std::string& user_id, const std::string& file_id);

  FileDedup check_file_duplicate(const std::string& user_id, const std::string& file_id,
                                 const BlockTag& file_tag) const;

  void apply_failures(const FailurePlan& plan);
  void heal();

  AuditReport audit(const std::string& user_id, const std::string& file_id, AuditMode mode,
                    double fraction, std::uint64_t seed) const;

  const IndexServer& index() const { return index_; }
  IndexServer& index() { return index_; }
  const Cluster& cluster() const { return cluster_; }
  Cluster& cluster() { return cluster_; }
  const EngineSettings& settings() const { return settings_; }

 private:
  Engine(std::span<const ServerDirectoryEntry> directory, EngineSettings settings);

  struct Written {
    BlockTag tag;
    Placement placement;
  };

  // Runs subset layout, rating and assignment for `positions` of `sealed`
  // and writes every copy that is not already satisfied.
  void place_positions(const SealedFile& sealed, std::span<const std::size_t> positions,
                       std::size_t redundancy, std::size_t max_servers, UploadReport& report,
                       std::vector<Written>& written);
  void rollback(const std::vector<Written>& written);
  // Drops placements of tags no manifest references any more.
  void collect_garbage(std::span<const BlockTag> candidates);
  UploadReport update_locked(const std::string& user_id, const std::string& file_id,
                             ByteView new_plaintext);

  mutable std::shared_mutex op_mu_;
  IndexServer index_;
  Cluster cluster_;
  EngineSettings settings_;
};

}  // namespace fasten
