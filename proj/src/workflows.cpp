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

#include "fasten/workflows.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <unordered_set>

#include <json.hpp>

#include "fasten/error.hpp"

namespace fasten {

using Clock = std::chrono::steady_clock;

std::string_view file_dedup_name(FileDedup d) {
  switch (d) {
    case FileDedup::kNew: return "new";
    case FileDedup::kDuplicateOwned: return "duplicate-owned";
    case FileDedup::kDuplicateUnowned: return "duplicate-unowned";
  }
  return "new";
}

std::string UploadReport::to_json() const {
  nlohmann::json j{{"user", user_id},
                   {"file", file_id},
                   {"n_blocks", n_blocks},
                   {"changed_blocks", changed_blocks},
                   {"new_blocks_stored", new_blocks_stored},
                   {"dedup_hits", dedup_hits},
                   {"servers_used", servers_used},
                   {"file_dedup", file_dedup_name(file_dedup)},
                   {"elapsed_ms", std::chrono::duration<double, std::milli>(elapsed).count()}};
  return j.dump();
}

UpdateDiff diff_tags(std::span<const BlockTag> old_tags, std::span<const BlockTag> new_tags) {
  UpdateDiff diff;
  diff.old_tags.assign(old_tags.begin(), old_tags.end());
  diff.new_tags.assign(new_tags.begin(), new_tags.end());
  const std::size_t common = std::min(old_tags.size(), new_tags.size());
  const std::size_t longest = std::max(old_tags.size(), new_tags.size());
  for (std::size_t i = 0; i < longest; ++i) {
    if (i >= common || old_tags[i] != new_tags[i]) diff.changed_positions.push_back(i);
  }
  return diff;
}

// ---------------------------------------------------------------------------
// Construction and persistence

Engine::Engine(std::size_t n_servers, std::uint64_t capacity, std::uint64_t attribute_seed,
               EngineSettings settings)
    : cluster_(n_servers, capacity, attribute_seed), settings_(settings) {
  for (auto& e : cluster_.directory()) index_.add_server(std::move(e));
}

Engine::Engine(std::span<const ServerDirectoryEntry> directory, EngineSettings settings)
    : cluster_(directory), settings_(settings) {}

std::filesystem::path Engine::slots_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".slots";
  return p;
}

std::unique_ptr<Engine> Engine::load(const std::filesystem::path& path, EngineSettings settings) {
  IndexServer probe;
  probe.restore(path);
  const auto directory = probe.servers();
  std::unique_ptr<Engine> engine(new Engine(directory, settings));
  engine->index_.restore(path);
  std::ifstream slots(slots_path(path), std::ios::binary);
  if (slots) engine->cluster_.read_slots(slots);
  return engine;
}

void Engine::save(const std::filesystem::path& path) const {
  std::shared_lock lock(op_mu_);
  index_.snapshot(path);
  std::ofstream out(slots_path(path), std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kNotFound, "cannot write " + slots_path(path).string());
  cluster_.write_slots(out);
}

// ---------------------------------------------------------------------------
// Placement

void Engine::place_positions(const SealedFile& sealed, std::span<const std::size_t> positions,
                             std::size_t redundancy, std::size_t max_servers, UploadReport& report,
                             std::vector<Written>& written) {
  if (positions.empty()) return;

  std::vector<ServerDirectoryEntry> candidates;
  for (auto& s : index_.servers()) {
    if (s.alive && s.remaining_capacity() > 0) candidates.push_back(std::move(s));
  }
  if (candidates.empty()) throw Error(Errc::kNoSpace, "no alive server has free slots");

  const std::size_t limit = std::min(max_servers, candidates.size());
  const std::size_t n_subsets = optimum_servers(positions.size(), redundancy, limit);

  std::vector<BlockTag> tags;
  tags.reserve(positions.size());
  for (std::size_t p : positions) tags.push_back(sealed.tags[p]);
  const SubsetLayout layout = max_ft_subsets(tags, n_subsets, redundancy);

  const RatingMatrix matrix = build_rating_matrix(layout.tag_subsets, candidates, index_, settings_.weights,
                                                  settings_.preferred_query_size,
                                                  sealed.blocks.block_size);
  const std::vector<std::size_t> assigned = stable_assignment(matrix);
  std::vector<bool> taken(matrix.cols(), false);
  for (std::size_t c : assigned) taken[c] = true;

  for (std::size_t i = 0; i < layout.n_subsets; ++i) {
    const auto& subset_tags = layout.tag_subsets[i];
    auto writes_needed = [&](ServerId server) {
      std::unordered_set<BlockTag> missing;
      for (const auto& t : subset_tags) {
        const auto placements = index_.get_placements(t);
        const bool here = std::any_of(placements.begin(), placements.end(),
                                      [&](const Placement& p) { return p.server_id == server; });
        if (!here && placements.size() < redundancy) missing.insert(t);
      }
      return missing.size();
    };

    std::size_t column = assigned[i];
    ServerId server = matrix.server_ids()[column];
    if (index_.server(server).remaining_capacity() < writes_needed(server)) {
      // Next-highest-rated server that no other subset holds.
      bool found = false;
      for (std::size_t c : matrix.ranked_columns(i)) {
        if (taken[c]) continue;
        const ServerId alt = matrix.server_ids()[c];
        if (index_.server(alt).remaining_capacity() >= writes_needed(alt)) {
          taken[c] = true;
          column = c;
          server = alt;
          found = true;
          break;
        }
      }
      if (!found) throw Error(Errc::kNoSpace, "no candidate server can take subset " + std::to_string(i));
    }
    report.servers_used.insert(server);

    for (std::size_t k = 0; k < subset_tags.size(); ++k) {
      const BlockTag& tag = subset_tags[k];
      const auto placements = index_.get_placements(tag);
      const bool here = std::any_of(placements.begin(), placements.end(),
                                    [&](const Placement& p) { return p.server_id == server; });
      if (here || placements.size() >= redundancy) {
        ++report.dedup_hits;
        continue;
      }
      const std::size_t block = positions[layout.block_subsets[i][k]];
      const Placement p{server, index_.allocate_slot(server)};
      cluster_.store(p.server_id, p.address, sealed.blocks.blocks[block]);
      try {
        index_.record_placement(tag, p);
      } catch (...) {
        cluster_.release(p.server_id, p.address);
        throw;
      }
      written.push_back({tag, p});
      ++report.new_blocks_stored;
    }
  }
}

void Engine::rollback(const std::vector<Written>& written) {
  for (auto it = written.rbegin(); it != written.rend(); ++it) {
    index_.remove_placement(it->tag, it->placement);
    cluster_.release(it->placement.server_id, it->placement.address);
  }
}

void Engine::collect_garbage(std::span<const BlockTag> candidates) {
  std::unordered_set<BlockTag> seen;
  for (const auto& tag : candidates) {
    if (!seen.insert(tag).second || index_.ref_count(tag) > 0) continue;
    for (const auto& p : index_.get_placements(tag)) {
      index_.remove_placement(tag, p);
      cluster_.release(p.server_id, p.address);
    }
  }
}

// ---------------------------------------------------------------------------
// Workflows

FileDedup Engine::check_file_duplicate(const std::string& user_id, const std::string& file_id,
                                       const BlockTag& file_tag) const {
  (void)file_id;
  const auto owners = index_.find_file_tag(file_tag);
  if (owners.empty()) return FileDedup::kNew;
  const bool owned = std::any_of(owners.begin(), owners.end(),
                                 [&](const auto& owner) { return owner.first == user_id; });
  return owned ? FileDedup::kDuplicateOwned : FileDedup::kDuplicateUnowned;
}

UploadReport Engine::first_upload(const std::string& user_id, const std::string& file_id,
                                  ByteView plaintext, std::size_t block_size, std::size_t redundancy,
                                  std::size_t max_servers) {
  if (user_id.empty() || file_id.empty()) throw Error(Errc::kInvalidArgument, "empty user or file id");
  if (redundancy == 0) throw Error(Errc::kInvalidArgument, "redundancy must be >= 1");
  if (max_servers == 0) throw Error(Errc::kInvalidArgument, "max servers must be >= 1");

  std::unique_lock lock(op_mu_);
  if (index_.has_manifest(user_id, file_id)) return update_locked(user_id, file_id, plaintext);

  const auto start = Clock::now();
  const SealedFile sealed = seal(plaintext, block_size);
  const std::size_t n = sealed.tags.size();

  UploadReport report;
  report.user_id = user_id;
  report.file_id = file_id;
  report.n_blocks = n;
  report.changed_blocks = n;
  report.file_dedup = check_file_duplicate(user_id, file_id, sealed.file_tag);

  // A known file whose blocks already meet the requested redundancy costs
  // only an ownership record.
  bool satisfied = report.file_dedup != FileDedup::kNew;
  for (std::size_t i = 0; satisfied && i < n; ++i) {
    satisfied = index_.get_placements(sealed.tags[i]).size() >= redundancy;
  }

  std::vector<Written> written;
  if (satisfied) {
    report.dedup_hits = n * redundancy;
    for (const auto& t : sealed.tags) {
      for (const auto& p : index_.get_placements(t)) report.servers_used.insert(p.server_id);
    }
  } else {
    std::vector<std::size_t> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = i;
    try {
      place_positions(sealed, positions, redundancy, max_servers, report, written);
    } catch (...) {
      rollback(written);
      throw;
    }
  }

  FileManifest m;
  m.user_id = user_id;
  m.file_id = file_id;
  m.ordered_tags = sealed.tags;
  m.block_keys = sealed.keys;
  m.block_size = block_size;
  m.redundancy_factor = redundancy;
  m.max_servers = max_servers;
  m.merkle_root = build_merkle(sealed.tags).root();
  m.file_tag = sealed.file_tag;
  m.original_len = sealed.blocks.original_len;
  m.pad_len = sealed.blocks.pad_len;
  index_.put_manifest(std::move(m));

  report.elapsed = Clock::now() - start;
  return report;
}

UploadReport Engine::update(const std::string& user_id, const std::string& file_id,
                            ByteView new_plaintext) {
  std::unique_lock lock(op_mu_);
  return update_locked(user_id, file_id, new_plaintext);
}

UploadReport Engine::update_locked(const std::string& user_id, const std::string& file_id,
                                   ByteView new_plaintext) {
  const auto start = Clock::now();
  FileManifest m = index_.get_manifest(user_id, file_id);
  const SealedFile sealed = seal(new_plaintext, m.block_size);
  const UpdateDiff diff = diff_tags(m.ordered_tags, sealed.tags);

  UploadReport report;
  report.user_id = user_id;
  report.file_id = file_id;
  report.n_blocks = sealed.tags.size();
  report.file_dedup = check_file_duplicate(user_id, file_id, sealed.file_tag);

  std::vector<std::size_t> positions;
  for (std::size_t p : diff.changed_positions) {
    if (p < sealed.tags.size()) positions.push_back(p);
  }
  report.changed_blocks = positions.size();

  std::vector<Written> written;
  try {
    place_positions(sealed, positions, m.redundancy_factor, m.max_servers, report, written);
  } catch (...) {
    rollback(written);
    throw;
  }

  const std::vector<BlockTag> old_tags = std::move(m.ordered_tags);
  m.ordered_tags = sealed.tags;
  m.block_keys = sealed.keys;
  m.merkle_root = build_merkle(sealed.tags).root();
  m.file_tag = sealed.file_tag;
  m.original_len = sealed.blocks.original_len;
  m.pad_len = sealed.blocks.pad_len;
  index_.put_manifest(std::move(m));
  collect_garbage(old_tags);

  report.elapsed = Clock::now() - start;
  return report;
}

Bytes Engine::read(const std::string& user_id, const std::string& file_id) const {
  std::shared_lock lock(op_mu_);
  const FileManifest m = index_.get_manifest(user_id, file_id);
  std::vector<Bytes> blocks;
  blocks.reserve(m.ordered_tags.size());
  std::vector<std::string> missing;
  for (const auto& tag : m.ordered_tags) {
    bool got = false;
    for (const auto& p : index_.get_placements(tag)) {
      if (!cluster_.alive(p.server_id)) continue;
      blocks.push_back(cluster_.fetch(p.server_id, p.address));
      got = true;
      break;
    }
    if (!got) missing.push_back(tag.hex());
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string detail;
    for (const auto& t : missing) detail += (detail.empty() ? "" : ",") + t;
    throw Error(Errc::kUnrecoverable, detail);
  }
  return unseal(blocks, m.block_keys, m.block_size, m.original_len);
}

void Engine::remove(const std::string& user_id, const std::string& file_id) {
  std::unique_lock lock(op_mu_);
  const FileManifest m = index_.get_manifest(user_id, file_id);
  index_.remove_manifest(user_id, file_id);
  collect_garbage(m.ordered_tags);
}

void Engine::apply_failures(const FailurePlan& plan) {
  std::unique_lock lock(op_mu_);
  cluster_.apply_failures(plan);
  for (ServerId id : plan.failed_ids) index_.set_alive(id, false);
}

void Engine::heal() {
  std::unique_lock lock(op_mu_);
  cluster_.heal();
  for (const auto& s : index_.servers()) index_.set_alive(s.server_id, true);
}

AuditReport Engine::audit(const std::string& user_id, const std::string& file_id, AuditMode mode,
                          double fraction, std::uint64_t seed) const {
  std::shared_lock lock(op_mu_);
  const FileManifest m = index_.get_manifest(user_id, file_id);
  return mode == AuditMode::kHashMap ? hm_batch_audit(index_, cluster_, m, fraction, seed)
                                     : mht_batch_audit(index_, cluster_, m, fraction, seed);
}

}  // namespace fasten
