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

#include "fasten/index.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "fasten/error.hpp"

namespace fasten {

using json = nlohmann::json;

namespace {

std::string slot_name(Placement p) {
  return "(" + std::to_string(p.server_id) + ", " + std::to_string(p.address) + ")";
}

json manifest_to_json(const FileManifest& m) {
  json tags = json::array();
  for (const auto& t : m.ordered_tags) tags.push_back(t.hex());
  json keys = json::array();
  for (const auto& k : m.block_keys) keys.push_back(to_hex(k.bytes));
  return json{{"kind", "manifest"},
              {"user", m.user_id},
              {"file", m.file_id},
              {"tags", std::move(tags)},
              {"keys", std::move(keys)},
              {"block_size", m.block_size},
              {"redundancy", m.redundancy_factor},
              {"max_servers", m.max_servers},
              {"merkle_root", to_hex(m.merkle_root)},
              {"file_tag", m.file_tag.hex()},
              {"original_len", m.original_len},
              {"pad_len", m.pad_len}};
}

FileManifest manifest_from_json(const json& j) {
  FileManifest m;
  m.user_id = j.at("user").get<std::string>();
  m.file_id = j.at("file").get<std::string>();
  for (const auto& t : j.at("tags")) m.ordered_tags.push_back(BlockTag::from_hex(t.get<std::string>()));
  for (const auto& k : j.at("keys")) m.block_keys.push_back({digest_from_hex(k.get<std::string>())});
  m.block_size = j.at("block_size").get<std::size_t>();
  m.redundancy_factor = j.at("redundancy").get<std::size_t>();
  m.max_servers = j.at("max_servers").get<std::size_t>();
  m.merkle_root = digest_from_hex(j.at("merkle_root").get<std::string>());
  m.file_tag = BlockTag::from_hex(j.at("file_tag").get<std::string>());
  m.original_len = j.at("original_len").get<std::size_t>();
  m.pad_len = j.at("pad_len").get<std::size_t>();
  if (m.ordered_tags.empty()) throw Error(Errc::kInvalidArgument, "manifest without tags");
  if (m.block_keys.size() != m.ordered_tags.size()) throw Error(Errc::kInvalidArgument, "key/tag count mismatch");
  if (m.redundancy_factor < 1) throw Error(Errc::kInvalidArgument, "redundancy must be >= 1");
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// ServerDirectoryEntry

SlotAddress ServerDirectoryEntry::lowest_free() const {
  if (!holes_.empty()) return *holes_.begin();
  return std::min<SlotAddress>(high_water_, capacity);
}

void ServerDirectoryEntry::occupy(SlotAddress a) {
  if (a >= capacity) throw Error(Errc::kOutOfRange, "address " + std::to_string(a));
  if (occupied_.contains(a)) throw Error(Errc::kSlotConflict, slot_name({server_id, a}));
  if (a < high_water_) {
    holes_.erase(a);
  } else {
    for (SlotAddress h = high_water_; h < a; ++h) holes_.insert(h);
    high_water_ = a + 1;
  }
  occupied_.insert(a);
}

void ServerDirectoryEntry::release(SlotAddress a) {
  if (occupied_.erase(a) == 0) throw Error(Errc::kNotFound, slot_name({server_id, a}));
  if (a + 1 == high_water_) {
    // Shrink the high-water mark past any trailing holes.
    --high_water_;
    while (high_water_ > 0 && holes_.contains(high_water_ - 1)) {
      holes_.erase(high_water_ - 1);
      --high_water_;
    }
  } else {
    holes_.insert(a);
  }
}

// ---------------------------------------------------------------------------
// Server directory

ServerDirectoryEntry& IndexServer::entry_locked(ServerId id) {
  auto it = servers_.find(id);
  if (it == servers_.end()) throw Error(Errc::kNoSuchServer, std::to_string(id));
  return it->second;
}

const ServerDirectoryEntry& IndexServer::entry_locked(ServerId id) const {
  auto it = servers_.find(id);
  if (it == servers_.end()) throw Error(Errc::kNoSuchServer, std::to_string(id));
  return it->second;
}

void IndexServer::add_server(ServerDirectoryEntry entry) {
  std::unique_lock lock(mu_);
  const ServerId id = entry.server_id;
  if (!servers_.emplace(id, std::move(entry)).second) {
    throw Error(Errc::kInvalidArgument, "server " + std::to_string(id) + " already registered");
  }
}

std::vector<ServerDirectoryEntry> IndexServer::servers() const {
  std::shared_lock lock(mu_);
  std::vector<ServerDirectoryEntry> out;
  out.reserve(servers_.size());
  for (const auto& [id, e] : servers_) out.push_back(e);
  return out;
}

ServerDirectoryEntry IndexServer::server(ServerId id) const {
  std::shared_lock lock(mu_);
  return entry_locked(id);
}

std::size_t IndexServer::server_count() const {
  std::shared_lock lock(mu_);
  return servers_.size();
}

void IndexServer::set_alive(ServerId id, bool alive) {
  std::unique_lock lock(mu_);
  entry_locked(id).alive = alive;
}

SlotAddress IndexServer::allocate_slot(ServerId id) const {
  std::shared_lock lock(mu_);
  const auto& e = entry_locked(id);
  if (!e.alive) throw Error(Errc::kUnavailable, "server " + std::to_string(id));
  if (e.remaining_capacity() == 0) throw Error(Errc::kNoSpace, "server " + std::to_string(id));
  return e.lowest_free();
}

// ---------------------------------------------------------------------------
// Block index

std::vector<Placement> IndexServer::get_placements(const BlockTag& tag) const {
  std::shared_lock lock(mu_);
  auto it = blocks_.find(tag);
  if (it == blocks_.end()) return {};
  return it->second;
}

void IndexServer::record_placement(const BlockTag& tag, Placement p) {
  std::unique_lock lock(mu_);
  auto& e = entry_locked(p.server_id);
  if (p.address >= e.capacity) {
    throw Error(Errc::kOutOfRange, slot_name(p) + " beyond capacity " + std::to_string(e.capacity));
  }
  if (e.is_occupied(p.address)) throw Error(Errc::kSlotConflict, slot_name(p));
  auto& list = blocks_[tag];
  const bool on_server = std::any_of(list.begin(), list.end(),
                                     [&](const Placement& q) { return q.server_id == p.server_id; });
  if (on_server) {
    if (list.empty()) blocks_.erase(tag);
    throw Error(Errc::kRedundantPlacement,
                tag.hex() + " already on server " + std::to_string(p.server_id));
  }
  e.occupy(p.address);
  list.push_back(p);
}

void IndexServer::remove_placement(const BlockTag& tag, Placement p) {
  std::unique_lock lock(mu_);
  auto it = blocks_.find(tag);
  if (it == blocks_.end()) throw Error(Errc::kNotFound, tag.hex());
  auto& list = it->second;
  auto pos = std::find(list.begin(), list.end(), p);
  if (pos == list.end()) throw Error(Errc::kNotFound, tag.hex() + " at " + slot_name(p));
  entry_locked(p.server_id).release(p.address);
  list.erase(pos);
  if (list.empty()) blocks_.erase(it);
}

std::size_t IndexServer::block_count() const {
  std::shared_lock lock(mu_);
  return blocks_.size();
}

std::vector<BlockTag> IndexServer::tags() const {
  std::shared_lock lock(mu_);
  std::vector<BlockTag> out;
  out.reserve(blocks_.size());
  for (const auto& [tag, list] : blocks_) out.push_back(tag);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

void IndexServer::add_refs_locked(const FileManifest& m) {
  for (const auto& t : m.ordered_tags) ++refs_[t];
}

void IndexServer::drop_refs_locked(const FileManifest& m) {
  for (const auto& t : m.ordered_tags) {
    auto it = refs_.find(t);
    if (it != refs_.end() && --it->second == 0) refs_.erase(it);
  }
}

void IndexServer::put_manifest(FileManifest m) {
  std::unique_lock lock(mu_);
  ManifestKey key{m.user_id, m.file_id};
  auto it = manifests_.find(key);
  if (it != manifests_.end()) {
    drop_refs_locked(it->second);
    it->second = std::move(m);
    add_refs_locked(it->second);
  } else {
    add_refs_locked(m);
    manifests_.emplace(std::move(key), std::move(m));
  }
}

FileManifest IndexServer::get_manifest(const std::string& user_id, const std::string& file_id) const {
  std::shared_lock lock(mu_);
  auto it = manifests_.find({user_id, file_id});
  if (it == manifests_.end()) throw Error(Errc::kNotFound, user_id + "/" + file_id);
  return it->second;
}

bool IndexServer::has_manifest(const std::string& user_id, const std::string& file_id) const {
  std::shared_lock lock(mu_);
  return manifests_.contains({user_id, file_id});
}

void IndexServer::remove_manifest(const std::string& user_id, const std::string& file_id) {
  std::unique_lock lock(mu_);
  auto it = manifests_.find({user_id, file_id});
  if (it == manifests_.end()) throw Error(Errc::kNotFound, user_id + "/" + file_id);
  drop_refs_locked(it->second);
  manifests_.erase(it);
}

std::vector<std::string> IndexServer::list_files(const std::string& user_id) const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (auto it = manifests_.lower_bound({user_id, std::string()});
       it != manifests_.end() && it->first.first == user_id; ++it) {
    out.push_back(it->first.second);
  }
  return out;
}

std::vector<FileManifest> IndexServer::manifests() const {
  std::shared_lock lock(mu_);
  std::vector<FileManifest> out;
  out.reserve(manifests_.size());
  for (const auto& [key, m] : manifests_) out.push_back(m);
  return out;
}

std::vector<std::pair<std::string, std::string>> IndexServer::find_file_tag(
    const BlockTag& file_tag) const {
  std::shared_lock lock(mu_);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, m] : manifests_) {
    if (m.file_tag == file_tag) out.push_back(key);
  }
  return out;
}

std::size_t IndexServer::ref_count(const BlockTag& tag) const {
  std::shared_lock lock(mu_);
  auto it = refs_.find(tag);
  return it == refs_.end() ? 0 : it->second;
}

std::vector<std::string> IndexServer::integrity_violations() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> problems;
  std::map<Placement, BlockTag> owner;
  for (const auto& [tag, list] : blocks_) {
    std::set<ServerId> seen;
    if (list.empty()) problems.push_back("empty placement list for " + tag.hex());
    for (const auto& p : list) {
      if (!seen.insert(p.server_id).second) {
        problems.push_back(tag.hex() + " has two copies on server " + std::to_string(p.server_id));
      }
      auto s = servers_.find(p.server_id);
      if (s == servers_.end() || !s->second.is_occupied(p.address)) {
        problems.push_back(tag.hex() + " points at unoccupied slot " + slot_name(p));
      }
      if (!owner.emplace(p, tag).second) problems.push_back("slot " + slot_name(p) + " shared by two tags");
    }
  }
  for (const auto& [id, e] : servers_) {
    if (e.occupied().size() > e.capacity) problems.push_back("server " + std::to_string(id) + " over capacity");
    for (SlotAddress a : e.occupied()) {
      if (!owner.contains({id, a})) problems.push_back("orphan occupied slot " + slot_name({id, a}));
    }
  }
  for (const auto& [key, m] : manifests_) {
    for (const auto& t : m.ordered_tags) {
      if (!blocks_.contains(t)) {
        problems.push_back(key.first + "/" + key.second + " references unplaced tag " + t.hex());
      }
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Snapshots

void IndexServer::write_snapshot(std::ostream& out) const {
  std::shared_lock lock(mu_);
  for (const auto& [id, e] : servers_) {
    json j{{"kind", "server"},
           {"id", id},
           {"capacity", e.capacity},
           {"load", e.load},
           {"distance", e.distance},
           {"alive", e.alive},
           {"occupied", e.occupied()}};
    out << j.dump() << '\n';
  }
  std::vector<const std::pair<const BlockTag, std::vector<Placement>>*> sorted;
  sorted.reserve(blocks_.size());
  for (const auto& kv : blocks_) sorted.push_back(&kv);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });
  for (const auto* kv : sorted) {
    json placements = json::array();
    for (const auto& p : kv->second) placements.push_back({p.server_id, p.address});
    out << json{{"kind", "block"}, {"tag", kv->first.hex()}, {"placements", std::move(placements)}}.dump()
        << '\n';
  }
  for (const auto& [key, m] : manifests_) out << manifest_to_json(m).dump() << '\n';
}

void IndexServer::snapshot(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kNotFound, "cannot write " + path.string());
  write_snapshot(out);
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

void IndexServer::read_snapshot(std::istream& in) {
  std::map<ServerId, ServerDirectoryEntry> servers;
  std::unordered_map<BlockTag, std::vector<Placement>> blocks;
  std::map<ManifestKey, FileManifest> manifests;
  std::map<Placement, std::size_t> slot_line;  // referenced slot -> line that claimed it
  std::vector<std::pair<std::size_t, Placement>> pending;
  std::vector<std::pair<std::size_t, const FileManifest*>> manifest_lines;

  auto corrupt = [](std::size_t line, const std::string& why) {
    return Error(Errc::kCorruptSnapshot, "line " + std::to_string(line) + ": " + why);
  };

  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty() || text == "\r") continue;
    try {
      const json j = json::parse(text);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "server") {
        ServerDirectoryEntry e(j.at("id").get<ServerId>(), j.at("capacity").get<std::uint64_t>(),
                               j.at("load").get<double>(), j.at("distance").get<double>());
        e.alive = j.at("alive").get<bool>();
        for (const auto& a : j.at("occupied")) e.occupy(a.get<SlotAddress>());
        const ServerId id = e.server_id;
        if (!servers.emplace(id, std::move(e)).second) throw corrupt(line_no, "duplicate server");
      } else if (kind == "block") {
        const BlockTag tag = BlockTag::from_hex(j.at("tag").get<std::string>());
        auto& list = blocks[tag];
        if (!list.empty()) throw corrupt(line_no, "duplicate block record");
        for (const auto& pj : j.at("placements")) {
          Placement p{pj.at(0).get<ServerId>(), pj.at(1).get<SlotAddress>()};
          for (const auto& q : list) {
            if (q.server_id == p.server_id) throw corrupt(line_no, "two copies on one server");
          }
          if (!slot_line.emplace(p, line_no).second) throw corrupt(line_no, "slot " + slot_name(p) + " reused");
          list.push_back(p);
          pending.emplace_back(line_no, p);
        }
        if (list.empty()) throw corrupt(line_no, "block without placements");
      } else if (kind == "manifest") {
        FileManifest m = manifest_from_json(j);
        ManifestKey key{m.user_id, m.file_id};
        auto [it, fresh] = manifests.emplace(std::move(key), std::move(m));
        if (!fresh) throw corrupt(line_no, "duplicate manifest");
        manifest_lines.emplace_back(line_no, &it->second);
      } else {
        throw corrupt(line_no, "unknown record kind '" + kind + "'");
      }
    } catch (const Error& e) {
      if (e.code() == Errc::kCorruptSnapshot) throw;
      throw corrupt(line_no, e.what());
    } catch (const std::exception& e) {
      throw corrupt(line_no, e.what());
    }
  }

  for (const auto& [line, p] : pending) {
    auto s = servers.find(p.server_id);
    if (s == servers.end()) throw corrupt(line, "unknown server " + std::to_string(p.server_id));
    if (!s->second.is_occupied(p.address)) throw corrupt(line, "slot " + slot_name(p) + " not occupied");
  }
  for (const auto& [id, e] : servers) {
    for (SlotAddress a : e.occupied()) {
      if (!slot_line.contains({id, a})) {
        throw Error(Errc::kCorruptSnapshot, "occupied slot " + slot_name({id, a}) + " has no block");
      }
    }
  }
  for (const auto& [line, m] : manifest_lines) {
    for (const auto& t : m->ordered_tags) {
      if (!blocks.contains(t)) throw corrupt(line, "tag " + t.hex() + " has no placement");
    }
  }

  std::unique_lock lock(mu_);
  servers_ = std::move(servers);
  blocks_ = std::move(blocks);
  manifests_ = std::move(manifests);
  refs_.clear();
  for (const auto& [key, m] : manifests_) add_refs_locked(m);
}

void IndexServer::restore(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  read_snapshot(in);
}

}  // namespace fasten
