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

#include "fasten/audit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <json.hpp>

#include "fasten/error.hpp"
#include "fasten/random.hpp"

namespace fasten {

Digest hash_pair(const Digest& left, const Digest& right) {
  std::array<std::uint8_t, 64> buf{};
  std::copy(left.begin(), left.end(), buf.begin());
  std::copy(right.begin(), right.end(), buf.begin() + 32);
  return sha256(ByteView(buf));
}

MerkleTree::MerkleTree(std::vector<Digest> leaves) {
  if (leaves.empty()) throw Error(Errc::kEmptyTree);
  levels_.push_back(std::move(leaves));
  while (levels_.back().size() > 1) {
    const auto& row = levels_.back();
    std::vector<Digest> up;
    up.reserve((row.size() + 1) / 2);
    for (std::size_t i = 0; i < row.size(); i += 2) {
      up.push_back(hash_pair(row[i], i + 1 < row.size() ? row[i + 1] : row[i]));
    }
    levels_.push_back(std::move(up));
  }
}

MerkleTree build_merkle(std::span<const BlockTag> tags) {
  std::vector<Digest> leaves;
  leaves.reserve(tags.size());
  for (const auto& t : tags) leaves.push_back(t.digest);
  return MerkleTree(std::move(leaves));
}

std::vector<ProofStep> merkle_proof(const MerkleTree& tree, std::size_t leaf_index) {
  if (leaf_index >= tree.leaf_count()) {
    throw Error(Errc::kOutOfRange, std::to_string(leaf_index) + " of " + std::to_string(tree.leaf_count()));
  }
  std::vector<ProofStep> proof;
  std::size_t i = leaf_index;
  const auto& levels = tree.levels();
  for (std::size_t level = 0; level + 1 < levels.size(); ++level) {
    const auto& row = levels[level];
    if (i % 2 == 0) {
      proof.push_back({i + 1 < row.size() ? row[i + 1] : row[i], SiblingSide::kRight});
    } else {
      proof.push_back({row[i - 1], SiblingSide::kLeft});
    }
    i /= 2;
  }
  return proof;
}

bool verify_proof(const Digest& leaf, std::span<const ProofStep> proof, const Digest& root) {
  Digest h = leaf;
  for (const auto& step : proof) {
    h = step.side == SiblingSide::kRight ? hash_pair(h, step.sibling) : hash_pair(step.sibling, h);
  }
  return h == root;
}

std::vector<std::size_t> AuditReport::failed_positions() const {
  std::vector<std::size_t> out;
  out.reserve(failed.size());
  for (const auto& f : failed) out.push_back(f.position);
  std::sort(out.begin(), out.end());
  return out;
}

std::string AuditReport::to_json() const {
  nlohmann::json challenged_json = nlohmann::json::array();
  for (const auto& [pos, tag] : challenged) challenged_json.push_back({pos, tag.hex()});
  nlohmann::json failed_json = nlohmann::json::array();
  for (const auto& f : failed) {
    failed_json.push_back({{"position", f.position}, {"tag", f.tag.hex()}, {"reason", f.reason}});
  }
  nlohmann::json j{{"mode", mode == AuditMode::kHashMap ? "hm" : "mht"},
                   {"challenged", std::move(challenged_json)},
                   {"passed", passed},
                   {"failed", std::move(failed_json)},
                   {"elapsed_ms", std::chrono::duration<double, std::milli>(elapsed).count()}};
  return j.dump();
}

std::size_t challenge_count(std::size_t n_blocks, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(Errc::kInvalidArgument, "sample fraction must be in (0, 1]");
  }
  // The epsilon keeps 0.07 * 100 from rounding up to 8.
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_blocks) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n_blocks);
}

namespace {

std::optional<Bytes> fetch_any(const IndexServer& index, const Cluster& cluster, const BlockTag& tag) {
  for (const auto& p : index.get_placements(tag)) {
    try {
      return cluster.fetch(p.server_id, p.address);
    } catch (const Error& e) {
      if (e.code() != Errc::kUnavailable) throw;
    }
  }
  return std::nullopt;
}

template <typename Check>
AuditReport run_audit(AuditMode mode, const IndexServer& index, const Cluster& cluster,
                      const FileManifest& manifest, double fraction, std::uint64_t seed,
                      Check&& check) {
  AuditReport report;
  report.mode = mode;
  const std::size_t n = manifest.ordered_tags.size();
  for (std::size_t pos : sample_positions(n, challenge_count(n, fraction), seed)) {
    const BlockTag& tag = manifest.ordered_tags[pos];
    report.challenged.emplace_back(pos, tag);
    const auto block = fetch_any(index, cluster, tag);
    if (!block) {
      report.failed.push_back({pos, tag, "unavailable"});
    } else if (const char* reason = check(pos, sha256(ByteView(*block)))) {
      report.failed.push_back({pos, tag, reason});
    } else {
      ++report.passed;
    }
  }
  return report;
}

}  // namespace

AuditReport hm_batch_audit(const IndexServer& index, const Cluster& cluster,
                           const FileManifest& manifest, double fraction, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  AuditReport report = run_audit(AuditMode::kHashMap, index, cluster, manifest, fraction, seed,
                                 [&](std::size_t pos, const Digest& h) -> const char* {
                                   return h == manifest.ordered_tags[pos].digest ? nullptr
                                                                                 : "tag mismatch";
                                 });
  report.elapsed = std::chrono::steady_clock::now() - start;
  return report;
}

AuditReport mht_batch_audit(const IndexServer& index, const Cluster& cluster,
                            const FileManifest& manifest, double fraction, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const MerkleTree tree = build_merkle(manifest.ordered_tags);
  AuditReport report = run_audit(AuditMode::kMerkle, index, cluster, manifest, fraction, seed,
                                 [&](std::size_t pos, const Digest& h) -> const char* {
                                   const auto proof = merkle_proof(tree, pos);
                                   return verify_proof(h, proof, manifest.merkle_root)
                                              ? nullptr
                                              : "proof mismatch";
                                 });
  report.elapsed = std::chrono::steady_clock::now() - start;
  return report;
}

}  // namespace fasten
