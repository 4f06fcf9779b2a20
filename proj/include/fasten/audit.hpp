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

// Merkle hash trees and the two batch-audit modes.

#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fasten/cluster.hpp"
#include "fasten/codec.hpp"
#include "fasten/index.hpp"

namespace fasten {

/// Binary Merkle tree over 32-byte leaves.
///
/// An internal node is SHA-256(left || right). A row of odd width pairs
/// its last node with itself. levels()[0] holds the leaves and the last
/// level holds only the root.
class MerkleTree {
 public:
  // Throws Error(kEmptyTree) on an empty leaf list.
  explicit MerkleTree(std::vector<Digest> leaves);

  const Digest& root() const { return levels_.back().front(); }
  std::size_t leaf_count() const { return levels_.front().size(); }
  const std::vector<std::vector<Digest>>& levels() const { return levels_; }

 private:
  std::vector<std::vector<Digest>> levels_;
};

MerkleTree build_merkle(std::span<const BlockTag> tags);

Digest hash_pair(const Digest& left, const Digest& right);

enum class SiblingSide { kLeft, kRight };

struct ProofStep {
  Digest sibling{};
  SiblingSide side = SiblingSide::kRight;

  friend bool operator==(const ProofStep&, const ProofStep&) = default;
};

// Sibling path from leaf to root. Throws Error(kOutOfRange).
std::vector<ProofStep> merkle_proof(const MerkleTree& tree, std::size_t leaf_index);

bool verify_proof(const Digest& leaf, std::span<const ProofStep> proof, const Digest& root);

enum class AuditMode { kHashMap, kMerkle };

struct AuditFailure {
  std::size_t position = 0;
  BlockTag tag;
  std::string reason;  // "tag mismatch", "proof mismatch" or "unavailable"
};

struct AuditReport {
  AuditMode mode = AuditMode::kHashMap;
  std::vector<std::pair<std::size_t, BlockTag>> challenged;
  std::size_t passed = 0;
  std::vector<AuditFailure> failed;
  std::chrono::nanoseconds elapsed{0};

  // Positions that failed, ascending.
  std::vector<std::size_t> failed_positions() const;
  // Single-line JSON object.
  std::string to_json() const;
};

// ceil(fraction * n_blocks), clamped to [1, n_blocks]. Throws
// Error(kInvalidArgument) unless 0 < fraction <= 1.
std::size_t challenge_count(std::size_t n_blocks, double fraction);

// Challenges a seeded sample of block positions; a block passes when its
// re-hash equals the manifest tag.
AuditReport hm_batch_audit(const IndexServer& index, const Cluster& cluster,
                           const FileManifest& manifest, double fraction, std::uint64_t seed);

// Same sample; a block passes when its re-hash, with the sibling path
// taken from the manifest's tag list, reproduces the stored Merkle root.
AuditReport mht_batch_audit(const IndexServer& index, const Cluster& cluster,
                            const FileManifest& manifest, double fraction, std::uint64_t seed);

}  // namespace fasten
