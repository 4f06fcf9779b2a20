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

// Where blocks go: server count, fault-tolerant subsets, the weighted
// rating matrix and the subset -> server assignment.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fasten/codec.hpp"
#include "fasten/index.hpp"

namespace fasten {

// Largest divisor d of n_blocks * redundancy with redundancy <= d <= max_servers.
// Throws Error(kInfeasibleRedundancy) when no such divisor exists.
std::size_t optimum_servers(std::size_t n_blocks, std::size_t redundancy, std::size_t max_servers);

/// Result of splitting `redundancy` back-to-back copies of the block list
/// into equal contiguous subsets. Two copies of one position are always
/// n_blocks apart, so no subset holds the same position twice.
struct SubsetLayout {
  std::vector<std::vector<std::size_t>> block_subsets;  // block positions
  std::vector<std::vector<BlockTag>> tag_subsets;
  std::size_t subset_size = 0;
  std::size_t n_blocks = 0;
  std::size_t redundancy = 0;
  std::size_t n_subsets = 0;
};

// Throws Error(kSubsetSplit) ("Error") when n_subsets does not divide
// tags.size() * redundancy, and Error(kInfeasibleRedundancy) when
// n_subsets < redundancy.
SubsetLayout max_ft_subsets(std::span<const BlockTag> tags, std::size_t n_subsets,
                            std::size_t redundancy);

// Weights for dedup count, server load, query fit, distance and remaining
// capacity. Defaults halve from one criterion to the next.
struct RatingWeights {
  double dedup = 1.0;
  double load = 0.5;
  double query = 0.25;
  double distance = 0.125;
  double capacity = 0.0625;
};

// Raw per-cell inputs before normalization.
struct RatingCriteria {
  double dedup = 0;     // tags of the subset already on the server
  double load = 0;      // lower is better
  double query = 0;     // fit of the subset size to the preferred request size
  double distance = 0;  // lower is better
  double capacity = 0;  // free slots
};

class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(std::size_t rows, std::vector<ServerId> server_ids);

  // A matrix from raw scores, row-major; columns are servers 0..cols-1.
  static RatingMatrix from_scores(std::size_t rows, std::size_t cols, std::vector<double> scores);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return server_ids_.size(); }
  const std::vector<ServerId>& server_ids() const { return server_ids_; }

  double score(std::size_t i, std::size_t j) const { return scores_[i * cols() + j]; }
  double& score(std::size_t i, std::size_t j) { return scores_[i * cols() + j]; }
  const RatingCriteria& criteria(std::size_t i, std::size_t j) const { return criteria_[i * cols() + j]; }
  RatingCriteria& criteria(std::size_t i, std::size_t j) { return criteria_[i * cols() + j]; }

  // Columns of row i best first: higher score, then lower column.
  std::vector<std::size_t> ranked_columns(std::size_t i) const;

 private:
  std::size_t rows_ = 0;
  std::vector<ServerId> server_ids_;
  std::vector<double> scores_;
  std::vector<RatingCriteria> criteria_;
};

/// Scores every (subset, server) pair.
///
/// Each criterion is min-max normalized across the row and oriented so
/// that 1 is best (more dedup, lower load, better query fit, shorter
/// distance, more free capacity); a criterion that is constant across the
/// row contributes 0. The score is the weighted sum of the five.
///
/// Query fit is 1 - |subset_bytes - preferred| / max(subset_bytes,
/// preferred) with subset_bytes = subset length * block_size. Servers must
/// be alive; throws Error(kNotEnoughServers) when there are more subsets
/// than servers.
RatingMatrix build_rating_matrix(std::span<const std::vector<BlockTag>> tag_subsets,
                                 std::span<const ServerDirectoryEntry> servers,
                                 const IndexServer& index, const RatingWeights& weights,
                                 double preferred_query_size, std::size_t block_size);

// Subset-proposing Gale-Shapley. Subsets rank servers by score, servers
// rank subsets by score, ties go to the lower index. Returns the matched
// column per row.
std::vector<std::size_t> stable_assignment(const RatingMatrix& matrix);

// stable_assignment() mapped to server ids.
std::vector<ServerId> assign_subsets(const RatingMatrix& matrix);

// Exhaustive maximum-total-score injective assignment, for comparison with
// the stable one on small instances (at most 10 columns).
std::vector<std::size_t> max_weight_assignment(const RatingMatrix& matrix);

double total_score(const RatingMatrix& matrix, std::span<const std::size_t> columns);

}  // namespace fasten
