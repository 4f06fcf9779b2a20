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

#include "fasten/placement.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "fasten/error.hpp"

namespace fasten {

std::size_t optimum_servers(std::size_t n_blocks, std::size_t redundancy, std::size_t max_servers) {
  if (n_blocks == 0 || redundancy == 0 || max_servers == 0) {
    throw Error(Errc::kInvalidArgument, "block count, redundancy and server limit must be positive");
  }
  const std::size_t total = n_blocks * redundancy;
  for (std::size_t d = std::min(max_servers, total); d >= redundancy; --d) {
    if (total % d == 0) return d;
  }
  throw Error(Errc::kInfeasibleRedundancy, "redundancy " + std::to_string(redundancy) +
                                               " with at most " + std::to_string(max_servers) +
                                               " servers");
}

SubsetLayout max_ft_subsets(std::span<const BlockTag> tags, std::size_t n_subsets,
                            std::size_t redundancy) {
  if (tags.empty() || redundancy == 0 || n_subsets == 0) {
    throw Error(Errc::kInvalidArgument, "empty block list, zero redundancy or zero subsets");
  }
  const std::size_t total = tags.size() * redundancy;
  if (total % n_subsets != 0) {
    throw Error(Errc::kSubsetSplit, std::to_string(total) + " copies do not split into " +
                                        std::to_string(n_subsets) + " subsets");
  }
  if (n_subsets < redundancy) {
    throw Error(Errc::kInfeasibleRedundancy,
                std::to_string(n_subsets) + " subsets for redundancy " + std::to_string(redundancy));
  }

  SubsetLayout layout;
  layout.n_blocks = tags.size();
  layout.redundancy = redundancy;
  layout.n_subsets = n_subsets;
  layout.subset_size = total / n_subsets;
  layout.block_subsets.resize(n_subsets);
  layout.tag_subsets.resize(n_subsets);
  // Position k of the concatenation holds block k mod n_blocks.
  for (std::size_t s = 0; s < n_subsets; ++s) {
    auto& blocks = layout.block_subsets[s];
    auto& subset_tags = layout.tag_subsets[s];
    blocks.reserve(layout.subset_size);
    subset_tags.reserve(layout.subset_size);
    for (std::size_t k = s * layout.subset_size; k < (s + 1) * layout.subset_size; ++k) {
      blocks.push_back(k % tags.size());
      subset_tags.push_back(tags[k % tags.size()]);
    }
  }
  return layout;
}

// ---------------------------------------------------------------------------
// Rating

RatingMatrix::RatingMatrix(std::size_t rows, std::vector<ServerId> server_ids)
    : rows_(rows),
      server_ids_(std::move(server_ids)),
      scores_(rows_ * server_ids_.size(), 0.0),
      criteria_(rows_ * server_ids_.size()) {}

RatingMatrix RatingMatrix::from_scores(std::size_t rows, std::size_t cols, std::vector<double> scores) {
  if (scores.size() != rows * cols) throw Error(Errc::kInvalidArgument, "score count != rows * cols");
  std::vector<ServerId> ids(cols);
  std::iota(ids.begin(), ids.end(), ServerId{0});
  RatingMatrix m(rows, std::move(ids));
  m.scores_ = std::move(scores);
  return m;
}

std::vector<std::size_t> RatingMatrix::ranked_columns(std::size_t i) const {
  std::vector<std::size_t> cols_by_rank(cols());
  std::iota(cols_by_rank.begin(), cols_by_rank.end(), std::size_t{0});
  std::stable_sort(cols_by_rank.begin(), cols_by_rank.end(),
                   [&](std::size_t a, std::size_t b) { return score(i, a) > score(i, b); });
  return cols_by_rank;
}

namespace {

enum class Orientation { kHigherBetter, kLowerBetter };

// Min-max normalize row values in place; constant rows become 0.
void normalize(std::vector<double>& values, Orientation orientation) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  for (double& v : values) {
    if (hi == lo) {
      v = 0.0;
    } else if (orientation == Orientation::kHigherBetter) {
      v = (v - lo) / (hi - lo);
    } else {
      v = (hi - v) / (hi - lo);
    }
  }
}

}  // namespace

RatingMatrix build_rating_matrix(std::span<const std::vector<BlockTag>> tag_subsets,
                                 std::span<const ServerDirectoryEntry> servers,
                                 const IndexServer& index, const RatingWeights& weights,
                                 double preferred_query_size, std::size_t block_size) {
  if (tag_subsets.size() > servers.size()) {
    throw Error(Errc::kNotEnoughServers, std::to_string(tag_subsets.size()) + " subsets, " +
                                             std::to_string(servers.size()) + " servers");
  }
  std::vector<ServerId> ids;
  std::unordered_map<ServerId, std::size_t> column_of;
  ids.reserve(servers.size());
  for (const auto& s : servers) {
    if (!s.alive) throw Error(Errc::kInvalidArgument, "dead server " + std::to_string(s.server_id));
    column_of.emplace(s.server_id, ids.size());
    ids.push_back(s.server_id);
  }

  RatingMatrix m(tag_subsets.size(), ids);
  const std::size_t cols = ids.size();
  std::vector<double> dd(cols), load(cols), query(cols), dist(cols), cap(cols);

  for (std::size_t i = 0; i < tag_subsets.size(); ++i) {
    std::fill(dd.begin(), dd.end(), 0.0);
    for (const auto& tag : tag_subsets[i]) {
      for (const auto& p : index.get_placements(tag)) {
        auto it = column_of.find(p.server_id);
        if (it != column_of.end()) dd[it->second] += 1.0;
      }
    }
    const double subset_bytes = static_cast<double>(tag_subsets[i].size() * block_size);
    const double larger = std::max(subset_bytes, preferred_query_size);
    const double fit = larger > 0 ? 1.0 - std::abs(subset_bytes - preferred_query_size) / larger : 1.0;
    for (std::size_t j = 0; j < cols; ++j) {
      load[j] = servers[j].load;
      query[j] = fit;
      dist[j] = servers[j].distance;
      cap[j] = static_cast<double>(servers[j].remaining_capacity());
      m.criteria(i, j) = {dd[j], load[j], query[j], dist[j], cap[j]};
    }
    normalize(dd, Orientation::kHigherBetter);
    normalize(load, Orientation::kLowerBetter);
    normalize(query, Orientation::kHigherBetter);
    normalize(dist, Orientation::kLowerBetter);
    normalize(cap, Orientation::kHigherBetter);
    for (std::size_t j = 0; j < cols; ++j) {
      m.score(i, j) = weights.dedup * dd[j] + weights.load * load[j] + weights.query * query[j] +
                      weights.distance * dist[j] + weights.capacity * cap[j];
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Assignment

std::vector<std::size_t> stable_assignment(const RatingMatrix& matrix) {
  const std::size_t rows = matrix.rows();
  const std::size_t cols = matrix.cols();
  if (rows > cols) throw Error(Errc::kNotEnoughServers);

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> prefs(rows);
  for (std::size_t i = 0; i < rows; ++i) prefs[i] = matrix.ranked_columns(i);

  // Server j prefers row a over row b.
  auto server_prefers = [&](std::size_t j, std::size_t a, std::size_t b) {
    const double sa = matrix.score(a, j);
    const double sb = matrix.score(b, j);
    return sa != sb ? sa > sb : a < b;
  };

  std::vector<std::size_t> next(rows, 0);
  std::vector<std::size_t> holder(cols, kNone);
  std::vector<std::size_t> match(rows, kNone);
  std::deque<std::size_t> free_rows(rows);
  std::iota(free_rows.begin(), free_rows.end(), std::size_t{0});

  while (!free_rows.empty()) {
    const std::size_t i = free_rows.front();
    free_rows.pop_front();
    // Every row can be matched because rows <= cols.
    const std::size_t j = prefs[i][next[i]++];
    const std::size_t current = holder[j];
    if (current == kNone) {
      holder[j] = i;
      match[i] = j;
    } else if (server_prefers(j, i, current)) {
      holder[j] = i;
      match[i] = j;
      match[current] = kNone;
      free_rows.push_front(current);
    } else {
      free_rows.push_front(i);
    }
  }
  return match;
}

std::vector<ServerId> assign_subsets(const RatingMatrix& matrix) {
  const auto columns = stable_assignment(matrix);
  std::vector<ServerId> out;
  out.reserve(columns.size());
  for (std::size_t c : columns) out.push_back(matrix.server_ids()[c]);
  return out;
}

double total_score(const RatingMatrix& matrix, std::span<const std::size_t> columns) {
  double total = 0;
  for (std::size_t i = 0; i < columns.size(); ++i) total += matrix.score(i, columns[i]);
  return total;
}

std::vector<std::size_t> max_weight_assignment(const RatingMatrix& matrix) {
  const std::size_t rows = matrix.rows();
  const std::size_t cols = matrix.cols();
  if (rows > cols) throw Error(Errc::kNotEnoughServers);
  if (cols > 10) throw Error(Errc::kInvalidArgument, "brute force limited to 10 columns");

  std::vector<std::size_t> best, current(rows);
  double best_total = -std::numeric_limits<double>::infinity();
  std::vector<bool> used(cols, false);

  auto search = [&](auto&& self, std::size_t i, double acc) -> void {
    if (i == rows) {
      if (acc > best_total) {
        best_total = acc;
        best = current;
      }
      return;
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (used[j]) continue;
      used[j] = true;
      current[i] = j;
      self(self, i + 1, acc + matrix.score(i, j));
      used[j] = false;
    }
  };
  search(search, 0, 0.0);
  return best;
}

}  // namespace fasten
