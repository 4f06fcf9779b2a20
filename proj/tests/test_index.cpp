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

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <sstream>

#include "fasten/bench.hpp"
#include "fasten/error.hpp"
#include "fasten/index.hpp"
#include "fasten/random.hpp"
#include "fasten/workflows.hpp"

namespace fasten {
namespace {

BlockTag tag_of(std::string_view s) { return {sha256(s)}; }

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::kInvalidArgument;
}

class IndexTest : public ::testing::Test {
 protected:
  void SetUp() override {
    for (ServerId id = 0; id < 4; ++id) index_.add_server({id, 4, 0.1 * id, 10.0 + id});
  }
  IndexServer index_;
};

FileManifest manifest_for(const std::string& user, const std::string& file, std::vector<BlockTag> tags) {
  FileManifest m;
  m.user_id = user;
  m.file_id = file;
  m.ordered_tags = std::move(tags);
  m.block_keys.resize(m.ordered_tags.size());
  m.block_size = 64;
  m.redundancy_factor = 1;
  return m;
}

TEST_F(IndexTest, UnknownTagHasNoRecord) { EXPECT_TRUE(index_.get_placements(tag_of("x")).empty()); }

TEST_F(IndexTest, RecordThenGet) {
  index_.record_placement(tag_of("a"), {1, 0});
  const auto list = index_.get_placements(tag_of("a"));
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0], (Placement{1, 0}));
  EXPECT_TRUE(index_.server(1).is_occupied(0));
}

TEST_F(IndexTest, ThreeDistinctServers) {
  for (ServerId s = 0; s < 3; ++s) index_.record_placement(tag_of("a"), {s, 0});
  const auto list = index_.get_placements(tag_of("a"));
  ASSERT_EQ(list.size(), 3u);
  std::set<ServerId> ids;
  for (const auto& p : list) ids.insert(p.server_id);
  EXPECT_EQ(ids.size(), 3u);
}

TEST_F(IndexTest, SecondCopyOnSameServerRejected) {
  index_.record_placement(tag_of("a"), {2, 0});
  EXPECT_EQ(code_of([&] { index_.record_placement(tag_of("a"), {2, 1}); }), Errc::kRedundantPlacement);
  EXPECT_EQ(index_.get_placements(tag_of("a")).size(), 1u);
  EXPECT_FALSE(index_.server(2).is_occupied(1));
}

TEST_F(IndexTest, RecordErrors) {
  index_.record_placement(tag_of("a"), {0, 0});
  EXPECT_EQ(code_of([&] { index_.record_placement(tag_of("b"), {0, 0}); }), Errc::kSlotConflict);
  EXPECT_EQ(code_of([&] { index_.record_placement(tag_of("b"), {0, 4}); }), Errc::kOutOfRange);
  EXPECT_EQ(code_of([&] { index_.record_placement(tag_of("b"), {9, 0}); }), Errc::kNoSuchServer);
}

TEST_F(IndexTest, RemoveFreesSlot) {
  index_.record_placement(tag_of("a"), {0, 0});
  index_.remove_placement(tag_of("a"), {0, 0});
  EXPECT_TRUE(index_.get_placements(tag_of("a")).empty());
  EXPECT_EQ(index_.allocate_slot(0), 0u);
  EXPECT_EQ(index_.block_count(), 0u);
  EXPECT_EQ(code_of([&] { index_.remove_placement(tag_of("a"), {0, 0}); }), Errc::kNotFound);
}

TEST_F(IndexTest, RemoveOneOfThree) {
  for (ServerId s = 0; s < 3; ++s) index_.record_placement(tag_of("a"), {s, 0});
  index_.remove_placement(tag_of("a"), {1, 0});
  EXPECT_EQ(index_.get_placements(tag_of("a")).size(), 2u);
}

TEST_F(IndexTest, ManifestPutGet) {
  index_.record_placement(tag_of("a"), {0, 0});
  const FileManifest m = manifest_for("alice", "f", {tag_of("a")});
  index_.put_manifest(m);
  EXPECT_EQ(index_.get_manifest("alice", "f"), m);
  EXPECT_EQ(code_of([&] { index_.get_manifest("alice", "nope"); }), Errc::kNotFound);
  EXPECT_EQ(index_.list_files("alice"), std::vector<std::string>{"f"});
}

TEST_F(IndexTest, TwoOwnersIndependentManifests) {
  index_.record_placement(tag_of("a"), {0, 0});
  index_.put_manifest(manifest_for("alice", "f", {tag_of("a")}));
  index_.put_manifest(manifest_for("bob", "g", {tag_of("a")}));
  EXPECT_EQ(index_.ref_count(tag_of("a")), 2u);
  index_.remove_manifest("alice", "f");
  EXPECT_FALSE(index_.has_manifest("alice", "f"));
  EXPECT_TRUE(index_.has_manifest("bob", "g"));
  EXPECT_EQ(index_.ref_count(tag_of("a")), 1u);
}

TEST_F(IndexTest, OverwriteAdjustsRefcounts) {
  index_.put_manifest(manifest_for("alice", "f", {tag_of("a"), tag_of("a")}));
  EXPECT_EQ(index_.ref_count(tag_of("a")), 2u);
  index_.put_manifest(manifest_for("alice", "f", {tag_of("b")}));
  EXPECT_EQ(index_.ref_count(tag_of("a")), 0u);
  EXPECT_EQ(index_.ref_count(tag_of("b")), 1u);
}

TEST_F(IndexTest, SlotAllocation) {
  EXPECT_EQ(index_.allocate_slot(0), 0u);
  for (SlotAddress a = 0; a < 4; ++a) index_.record_placement(tag_of(std::to_string(a)), {0, a});
  EXPECT_EQ(code_of([&] { index_.allocate_slot(0); }), Errc::kNoSpace);
  index_.remove_placement(tag_of("1"), {0, 1});
  EXPECT_EQ(index_.allocate_slot(0), 1u);
  index_.set_alive(0, false);
  EXPECT_EQ(code_of([&] { index_.allocate_slot(0); }), Errc::kUnavailable);
}

TEST(DirectoryEntry, LowestFreeTracksHoles) {
  ServerDirectoryEntry e(0, 10, 0, 0);
  for (SlotAddress a = 0; a < 5; ++a) e.occupy(a);
  EXPECT_EQ(e.lowest_free(), 5u);
  e.release(3);
  e.release(1);
  EXPECT_EQ(e.lowest_free(), 1u);
  e.occupy(1);
  EXPECT_EQ(e.lowest_free(), 3u);
  e.occupy(7);
  e.occupy(3);
  EXPECT_EQ(e.lowest_free(), 5u);
  EXPECT_EQ(e.remaining_capacity(), 4u);
}

TEST_F(IndexTest, SnapshotIdempotent) {
  index_.record_placement(tag_of("a"), {0, 0});
  index_.record_placement(tag_of("a"), {3, 2});
  index_.put_manifest(manifest_for("alice", "f", {tag_of("a")}));
  index_.set_alive(2, false);
  std::ostringstream first;
  index_.write_snapshot(first);
  IndexServer copy;
  std::istringstream in(first.str());
  copy.read_snapshot(in);
  std::ostringstream second;
  copy.write_snapshot(second);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(copy.get_manifest("alice", "f"), index_.get_manifest("alice", "f"));
  EXPECT_FALSE(copy.server(2).alive);
}

TEST_F(IndexTest, EmptySnapshotGivesEmptyIndex) {
  std::istringstream in("");
  index_.read_snapshot(in);
  EXPECT_EQ(index_.server_count(), 0u);
  EXPECT_EQ(index_.block_count(), 0u);
  EXPECT_TRUE(index_.manifests().empty());
}

TEST_F(IndexTest, CorruptSnapshotLeavesStateUntouched) {
  index_.record_placement(tag_of("a"), {0, 0});
  std::ostringstream good;
  index_.write_snapshot(good);
  for (const std::string bad : {std::string("{\"kind\":\"mystery\"}\n"), std::string("not json\n"),
                                good.str() + "{\"kind\":\"server\",\"id\":0}\n"}) {
    std::istringstream in(bad);
    EXPECT_EQ(code_of([&] { index_.read_snapshot(in); }), Errc::kCorruptSnapshot) << bad;
    EXPECT_EQ(index_.block_count(), 1u);
    EXPECT_EQ(index_.server_count(), 4u);
  }
}

TEST_F(IndexTest, SnapshotRejectsDanglingManifest) {
  index_.put_manifest(manifest_for("alice", "f", {tag_of("ghost")}));
  std::ostringstream out;
  index_.write_snapshot(out);
  IndexServer other;
  std::istringstream in(out.str());
  try {
    other.read_snapshot(in);
    FAIL() << "dangling manifest accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kCorruptSnapshot);
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
}

// 100 random engine operations, then snapshot round trip with every
// invariant re-checked on the restored copy.
TEST(IndexSnapshot, RoundTripAfterRandomOperations) {
  Engine engine(12, 500, 4);
  Rng rng(2024);
  std::vector<std::pair<std::string, std::string>> live;
  for (int op = 0; op < 100; ++op) {
    const auto kind = uniform_below(rng, 3);
    if (kind == 0 || live.empty()) {
      const std::string user = "u" + std::to_string(uniform_below(rng, 3));
      const std::string file = "f" + std::to_string(op);
      const Bytes data = random_bytes(uniform_below(rng, 4000), uniform_below(rng, 4));
      engine.first_upload(user, file, data, 256, 1 + uniform_below(rng, 3), 12);
      live.emplace_back(user, file);
    } else if (kind == 1) {
      const auto& [user, file] = live[uniform_below(rng, live.size())];
      engine.update(user, file, random_bytes(uniform_below(rng, 4000), rng()));
    } else {
      const std::size_t i = uniform_below(rng, live.size());
      engine.remove(live[i].first, live[i].second);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
    }
    ASSERT_TRUE(engine.index().integrity_violations().empty()) << "after op " << op;
  }
  std::ostringstream first;
  engine.index().write_snapshot(first);
  IndexServer copy;
  std::istringstream in(first.str());
  copy.read_snapshot(in);
  EXPECT_TRUE(copy.integrity_violations().empty());
  EXPECT_EQ(copy.tags(), engine.index().tags());
  EXPECT_EQ(copy.manifests(), engine.index().manifests());
  EXPECT_EQ(copy.servers(), engine.index().servers());
  std::ostringstream second;
  copy.write_snapshot(second);
  EXPECT_EQ(first.str(), second.str());
}

TEST(IndexSnapshot, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "fasten_index_test";
  std::filesystem::create_directories(dir);
  IndexServer a;
  a.add_server({0, 8, 0.5, 3});
  a.record_placement(tag_of("z"), {0, 5});
  a.snapshot(dir / "snap");
  IndexServer b;
  b.restore(dir / "snap");
  EXPECT_EQ(b.get_placements(tag_of("z")), a.get_placements(tag_of("z")));
  EXPECT_EQ(code_of([&] { b.restore(dir / "missing"); }), Errc::kNotFound);
  std::filesystem::remove_all(dir);
}

// Mean latency of `ops` lookups plus inserts and deletes on an index that
// already holds `n` tags.
double per_op_ns(std::size_t n) {
  IndexServer index;
  index.add_server({0, n + 1000, 0, 0});
  for (std::size_t i = 0; i < n; ++i) index.record_placement({sha256(std::to_string(i))}, {0, i});
  std::vector<BlockTag> probes;
  for (std::size_t i = 0; i < 1000; ++i) probes.push_back({sha256("probe" + std::to_string(i))});
  double best = 1e300;
  for (int rep = 0; rep < 5; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < probes.size(); ++i) {
      index.record_placement(probes[i], {0, n + i});
      (void)index.get_placements(probes[(i * 7) % (i + 1)]);
    }
    for (std::size_t i = 0; i < probes.size(); ++i) index.remove_placement(probes[i], {0, n + i});
    const std::chrono::duration<double, std::nano> took = std::chrono::steady_clock::now() - start;
    best = std::min(best, took.count() / (3.0 * static_cast<double>(probes.size())));
  }
  return best;
}

TEST(IndexGrowth, TenfoldEntriesUnderThreefoldLatency) {
  const double small = per_op_ns(10000);
  const double large = per_op_ns(100000);
  EXPECT_LT(large, 3.0 * small) << "small=" << small << "ns large=" << large << "ns";
}

}  // namespace
}  // namespace fasten
