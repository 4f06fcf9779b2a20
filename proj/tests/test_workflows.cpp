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

#include <map>
#include <thread>

#include "fasten/bench.hpp"
#include "fasten/error.hpp"
#include "fasten/random.hpp"
#include "fasten/workflows.hpp"
#include "oracles.hpp"

namespace fasten {
namespace {

constexpr std::size_t kBlock = 256;
constexpr std::size_t kSegment = kBlock - kCipherOverhead;

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::kInvalidArgument;
}

// Plaintext whose cipher blocks are exactly the given segments.
Bytes from_segments(const std::vector<Bytes>& segments) {
  Bytes out;
  for (const auto& s : segments) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<Bytes> segments(std::size_t n, std::uint64_t seed) {
  std::vector<Bytes> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_bytes(kSegment, seed * 1000 + i));
  return out;
}

void expect_faithful_storage(const Engine& engine) {
  for (const auto& tag : engine.index().tags()) {
    for (const auto& p : engine.index().get_placements(tag)) {
      if (!engine.cluster().alive(p.server_id)) continue;
      EXPECT_EQ(BlockTag{sha256(engine.cluster().fetch(p.server_id, p.address))}, tag);
    }
  }
  EXPECT_TRUE(engine.index().integrity_violations().empty());
}

TEST(DiffTags, Definition) {
  const std::vector<BlockTag> a{{sha256("1")}, {sha256("2")}, {sha256("3")}};
  const std::vector<BlockTag> b{{sha256("1")}, {sha256("x")}, {sha256("3")}, {sha256("4")}, {sha256("5")}};
  EXPECT_EQ(diff_tags(a, b).changed_positions, (std::vector<std::size_t>{1, 3, 4}));
  EXPECT_EQ(diff_tags(b, a).changed_positions, (std::vector<std::size_t>{1, 3, 4}));
  EXPECT_TRUE(diff_tags(a, a).changed_positions.empty());
}

TEST(FirstUpload, FreshEightBlocksTwoCopies) {
  Engine engine(20, 1000, 1);
  const auto r = engine.first_upload("alice", "f", from_segments(segments(8, 1)), kBlock, 2, 20);
  EXPECT_EQ(r.n_blocks, 8u);
  EXPECT_EQ(r.new_blocks_stored, 16u);
  EXPECT_EQ(r.dedup_hits, 0u);
  EXPECT_EQ(r.file_dedup, FileDedup::kNew);
  EXPECT_EQ(r.servers_used.size(), 16u);
  EXPECT_EQ(engine.cluster().stored_blocks(), 16u);
  expect_faithful_storage(engine);
}

TEST(FirstUpload, SecondUserIdenticalFile) {
  Engine engine(20, 1000, 1);
  const Bytes p = from_segments(segments(8, 1));
  engine.first_upload("alice", "f", p, kBlock, 2, 20);
  const auto r = engine.first_upload("bob", "g", p, kBlock, 2, 20);
  EXPECT_EQ(r.new_blocks_stored, 0u);
  EXPECT_EQ(r.dedup_hits, 16u);
  EXPECT_EQ(r.file_dedup, FileDedup::kDuplicateUnowned);
  EXPECT_TRUE(engine.index().has_manifest("bob", "g"));
  EXPECT_EQ(engine.cluster().stored_blocks(), 16u);
  EXPECT_EQ(engine.read("bob", "g"), p);
}

TEST(FirstUpload, SharedFirstHalf) {
  Engine engine(20, 1000, 1);
  auto a = segments(10, 1);
  auto b = a;
  const auto fresh = segments(5, 2);
  std::copy(fresh.begin(), fresh.end(), b.begin() + 5);
  engine.first_upload("alice", "a", from_segments(a), kBlock, 1, 20);
  const auto r = engine.first_upload("alice", "b", from_segments(b), kBlock, 1, 20);
  EXPECT_EQ(r.dedup_hits, 5u);
  EXPECT_EQ(r.new_blocks_stored, 5u);
}

TEST(FirstUpload, HigherRedundancyTopsUpSharedBlocks) {
  Engine engine(20, 1000, 1);
  const Bytes p = from_segments(segments(4, 3));
  engine.first_upload("alice", "a", p, kBlock, 1, 20);
  const auto r = engine.first_upload("bob", "b", p, kBlock, 3, 20);
  EXPECT_EQ(r.file_dedup, FileDedup::kDuplicateUnowned);
  EXPECT_EQ(r.placement_demand(), 12u);
  for (const auto& tag : engine.index().get_manifest("bob", "b").ordered_tags) {
    EXPECT_EQ(engine.index().get_placements(tag).size(), 3u);
  }
  EXPECT_EQ(engine.cluster().stored_blocks(), 12u);
  expect_faithful_storage(engine);
}

TEST(FirstUpload, ExistingFileTakesUpdatePath) {
  Engine engine(20, 1000, 1);
  auto segs = segments(6, 4);
  engine.first_upload("alice", "f", from_segments(segs), kBlock, 2, 20);
  segs[2] = random_bytes(kSegment, 99);
  const auto r = engine.first_upload("alice", "f", from_segments(segs), kBlock, 2, 20);
  EXPECT_EQ(r.changed_blocks, 1u);
  EXPECT_EQ(r.new_blocks_stored, 2u);
}

TEST(FirstUpload, InvalidParameters) {
  Engine engine(4, 100, 1);
  EXPECT_EQ(code_of([&] { engine.first_upload("u", "f", Bytes(10), kBlock, 5, 20); }),
            Errc::kInfeasibleRedundancy);
  EXPECT_EQ(code_of([&] { engine.first_upload("u", "f", Bytes(10), kBlock, 0, 20); }), Errc::kInvalidArgument);
  EXPECT_EQ(code_of([&] { engine.first_upload("u", "f", Bytes(10), 8, 1, 20); }), Errc::kInvalidBlockSize);
  EXPECT_EQ(engine.index().block_count(), 0u);
  EXPECT_FALSE(engine.index().has_manifest("u", "f"));
}

TEST(FirstUpload, FullServerFallsBackToNextRated) {
  EngineSettings dedup_only;
  dedup_only.weights = {1, 0, 0, 0, 0};
  Engine engine(3, 10, 1, dedup_only);
  const auto a = segments(2, 1);
  const auto filler = segments(6, 2);
  const auto fresh = segments(6, 3);
  engine.first_upload("u", "a", from_segments(a), kBlock, 1, 1);
  engine.first_upload("u", "filler", from_segments(filler), kBlock, 1, 1);
  ASSERT_EQ(engine.index().server(0).remaining_capacity(), 2u);

  // Both subsets rate server 0 highest; subset 0 wins it but needs 3 slots.
  const std::vector<Bytes> b{a[0], fresh[0], fresh[1], fresh[2], a[1], fresh[3], fresh[4], fresh[5]};
  const auto r = engine.first_upload("u", "b", from_segments(b), kBlock, 1, 2);
  EXPECT_EQ(r.servers_used, (std::set<ServerId>{1, 2}));
  EXPECT_EQ(r.dedup_hits, 2u);
  EXPECT_EQ(r.new_blocks_stored, 6u);
  EXPECT_EQ(engine.index().server(0).remaining_capacity(), 2u);
  EXPECT_EQ(engine.read("u", "b"), from_segments(b));
  expect_faithful_storage(engine);
}

TEST(FirstUpload, NoSpaceRollsBackPartialWrites) {
  EngineSettings capacity_only;
  capacity_only.weights = {0, 0, 0, 0, 1};
  Engine engine(2, 4, 1, capacity_only);
  engine.first_upload("u", "a", from_segments(segments(2, 1)), kBlock, 1, 1);
  ASSERT_EQ(engine.index().server(0).remaining_capacity(), 2u);
  // Subset 0 lands on server 1 and is written; subset 1 cannot fit anywhere.
  EXPECT_EQ(code_of([&] { engine.first_upload("u", "b", from_segments(segments(8, 2)), kBlock, 1, 2); }),
            Errc::kNoSpace);
  EXPECT_EQ(engine.index().block_count(), 2u);
  EXPECT_EQ(engine.cluster().stored_blocks(), 2u);
  EXPECT_EQ(engine.index().server(1).remaining_capacity(), 4u);
  EXPECT_FALSE(engine.index().has_manifest("u", "b"));
  expect_faithful_storage(engine);
}

TEST(Update, IdenticalContent) {
  Engine engine(20, 1000, 1);
  const Bytes p = from_segments(segments(8, 1));
  engine.first_upload("alice", "f", p, kBlock, 3, 20);
  const auto r = engine.update("alice", "f", p);
  EXPECT_EQ(r.changed_blocks, 0u);
  EXPECT_EQ(r.new_blocks_stored, 0u);
  EXPECT_EQ(r.dedup_hits, 0u);
  EXPECT_EQ(r.file_dedup, FileDedup::kDuplicateOwned);
}

TEST(Update, OneBlockChanged) {
  Engine engine(20, 1000, 1);
  auto segs = segments(8, 1);
  engine.first_upload("alice", "f", from_segments(segs), kBlock, 3, 20);
  const auto old_tag = engine.index().get_manifest("alice", "f").ordered_tags[5];
  segs[5] = random_bytes(kSegment, 77);
  const auto r = engine.update("alice", "f", from_segments(segs));
  EXPECT_EQ(r.changed_blocks, 1u);
  EXPECT_EQ(r.new_blocks_stored, 3u);
  EXPECT_TRUE(engine.index().get_placements(old_tag).empty());
  EXPECT_EQ(engine.cluster().stored_blocks(), 24u);
  EXPECT_EQ(engine.read("alice", "f"), from_segments(segs));
  const auto m = engine.index().get_manifest("alice", "f");
  EXPECT_EQ(m.merkle_root, build_merkle(m.ordered_tags).root());
}

TEST(Update, FullChangeMatchesFreshDemand) {
  Engine engine(20, 1000, 1);
  engine.first_upload("alice", "f", from_segments(segments(12, 1)), kBlock, 3, 20);
  const Bytes next = from_segments(segments(12, 2));
  const auto r = engine.update("alice", "f", next);
  Engine fresh(20, 1000, 1);
  const auto baseline = fresh.first_upload("alice", "f", next, kBlock, 3, 20);
  EXPECT_EQ(r.changed_blocks, 12u);
  EXPECT_EQ(r.placement_demand(), baseline.placement_demand());
  EXPECT_EQ(engine.cluster().stored_blocks(), 36u);
}

TEST(Update, GrowAndShrink) {
  Engine engine(20, 1000, 1);
  auto segs = segments(6, 1);
  engine.first_upload("alice", "f", from_segments(segs), kBlock, 2, 20);
  auto longer = segs;
  for (const auto& s : segments(3, 5)) longer.push_back(s);
  auto r = engine.update("alice", "f", from_segments(longer));
  EXPECT_EQ(r.changed_blocks, 3u);
  EXPECT_EQ(engine.read("alice", "f"), from_segments(longer));
  r = engine.update("alice", "f", Bytes(segs[0].begin(), segs[0].begin() + 10));
  EXPECT_EQ(engine.read("alice", "f"), Bytes(segs[0].begin(), segs[0].begin() + 10));
  expect_faithful_storage(engine);
  EXPECT_EQ(engine.cluster().stored_blocks(), 2u);
}

TEST(Update, MissingFile) {
  Engine engine(4, 100, 1);
  EXPECT_EQ(code_of([&] { engine.update("u", "none", Bytes(3)); }), Errc::kNotFound);
}

TEST(Read, SurvivesEveryRMinusOneFailure) {
  for (std::size_t r = 2; r <= 3; ++r) {
    Engine engine(12, 1000, 1);
    const Bytes p = from_segments(segments(12, r));
    const auto report = engine.first_upload("u", "f", p, kBlock, r, 12);
    const std::vector<ServerId> used(report.servers_used.begin(), report.servers_used.end());
    oracle::for_each_combination<ServerId>(used, r - 1, [&](const std::set<ServerId>& failed) {
      engine.apply_failures({failed, 0});
      EXPECT_EQ(engine.read("u", "f"), p);
      engine.heal();
    });
  }
}

TEST(Read, UnrecoverableNamesMissingTag) {
  Engine engine(20, 1000, 1);
  engine.first_upload("u", "f", from_segments(segments(4, 1)), kBlock, 2, 20);
  const auto tag = engine.index().get_manifest("u", "f").ordered_tags[1];
  FailurePlan plan;
  for (const auto& p : engine.index().get_placements(tag)) plan.failed_ids.insert(p.server_id);
  engine.apply_failures(plan);
  try {
    engine.read("u", "f");
    FAIL() << "read succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnrecoverable);
    EXPECT_NE(std::string(e.what()).find(tag.hex()), std::string::npos);
    EXPECT_EQ(std::string(e.what()).rfind("unrecoverable", 0), 0u);
  }
  engine.heal();
  EXPECT_NO_THROW(engine.read("u", "f"));
}

TEST(Read, ConcurrentReaders) {
  Engine engine(20, 1000, 1);
  const Bytes p = from_segments(segments(16, 1));
  engine.first_upload("u", "f", p, kBlock, 2, 20);
  std::vector<std::thread> readers;
  std::atomic<int> ok{0};
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&] {
      for (int i = 0; i < 20; ++i) ok += engine.read("u", "f") == p;
    });
  }
  for (auto& t : readers) t.join();
  EXPECT_EQ(ok.load(), 80);
}

TEST(Remove, SharedBlocksSurviveUntilLastOwner) {
  Engine engine(20, 1000, 1);
  const Bytes p = from_segments(segments(6, 1));
  engine.first_upload("alice", "f", p, kBlock, 2, 20);
  engine.first_upload("bob", "f", p, kBlock, 2, 20);
  engine.remove("alice", "f");
  EXPECT_EQ(engine.read("bob", "f"), p);
  EXPECT_EQ(code_of([&] { engine.read("alice", "f"); }), Errc::kNotFound);
  engine.remove("bob", "f");
  EXPECT_EQ(engine.cluster().stored_blocks(), 0u);
  EXPECT_EQ(engine.index().block_count(), 0u);
  for (const auto& s : engine.index().servers()) EXPECT_TRUE(s.occupied().empty());
  EXPECT_EQ(code_of([&] { engine.remove("bob", "f"); }), Errc::kNotFound);
}

TEST(FileDuplicate, Decisions) {
  Engine engine(20, 1000, 1);
  const Bytes p = from_segments(segments(3, 1));
  const SealedFile sealed = seal(p, kBlock);
  EXPECT_EQ(engine.check_file_duplicate("alice", "f", sealed.file_tag), FileDedup::kNew);
  engine.first_upload("alice", "f", p, kBlock, 1, 20);
  EXPECT_EQ(engine.check_file_duplicate("alice", "f", sealed.file_tag), FileDedup::kDuplicateOwned);
  EXPECT_EQ(engine.check_file_duplicate("bob", "g", sealed.file_tag), FileDedup::kDuplicateUnowned);
  const std::size_t before = engine.cluster().stored_blocks();
  const auto r = engine.first_upload("bob", "g", p, kBlock, 1, 20);
  EXPECT_EQ(r.new_blocks_stored, 0u);
  EXPECT_EQ(engine.cluster().stored_blocks(), before);
}

TEST(FileDuplicate, WholeFileBlockMatchesFileLevelDedup) {
  Engine engine(20, 1000, 1);
  const Bytes p = random_bytes(5000, 3);
  const std::size_t bs = p.size() + kCipherOverhead;
  engine.first_upload("alice", "f", p, bs, 1, 20);
  const auto r = engine.first_upload("bob", "g", p, bs, 1, 20);
  EXPECT_EQ(r.n_blocks, 1u);
  EXPECT_EQ(r.new_blocks_stored, 0u);
}

// Random uploads and updates: every tag keeps at least the redundancy of
// each current owner and never more than the largest ever requested.
TEST(Durability, RedundancyHeldAcrossRandomOperations) {
  Engine engine(12, 5000, 3);
  Rng rng(31);
  const auto pool = segments(40, 9);
  std::map<BlockTag, std::size_t> ever;
  std::vector<std::pair<std::string, std::string>> files;
  for (int op = 0; op < 60; ++op) {
    std::vector<Bytes> segs;
    const std::size_t n = 1 + uniform_below(rng, 12);
    for (std::size_t i = 0; i < n; ++i) segs.push_back(pool[uniform_below(rng, pool.size())]);
    const Bytes p = from_segments(segs);
    std::size_t r;
    if (files.empty() || uniform_below(rng, 2) == 0) {
      r = 1 + uniform_below(rng, 4);
      files.emplace_back("u" + std::to_string(uniform_below(rng, 3)), "f" + std::to_string(op));
      engine.first_upload(files.back().first, files.back().second, p, kBlock, r, 12);
    } else {
      const auto& [u, f] = files[uniform_below(rng, files.size())];
      r = engine.index().get_manifest(u, f).redundancy_factor;
      engine.update(u, f, p);
    }
    for (const auto& t : seal(p, kBlock).tags) ever[t] = std::max(ever[t], r);
    for (const auto& m : engine.index().manifests()) {
      for (const auto& t : m.ordered_tags) {
        const auto copies = engine.index().get_placements(t).size();
        ASSERT_GE(copies, m.redundancy_factor) << "op " << op;
        ASSERT_LE(copies, ever[t]) << "op " << op;
      }
    }
  }
  expect_faithful_storage(engine);
  for (const auto& m : engine.index().manifests()) {
    EXPECT_EQ(m.merkle_root, build_merkle(m.ordered_tags).root());
  }
}

TEST(Persistence, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "fasten_workflow_test";
  std::filesystem::create_directories(dir);
  Engine engine(10, 100, 5);
  const Bytes p = random_bytes(9000, 2);
  engine.first_upload("u", "f", p, 512, 3, 10);
  engine.apply_failures({{4}, 0});
  engine.save(dir / "state");
  auto loaded = Engine::load(dir / "state");
  EXPECT_EQ(loaded->read("u", "f"), p);
  EXPECT_EQ(loaded->index().servers(), engine.index().servers());
  EXPECT_FALSE(loaded->cluster().alive(4));
  EXPECT_EQ(loaded->cluster().directory(), engine.cluster().directory());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace fasten
