#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "mvp/client.hpp"
#include "mvp/error.hpp"
#include "mvp/server.hpp"

using namespace mvp;

namespace {

Timestamp random_ts(Rng& rng) {
  return {static_cast<Seq>(rng.below(5)), static_cast<Seq>(rng.below(5)), static_cast<Seq>(rng.below(5))};
}

Location random_loc(Rng& rng, const TreeGeometry& g) {
  if (rng.below(4) == 0) return Location::stash();
  return {static_cast<std::uint32_t>(1 + rng.below(g.node_count())),
          static_cast<std::uint32_t>(rng.below(g.bucket_size))};
}

Block make_block(Address a, Timestamp ts) {
  return Block{a, Bytes(8, static_cast<std::uint8_t>(a + 3 * ts.a)), ts};
}

// Single replica behind the client interface, holding the key shares itself.
class LocalFacade : public ServerFacade {
 public:
  LocalFacade(ServerConfig cfg, const Key& key, std::size_t n, bool initialize = true)
      : key_(key), server_(cfg, initialize ? prepare_zero_setup(cfg.geom, key, n) : empty(key)) {}

  KeyMaterial fetch_key() override { return {{share()}, key_commitment(key_)}; }
  GetPmResult get_pm(const GetPmRequest& r) override {
    ++pm_calls;
    return {server_.get_pm(r), {share()}};
  }
  GetPsReply get_ps(const GetPsRequest& r) override { return server_.get_ps(r); }
  EvictReply evict(const EvictRequest& r) override { return server_.evict(r); }

  OramServer& server() { return server_; }
  int pm_calls = 0;

 private:
  static SetupImage empty(const Key& key) {
    SetupImage s;
    s.key_commitment = key_commitment(key);
    return s;
  }
  KeyShare share() const {
    Rng rng(0);
    return share_key(key_, 1, 0, rng)[0];
  }
  Key key_;
  OramServer server_;
};

Key test_key() {
  Rng rng(99);
  return random_key(rng);
}

}  // namespace

TEST(Consolidate, HighestTimestampWins) {
  std::vector<PathMap> h(2);
  h[0].entries = {{7, {3, 0}, {1, 1, 1}}};
  h[1].entries = {{7, Location::stash(), {1, 2, 2}}};
  const auto pm = consolidate_path_maps(h, fresh_position_map(10));
  EXPECT_EQ(pm[7].loc, Location::stash());
  EXPECT_EQ(pm[7].ts, (Timestamp{1, 2, 2}));
  EXPECT_EQ(pm[3], PmEntry{});
}

TEST(Consolidate, EmptyHistoryKeepsSentinels) {
  const auto pm = consolidate_path_maps({}, fresh_position_map(6));
  for (const auto& e : pm) {
    EXPECT_TRUE(e.loc.is_stash());
    EXPECT_TRUE(e.ts.is_sentinel());
  }
}

TEST(Consolidate, MatchesFlattenedMaxScan) {
  const TreeGeometry g{3, 2, 8};
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<PathMap> h(rng.below(6));
    for (auto& m : h) {
      std::vector<Address> addrs(n);
      for (Address a = 0; a < n; ++a) addrs[a] = a;
      for (std::size_t k = rng.below(n + 1); k > 0; --k) {
        const auto a = addrs[rng.below(addrs.size())];
        addrs.erase(std::find(addrs.begin(), addrs.end(), a));
        m.entries.push_back({a, random_loc(rng, g), random_ts(rng)});
      }
    }
    std::vector<PathMapEntry> flat;
    for (const auto& m : h) flat.insert(flat.end(), m.entries.begin(), m.entries.end());
    const auto pm = consolidate_path_maps(h, fresh_position_map(n));
    for (Address a = 0; a < n; ++a) {
      PmEntry best;
      for (const auto& e : flat) {
        if (e.addr == a && e.ts > best.ts) best = {e.loc, e.ts};
      }
      EXPECT_EQ(pm[a], best);
    }
  }
}

TEST(Consolidate, RejectsAddressBeyondN) {
  PathMap m;
  m.entries = {{5, Location::stash(), {0, 0, 0}}};
  auto pm = fresh_position_map(5);
  EXPECT_THROW(apply_path_map(pm, m), ProtocolError);
}

TEST(Merge, KeepsExactTimestampOnly) {
  const TreeGeometry g{2, 2, 8};
  MultiVersionPath p{0, std::vector<std::vector<Block>>(g.path_slots())};
  const Location slot = g.path_slot(0, 3);
  p.slots[3] = {make_block(4, {1, 1, 1}), make_block(4, {1, 3, 3})};
  auto pm = fresh_position_map(6);
  pm[4] = {slot, {1, 3, 3}};
  const auto w = merge_path_stashes(p, {}, pm, g);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w.at(4).ts, (Timestamp{1, 3, 3}));
}

TEST(Merge, StashBlockWithTreeEntryIsExcluded) {
  const TreeGeometry g{2, 2, 8};
  MultiVersionPath p{1, std::vector<std::vector<Block>>(g.path_slots())};
  Stash s;
  s.blocks = {make_block(2, {0, 2, 2})};
  auto pm = fresh_position_map(4);
  pm[2] = {g.path_slot(1, 0), {0, 2, 2}};
  EXPECT_TRUE(merge_path_stashes(p, std::vector<Stash>{s}, pm, g).empty());
  pm[2].loc = Location::stash();
  EXPECT_EQ(merge_path_stashes(p, std::vector<Stash>{s}, pm, g).size(), 1u);
}

TEST(Merge, MatchesBruteForceFilter) {
  const TreeGeometry g{3, 2, 8};
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 10;
    const LeafId leaf = static_cast<LeafId>(rng.below(g.leaf_count()));
    MultiVersionPath p{leaf, std::vector<std::vector<Block>>(g.path_slots())};
    std::vector<std::pair<Location, Block>> all;
    for (std::size_t pos = 0; pos < g.path_slots(); ++pos) {
      for (auto k = rng.below(3); k > 0; --k) {
        auto b = make_block(static_cast<Address>(rng.below(n)), random_ts(rng));
        p.slots[pos].push_back(b);
        all.push_back({g.path_slot(leaf, pos), b});
      }
    }
    std::vector<Stash> stashes(rng.below(3));
    for (auto& s : stashes) {
      for (Address a = 0; a < n; ++a) {
        if (rng.below(3) == 0) {
          s.blocks.push_back(make_block(a, random_ts(rng)));
          all.push_back({Location::stash(), s.blocks.back()});
        }
      }
    }
    PositionMap pm = fresh_position_map(n);
    for (Address a = 0; a < n; ++a) {
      // Point pm at a stored version half of the time, elsewhere otherwise.
      std::vector<std::size_t> cand;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].second.addr == a) cand.push_back(i);
      }
      if (!cand.empty() && rng.below(2)) {
        const auto& [loc, b] = all[cand[rng.below(cand.size())]];
        pm[a] = {loc, b.ts};
      } else {
        pm[a] = {random_loc(rng, g), random_ts(rng)};
      }
    }
    const auto w = merge_path_stashes(p, stashes, pm, g);
    std::map<Address, Block> expect;
    for (const auto& [loc, b] : all) {
      if (pm[b.addr].loc == loc && pm[b.addr].ts == b.ts) expect.emplace(b.addr, b);
    }
    ASSERT_EQ(w.size(), expect.size());
    for (const auto& [a, b] : expect) {
      EXPECT_EQ(w.at(a).ts, b.ts);
      EXPECT_EQ(w.at(a).data, b.data);
    }
  }
}

TEST(Populate, FirstAccessGoesToStash) {
  const TreeGeometry g{3, 4, 8};
  Rng rng(3);
  WorkingSet w;
  const Seq seq = 5;
  w.emplace(0, make_block(0, {seq, seq, seq}));
  const auto r = populate_path(w, 2, 0, fresh_position_map(4), seq, g, rng);
  for (const auto& s : r.path.slots) EXPECT_FALSE(s);
  ASSERT_EQ(r.stash.blocks.size(), 1u);
  EXPECT_EQ(r.stash.blocks[0].addr, 0u);
  ASSERT_EQ(r.map.entries.size(), 1u);
  EXPECT_EQ(r.map.entries[0].addr, 0u);
  EXPECT_TRUE(r.map.entries[0].loc.is_stash());
  EXPECT_EQ(r.map.entries[0].ts, (Timestamp{seq, seq, seq}));
}

TEST(Populate, SingleSlotBucketKeepsOrSwapsToStash) {
  const TreeGeometry g{2, 1, 8};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    auto pm = fresh_position_map(3);
    const Location slot = g.path_slot(0, 1);
    pm[1] = {slot, {0, 0, 0}};
    WorkingSet w;
    w.emplace(1, make_block(1, {0, 0, 0}));
    w.emplace(2, make_block(2, {4, 4, 4}));  // accessed, from the stash
    const auto r = populate_path(w, 0, 2, pm, 4, g, rng);
    // Phase 3 may move it to another touched slot on the same path.
    const bool kept = std::any_of(r.path.slots.begin(), r.path.slots.end(),
                                  [](const auto& b) { return b && b->addr == 1; });
    const bool stashed = std::any_of(r.stash.blocks.begin(), r.stash.blocks.end(),
                                     [](const Block& b) { return b.addr == 1; });
    EXPECT_NE(kept, stashed);
    EXPECT_TRUE(std::any_of(r.stash.blocks.begin(), r.stash.blocks.end(),
                            [](const Block& b) { return b.addr == 2; }));
  }
}

TEST(Populate, ConservationAndPhaseContracts) {
  const TreeGeometry g{4, 3, 8};
  const std::size_t n = 40;
  Rng rng(4);
  // Shadow state: every address lives in exactly one place.
  PositionMap pm = fresh_position_map(n);
  std::map<Location, Block> tree;
  std::map<Address, Block> stash;
  for (Seq seq = 1; seq <= 10000; ++seq) {
    const Address addr = static_cast<Address>(rng.below(n));
    const LeafId leaf = pm[addr].loc.is_stash() ? static_cast<LeafId>(rng.below(g.leaf_count()))
                                                : random_path_through(pm[addr].loc, g, rng);
    MultiVersionPath path{leaf, std::vector<std::vector<Block>>(g.path_slots())};
    for (std::size_t pos = 0; pos < g.path_slots(); ++pos) {
      auto it = tree.find(g.path_slot(leaf, pos));
      if (it != tree.end()) path.slots[pos].push_back(it->second);
    }
    Stash s;
    for (auto& [a, b] : stash) s.blocks.push_back(b);
    auto w = merge_path_stashes(path, std::vector<Stash>{s}, pm, g);
    std::multiset<Address> before;
    for (auto& [a, b] : w) before.insert(a);
    if (!w.count(addr)) {
      w.emplace(addr, make_block(addr, {seq, seq, seq}));
      before.insert(addr);
    } else {
      w.at(addr).ts = {seq, seq, seq};
    }
    const std::size_t stash_before = stash.size();
    const auto r = populate_path(w, leaf, addr, pm, seq, g, rng);

    std::multiset<Address> after;
    std::size_t path_blocks = 0;
    for (std::size_t pos = 0; pos < g.path_slots(); ++pos) {
      const auto loc = g.path_slot(leaf, pos);
      tree.erase(loc);
      if (const auto& b = r.path.slots[pos]) {
        after.insert(b->addr);
        tree.emplace(loc, *b);
        ++path_blocks;
      }
    }
    stash.clear();
    for (const auto& b : r.stash.blocks) {
      after.insert(b.addr);
      stash.emplace(b.addr, b);
    }
    ASSERT_EQ(before, after) << "seq " << seq;
    ASSERT_TRUE(r.map.has_unique_addresses());
    ASSERT_TRUE(r.stash.has_unique_addresses());
    ASSERT_TRUE(stash.count(addr));
    // At most Z blocks leave the stash for the path per access.
    std::size_t from_stash = 0;
    for (const auto& b : r.path.slots) {
      if (b && pm[b->addr].loc.is_stash() && b->addr != addr) ++from_stash;
    }
    EXPECT_LE(from_stash, g.bucket_size);
    EXPECT_LE(stash.size(), stash_before + g.bucket_size + 1);
    // Placed blocks appear in decreasing a along slot order.
    Seq last_a = std::numeric_limits<Seq>::max();
    for (const auto& b : r.path.slots) {
      if (!b) continue;
      EXPECT_LE(b->ts.a, last_a);
      last_a = b->ts.a;
    }
    apply_path_map(pm, r.map);
    for (const auto& [loc, b] : tree) ASSERT_EQ(pm[b.addr], (PmEntry{loc, b.ts}));
    for (const auto& [a, b] : stash) ASSERT_EQ(pm[a], (PmEntry{Location::stash(), b.ts}));
    (void)path_blocks;
  }
}

TEST(Client, WriteThenRead) {
  const TreeGeometry g{4, 4, 8};
  const Key key = test_key();
  LocalFacade f(ServerConfig{g}, key, 20);
  OramClient c(0, ClientConfig{g, 20, 0}, 1);
  const Bytes x{'X', 1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(c.access({OpType::kWrite, 3, x}, f), x);
  EXPECT_EQ(c.result().ts, (Timestamp{1, 1, 1}));
  EXPECT_EQ(c.access({OpType::kRead, 3, {}}, f), x);
  EXPECT_EQ(c.result().ts.v, 1);
  EXPECT_EQ(c.result().ts.a, 2);
  EXPECT_EQ(c.result().server_ops, 3u);
}

TEST(Client, NeverWrittenReadsZero) {
  const TreeGeometry g{4, 4, 8};
  const Key key = test_key();
  for (bool init : {true, false}) {
    LocalFacade f(ServerConfig{g}, key, 20, init);
    OramClient c(0, ClientConfig{g, 20, 0}, 1);
    EXPECT_EQ(c.access({OpType::kRead, 11, {}}, f), Bytes(8, 0));
  }
}

TEST(Client, SequentialRegisterSemantics) {
  const TreeGeometry g{5, 4, 8};
  const std::size_t n = 63;
  const Key key = test_key();
  LocalFacade f(ServerConfig{g}, key, n);
  OramClient c(0, ClientConfig{g, n, 0, 16}, 2);
  std::vector<Bytes> shadow(n, Bytes(8, 0));
  Rng rng(5);
  for (int i = 0; i < 3000; ++i) {
    const Address a = static_cast<Address>(rng.below(n));
    if (rng.below(2)) {
      Bytes d(8);
      for (auto& b : d) b = static_cast<std::uint8_t>(rng.next());
      shadow[a] = d;
      EXPECT_EQ(c.access({OpType::kWrite, a, d}, f), d);
    } else {
      EXPECT_EQ(c.access({OpType::kRead, a, {}}, f), shadow[a]);
    }
  }
  EXPECT_GT(c.compactions(), 0u);
}

TEST(Client, RejectsMalformedRequests) {
  const TreeGeometry g{3, 4, 8};
  OramClient c(0, ClientConfig{g, 10, 0}, 1);
  EXPECT_THROW(c.begin({OpType::kWrite, 1, Bytes(3)}), InvalidArgument);
  EXPECT_THROW(c.begin({OpType::kRead, 10, {}}), InvalidArgument);
  EXPECT_THROW(c.begin({OpType::kRead, 1, Bytes(8)}), InvalidArgument);
  c.begin({OpType::kRead, 1, {}});
  EXPECT_THROW(c.begin({OpType::kRead, 1, {}}), InvalidArgument);
}

TEST(Client, StepsFollowFixedOrder) {
  const TreeGeometry g{3, 4, 8};
  const Key key = test_key();
  LocalFacade f(ServerConfig{g}, key, 10);
  OramClient c(0, ClientConfig{g, 10, 0}, 1);
  c.begin({OpType::kRead, 4, {}});
  std::vector<OpKind> ops;
  while (c.in_progress()) ops.push_back(c.step(f).op);
  EXPECT_EQ(ops, (std::vector<OpKind>{OpKind::kGetPm, OpKind::kGetPs, OpKind::kEvict}));
}

TEST(StrongClient, TauFollowsRegistry) {
  const TreeGeometry g{3, 4, 8};
  const Key key = test_key();
  const unsigned sigma = 2;
  for (unsigned others = 0; others <= sigma + 2; ++others) {
    ServerConfig sc{g, 10, true, sigma};
    LocalFacade f(sc, key, 10);
    std::vector<std::unique_ptr<OramClient>> cs;
    ClientConfig cc{g, 10, 0, 64, true, sigma};
    // Other clients register the same address and stay after their first getPM.
    for (unsigned i = 0; i < others; ++i) {
      cs.push_back(std::make_unique<OramClient>(i + 1, cc, 10 + i));
      cs.back()->begin({OpType::kRead, 5, {}});
      cs.back()->step(f);
    }
    OramClient c(0, cc, 1);
    c.begin({OpType::kRead, 5, {}});
    unsigned ops = 0;
    while (c.in_progress()) {
      c.step(f);
      ++ops;
    }
    EXPECT_EQ(c.result().tau_real, std::min(sigma, others));
    EXPECT_EQ(ops, 3 * (sigma + 1));
    EXPECT_EQ(c.result().rounds, sigma + 1);
  }
}
