#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "mvp/error.hpp"
#include "mvp/history.hpp"
#include "mvp/leafdist.hpp"
#include "mvp/simulation.hpp"
#include "mvp/zipf.hpp"

using namespace mvp;

namespace {

double sum(const Distribution& d) { return std::accumulate(d.begin(), d.end(), 0.0); }

// Pr(k distinct) for c uniform draws over m leaves, by enumerating all m^c sequences.
Distribution enumerate_uniform(std::uint64_t m, unsigned c) {
  Distribution out(c, 0);
  std::uint64_t total = 1;
  for (unsigned i = 0; i < c; ++i) total *= m;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t x = code, i = 0; i < c; ++i, x /= m) seen.insert(x % m);
    out[seen.size() - 1] += 1.0 / static_cast<double>(total);
  }
  return out;
}

std::vector<double> direct_level_weights(unsigned L, double alpha, std::uint64_t N) {
  std::vector<double> w(L + 1, 0);
  double z = 0;
  for (std::uint64_t j = 1; j <= N; ++j) z += std::pow(static_cast<double>(j), -alpha);
  for (std::uint64_t j = 1; j <= N; ++j) {
    const auto d = static_cast<unsigned>(std::bit_width(j) - 1);
    if (d <= L) w[d] += std::pow(static_cast<double>(j), -alpha) / z;
  }
  return w;
}

struct Ev {
  EventKind kind;
  ClientId client;
  OpType op;
  Address addr;
  std::string value;
  std::uint64_t pos;
};

AccessHistory make(const std::vector<Ev>& evs) {
  AccessHistory h;
  for (const auto& e : evs) {
    HistoryEvent x;
    x.kind = e.kind;
    x.client = e.client;
    x.op = e.op;
    x.addr = e.addr;
    if (!e.value.empty()) x.value = e.value;
    x.pos = e.pos;
    h.events.push_back(x);
  }
  return h;
}

constexpr auto I = EventKind::kInv;
constexpr auto R = EventKind::kRep;
constexpr auto W = OpType::kWrite;
constexpr auto Rd = OpType::kRead;

}  // namespace

TEST(Zipf, MatchesPmf) {
  for (double alpha : {0.0, 1.0, 2.0}) {
    ZipfSampler z(alpha, 20);
    double total = 0;
    for (std::size_t r = 1; r <= 20; ++r) {
      total += z.pmf(r);
      EXPECT_NEAR(z.pmf(r), std::pow(r, -alpha) / [&] {
        double s = 0;
        for (int j = 1; j <= 20; ++j) s += std::pow(j, -alpha);
        return s;
      }(), 1e-12);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    Rng rng(1);
    std::vector<double> counts(21, 0);
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) counts[z.sample(rng)] += 1;
    EXPECT_EQ(counts[0], 0);
    double chi = 0;
    for (std::size_t r = 1; r <= 20; ++r) {
      const double e = draws * z.pmf(r);
      chi += (counts[r] - e) * (counts[r] - e) / e;
    }
    EXPECT_LT(chi, 43.82);  // chi-square, 19 dof, 0.999 quantile
  }
  EXPECT_THROW(ZipfSampler(-1, 10), InvalidArgument);
  EXPECT_THROW(ZipfSampler(1, 0), InvalidArgument);
}

TEST(DistX, Examples) {
  EXPECT_EQ(dist_X(5, 1), Distribution{1.0});
  const auto d = dist_X(1, 2);
  EXPECT_NEAR(d[0], 0.5, 1e-15);
  EXPECT_NEAR(d[1], 0.5, 1e-15);
}

TEST(DistX, MatchesEnumeration) {
  for (unsigned L = 1; L <= 3; ++L) {
    for (unsigned c = 1; c <= 5; ++c) {
      const auto a = dist_X(L, c), b = enumerate_uniform(std::uint64_t{1} << L, c);
      ASSERT_EQ(a.size(), b.size());
      for (unsigned k = 0; k < c; ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
    }
  }
}

TEST(DistX, MonteCarloAgreement) {
  McOptions opt;
  opt.seed = 3;
  const auto a = dist_X(3, 4), m = mc_dist_X_serial(3, 4, opt);
  for (unsigned k = 0; k < 4; ++k) EXPECT_NEAR(a[k], m[k], 0.005);
}

TEST(DistY, DirectSimulationAgreement) {
  // Oracle: draw a rank from the Zipf law, take its level, then c leaves
  // uniformly under one node of that level.
  const unsigned L = 2, c = 2;
  const std::uint64_t N = 7;
  ZipfSampler z(1.0, N);
  Rng rng(17);
  Distribution est(c, 0);
  const int trials = 1000000;
  for (int t = 0; t < trials; ++t) {
    const auto rank = z.sample(rng);
    const unsigned d = static_cast<unsigned>(std::bit_width(rank) - 1);
    const std::uint64_t leaves = std::uint64_t{1} << (L - d);
    std::set<std::uint64_t> seen;
    for (unsigned i = 0; i < c; ++i) seen.insert(rng.below(leaves));
    est[seen.size() - 1] += 1.0 / trials;
  }
  const auto a = dist_Y(L, c, 1.0, N);
  for (unsigned k = 0; k < c; ++k) EXPECT_NEAR(a[k], est[k], 0.005);
}

TEST(DistY, LargeAlphaApproachesX) {
  const auto x = dist_X(4, 5);
  const auto y = dist_Y(4, 5, 200.0, 31);
  EXPECT_LT(statistical_distance(x, y), 1e-12);
}

TEST(LevelWeights, SumAndDirectFormula) {
  for (unsigned L : {3u, 8u, 12u}) {
    const std::uint64_t N = (std::uint64_t{2} << L) - 1;
    for (double alpha : {1e-6, 0.5, 1.0, 2.0}) {
      const auto w = level_weights_serial(L, alpha, N);
      EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
      const auto o = direct_level_weights(L, alpha, N);
      for (unsigned d = 0; d <= L; ++d) EXPECT_NEAR(w[d], o[d], 1e-12);
    }
  }
}

TEST(LevelWeights, SerialAndParallelAgreeBitwise) {
  for (unsigned L : {10u, 17u}) {
    const std::uint64_t N = (std::uint64_t{2} << L) - 1;
    EXPECT_EQ(level_weights_serial(L, 0.90436, N), level_weights_parallel(L, 0.90436, N));
  }
}

TEST(Distributions, SumToOneOnWideGrid) {
  for (unsigned L : {17u, 25u}) {
    const std::uint64_t N = (std::uint64_t{2} << L) - 1;
    const auto w = level_weights_parallel(L, 1.0, N);
    for (unsigned c = 1; c <= 50; c += 7) {
      EXPECT_NEAR(sum(dist_X(L, c)), 1.0, 1e-9);
      EXPECT_NEAR(sum(dist_Y_weighted(L, c, w)), 1.0, 1e-9);
    }
  }
}

TEST(StatisticalDistance, Cases) {
  const Distribution p{0.2, 0.5, 0.3};
  EXPECT_EQ(statistical_distance(p, p), 0.0);
  EXPECT_EQ(statistical_distance({1, 0}, {0, 1}), 1.0);
  EXPECT_THROW(statistical_distance({1}, {0.5, 0.5}), InvalidArgument);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    Distribution a(6), b(6);
    for (auto& x : a) x = rng.unit();
    for (auto& x : b) x = rng.unit();
    const double sa = sum(a), sb = sum(b);
    double half_l1 = 0;
    for (int k = 0; k < 6; ++k) {
      a[k] /= sa;
      b[k] /= sb;
    }
    for (int k = 0; k < 6; ++k) half_l1 += std::fabs(a[k] - b[k]);
    EXPECT_NEAR(statistical_distance(a, b), half_l1 / 2, 1e-15);
  }
}

TEST(Mu, Cases) {
  const unsigned L = 10;
  const std::uint64_t N = (std::uint64_t{2} << L) - 1;
  EXPECT_EQ(mu(N, 5, 1.0, 10, L), 0.0);
  EXPECT_EQ(mu(N, 11, 1.0, 10, L), 0.0);
  EXPECT_GT(mu(N, 12, 1.0, 10, L), 0.0);
  EXPECT_NEAR(mu(N, 7, 1.0, 0, L), statistical_distance(dist_X(L, 7), dist_Y(L, 7, 1.0, N)), 1e-15);
  EXPECT_EQ(mu(N, 12, 1.0, 10, L), mu(N, 2, 1.0, 0, L));
  for (unsigned c = 1; c <= 30; c += 3) {
    double prev = 2;
    for (unsigned sigma = 0; sigma <= 30; sigma += 5) {
      const double m = mu(N, c, 1e-6, sigma, L);
      EXPECT_LE(m, prev + 1e-15);
      prev = m;
    }
  }
}

TEST(TvdGrid, MatchesMuAndKernelsAgree) {
  std::vector<TvdCell> cells;
  for (unsigned L : {3u, 9u})
    for (double alpha : {0.5, 1.0, 1.6})
      for (unsigned sigma : {0u, 2u})
        for (unsigned c : {1u, 2u, 3u, 4u, 7u}) cells.push_back({L, c, alpha, sigma, (1u << (L + 1)) - 1});
  auto serial = cells;
  auto parallel = cells;
  compute_tvd_serial(serial);
  compute_tvd_parallel(parallel);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    EXPECT_EQ(serial[i].delta, parallel[i].delta);
    EXPECT_DOUBLE_EQ(serial[i].delta, mu(c.N, c.c, c.alpha, c.sigma, c.L));
    if (c.c <= c.sigma + 1) EXPECT_EQ(serial[i].delta, 0.0);
  }
}

TEST(MonteCarlo, SerialAndParallelIdentical) {
  McOptions opt;
  opt.samples = 200000;
  opt.seed = 9;
  EXPECT_EQ(mc_dist_X_serial(4, 5, opt), mc_dist_X_parallel(4, 5, opt));
  const auto w = level_weights_serial(4, 1.0, 31);
  EXPECT_EQ(mc_dist_Y_serial(4, 5, w, opt), mc_dist_Y_parallel(4, 5, w, opt));
}

TEST(Checker, ReadAfterCompletedWriteSeesIt) {
  const auto x = value_digest(Bytes(8, 1)), zero = value_digest(Bytes(8, 0));
  auto good = make({{I, 0, W, 3, x, 1}, {R, 0, W, 3, x, 3}, {I, 1, Rd, 3, "", 4}, {R, 1, Rd, 3, x, 6}});
  EXPECT_TRUE(check_history(good, zero).legal);
  auto bad = make({{I, 0, W, 3, x, 1}, {R, 0, W, 3, x, 3}, {I, 1, Rd, 3, "", 4}, {R, 1, Rd, 3, zero, 6}});
  const auto v = check_history(bad, zero);
  EXPECT_FALSE(v.legal);
  EXPECT_FALSE(v.witness.empty());
}

TEST(Checker, ConcurrentWriteNotYetPreceding) {
  const auto x = value_digest(Bytes(8, 1)), zero = value_digest(Bytes(8, 0));
  // The read's getPM (2) comes before the write's evict (5): the old value is legal.
  auto h = make({{I, 0, W, 3, x, 1}, {I, 1, Rd, 3, "", 2}, {R, 1, Rd, 3, zero, 4}, {R, 0, W, 3, x, 5}});
  EXPECT_TRUE(check_history(h, zero).legal);
  // Returning the concurrent write's value is not allowed by the sequence rule.
  auto h2 = make({{I, 0, W, 3, x, 1}, {I, 1, Rd, 3, "", 2}, {R, 1, Rd, 3, x, 4}, {R, 0, W, 3, x, 5}});
  EXPECT_FALSE(check_history(h2, zero).legal);
}

TEST(Checker, LatestPrecedingWriteWins) {
  const auto x = value_digest(Bytes(8, 1)), y = value_digest(Bytes(8, 2)), zero = value_digest(Bytes(8, 0));
  auto h = make({{I, 0, W, 1, x, 1},
                 {I, 1, W, 1, y, 2},
                 {R, 0, W, 1, x, 3},
                 {R, 1, W, 1, y, 4},
                 {I, 2, Rd, 1, "", 5},
                 {R, 2, Rd, 1, y, 6}});
  EXPECT_TRUE(check_history(h, zero).legal);
  // Other addresses are unaffected.
  auto h2 = make({{I, 0, W, 1, x, 1}, {R, 0, W, 1, x, 2}, {I, 1, Rd, 2, "", 3}, {R, 1, Rd, 2, zero, 4}});
  EXPECT_TRUE(check_history(h2, zero).legal);
}

TEST(Checker, IncompleteAccessesAreDropped) {
  const auto x = value_digest(Bytes(8, 1)), zero = value_digest(Bytes(8, 0));
  auto h = make({{I, 0, W, 1, x, 1}, {I, 1, Rd, 1, "", 2}, {R, 1, Rd, 1, zero, 3}});
  const auto v = check_history(h, zero);
  EXPECT_TRUE(v.legal);
  EXPECT_EQ(v.dropped_incomplete, 1u);
  EXPECT_EQ(v.operations, 1u);
}

TEST(Checker, MalformedHistories) {
  const auto x = value_digest(Bytes(8, 1)), zero = value_digest(Bytes(8, 0));
  EXPECT_THROW(check_history(make({{R, 0, Rd, 1, x, 1}}), zero), MalformedHistory);
  EXPECT_THROW(check_history(make({{I, 0, Rd, 1, "", 1}, {I, 0, Rd, 1, "", 2}}), zero), MalformedHistory);
  EXPECT_THROW(check_history(make({{I, 0, Rd, 1, "", 2}, {R, 0, Rd, 1, x, 2}}), zero), MalformedHistory);
  EXPECT_THROW(check_history(make({{I, 0, W, 1, x, 1}, {R, 0, W, 1, zero, 2}}), zero), MalformedHistory);
}

TEST(Checker, CsvRoundTrip) {
  SimConfig cfg;
  cfg.geom = TreeGeometry{4, 4, 8};
  cfg.clients = 3;
  cfg.accesses = 200;
  cfg.freezes = {{1, 5, FreezePoint::kAfterGetPs}};
  const auto r = run_simulation(cfg);
  std::stringstream s;
  write_history_csv(s, r.history, cfg.describe());
  Metadata meta;
  const auto back = read_history_csv(s, &meta);
  EXPECT_EQ(meta.at("seed"), "1");
  EXPECT_EQ(meta.at("c"), "3");
  ASSERT_EQ(back.events.size(), r.history.events.size());
  for (std::size_t i = 0; i < back.events.size(); ++i) {
    const auto &a = back.events[i], &b = r.history.events[i];
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.client, b.client);
    EXPECT_EQ(a.op, b.op);
    EXPECT_EQ(a.addr, b.addr);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.pos, b.pos);
  }
  std::stringstream bad("# x=1\nevent_idx,kind\n0,inv,0,read,1\n");
  EXPECT_THROW(read_history_csv(bad), MalformedHistory);
}

TEST(Checker, FlagsHistoriesWithDroppedEvicts) {
  // Mutator: pretend one write's evict was lost, so every read that should
  // have observed it returns the value it overwrote instead.
  std::size_t flagged = 0, mutated = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SimConfig cfg;
    cfg.geom = TreeGeometry{4, 4, 8};
    cfg.num_blocks = 6;
    cfg.clients = 1 + seed % 4;
    cfg.policy = static_cast<SchedulePolicy>(seed % 3);
    cfg.accesses = 400;
    cfg.seed = seed;
    const auto r = run_simulation(cfg);
    ASSERT_TRUE(check_history(r.history, r.initial_value_digest).legal);

    Rng rng(seed);
    auto h = r.history;
    // Writes in evict order per address, with the value each replaced.
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < h.events.size(); ++i) {
      if (h.events[i].kind == R && h.events[i].op == W) candidates.push_back(i);
    }
    const auto pick = candidates[rng.below(candidates.size())];
    const auto& w = h.events[pick];
    const auto client = w.client;
    Address addr = 0;
    for (std::size_t i = pick; i-- > 0;) {
      if (h.events[i].client == client && h.events[i].kind == I) {
        addr = *h.events[i].addr;
        break;
      }
    }
    const std::string lost = *w.value;
    std::string previous = r.initial_value_digest;
    for (std::size_t i = 0; i < pick; ++i) {
      const auto& e = h.events[i];
      if (e.kind == R && e.op == W && e.value && *e.value != lost) {
        // closest earlier completed write to the same address
        for (std::size_t j = i; j-- > 0;) {
          if (h.events[j].client == e.client && h.events[j].kind == I) {
            if (*h.events[j].addr == addr) previous = *e.value;
            break;
          }
        }
      }
    }
    bool changed = false;
    std::map<ClientId, Address> open_addr;
    for (auto& e : h.events) {
      if (e.kind == I) open_addr[e.client] = *e.addr;
      if (e.kind == R && e.op == Rd && open_addr[e.client] == addr && e.value == lost) {
        e.value = previous;
        changed = true;
      }
    }
    if (!changed || previous == lost) continue;
    ++mutated;
    if (!check_history(h, r.initial_value_digest).legal) ++flagged;
  }
  EXPECT_GE(mutated, 15u);
  EXPECT_EQ(flagged, mutated);
}
