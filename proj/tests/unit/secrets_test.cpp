#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "mvp/crypto.hpp"
#include "mvp/error.hpp"
#include "mvp/shamir.hpp"

using namespace mvp;

namespace {

// Plain modular arithmetic in GF(2^61 - 1) via __int128, independent of gf::.
__extension__ using u128 = unsigned __int128;
constexpr std::uint64_t P = (std::uint64_t{1} << 61) - 1;
std::uint64_t pmul(std::uint64_t a, std::uint64_t b) { return static_cast<std::uint64_t>(u128(a) * b % P); }
std::uint64_t ppow(std::uint64_t a, std::uint64_t e) {
  std::uint64_t r = 1;
  for (; e; e >>= 1, a = pmul(a, a)) {
    if (e & 1) r = pmul(r, a);
  }
  return r;
}

// Lagrange at 0 over the first element of each share.
std::uint64_t oracle_interpolate(const std::vector<KeyShare>& s) {
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::uint64_t num = 1, den = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i == j) continue;
      num = pmul(num, s[j].x);
      den = pmul(den, (s[j].x + P - s[i].x) % P);
    }
    acc = (acc + pmul(s[i].y[0], pmul(num, ppow(den, P - 2)))) % P;
  }
  return acc;
}

std::vector<std::vector<unsigned>> subsets(unsigned n, unsigned k) {
  std::vector<std::vector<unsigned>> out;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + k, true);
  do {
    std::vector<unsigned> s;
    for (unsigned i = 0; i < n; ++i) {
      if (pick[i]) s.push_back(i);
    }
    out.push_back(s);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return out;
}

std::vector<KeyShare> pick(const std::vector<KeyShare>& all, const std::vector<unsigned>& idx) {
  std::vector<KeyShare> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

}  // namespace

TEST(Field, MatchesWideArithmetic) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const auto a = rng.below(P), b = rng.below(P);
    EXPECT_EQ(gf::mul(a, b), pmul(a, b));
    EXPECT_EQ(gf::add(a, b), (a + b) % P);
    EXPECT_EQ(gf::sub(a, b), (a + P - b) % P);
  }
  EXPECT_EQ(gf::mul(P - 1, P - 1), 1u);
  for (std::uint64_t a : {std::uint64_t{1}, std::uint64_t{2}, std::uint64_t{12345}, P - 1}) EXPECT_EQ(gf::mul(a, gf::inv(a)), 1u);
}

TEST(Shamir, ThresholdZeroSharesEqualSecret) {
  Rng rng(2);
  const Bytes secret{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto shares = share_secret(secret, 5, 0, rng);
  for (std::size_t i = 1; i < shares.size(); ++i) EXPECT_EQ(shares[i].y, shares[0].y);
  EXPECT_EQ(interpolate(std::span(shares).first(1), secret.size()), secret);
}

TEST(Shamir, EveryPairReconstructsByte42) {
  Rng rng(3);
  const Bytes secret{42};
  const auto shares = share_secret(secret, 4, 1, rng);
  const auto pairs = subsets(4, 2);
  EXPECT_EQ(pairs.size(), 6u);
  for (const auto& s : pairs) {
    const auto sub = pick(shares, s);
    EXPECT_EQ(oracle_interpolate(sub), 42u);
    EXPECT_EQ(interpolate(sub, 1), secret);
  }
}

TEST(Shamir, HonestPairsAgreeAfterCorruption) {
  Rng rng(4);
  const Bytes secret{42};
  auto shares = share_secret(secret, 4, 1, rng);
  shares[2].y[0] = gf::add(shares[2].y[0], 99);
  std::map<Bytes, int> votes;
  for (const auto& s : subsets(4, 2)) {
    try {
      votes[interpolate(pick(shares, s), 1)]++;
    } catch (const ShareError&) {
      // out-of-range element: cannot be any byte string, so no vote
    }
  }
  // The three pairs without share 2 agree; every other pair yields a distinct value.
  EXPECT_EQ(votes[secret], 3);
  EXPECT_EQ(reconstruct_secret(shares, 1, 1).secret, secret);
  EXPECT_EQ(reconstruct_secret(shares, 1, 1).offending, std::vector<unsigned>{3});
}

TEST(Shamir, RoundTripAllSmallParameters) {
  Rng rng(5);
  for (unsigned t = 0; t <= 3; ++t) {
    for (unsigned n = t + 1; n <= 10; ++n) {
      for (int k = 0; k < 100; ++k) {
        const Key key = random_key(rng);
        const auto shares = share_key(key, n, t, rng);
        ASSERT_EQ(shares.size(), n);
        const auto first = std::span(shares).first(t + 1);
        EXPECT_EQ(to_key(interpolate(first, 32)), key);
        EXPECT_EQ(to_key(reconstruct_key(shares, t).secret), key);
      }
    }
  }
}

TEST(Shamir, EverySubsetOfThresholdSize) {
  Rng rng(6);
  for (auto [n, t] : {std::pair{4u, 1u}, {7u, 2u}, {10u, 3u}}) {
    for (int k = 0; k < 100; ++k) {
      const Key key = random_key(rng);
      const auto shares = share_key(key, n, t, rng);
      for (const auto& s : subsets(n, t + 1)) EXPECT_EQ(to_key(interpolate(pick(shares, s), 32)), key);
    }
  }
}

TEST(Shamir, TCorruptAmongTwoTPlusOne) {
  Rng rng(7);
  for (auto [n, t] : {std::pair{4u, 1u}, {7u, 2u}, {10u, 3u}}) {
    for (int k = 0; k < 100; ++k) {
      const Key key = random_key(rng);
      auto shares = share_key(key, n, t, rng);
      std::vector<KeyShare> sub(shares.begin(), shares.begin() + 2 * t + 1);
      std::vector<unsigned> bad;
      for (unsigned i = 0; i < t; ++i) {
        const auto j = static_cast<unsigned>(rng.below(sub.size()));
        if (std::find(bad.begin(), bad.end(), sub[j].x) != bad.end()) continue;
        sub[j].y[rng.below(sub[j].y.size())] ^= 1 + rng.below(1000);
        bad.push_back(sub[j].x);
      }
      std::sort(bad.begin(), bad.end());
      const auto r = reconstruct_key(sub, t, key_commitment(key));
      EXPECT_EQ(to_key(r.secret), key);
      EXPECT_EQ(r.offending, bad);
    }
  }
}

TEST(Shamir, Errors) {
  Rng rng(8);
  const Key key = random_key(rng);
  EXPECT_THROW(share_key(key, 2, 2, rng), InvalidArgument);
  auto shares = share_key(key, 4, 1, rng);
  std::vector<KeyShare> dup{shares[0], shares[0]};
  EXPECT_THROW(reconstruct_key(dup, 1), InvalidArgument);
  EXPECT_THROW(reconstruct_key(std::span(shares).first(1), 1), InvalidArgument);
  // Three of four shares corrupted: every pair holds a bad share.
  shares[0].y[0] ^= 5;
  shares[1].y[0] ^= 9;
  shares[2].y[1] ^= 3;
  try {
    reconstruct_key(shares, 1, key_commitment(key));
    FAIL() << "expected ShareError";
  } catch (const ShareError& e) {
    EXPECT_FALSE(e.offending().empty());
  }
}

TEST(Envelope, SealOpenIdentity) {
  Rng rng(9);
  const Key key = random_key(rng);
  const TreeGeometry g{4, 4, 16};
  Sealer sealer(key, 3, SizePolicy(g));
  for (auto kind : {EnvelopeKind::kStash, EnvelopeKind::kPathMap}) {
    for (std::size_t len : {0, 1, 63, 64, 65, 700}) {
      Bytes p(len);
      for (auto& b : p) b = static_cast<std::uint8_t>(rng.next());
      const auto env = sealer.seal(kind, p);
      EXPECT_EQ(open_envelope(key, env->bytes(), kind), p);
      EXPECT_EQ(envelope_kind(env->bytes()), kind);
    }
  }
}

TEST(Envelope, LengthDependsOnlyOnClass) {
  Rng rng(10);
  const Key key = random_key(rng);
  const TreeGeometry g{4, 4, 16};
  SizePolicy policy(g);
  Sealer sealer(key, 1, policy);
  EXPECT_EQ(sealer.seal(EnvelopeKind::kBucket, Bytes(5))->size(),
            sealer.seal(EnvelopeKind::kBucket, Bytes(policy.bucket_payload_bytes()))->size());
  EXPECT_EQ(sealer.seal(EnvelopeKind::kBucket, Bytes(5))->size(), policy.bucket_envelope_bytes());
  EXPECT_EQ(sealer.seal(EnvelopeKind::kAddress, Bytes(4))->size(),
            sealer.seal(EnvelopeKind::kAddress, Bytes(1))->size());
  EXPECT_EQ(sealer.seal(EnvelopeKind::kStash, Bytes(10))->size(),
            sealer.seal(EnvelopeKind::kStash, Bytes(60))->size());
  EXPECT_THROW(sealer.seal(EnvelopeKind::kBucket, Bytes(policy.bucket_payload_bytes() + 1)),
               InvalidArgument);
}

TEST(Envelope, WireLayout) {
  Rng rng(11);
  const Key key = random_key(rng);
  Sealer sealer(key, 0x01020304, SizePolicy(TreeGeometry{3, 4, 8}));
  const auto env = sealer.seal(EnvelopeKind::kPathMap, Bytes(10, 7));
  const auto& b = env->bytes();
  EXPECT_EQ(b[0], static_cast<std::uint8_t>(EnvelopeKind::kPathMap));
  const std::uint32_t padded = b[13] | (b[14] << 8) | (b[15] << 16) | (std::uint32_t{b[16]} << 24);
  EXPECT_EQ(b.size(), 1 + 12 + 4 + padded + 16);
  // Nonces never repeat for one sender.
  const auto env2 = sealer.seal(EnvelopeKind::kPathMap, Bytes(10, 7));
  EXPECT_FALSE(std::equal(b.begin() + 1, b.begin() + 13, env2->bytes().begin() + 1));
}

TEST(Envelope, TamperingIsRejected) {
  Rng rng(12);
  const Key key = random_key(rng);
  Sealer sealer(key, 1, SizePolicy(TreeGeometry{3, 4, 8}));
  const auto env = sealer.seal(EnvelopeKind::kStash, Bytes(20, 1));
  for (std::size_t pos = 0; pos < env->size(); pos += 7) {
    Bytes bad = env->bytes();
    bad[pos] ^= 0x10;
    EXPECT_THROW(open_envelope(key, bad, EnvelopeKind::kStash), Error);
  }
  const auto t = tampered_copy(*env, 3);
  EXPECT_NE(t->digest(), env->digest());
  EXPECT_THROW(open_envelope(key, t->bytes(), EnvelopeKind::kStash), Error);
  Key other = key;
  other[0] ^= 1;
  EXPECT_THROW(open_envelope(other, env->bytes(), EnvelopeKind::kStash), AuthError);
  EXPECT_THROW(open_envelope(key, env->bytes(), EnvelopeKind::kPathMap), DecodeError);
}

TEST(Digest, KnownAnswer) {
  // BLAKE2b-256 of the empty string.
  EXPECT_EQ(hex_digest(digest_of({})),
            "0e5751c026e543b2e8ab2eb06099daa1d1e5df47778f7787faab45cdf12fe3a8");
  Hasher h;
  h.update(Bytes{'a', 'b'});
  h.update(Bytes{'c'});
  EXPECT_EQ(h.finish(), digest_of(Bytes{'a', 'b', 'c'}));
}
