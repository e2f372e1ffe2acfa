#include "mvp/shamir.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "mvp/error.hpp"

namespace mvp {
namespace gf {

std::uint64_t add(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t s = a + b;
  return s >= kPrime ? s - kPrime : s;
}

std::uint64_t sub(std::uint64_t a, std::uint64_t b) noexcept { return a >= b ? a - b : a + kPrime - b; }

std::uint64_t mul(std::uint64_t a, std::uint64_t b) noexcept {
  __extension__ using u128 = unsigned __int128;
  const u128 p = static_cast<u128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(p & kPrime);
  std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
  std::uint64_t r = lo + hi;
  while (r >= kPrime) r -= kPrime;
  return r;
}

std::uint64_t inv(std::uint64_t a) {
  if (a % kPrime == 0) throw InvalidArgument("zero has no inverse");
  std::uint64_t result = 1, base = a % kPrime, e = kPrime - 2;
  while (e) {
    if (e & 1) result = mul(result, base);
    base = mul(base, base);
    e >>= 1;
  }
  return result;
}

}  // namespace gf

namespace {

constexpr std::size_t kBytesPerElement = 7;

std::size_t element_count(std::size_t len) { return (len + kBytesPerElement - 1) / kBytesPerElement; }

std::vector<std::uint64_t> pack(std::span<const std::uint8_t> s) {
  std::vector<std::uint64_t> out(element_count(s.size()), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i / kBytesPerElement] |= std::uint64_t{s[i]} << (8 * (i % kBytesPerElement));
  }
  return out;
}

std::optional<Bytes> unpack(const std::vector<std::uint64_t>& e, std::size_t len) {
  Bytes out(len);
  for (std::size_t k = 0; k < e.size(); ++k) {
    const std::size_t lo = k * kBytesPerElement;
    const std::size_t width = std::min(kBytesPerElement, len - lo);
    if (width < 8 && (e[k] >> (8 * width)) != 0) return std::nullopt;
  }
  for (std::size_t i = 0; i < len; ++i) {
    out[i] = static_cast<std::uint8_t>(e[i / kBytesPerElement] >> (8 * (i % kBytesPerElement)));
  }
  return out;
}

// Lagrange basis coefficients for evaluating at `at` from nodes xs.
std::vector<std::uint64_t> basis(const std::vector<std::uint64_t>& xs, std::uint64_t at) {
  std::vector<std::uint64_t> l(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::uint64_t num = 1, den = 1;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (i == j) continue;
      num = gf::mul(num, gf::sub(at, xs[j]));
      den = gf::mul(den, gf::sub(xs[i], xs[j]));
    }
    l[i] = gf::mul(num, gf::inv(den));
  }
  return l;
}

std::vector<std::uint64_t> evaluate(const std::vector<const KeyShare*>& pts, std::uint64_t at,
                                    std::size_t elements) {
  std::vector<std::uint64_t> xs;
  for (const auto* p : pts) xs.push_back(p->x);
  const auto l = basis(xs, at);
  std::vector<std::uint64_t> out(elements, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t k = 0; k < elements; ++k) out[k] = gf::add(out[k], gf::mul(l[i], pts[i]->y[k]));
  }
  return out;
}

bool on_polynomial(const std::vector<const KeyShare*>& pts, const KeyShare& s, std::size_t elements) {
  return evaluate(pts, s.x, elements) == s.y;
}

}  // namespace

std::size_t share_wire_bytes(std::size_t secret_len) { return 4 + 8 * element_count(secret_len); }

std::vector<KeyShare> share_secret(std::span<const std::uint8_t> secret, unsigned n, unsigned t,
                                   Rng& rng) {
  if (n <= t) throw InvalidArgument("need n > t");
  const auto constant = pack(secret);
  std::vector<std::vector<std::uint64_t>> coeffs(constant.size());
  for (std::size_t k = 0; k < constant.size(); ++k) {
    coeffs[k].push_back(constant[k]);
    for (unsigned d = 0; d < t; ++d) coeffs[k].push_back(rng.below(gf::kPrime));
  }
  std::vector<KeyShare> shares(n);
  for (unsigned i = 0; i < n; ++i) {
    shares[i].x = i + 1;
    shares[i].y.resize(constant.size());
    for (std::size_t k = 0; k < constant.size(); ++k) {
      std::uint64_t acc = 0;  // Horner
      for (auto c = coeffs[k].rbegin(); c != coeffs[k].rend(); ++c) {
        acc = gf::add(gf::mul(acc, shares[i].x), *c);
      }
      shares[i].y[k] = acc;
    }
  }
  return shares;
}

std::vector<KeyShare> share_key(const Key& key, unsigned n, unsigned t, Rng& rng) {
  return share_secret(key, n, t, rng);
}

Bytes interpolate(std::span<const KeyShare> shares, std::size_t secret_len) {
  std::vector<const KeyShare*> pts;
  for (const auto& s : shares) pts.push_back(&s);
  auto value = unpack(evaluate(pts, 0, element_count(secret_len)), secret_len);
  if (!value) throw ShareError("interpolated value is not a valid secret", {});
  return *value;
}

Reconstruction reconstruct_secret(std::span<const KeyShare> shares, unsigned t,
                                  std::size_t secret_len, const std::optional<Digest>& commitment) {
  const std::size_t elements = element_count(secret_len);
  if (shares.size() < std::size_t{t} + 1) throw InvalidArgument("fewer than t+1 shares");
  std::vector<std::uint32_t> xs;
  for (const auto& s : shares) {
    if (s.x == 0 || s.x >= gf::kPrime) throw InvalidArgument("share index out of range");
    if (s.y.size() != elements) throw InvalidArgument("share has the wrong width");
    xs.push_back(s.x);
  }
  std::sort(xs.begin(), xs.end());
  if (std::adjacent_find(xs.begin(), xs.end()) != xs.end()) throw InvalidArgument("duplicate share index");

  const std::size_t m = shares.size();
  const std::size_t k = std::size_t{t} + 1;

  auto support_of = [&](const std::vector<const KeyShare*>& pts, std::vector<unsigned>* bad) {
    std::size_t support = 0;
    for (const auto& s : shares) {
      if (on_polynomial(pts, s, elements)) {
        ++support;
      } else if (bad) {
        bad->push_back(s.x);
      }
    }
    return support;
  };
  auto accept = [&](const Bytes& value) {
    if (!commitment) return true;
    if (value.size() != 32) return false;
    return key_commitment(to_key(value)) == *commitment;
  };

  // Fast path: the first t+1 shares.
  {
    std::vector<const KeyShare*> pts;
    for (std::size_t i = 0; i < k; ++i) pts.push_back(&shares[i]);
    auto value = unpack(evaluate(pts, 0, elements), secret_len);
    if (value && accept(*value)) {
      Reconstruction r{*value, {}};
      const auto support = support_of(pts, &r.offending);
      if (commitment || support == m) return r;
    }
  }

  // Enumerate (t+1)-subsets.
  std::map<Bytes, std::pair<std::size_t, std::vector<const KeyShare*>>> candidates;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    std::vector<const KeyShare*> pts;
    for (auto i : idx) pts.push_back(&shares[i]);
    auto value = unpack(evaluate(pts, 0, elements), secret_len);
    if (value && accept(*value) && !candidates.count(*value)) {
      candidates.emplace(*value, std::make_pair(support_of(pts, nullptr), pts));
    }
    std::size_t pos = k;
    while (pos > 0 && idx[pos - 1] == m - k + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }

  const std::pair<const Bytes, std::pair<std::size_t, std::vector<const KeyShare*>>>* best = nullptr;
  bool tie = false;
  for (const auto& c : candidates) {
    if (!best || c.second.first > best->second.first) {
      best = &c;
      tie = false;
    } else if (c.second.first == best->second.first) {
      tie = true;
    }
  }
  std::vector<unsigned> all;
  for (const auto& s : shares) all.push_back(s.x);
  if (!best) throw ShareError("no subset of shares reconstructs a consistent secret", all);
  if (tie && !commitment) throw ShareError("share subsets disagree and no majority exists", all);
  Reconstruction r{best->first, {}};
  support_of(best->second.second, &r.offending);
  return r;
}

Reconstruction reconstruct_key(std::span<const KeyShare> shares, unsigned t,
                               const std::optional<Digest>& commitment) {
  return reconstruct_secret(shares, t, 32, commitment);
}

Key to_key(const Bytes& b) {
  if (b.size() != 32) throw InvalidArgument("key must be 32 bytes");
  Key k;
  std::copy(b.begin(), b.end(), k.begin());
  return k;
}

}  // namespace mvp
