#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvp/core.hpp"
#include "mvp/crypto.hpp"

namespace mvp {

/// Shamir sharing over GF(2^61 - 1). Secret bytes are packed 7 per field
/// element, so every element is below 2^56 and maps back to bytes exactly.
namespace gf {
constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;
std::uint64_t add(std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t sub(std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t mul(std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t inv(std::uint64_t a);
}  // namespace gf

struct KeyShare {
  std::uint32_t x = 0;
  std::vector<std::uint64_t> y;

  friend bool operator==(const KeyShare&, const KeyShare&) = default;
};

/// Wire size of one share: x plus one u64 per element.
std::size_t share_wire_bytes(std::size_t secret_len);

/// n shares of `secret` with threshold t (any t+1 reconstruct). x = 1..n.
std::vector<KeyShare> share_secret(std::span<const std::uint8_t> secret, unsigned n, unsigned t,
                                   Rng& rng);
std::vector<KeyShare> share_key(const Key& key, unsigned n, unsigned t, Rng& rng);

/// Lagrange interpolation at 0 from exactly the given shares.
Bytes interpolate(std::span<const KeyShare> shares, std::size_t secret_len);

struct Reconstruction {
  Bytes secret;
  /// Shares (by x) that are inconsistent with the reconstructed polynomial.
  std::vector<unsigned> offending;
};

/// Reconstructs from at least t+1 shares with distinct x. Without a
/// commitment the polynomial agreeing with the most shares wins and must be
/// unique; with one, the candidate must hash to it. Throws ShareError when no
/// consistent secret exists, InvalidArgument on duplicate x or too few shares.
Reconstruction reconstruct_secret(std::span<const KeyShare> shares, unsigned t,
                                  std::size_t secret_len,
                                  const std::optional<Digest>& commitment = std::nullopt);

/// Key reconstruction checked against key_commitment().
Reconstruction reconstruct_key(std::span<const KeyShare> shares, unsigned t,
                               const std::optional<Digest>& commitment = std::nullopt);

Key to_key(const Bytes& b);

}  // namespace mvp
