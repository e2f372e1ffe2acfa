#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "mvp/core.hpp"

namespace mvp {

using Digest = std::array<std::uint8_t, 32>;
using Key = std::array<std::uint8_t, 32>;

/// BLAKE2b-256.
Digest digest_of(std::span<const std::uint8_t> data);

/// Incremental BLAKE2b-256.
class Hasher {
 public:
  Hasher();
  Hasher& update(std::span<const std::uint8_t> data);
  Hasher& update(const Digest& d) { return update(std::span<const std::uint8_t>(d)); }
  Hasher& u64(std::uint64_t v);
  Digest finish();

 private:
  alignas(64) std::array<std::uint8_t, 384> state_;
};

std::string hex_digest(const Digest& d, std::size_t bytes = 32);

/// Immutable byte buffer with its digest computed at construction. Replicas
/// hold shared references to the same buffer when a payload is disseminated.
class Blob {
 public:
  explicit Blob(Bytes bytes);

  const Bytes& bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size(); }
  const Digest& digest() const noexcept { return digest_; }

 private:
  Bytes bytes_;
  Digest digest_;
};

using BlobPtr = std::shared_ptr<const Blob>;

BlobPtr make_blob(Bytes bytes);

/// Copy of `b` with one bit flipped; used to model tampering.
BlobPtr tampered_copy(const Blob& b, std::size_t salt);

enum class EnvelopeKind : std::uint8_t {
  kBucket = 1,
  kStash = 2,
  kPathMap = 3,
  kAddress = 4,
};

constexpr std::size_t kEnvelopeHeaderBytes = 1 + 12 + 4;
constexpr std::size_t kEnvelopeTagBytes = 16;

/// Fixed plaintext size classes per kind. Buckets and addresses have one
/// class each; path maps and stashes round up to a power of two.
class SizePolicy {
 public:
  explicit SizePolicy(TreeGeometry geom) : geom_(geom) {}

  /// Payload bytes of a bucket before padding (all slots occupied).
  std::size_t bucket_payload_bytes() const noexcept;
  std::size_t padded_plaintext(EnvelopeKind kind, std::size_t payload_len) const;
  std::size_t envelope_bytes(EnvelopeKind kind, std::size_t payload_len) const {
    return kEnvelopeHeaderBytes + padded_plaintext(kind, payload_len) + kEnvelopeTagBytes;
  }
  std::size_t bucket_envelope_bytes() const { return envelope_bytes(EnvelopeKind::kBucket, 0); }

  const TreeGeometry& geometry() const noexcept { return geom_; }

 private:
  TreeGeometry geom_;
};

/// Authenticated encryption under one data key. Nonces are
/// sender id || per-sender counter, so distinct senders never collide.
class Sealer {
 public:
  Sealer(const Key& key, std::uint32_t sender, SizePolicy policy)
      : key_(key), sender_(sender), policy_(policy) {}

  BlobPtr seal(EnvelopeKind kind, std::span<const std::uint8_t> payload);
  void rekey(const Key& key) { key_ = key; }

 private:
  Key key_;
  std::uint32_t sender_;
  std::uint64_t counter_ = 0;
  SizePolicy policy_;
};

constexpr std::uint32_t kSetupSender = 0xFFFFFFFFu;

/// Decrypts and strips padding. Throws AuthError on a bad tag, DecodeError on
/// a malformed envelope or a kind mismatch.
Bytes open_envelope(const Key& key, std::span<const std::uint8_t> envelope, EnvelopeKind expected);

EnvelopeKind envelope_kind(std::span<const std::uint8_t> envelope);

Key random_key(Rng& rng);

/// Commitment stored in replicated state so clients can tell a correct key
/// reconstruction from a corrupted one.
Digest key_commitment(const Key& key);

}  // namespace mvp
