#include "mvp/crypto.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>
#include <mutex>

#include "mvp/codec.hpp"
#include "mvp/error.hpp"

namespace mvp {
namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw Error("libsodium initialisation failed");
  });
}

crypto_generichash_state* as_state(std::array<std::uint8_t, 384>& s) {
  static_assert(sizeof(crypto_generichash_state) <= 384);
  return reinterpret_cast<crypto_generichash_state*>(s.data());
}

}  // namespace

Digest digest_of(std::span<const std::uint8_t> data) {
  Digest d;
  crypto_generichash(d.data(), d.size(), data.data(), data.size(), nullptr, 0);
  return d;
}

Hasher::Hasher() { crypto_generichash_init(as_state(state_), nullptr, 0, 32); }

Hasher& Hasher::update(std::span<const std::uint8_t> data) {
  crypto_generichash_update(as_state(state_), data.data(), data.size());
  return *this;
}

Hasher& Hasher::u64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  return update(b);
}

Digest Hasher::finish() {
  Digest d;
  crypto_generichash_final(as_state(state_), d.data(), d.size());
  return d;
}

std::string hex_digest(const Digest& d, std::size_t bytes) {
  return to_hex(std::span<const std::uint8_t>(d.data(), std::min(bytes, d.size())));
}

Blob::Blob(Bytes bytes) : bytes_(std::move(bytes)), digest_(digest_of(bytes_)) {}

BlobPtr make_blob(Bytes bytes) { return std::make_shared<const Blob>(std::move(bytes)); }

BlobPtr tampered_copy(const Blob& b, std::size_t salt) {
  Bytes copy = b.bytes();
  if (copy.empty()) {
    copy.push_back(0x5a);
  } else {
    copy[salt % copy.size()] ^= static_cast<std::uint8_t>(1u << (salt % 8));
  }
  return make_blob(std::move(copy));
}

std::size_t SizePolicy::bucket_payload_bytes() const noexcept {
  return geom_.bucket_size * (1 + block_record_bytes(geom_.block_size));
}

std::size_t SizePolicy::padded_plaintext(EnvelopeKind kind, std::size_t payload_len) const {
  std::size_t fixed = 0;
  switch (kind) {
    case EnvelopeKind::kBucket:
      fixed = 4 + bucket_payload_bytes();
      break;
    case EnvelopeKind::kAddress:
      fixed = 4 + 4;
      break;
    case EnvelopeKind::kStash:
    case EnvelopeKind::kPathMap:
      return std::max<std::size_t>(64, std::bit_ceil(4 + payload_len));
  }
  if (4 + payload_len > fixed) throw InvalidArgument("payload exceeds its size class");
  return fixed;
}

BlobPtr Sealer::seal(EnvelopeKind kind, std::span<const std::uint8_t> payload) {
  ensure_sodium();
  const std::size_t plain_len = policy_.padded_plaintext(kind, payload.size());
  Bytes plain(plain_len, 0);
  const auto real = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) plain[i] = static_cast<std::uint8_t>(real >> (8 * i));
  if (!payload.empty()) std::memcpy(plain.data() + 4, payload.data(), payload.size());

  Bytes out(kEnvelopeHeaderBytes + plain_len + kEnvelopeTagBytes);
  out[0] = static_cast<std::uint8_t>(kind);
  const std::uint64_t ctr = counter_++;
  for (int i = 0; i < 4; ++i) out[1 + i] = static_cast<std::uint8_t>(sender_ >> (8 * i));
  for (int i = 0; i < 8; ++i) out[5 + i] = static_cast<std::uint8_t>(ctr >> (8 * i));
  const auto plen = static_cast<std::uint32_t>(plain_len);
  for (int i = 0; i < 4; ++i) out[13 + i] = static_cast<std::uint8_t>(plen >> (8 * i));

  unsigned long long clen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data() + kEnvelopeHeaderBytes, &clen, plain.data(),
                                            plain.size(), out.data(), kEnvelopeHeaderBytes, nullptr,
                                            out.data() + 1, key_.data());
  return make_blob(std::move(out));
}

EnvelopeKind envelope_kind(std::span<const std::uint8_t> envelope) {
  if (envelope.empty()) throw DecodeError("empty envelope");
  return static_cast<EnvelopeKind>(envelope[0]);
}

Bytes open_envelope(const Key& key, std::span<const std::uint8_t> env, EnvelopeKind expected) {
  ensure_sodium();
  if (env.size() < kEnvelopeHeaderBytes + kEnvelopeTagBytes + 4) throw DecodeError("short envelope");
  if (env[0] != static_cast<std::uint8_t>(expected)) throw DecodeError("unexpected envelope kind");
  std::uint32_t plen = 0;
  for (int i = 0; i < 4; ++i) plen |= std::uint32_t{env[13 + i]} << (8 * i);
  if (std::size_t{plen} + kEnvelopeHeaderBytes + kEnvelopeTagBytes != env.size()) {
    throw DecodeError("envelope length mismatch");
  }
  Bytes plain(plen);
  unsigned long long mlen = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(plain.data(), &mlen, nullptr,
                                                env.data() + kEnvelopeHeaderBytes,
                                                plen + kEnvelopeTagBytes, env.data(),
                                                kEnvelopeHeaderBytes, env.data() + 1,
                                                key.data()) != 0) {
    throw AuthError("envelope authentication failed");
  }
  std::uint32_t real = 0;
  for (int i = 0; i < 4; ++i) real |= std::uint32_t{plain[i]} << (8 * i);
  if (std::size_t{real} + 4 > plain.size()) throw DecodeError("bad padded length");
  plain.erase(plain.begin(), plain.begin() + 4);
  plain.resize(real);
  return plain;
}

Key random_key(Rng& rng) {
  Key k;
  for (std::size_t i = 0; i < k.size(); i += 8) {
    const auto x = rng.next();
    for (std::size_t j = 0; j < 8; ++j) k[i + j] = static_cast<std::uint8_t>(x >> (8 * j));
  }
  return k;
}

Digest key_commitment(const Key& key) {
  static constexpr std::uint8_t kDomain[] = {'m', 'v', 'p', '-', 'k', 'e', 'y'};
  return Hasher().update(kDomain).update(key).finish();
}

}  // namespace mvp
