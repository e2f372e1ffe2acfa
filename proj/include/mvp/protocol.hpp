#pragma once

// Messages exchanged between clients and the replicated ORAM service. Every
// ORAM payload travels as a client-sealed envelope; replicas only handle
// opaque blobs, leaves and counters.

#include <cstdint>
#include <vector>

#include "mvp/core.hpp"
#include "mvp/crypto.hpp"

namespace mvp {

using ClientId = std::uint32_t;

enum class OpKind : std::uint8_t { kGetPm = 1, kGetPs = 2, kEvict = 3 };

const char* op_name(OpKind op) noexcept;

struct GetPmRequest {
  ClientId client = 0;
  /// Newest history epoch the client has already consolidated.
  std::uint64_t last_epoch = 0;
  /// Sealed accessed address; strong mode only.
  BlobPtr address;

  std::size_t wire_bytes() const noexcept;
};

struct HistoryItem {
  std::uint64_t epoch = 0;
  BlobPtr path_map;
};

struct RegistryItem {
  ClientId client = 0;
  std::uint32_t counter = 0;
  BlobPtr address;
};

struct GetPmReply {
  Seq seq = 0;
  std::uint64_t head_epoch = 0;
  Digest key_commitment{};
  std::vector<HistoryItem> items;
  std::vector<RegistryItem> registry;

  std::size_t unpadded_bytes() const noexcept;
  /// Padded to the next power of two.
  std::size_t wire_bytes() const noexcept;
  Digest digest() const;
};

struct GetPsRequest {
  ClientId client = 0;
  LeafId leaf = 0;

  std::size_t wire_bytes() const noexcept { return 1 + 4 + 4; }
};

struct GetPsReply {
  LeafId leaf = 0;
  /// Bucket versions per path level, root first.
  std::vector<std::vector<BlobPtr>> nodes;
  std::vector<BlobPtr> stashes;
  /// Total size after padding, fixed by the server's size-class rule.
  std::size_t padded_bytes = 0;

  std::size_t unpadded_bytes() const noexcept;
  std::size_t wire_bytes() const noexcept { return padded_bytes; }
  Digest digest() const;
};

/// Size-class rule for path replies: the reply is padded as if every level
/// held `max_versions` bucket versions and every stash was as large as the
/// largest one present.
std::size_t getps_padded_bytes(std::size_t levels, std::size_t bucket_envelope_bytes,
                               std::size_t max_versions, std::size_t stash_count,
                               std::size_t max_stash_envelope);

struct EvictRequest {
  ClientId client = 0;
  BlobPtr path_map;
  /// New bucket per path level, root first.
  std::vector<BlobPtr> buckets;
  BlobPtr stash;
  /// Consolidated map replacing the history prefix; null unless compacting.
  BlobPtr compacted;

  std::size_t wire_bytes() const noexcept;
  Digest digest() const;
};

struct EvictReply {
  std::uint64_t epoch = 0;

  std::size_t wire_bytes() const noexcept { return 1 + 8; }
  Digest digest() const;
};

}  // namespace mvp
