#include "mvp/protocol.hpp"

#include <algorithm>
#include <bit>

namespace mvp {
namespace {

std::size_t blob_bytes(const BlobPtr& b) { return 4 + (b ? b->size() : 0); }

void add_blob(Hasher& h, const BlobPtr& b) {
  if (b) {
    h.u64(1).update(b->digest());
  } else {
    h.u64(0);
  }
}

}  // namespace

const char* op_name(OpKind op) noexcept {
  switch (op) {
    case OpKind::kGetPm:
      return "getPM";
    case OpKind::kGetPs:
      return "getPS";
    case OpKind::kEvict:
      return "evict";
  }
  return "?";
}

std::size_t GetPmRequest::wire_bytes() const noexcept { return 1 + 4 + 8 + (address ? blob_bytes(address) : 0); }

std::size_t GetPmReply::unpadded_bytes() const noexcept {
  std::size_t n = 1 + 8 + 8 + 32 + 4;
  for (const auto& it : items) n += 8 + blob_bytes(it.path_map);
  n += 4;
  for (const auto& r : registry) n += 4 + 4 + blob_bytes(r.address);
  return n + 4;
}

std::size_t GetPmReply::wire_bytes() const noexcept { return std::bit_ceil(unpadded_bytes()); }

Digest GetPmReply::digest() const {
  Hasher h;
  h.u64(static_cast<std::uint64_t>(OpKind::kGetPm)).u64(static_cast<std::uint64_t>(seq)).u64(head_epoch);
  h.update(key_commitment);
  h.u64(items.size());
  for (const auto& it : items) {
    h.u64(it.epoch);
    add_blob(h, it.path_map);
  }
  h.u64(registry.size());
  for (const auto& r : registry) {
    h.u64(r.client).u64(r.counter);
    add_blob(h, r.address);
  }
  return h.finish();
}

std::size_t GetPsReply::unpadded_bytes() const noexcept {
  std::size_t n = 1 + 4 + 4;
  for (const auto& versions : nodes) {
    n += 4;
    for (const auto& v : versions) n += blob_bytes(v);
  }
  n += 4;
  for (const auto& s : stashes) n += blob_bytes(s);
  return n + 4;
}

Digest GetPsReply::digest() const {
  Hasher h;
  h.u64(static_cast<std::uint64_t>(OpKind::kGetPs)).u64(leaf).u64(padded_bytes);
  h.u64(nodes.size());
  for (const auto& versions : nodes) {
    h.u64(versions.size());
    for (const auto& v : versions) add_blob(h, v);
  }
  h.u64(stashes.size());
  for (const auto& s : stashes) add_blob(h, s);
  return h.finish();
}

std::size_t getps_padded_bytes(std::size_t levels, std::size_t bucket_envelope_bytes,
                               std::size_t max_versions, std::size_t stash_count,
                               std::size_t max_stash_envelope) {
  return 1 + 4 + 4 + levels * (4 + max_versions * (4 + bucket_envelope_bytes)) + 4 +
         stash_count * (4 + max_stash_envelope) + 4;
}

std::size_t EvictRequest::wire_bytes() const noexcept {
  std::size_t n = 1 + 4 + blob_bytes(path_map) + 4;
  for (const auto& b : buckets) n += blob_bytes(b);
  n += blob_bytes(stash) + 1;
  if (compacted) n += blob_bytes(compacted);
  return n;
}

Digest EvictRequest::digest() const {
  Hasher h;
  h.u64(static_cast<std::uint64_t>(OpKind::kEvict)).u64(client);
  add_blob(h, path_map);
  h.u64(buckets.size());
  for (const auto& b : buckets) add_blob(h, b);
  add_blob(h, stash);
  add_blob(h, compacted);
  return h.finish();
}

Digest EvictReply::digest() const {
  return Hasher().u64(static_cast<std::uint64_t>(OpKind::kEvict)).u64(epoch).finish();
}

}  // namespace mvp
