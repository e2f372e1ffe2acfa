#pragma once

// Canonical little-endian serialization. Collections are length-prefixed and
// written in sorted order so that equal values always produce equal bytes.

#include <cstdint>
#include <span>
#include <string_view>

#include "mvp/core.hpp"
#include "mvp/error.hpp"

namespace mvp {

class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v), 8); }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void blob(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    raw(b);
  }
  void zeros(std::size_t n) { out_.resize(out_.size() + n, 0); }

  std::size_t size() const noexcept { return out_.size(); }
  Bytes& bytes() noexcept { return out_; }
  Bytes take() && noexcept { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le(8)); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> blob() { return raw(u32()); }

  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw DecodeError("trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw DecodeError("truncated input");
  }
  std::uint64_t get_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_ts(ByteWriter& w, const Timestamp& ts);
Timestamp read_ts(ByteReader& r);
void write_location(ByteWriter& w, const Location& loc);
Location read_location(ByteReader& r);

constexpr std::size_t kTimestampBytes = 24;
constexpr std::size_t kLocationBytes = 8;
constexpr std::size_t kPathMapEntryBytes = 4 + kLocationBytes + kTimestampBytes;
constexpr std::size_t block_record_bytes(std::size_t block_size) {
  return 4 + kTimestampBytes + block_size;
}

/// addr | ts | data (block_size bytes, no length prefix).
void write_block(ByteWriter& w, const Block& b, std::size_t block_size);
Block read_block(ByteReader& r, std::size_t block_size);

Bytes encode_block(const Block& b, std::size_t block_size);
Block decode_block(std::span<const std::uint8_t> in, std::size_t block_size);

/// Single-slot payload: flag (0 empty, 1 occupied) followed by a block record
/// when occupied. Empty slots are padded by the envelope, not here.
Bytes encode_slot(const std::optional<Block>& b, std::size_t block_size);
std::optional<Block> decode_slot(std::span<const std::uint8_t> in, std::size_t block_size);

/// Z slot records back to back (a bucket's worth of slots).
Bytes encode_bucket(std::span<const std::optional<Block>> slots, std::size_t block_size);
std::vector<std::optional<Block>> decode_bucket(std::span<const std::uint8_t> in,
                                                std::size_t bucket_size, std::size_t block_size);

/// count | entries sorted by addr.
Bytes encode_path_map(const PathMap& m);
PathMap decode_path_map(std::span<const std::uint8_t> in);

/// count | blocks sorted by addr.
Bytes encode_stash(const Stash& s, std::size_t block_size);
Stash decode_stash(std::span<const std::uint8_t> in, std::size_t block_size);

/// leaf | slot count | per slot: version count, versions sorted by (addr, ts).
Bytes encode_path(const MultiVersionPath& p, std::size_t block_size);
MultiVersionPath decode_path(std::span<const std::uint8_t> in, std::size_t block_size);

std::string to_hex(std::span<const std::uint8_t> b);

}  // namespace mvp
