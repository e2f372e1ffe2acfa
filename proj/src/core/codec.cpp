#include "mvp/codec.hpp"

#include <algorithm>

namespace mvp {

void write_ts(ByteWriter& w, const Timestamp& ts) {
  w.i64(ts.v);
  w.i64(ts.a);
  w.i64(ts.s);
}

Timestamp read_ts(ByteReader& r) {
  Timestamp ts;
  ts.v = r.i64();
  ts.a = r.i64();
  ts.s = r.i64();
  return ts;
}

void write_location(ByteWriter& w, const Location& loc) {
  w.u32(loc.node);
  w.u32(loc.idx);
}

Location read_location(ByteReader& r) {
  Location loc;
  loc.node = r.u32();
  loc.idx = r.u32();
  return loc;
}

void write_block(ByteWriter& w, const Block& b, std::size_t block_size) {
  if (b.data.size() != block_size) throw InvalidArgument("block payload has the wrong size");
  w.u32(b.addr);
  write_ts(w, b.ts);
  w.raw(b.data);
}

Block read_block(ByteReader& r, std::size_t block_size) {
  Block b;
  b.addr = r.u32();
  b.ts = read_ts(r);
  auto d = r.raw(block_size);
  b.data.assign(d.begin(), d.end());
  return b;
}

Bytes encode_block(const Block& b, std::size_t block_size) {
  ByteWriter w(block_record_bytes(block_size));
  write_block(w, b, block_size);
  return std::move(w).take();
}

Block decode_block(std::span<const std::uint8_t> in, std::size_t block_size) {
  ByteReader r(in);
  auto b = read_block(r, block_size);
  r.expect_end();
  return b;
}

Bytes encode_slot(const std::optional<Block>& b, std::size_t block_size) {
  ByteWriter w(1 + block_record_bytes(block_size));
  w.u8(b ? 1 : 0);
  if (b) write_block(w, *b, block_size);
  return std::move(w).take();
}

std::optional<Block> decode_slot(std::span<const std::uint8_t> in, std::size_t block_size) {
  ByteReader r(in);
  const auto flag = r.u8();
  std::optional<Block> out;
  if (flag == 1) {
    out = read_block(r, block_size);
  } else if (flag != 0) {
    throw DecodeError("bad slot flag");
  }
  r.expect_end();
  return out;
}

Bytes encode_bucket(std::span<const std::optional<Block>> slots, std::size_t block_size) {
  ByteWriter w(slots.size() * (1 + block_record_bytes(block_size)));
  for (const auto& b : slots) {
    w.u8(b ? 1 : 0);
    if (b) write_block(w, *b, block_size);
  }
  return std::move(w).take();
}

std::vector<std::optional<Block>> decode_bucket(std::span<const std::uint8_t> in,
                                                std::size_t bucket_size, std::size_t block_size) {
  ByteReader r(in);
  std::vector<std::optional<Block>> out(bucket_size);
  for (auto& slot : out) {
    const auto flag = r.u8();
    if (flag == 1) {
      slot = read_block(r, block_size);
    } else if (flag != 0) {
      throw DecodeError("bad slot flag");
    }
  }
  r.expect_end();
  return out;
}

Bytes encode_path_map(const PathMap& m) {
  std::vector<const PathMapEntry*> order;
  order.reserve(m.entries.size());
  for (const auto& e : m.entries) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](auto* x, auto* y) { return x->addr < y->addr; });
  ByteWriter w(4 + order.size() * kPathMapEntryBytes);
  w.u32(static_cast<std::uint32_t>(order.size()));
  for (const auto* e : order) {
    w.u32(e->addr);
    write_location(w, e->loc);
    write_ts(w, e->ts);
  }
  return std::move(w).take();
}

PathMap decode_path_map(std::span<const std::uint8_t> in) {
  ByteReader r(in);
  const auto n = r.u32();
  if (std::uint64_t{n} * kPathMapEntryBytes > r.remaining()) throw DecodeError("path map truncated");
  PathMap m;
  m.entries.resize(n);
  for (auto& e : m.entries) {
    e.addr = r.u32();
    e.loc = read_location(r);
    e.ts = read_ts(r);
  }
  r.expect_end();
  return m;
}

Bytes encode_stash(const Stash& s, std::size_t block_size) {
  std::vector<const Block*> order;
  order.reserve(s.blocks.size());
  for (const auto& b : s.blocks) order.push_back(&b);
  std::sort(order.begin(), order.end(), [](auto* x, auto* y) {
    return x->addr != y->addr ? x->addr < y->addr : x->ts < y->ts;
  });
  ByteWriter w(4 + order.size() * block_record_bytes(block_size));
  w.u32(static_cast<std::uint32_t>(order.size()));
  for (const auto* b : order) write_block(w, *b, block_size);
  return std::move(w).take();
}

Stash decode_stash(std::span<const std::uint8_t> in, std::size_t block_size) {
  ByteReader r(in);
  const auto n = r.u32();
  if (std::uint64_t{n} * block_record_bytes(block_size) > r.remaining()) {
    throw DecodeError("stash truncated");
  }
  Stash s;
  s.blocks.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) s.blocks.push_back(read_block(r, block_size));
  r.expect_end();
  return s;
}

Bytes encode_path(const MultiVersionPath& p, std::size_t block_size) {
  ByteWriter w;
  w.u32(p.leaf);
  w.u32(static_cast<std::uint32_t>(p.slots.size()));
  for (const auto& versions : p.slots) {
    std::vector<const Block*> order;
    for (const auto& b : versions) order.push_back(&b);
    std::sort(order.begin(), order.end(), [](auto* x, auto* y) {
      return x->addr != y->addr ? x->addr < y->addr : x->ts < y->ts;
    });
    w.u32(static_cast<std::uint32_t>(order.size()));
    for (const auto* b : order) write_block(w, *b, block_size);
  }
  return std::move(w).take();
}

MultiVersionPath decode_path(std::span<const std::uint8_t> in, std::size_t block_size) {
  ByteReader r(in);
  MultiVersionPath p;
  p.leaf = r.u32();
  const auto slots = r.u32();
  if (slots > r.remaining() / 4) throw DecodeError("path truncated");
  p.slots.resize(slots);
  for (auto& versions : p.slots) {
    const auto n = r.u32();
    if (std::uint64_t{n} * block_record_bytes(block_size) > r.remaining()) {
      throw DecodeError("path truncated");
    }
    for (std::uint32_t i = 0; i < n; ++i) versions.push_back(read_block(r, block_size));
  }
  r.expect_end();
  return p;
}

std::string to_hex(std::span<const std::uint8_t> b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (auto x : b) {
    s.push_back(kDigits[x >> 4]);
    s.push_back(kDigits[x & 15]);
  }
  return s;
}

}  // namespace mvp
