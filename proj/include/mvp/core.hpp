#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvp/rng.hpp"

namespace mvp {

using Address = std::uint32_t;
using LeafId = std::uint32_t;
using Seq = std::int64_t;
using Bytes = std::vector<std::uint8_t>;

/// Block timestamp <v, a, s>: sequence numbers of the last write, the last
/// access (read or write) and the last move. Ordered lexicographically.
struct Timestamp {
  Seq v = -1;
  Seq a = -1;
  Seq s = -1;

  static constexpr Timestamp sentinel() noexcept { return {-1, -1, -1}; }
  constexpr bool is_sentinel() const noexcept { return v == -1 && a == -1 && s == -1; }

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

constexpr std::strong_ordering compare_ts(const Timestamp& x, const Timestamp& y) noexcept {
  return x <=> y;
}

/// A slot of the tree (heap-numbered node, index within its bucket) or the
/// stash marker. Node 0 is not a tree node, so it encodes the stash.
/// Ordering is (node, idx); heap numbering makes that root-most first.
struct Location {
  std::uint32_t node = 0;
  std::uint32_t idx = 0;

  static constexpr Location stash() noexcept { return {0, 0}; }
  constexpr bool is_stash() const noexcept { return node == 0; }

  friend constexpr auto operator<=>(const Location&, const Location&) = default;
};

using SlotId = Location;

/// Contiguous run of leaves [first, first + count).
struct LeafRange {
  LeafId first = 0;
  std::uint64_t count = 0;

  bool contains(LeafId leaf) const noexcept { return leaf >= first && leaf - first < count; }
  std::vector<LeafId> to_vector() const;
};

/// Binary tree of height L (L+1 levels, 2^L leaves) with buckets of Z slots.
struct TreeGeometry {
  std::uint32_t height = 1;
  std::uint32_t bucket_size = 4;
  std::size_t block_size = 8;

  std::uint64_t leaf_count() const noexcept { return std::uint64_t{1} << height; }
  std::uint64_t node_count() const noexcept { return (std::uint64_t{1} << (height + 1)) - 1; }
  std::uint64_t capacity() const noexcept { return node_count() * bucket_size; }
  std::size_t path_levels() const noexcept { return height + 1; }
  std::size_t path_slots() const noexcept { return path_levels() * bucket_size; }

  void validate() const;

  bool valid_node(std::uint32_t node) const noexcept { return node >= 1 && node <= node_count(); }
  bool valid_slot(const Location& loc) const noexcept {
    return loc.is_stash() || (valid_node(loc.node) && loc.idx < bucket_size);
  }
  static std::uint32_t level_of(std::uint32_t node) noexcept;
  std::uint32_t leaf_node(LeafId leaf) const noexcept {
    return static_cast<std::uint32_t>(leaf_count() + leaf);
  }
  /// Node of the path to `leaf` at `level` (0 = root).
  std::uint32_t path_node(LeafId leaf, std::uint32_t level) const noexcept {
    return leaf_node(leaf) >> (height - level);
  }
  /// Slot at position `pos` of the path to `leaf`; positions run root-most
  /// first, pos = level * Z + idx.
  Location path_slot(LeafId leaf, std::size_t pos) const noexcept {
    const auto level = static_cast<std::uint32_t>(pos / bucket_size);
    return {path_node(leaf, level), static_cast<std::uint32_t>(pos % bucket_size)};
  }
  /// Position of `loc` on the path to `leaf`, if the slot lies on it.
  std::optional<std::size_t> path_position(const Location& loc, LeafId leaf) const noexcept;

  friend bool operator==(const TreeGeometry&, const TreeGeometry&) = default;
};

/// Leaves whose root-to-leaf path passes through `loc`. The stash and root
/// slots are reachable from every leaf. Throws InvalidArgument on a bad node.
LeafRange paths_through(const Location& loc, const TreeGeometry& geom);

/// Uniformly random leaf from paths_through(loc, geom).
LeafId random_path_through(const Location& loc, const TreeGeometry& geom, Rng& rng);

struct Block {
  Address addr = 0;
  Bytes data;
  Timestamp ts;

  friend bool operator==(const Block&, const Block&) = default;
};

struct PmEntry {
  Location loc = Location::stash();
  Timestamp ts = Timestamp::sentinel();

  friend bool operator==(const PmEntry&, const PmEntry&) = default;
};

/// Consolidated view: one <location, timestamp> per address.
using PositionMap = std::vector<PmEntry>;

PositionMap fresh_position_map(std::size_t num_blocks);

struct PathMapEntry {
  Address addr = 0;
  Location loc;
  Timestamp ts;

  friend bool operator==(const PathMapEntry&, const PathMapEntry&) = default;
};

/// Position-map delta produced by one access; at most one entry per address.
struct PathMap {
  std::vector<PathMapEntry> entries;

  void sort() noexcept;
  bool has_unique_addresses() const;
  friend bool operator==(const PathMap&, const PathMap&) = default;
};

struct Stash {
  std::vector<Block> blocks;

  void sort() noexcept;
  bool has_unique_addresses() const;
  friend bool operator==(const Stash&, const Stash&) = default;
};

/// Versions held by each slot of one path, indexed by path position.
struct MultiVersionPath {
  LeafId leaf = 0;
  std::vector<std::vector<Block>> slots;
};

/// Contents of a freshly populated path: at most one block per slot.
struct NewPath {
  LeafId leaf = 0;
  std::vector<std::optional<Block>> slots;
};

}  // namespace mvp
