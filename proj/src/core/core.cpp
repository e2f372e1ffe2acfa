#include "mvp/core.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "mvp/error.hpp"

namespace mvp {

std::vector<LeafId> LeafRange::to_vector() const {
  std::vector<LeafId> out(count);
  for (std::uint64_t i = 0; i < count; ++i) out[i] = static_cast<LeafId>(first + i);
  return out;
}

void TreeGeometry::validate() const {
  if (height == 0 || height > 30) throw InvalidArgument("tree height must be in [1, 30]");
  if (bucket_size == 0) throw InvalidArgument("bucket size must be positive");
  if (block_size == 0) throw InvalidArgument("block size must be positive");
}

std::uint32_t TreeGeometry::level_of(std::uint32_t node) noexcept {
  return static_cast<std::uint32_t>(std::bit_width(node)) - 1;
}

std::optional<std::size_t> TreeGeometry::path_position(const Location& loc, LeafId leaf) const noexcept {
  if (loc.is_stash() || !valid_node(loc.node) || loc.idx >= bucket_size) return std::nullopt;
  const auto level = level_of(loc.node);
  if (path_node(leaf, level) != loc.node) return std::nullopt;
  return std::size_t{level} * bucket_size + loc.idx;
}

LeafRange paths_through(const Location& loc, const TreeGeometry& geom) {
  if (loc.is_stash()) return {0, geom.leaf_count()};
  if (!geom.valid_node(loc.node) || loc.idx >= geom.bucket_size) {
    throw InvalidArgument("slot (" + std::to_string(loc.node) + ", " + std::to_string(loc.idx) +
                          ") is not in the tree");
  }
  const auto level = TreeGeometry::level_of(loc.node);
  const std::uint64_t span = std::uint64_t{1} << (geom.height - level);
  const std::uint64_t offset = loc.node - (std::uint64_t{1} << level);
  return {static_cast<LeafId>(offset * span), span};
}

LeafId random_path_through(const Location& loc, const TreeGeometry& geom, Rng& rng) {
  const auto range = paths_through(loc, geom);
  return static_cast<LeafId>(range.first + rng.below(range.count));
}

PositionMap fresh_position_map(std::size_t num_blocks) { return PositionMap(num_blocks); }

void PathMap::sort() noexcept {
  std::sort(entries.begin(), entries.end(),
            [](const PathMapEntry& x, const PathMapEntry& y) { return x.addr < y.addr; });
}

bool PathMap::has_unique_addresses() const {
  std::vector<Address> a;
  a.reserve(entries.size());
  for (const auto& e : entries) a.push_back(e.addr);
  std::sort(a.begin(), a.end());
  return std::adjacent_find(a.begin(), a.end()) == a.end();
}

void Stash::sort() noexcept {
  std::sort(blocks.begin(), blocks.end(), [](const Block& x, const Block& y) {
    return x.addr != y.addr ? x.addr < y.addr : x.ts < y.ts;
  });
}

bool Stash::has_unique_addresses() const {
  std::vector<Address> a;
  a.reserve(blocks.size());
  for (const auto& b : blocks) a.push_back(b.addr);
  std::sort(a.begin(), a.end());
  return std::adjacent_find(a.begin(), a.end()) == a.end();
}

}  // namespace mvp
