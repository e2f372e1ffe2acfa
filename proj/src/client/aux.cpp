#include <algorithm>
#include <numeric>

#include "mvp/client.hpp"
#include "mvp/error.hpp"

namespace mvp {

void apply_path_map(PositionMap& pm, const PathMap& m) {
  for (const auto& e : m.entries) {
    if (e.addr >= pm.size()) throw ProtocolError("path map names an address beyond N");
    auto& cur = pm[e.addr];
    if (e.ts > cur.ts) cur = PmEntry{e.loc, e.ts};
  }
}

PositionMap consolidate_path_maps(std::span<const PathMap> history, PositionMap base) {
  for (const auto& m : history) apply_path_map(base, m);
  return base;
}

WorkingSet merge_path_stashes(const MultiVersionPath& path, std::span<const Stash> stashes,
                              const PositionMap& pm, const TreeGeometry& geom) {
  WorkingSet w;
  auto matches = [&](const Block& b, const Location& loc) {
    return b.addr < pm.size() && pm[b.addr].loc == loc && pm[b.addr].ts == b.ts;
  };
  for (const auto& s : stashes) {
    for (const auto& b : s.blocks) {
      if (matches(b, Location::stash())) w.emplace(b.addr, b);
    }
  }
  for (std::size_t pos = 0; pos < path.slots.size(); ++pos) {
    const auto loc = geom.path_slot(path.leaf, pos);
    for (const auto& b : path.slots[pos]) {
      if (matches(b, loc)) w.emplace(b.addr, b);
    }
  }
  return w;
}

PopulateResult populate_path(WorkingSet w, LeafId leaf, Address addr, const PositionMap& pm,
                             Seq seq, const TreeGeometry& geom, Rng& rng) {
  const std::size_t slots = geom.path_slots();
  const std::size_t z = geom.bucket_size;
  PopulateResult out;
  out.path.leaf = leaf;
  out.path.slots.resize(slots);
  std::vector<bool> touched(slots, false);

  auto path_pos = [&](Address a) -> std::optional<std::size_t> {
    if (a >= pm.size() || pm[a].loc.is_stash()) return std::nullopt;
    return geom.path_position(pm[a].loc, leaf);
  };

  // Phase 1: put blocks back where the position map says they are. On a
  // collision the block with the highest s stays, ties to the larger address.
  std::vector<std::optional<Address>> winner(slots);
  for (const auto& [a, b] : w) {
    const auto pos = path_pos(a);
    if (!pos) continue;
    auto& cur = winner[*pos];
    if (!cur || b.ts.s > w.at(*cur).ts.s || (b.ts.s == w.at(*cur).ts.s && a > *cur)) cur = a;
  }
  for (std::size_t pos = 0; pos < slots; ++pos) {
    if (!winner[pos]) continue;
    auto node = w.extract(*winner[pos]);
    out.path.slots[pos] = std::move(node.mapped());
    touched[pos] = true;
  }

  // Phase 2: exchange Z random slots with up to Z random working-set blocks.
  std::vector<std::size_t> positions(slots);
  std::iota(positions.begin(), positions.end(), 0);
  std::size_t chosen = 0;
  if (const auto forced = path_pos(addr)) {
    std::swap(positions[0], positions[*forced]);
    chosen = 1;
  }
  for (; chosen < z; ++chosen) {
    const auto j = chosen + rng.below(slots - chosen);
    std::swap(positions[chosen], positions[j]);
  }
  positions.resize(z);

  std::vector<Address> pool;
  for (const auto& [a, b] : w) {
    if (a != addr) pool.push_back(a);
  }
  const std::size_t take = std::min(z, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);

  std::vector<Block> incoming;
  incoming.reserve(take);
  for (auto a : pool) incoming.push_back(std::move(w.extract(a).mapped()));
  for (std::size_t i = 0; i < z; ++i) {
    const auto pos = positions[i];
    touched[pos] = true;
    if (auto& occ = out.path.slots[pos]) {
      const Address a = occ->addr;
      w.emplace(a, std::move(*occ));
      occ.reset();
    }
    if (i < incoming.size()) out.path.slots[pos] = std::move(incoming[i]);
  }

  // Phase 3: most recently accessed blocks go to the root-most touched slots.
  std::vector<Block> onpath;
  std::vector<std::size_t> order;
  for (std::size_t pos = 0; pos < slots; ++pos) {
    if (!touched[pos]) continue;
    order.push_back(pos);
    if (auto& b = out.path.slots[pos]) {
      onpath.push_back(std::move(*b));
      b.reset();
    }
  }
  std::sort(onpath.begin(), onpath.end(), [](const Block& x, const Block& y) {
    if (x.ts.a != y.ts.a) return x.ts.a > y.ts.a;
    if (x.ts.s != y.ts.s) return x.ts.s > y.ts.s;
    return x.addr > y.addr;
  });
  for (std::size_t i = 0; i < onpath.size(); ++i) {
    auto& b = onpath[i];
    b.ts.s = seq;
    const auto loc = geom.path_slot(leaf, order[i]);
    out.map.entries.push_back({b.addr, loc, b.ts});
    out.path.slots[order[i]] = std::move(b);
  }

  // Phase 4: the rest, including the accessed block, forms the new stash.
  out.stash.blocks.reserve(w.size());
  for (auto& [a, b] : w) {
    const bool moved = a < pm.size() && !pm[a].loc.is_stash();
    if (moved || a == addr) {
      b.ts.s = seq;
      out.map.entries.push_back({a, Location::stash(), b.ts});
    }
    out.stash.blocks.push_back(std::move(b));
  }
  return out;
}

}  // namespace mvp
