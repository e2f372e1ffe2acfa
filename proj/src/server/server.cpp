#include "mvp/server.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <string>

#include "mvp/codec.hpp"
#include "mvp/error.hpp"

namespace mvp {

struct OramServer::Node {
  std::vector<BlobPtr> versions;
  NodePtr child[2];
  mutable std::optional<Digest> merkle;
};

namespace {

using Node = OramServer::Node;
using NodePtr = OramServer::NodePtr;

const Digest kEmptyDigest{};

const Digest& node_digest(const NodePtr& n) {
  if (!n) return kEmptyDigest;
  if (!n->merkle) {
    Hasher h;
    h.u64(n->versions.size());
    for (const auto& v : n->versions) h.update(v->digest());
    h.update(node_digest(n->child[0])).update(node_digest(n->child[1]));
    n->merkle = h.finish();
  }
  return *n->merkle;
}

bool contains_digest(const std::vector<BlobPtr>& vs, const Digest& d) {
  for (const auto& v : vs) {
    if (v->digest() == d) return true;
  }
  return false;
}

}  // namespace

SetupImage prepare_setup(const TreeGeometry& geom, const Key& key, std::size_t num_blocks,
                         const std::vector<std::pair<Address, Bytes>>& initial) {
  geom.validate();
  if (num_blocks > geom.capacity()) throw InvalidArgument("more blocks than tree slots");
  std::set<Address> seen;
  for (const auto& [addr, data] : initial) {
    if (addr >= num_blocks) throw InvalidArgument("initial address out of range");
    if (!seen.insert(addr).second) throw InvalidArgument("duplicate initial address");
    if (data.size() != geom.block_size) throw InvalidArgument("initial payload has the wrong size");
  }

  std::map<std::uint32_t, std::vector<std::optional<Block>>> buckets;
  PathMap pm;
  std::size_t next = 0;
  for (std::uint32_t level = geom.height + 1; level-- > 0 && next < initial.size();) {
    const std::uint32_t first = 1u << level;
    for (std::uint32_t idx = 0; idx < geom.bucket_size && next < initial.size(); ++idx) {
      for (std::uint32_t node = first; node < 2 * first && next < initial.size(); ++node) {
        auto& slots = buckets[node];
        slots.resize(geom.bucket_size);
        const auto& [addr, data] = initial[next++];
        const Timestamp ts{0, 0, 0};
        slots[idx] = Block{addr, data, ts};
        pm.entries.push_back({addr, {node, idx}, ts});
      }
    }
  }

  SetupImage image;
  Sealer sealer(key, kSetupSender, SizePolicy(geom));
  for (const auto& [node, slots] : buckets) {
    image.buckets.emplace_back(node, sealer.seal(EnvelopeKind::kBucket, encode_bucket(slots, geom.block_size)));
  }
  if (!pm.entries.empty()) image.path_map = sealer.seal(EnvelopeKind::kPathMap, encode_path_map(pm));
  image.key_commitment = key_commitment(key);
  return image;
}

SetupImage prepare_zero_setup(const TreeGeometry& geom, const Key& key, std::size_t num_blocks) {
  std::vector<std::pair<Address, Bytes>> initial;
  initial.reserve(num_blocks);
  for (std::size_t a = 0; a < num_blocks; ++a) {
    initial.emplace_back(static_cast<Address>(a), Bytes(geom.block_size, 0));
  }
  return prepare_setup(geom, key, num_blocks, initial);
}

OramServer::OramServer(ServerConfig config, const SetupImage& image)
    : config_(config), policy_(config.geom), key_commitment_(image.key_commitment) {
  config_.geom.validate();
  if (config_.c_max == 0) throw InvalidArgument("c_max must be positive");
  std::map<std::uint32_t, BlobPtr> by_node;
  for (const auto& [node, blob] : image.buckets) {
    if (!config_.geom.valid_node(node)) throw InvalidArgument("setup bucket outside the tree");
    by_node[node] = blob;
  }
  const auto count = config_.geom.node_count();
  std::function<NodePtr(std::uint64_t)> build = [&](std::uint64_t id) -> NodePtr {
    if (id > count) return nullptr;
    auto left = build(2 * id);
    auto right = build(2 * id + 1);
    auto it = by_node.find(static_cast<std::uint32_t>(id));
    if (it == by_node.end() && !left && !right) return nullptr;
    auto n = std::make_shared<Node>();
    if (it != by_node.end()) n->versions.push_back(it->second);
    n->child[0] = std::move(left);
    n->child[1] = std::move(right);
    return n;
  };
  if (!by_node.empty()) root_ = build(1);
  if (image.path_map) {
    head_epoch_ = 1;
    history_.push_back({1, image.path_map});
  }
}

const OramServer::Node* OramServer::descend(const NodePtr& root, std::uint32_t node) const {
  const auto level = TreeGeometry::level_of(node);
  const Node* cur = root.get();
  for (std::uint32_t d = 1; cur && d <= level; ++d) {
    cur = cur->child[(node >> (level - d)) & 1].get();
  }
  return cur;
}

void OramServer::reclaim() {
  if (!config_.reclaim_after) return;
  for (auto it = contexts_.begin(); it != contexts_.end();) {
    if (static_cast<std::uint64_t>(next_seq_ - it->second.seq) > *config_.reclaim_after) {
      registry_.erase(it->first);
      it = contexts_.erase(it);
    } else {
      ++it;
    }
  }
}

GetPmReply OramServer::get_pm(const GetPmRequest& req) {
  if (contexts_.count(req.client)) throw ContextError("client already has an open context");
  reclaim();
  if (contexts_.size() >= config_.c_max) throw BusyError("too many concurrent clients");
  if (config_.strong && !req.address) throw InvalidArgument("strong mode needs the sealed address");

  Context ctx;
  ctx.seq = next_seq_++;
  ctx.snap = Snapshot{root_, stashes_, head_epoch_};
  contexts_.emplace(req.client, std::move(ctx));
  peak_contexts_ = std::max(peak_contexts_, contexts_.size());

  GetPmReply reply;
  reply.seq = next_seq_ - 1;
  reply.head_epoch = head_epoch_;
  reply.key_commitment = key_commitment_;
  auto first = std::upper_bound(history_.begin(), history_.end(), req.last_epoch,
                                [](std::uint64_t e, const HistoryItem& h) { return e < h.epoch; });
  reply.items.assign(first, history_.end());

  if (config_.strong) {
    auto it = registry_.find(req.client);
    if (it == registry_.end()) {
      registry_.emplace(req.client, RegistryItem{req.client, 1, req.address});
    } else {
      it->second.counter += 1;
      it->second.address = req.address;
    }
    for (const auto& [c, item] : registry_) reply.registry.push_back(item);
  }
  return reply;
}

GetPsReply OramServer::get_ps(const GetPsRequest& req) {
  auto it = contexts_.find(req.client);
  if (it == contexts_.end()) throw ContextError("no open context");
  if (req.leaf >= config_.geom.leaf_count()) throw InvalidArgument("leaf out of range");
  auto& ctx = it->second;
  if (ctx.leaf) throw ContextError("path already fetched in this context");
  ctx.leaf = req.leaf;

  const auto& geom = config_.geom;
  GetPsReply reply;
  reply.leaf = req.leaf;
  reply.nodes.resize(geom.path_levels());
  const Node* cur = ctx.snap.root.get();
  std::size_t max_versions = 0;
  for (std::uint32_t d = 0; d <= geom.height; ++d) {
    if (d > 0 && cur) cur = cur->child[(req.leaf >> (geom.height - d)) & 1].get();
    if (cur) reply.nodes[d] = cur->versions;
    max_versions = std::max(max_versions, reply.nodes[d].size());
  }
  std::size_t max_stash = 0;
  for (const auto& s : ctx.snap.stashes) {
    reply.stashes.push_back(s.blob);
    max_stash = std::max(max_stash, s.blob->size());
  }
  reply.padded_bytes = getps_padded_bytes(geom.path_levels(), policy_.bucket_envelope_bytes(),
                                          max_versions, reply.stashes.size(), max_stash);
  return reply;
}

EvictReply OramServer::evict(const EvictRequest& req) {
  auto it = contexts_.find(req.client);
  if (it == contexts_.end()) throw ContextError("no open context");
  const auto& geom = config_.geom;
  if (!it->second.leaf) throw ContextError("evict before getPS");
  if (req.buckets.size() != geom.path_levels() || !req.stash || !req.path_map) {
    throw InvalidArgument("malformed evict");
  }
  const Context ctx = std::move(it->second);
  contexts_.erase(it);
  const LeafId leaf = *ctx.leaf;

  std::vector<const Node*> cur(geom.path_levels(), nullptr), snap(geom.path_levels(), nullptr);
  cur[0] = root_.get();
  snap[0] = ctx.snap.root.get();
  for (std::uint32_t d = 1; d <= geom.height; ++d) {
    const auto bit = (leaf >> (geom.height - d)) & 1;
    cur[d] = cur[d - 1] ? cur[d - 1]->child[bit].get() : nullptr;
    snap[d] = snap[d - 1] ? snap[d - 1]->child[bit].get() : nullptr;
  }
  NodePtr below;
  for (std::uint32_t d = geom.height + 1; d-- > 0;) {
    auto n = std::make_shared<Node>();
    if (cur[d]) {
      n->child[0] = cur[d]->child[0];
      n->child[1] = cur[d]->child[1];
      for (const auto& v : cur[d]->versions) {
        if (!snap[d] || !contains_digest(snap[d]->versions, v->digest())) n->versions.push_back(v);
      }
    }
    n->versions.push_back(req.buckets[d]);
    if (d < geom.height) n->child[(leaf >> (geom.height - d - 1)) & 1] = below;
    below = std::move(n);
  }
  root_ = std::move(below);

  std::vector<StashItem> kept;
  for (const auto& s : stashes_) {
    const bool seen = std::any_of(ctx.snap.stashes.begin(), ctx.snap.stashes.end(),
                                  [&](const StashItem& x) { return x.id == s.id; });
    if (!seen) kept.push_back(s);
  }
  kept.push_back({ctx.seq, req.stash});
  std::sort(kept.begin(), kept.end(), [](const StashItem& a, const StashItem& b) { return a.id < b.id; });
  stashes_ = std::move(kept);

  if (req.compacted) {
    auto end = std::upper_bound(history_.begin(), history_.end(), ctx.snap.epoch,
                                [](std::uint64_t e, const HistoryItem& h) { return e < h.epoch; });
    if (end != history_.begin()) {
      history_.erase(history_.begin(), end);
      history_.insert(history_.begin(), HistoryItem{ctx.snap.epoch, req.compacted});
    }
  }
  history_.push_back({++head_epoch_, req.path_map});

  if (config_.strong) {
    auto r = registry_.find(req.client);
    if (r != registry_.end() && r->second.counter >= config_.sigma + 1) registry_.erase(r);
  }
  return EvictReply{head_epoch_};
}

std::vector<BlobPtr> OramServer::versions_at(std::uint32_t node) const {
  if (!config_.geom.valid_node(node)) throw InvalidArgument("node outside the tree");
  const Node* n = descend(root_, node);
  return n ? n->versions : std::vector<BlobPtr>{};
}

std::size_t OramServer::max_versions() const {
  std::size_t best = 0;
  std::function<void(const Node*)> walk = [&](const Node* n) {
    if (!n) return;
    best = std::max(best, n->versions.size());
    walk(n->child[0].get());
    walk(n->child[1].get());
  };
  walk(root_.get());
  return best;
}

Digest OramServer::state_hash() const {
  Hasher h;
  h.update(node_digest(root_));
  h.u64(stashes_.size());
  for (const auto& s : stashes_) h.u64(static_cast<std::uint64_t>(s.id)).update(s.blob->digest());
  h.u64(history_.size());
  for (const auto& e : history_) h.u64(e.epoch).update(e.path_map->digest());
  h.u64(static_cast<std::uint64_t>(next_seq_)).u64(head_epoch_);
  h.u64(contexts_.size());
  for (const auto& [c, ctx] : contexts_) {
    h.u64(c).u64(static_cast<std::uint64_t>(ctx.seq)).u64(ctx.leaf ? *ctx.leaf + 1ull : 0);
    h.update(node_digest(ctx.snap.root)).u64(ctx.snap.epoch);
    for (const auto& s : ctx.snap.stashes) h.u64(static_cast<std::uint64_t>(s.id));
  }
  h.u64(registry_.size());
  for (const auto& [c, r] : registry_) h.u64(c).u64(r.counter).update(r.address->digest());
  h.update(key_commitment_);
  return h.finish();
}

Bytes OramServer::serialize_state() const {
  ByteWriter w;
  w.u32(config_.geom.height);
  w.u32(config_.geom.bucket_size);
  w.u64(config_.geom.block_size);
  std::vector<std::pair<std::uint32_t, const Node*>> frontier{{1, root_.get()}};
  std::uint32_t nonempty = 0;
  ByteWriter nodes;
  while (!frontier.empty()) {
    std::vector<std::pair<std::uint32_t, const Node*>> next;
    for (const auto& [id, n] : frontier) {
      if (!n) continue;
      ++nonempty;
      nodes.u32(id);
      nodes.u32(static_cast<std::uint32_t>(n->versions.size()));
      for (const auto& v : n->versions) nodes.blob(v->bytes());
      next.emplace_back(2 * id, n->child[0].get());
      next.emplace_back(2 * id + 1, n->child[1].get());
    }
    frontier = std::move(next);
  }
  w.u32(nonempty);
  w.raw(nodes.bytes());
  w.u32(static_cast<std::uint32_t>(stashes_.size()));
  for (const auto& s : stashes_) {
    w.i64(s.id);
    w.blob(s.blob->bytes());
  }
  w.u32(static_cast<std::uint32_t>(history_.size()));
  for (const auto& e : history_) {
    w.u64(e.epoch);
    w.blob(e.path_map->bytes());
  }
  w.i64(next_seq_);
  w.u64(head_epoch_);
  w.u32(static_cast<std::uint32_t>(contexts_.size()));
  for (const auto& [c, ctx] : contexts_) {
    w.u32(c);
    w.i64(ctx.seq);
    w.u64(ctx.leaf ? *ctx.leaf + 1ull : 0);
    w.raw(node_digest(ctx.snap.root));
    w.u64(ctx.snap.epoch);
    w.u32(static_cast<std::uint32_t>(ctx.snap.stashes.size()));
    for (const auto& s : ctx.snap.stashes) w.i64(s.id);
  }
  w.u32(static_cast<std::uint32_t>(registry_.size()));
  for (const auto& [c, r] : registry_) {
    w.u32(c);
    w.u32(r.counter);
    w.blob(r.address->bytes());
  }
  w.raw(key_commitment_);
  return std::move(w).take();
}

}  // namespace mvp
