#include "mvp/client.hpp"

#include <algorithm>

#include "mvp/codec.hpp"
#include "mvp/error.hpp"

namespace mvp {
namespace {

Bytes encode_address(Address a) {
  ByteWriter w(4);
  w.u32(a);
  return std::move(w).take();
}

Address decode_address(const Bytes& b) {
  ByteReader r(b);
  const auto a = r.u32();
  r.expect_end();
  return a;
}

}  // namespace

OramClient::OramClient(ClientId id, ClientConfig config, std::uint64_t seed)
    : id_(id),
      config_(config),
      policy_(config.geom),
      rng_(seed),
      sealer_(Key{}, id, policy_),
      pm_(fresh_position_map(config.num_blocks)) {
  config_.geom.validate();
  if (config_.num_blocks == 0 || config_.num_blocks > config_.geom.capacity()) {
    throw InvalidArgument("number of blocks must be in [1, tree capacity]");
  }
}

bool OramClient::next_is_real() const noexcept {
  if (!config_.strong) return true;
  if (!tau_known_) return config_.sigma == 0;
  return round_ == tau_;
}

void OramClient::begin(AccessRequest req) {
  if (active_) throw InvalidArgument("an access is already in progress");
  if (req.addr >= config_.num_blocks) throw InvalidArgument("address out of range");
  if (req.op == OpType::kWrite && req.data.size() != config_.geom.block_size) {
    throw InvalidArgument("write payload must be exactly one block");
  }
  if (req.op == OpType::kRead && !req.data.empty()) throw InvalidArgument("read carries no payload");
  req_ = std::move(req);
  active_ = true;
  phase_ = OpKind::kGetPm;
  round_ = 0;
  tau_ = 0;
  tau_known_ = !config_.strong;
  result_ = AccessResult{};
}

StepInfo OramClient::step(ServerFacade& server) {
  if (!active_) throw InvalidArgument("no access in progress");
  switch (phase_) {
    case OpKind::kGetPm:
      return do_get_pm(server);
    case OpKind::kGetPs:
      return do_get_ps(server);
    case OpKind::kEvict:
      return do_evict(server);
  }
  throw ProtocolError("bad client phase");
}

StepInfo OramClient::do_get_pm(ServerFacade& server) {
  GetPmRequest req;
  req.client = id_;
  req.last_epoch = last_epoch_;
  if (config_.strong) {
    if (!key_) {
      auto km = server.fetch_key();
      auto rec = reconstruct_key(km.shares, config_.t, km.commitment);
      key_ = to_key(rec.secret);
      sealer_.rekey(*key_);
    }
    req.address = sealer_.seal(EnvelopeKind::kAddress, encode_address(req_.addr));
  }
  GetPmResult res = server.get_pm(req);

  auto rec = reconstruct_key(res.shares, config_.t, res.reply.key_commitment);
  key_ = to_key(rec.secret);
  offending_ = std::move(rec.offending);
  sealer_.rekey(*key_);

  for (const auto& item : res.reply.items) {
    apply_path_map(pm_, decode_path_map(open_envelope(*key_, item.path_map->bytes(), EnvelopeKind::kPathMap)));
  }
  last_epoch_ = std::max(last_epoch_, res.reply.head_epoch);
  seq_ = res.reply.seq;

  if (config_.strong && !tau_known_) {
    unsigned count = 0;
    for (const auto& r : res.reply.registry) {
      const auto a = decode_address(open_envelope(*key_, r.address->bytes(), EnvelopeKind::kAddress));
      if (a == req_.addr) ++count;
    }
    if (count == 0) throw ProtocolError("own registration missing from the registry");
    tau_ = std::min<unsigned>(config_.sigma, count - 1);
    tau_known_ = true;
    result_.tau_real = tau_;
  }

  const bool real = round_is_real();
  const auto& entry = pm_[req_.addr];
  if (real && !entry.loc.is_stash()) {
    leaf_ = random_path_through(entry.loc, config_.geom, rng_);
  } else {
    leaf_ = static_cast<LeafId>(rng_.below(config_.geom.leaf_count()));
  }
  if (real) result_.seq = seq_;
  phase_ = OpKind::kGetPs;
  ++result_.server_ops;
  return {OpKind::kGetPm, real, false, seq_};
}

StepInfo OramClient::do_get_ps(ServerFacade& server) {
  const auto& geom = config_.geom;
  GetPsReply reply = server.get_ps(GetPsRequest{id_, leaf_});
  if (reply.leaf != leaf_ || reply.nodes.size() != geom.path_levels()) {
    throw ProtocolError("path reply does not match the request");
  }

  MultiVersionPath path;
  path.leaf = leaf_;
  path.slots.resize(geom.path_slots());
  for (std::size_t d = 0; d < reply.nodes.size(); ++d) {
    for (const auto& blob : reply.nodes[d]) {
      auto slots = decode_bucket(open_envelope(*key_, blob->bytes(), EnvelopeKind::kBucket),
                                 geom.bucket_size, geom.block_size);
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) path.slots[d * geom.bucket_size + i].push_back(std::move(*slots[i]));
      }
    }
  }
  std::vector<Stash> stashes;
  stashes.reserve(reply.stashes.size());
  for (const auto& blob : reply.stashes) {
    stashes.push_back(decode_stash(open_envelope(*key_, blob->bytes(), EnvelopeKind::kStash), geom.block_size));
  }

  WorkingSet w = merge_path_stashes(path, stashes, pm_, geom);
  const bool real = round_is_real();
  if (real) {
    const auto& entry = pm_[req_.addr];
    auto it = w.find(req_.addr);
    if (!entry.ts.is_sentinel() && it == w.end()) {
      throw ProtocolError("block named by the position map is missing");
    }
    Bytes data;
    Seq v = seq_;
    if (req_.op == OpType::kWrite) {
      data = req_.data;
    } else if (it != w.end()) {
      data = it->second.data;
      v = it->second.ts.v;
    } else {
      data.assign(geom.block_size, 0);
      v = 0;
    }
    const Timestamp ts{v, seq_, seq_};
    w[req_.addr] = Block{req_.addr, data, ts};
    result_.value = std::move(data);
    result_.ts = ts;
  }

  auto pop = populate_path(std::move(w), leaf_, req_.addr, pm_, seq_, geom, rng_);

  pending_ = EvictRequest{};
  pending_.client = id_;
  pending_.path_map = sealer_.seal(EnvelopeKind::kPathMap, encode_path_map(pop.map));
  pending_.buckets.reserve(geom.path_levels());
  for (std::size_t d = 0; d < geom.path_levels(); ++d) {
    std::span<const std::optional<Block>> slots(pop.path.slots.data() + d * geom.bucket_size,
                                                geom.bucket_size);
    pending_.buckets.push_back(sealer_.seal(EnvelopeKind::kBucket, encode_bucket(slots, geom.block_size)));
  }
  pending_.stash = sealer_.seal(EnvelopeKind::kStash, encode_stash(pop.stash, geom.block_size));
  if (config_.gamma > 0 && seq_ % config_.gamma == 0) {
    PathMap full;
    for (std::size_t a = 0; a < pm_.size(); ++a) {
      if (!pm_[a].ts.is_sentinel()) full.entries.push_back({static_cast<Address>(a), pm_[a].loc, pm_[a].ts});
    }
    pending_.compacted = sealer_.seal(EnvelopeKind::kPathMap, encode_path_map(full));
    ++compactions_;
  }
  last_map_ = std::move(pop.map);
  phase_ = OpKind::kEvict;
  ++result_.server_ops;
  return {OpKind::kGetPs, real, false, seq_};
}

StepInfo OramClient::do_evict(ServerFacade& server) {
  server.evict(pending_);
  pending_ = EvictRequest{};
  const bool real = round_is_real();
  ++result_.server_ops;
  ++round_;
  result_.rounds = round_;
  const unsigned total = config_.strong ? config_.sigma + 1 : 1;
  phase_ = OpKind::kGetPm;
  const bool finished = round_ >= total;
  if (finished) active_ = false;
  return {OpKind::kEvict, real, finished, seq_};
}

Bytes OramClient::access(const AccessRequest& req, ServerFacade& server) {
  begin(req);
  while (active_) step(server);
  return result_.value;
}

}  // namespace mvp
