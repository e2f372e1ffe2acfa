#include "mvp/replication.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <numeric>

#include "mvp/error.hpp"

namespace mvp {
namespace {

Digest flipped(Digest d, unsigned salt) {
  d[salt % d.size()] ^= 0x01;
  return d;
}

GetPmReply corrupt_reply(GetPmReply r, unsigned salt) {
  if (!r.items.empty()) {
    r.items[0].path_map = tampered_copy(*r.items[0].path_map, salt);
  } else {
    r.seq ^= 1;
  }
  return r;
}

GetPsReply corrupt_reply(GetPsReply r, unsigned salt) {
  for (auto& versions : r.nodes) {
    if (!versions.empty()) {
      versions[0] = tampered_copy(*versions[0], salt);
      return r;
    }
  }
  if (!r.stashes.empty()) {
    r.stashes[0] = tampered_copy(*r.stashes[0], salt);
  } else {
    r.leaf ^= 1;
  }
  return r;
}

EvictReply corrupt_reply(EvictReply r, unsigned) {
  r.epoch ^= 1;
  return r;
}

// Replies that share every blob object hash identically, which spares
// recomputing the digest for each correct replica.
bool same_blobs(const GetPsReply& a, const GetPsReply& b) {
  return a.leaf == b.leaf && a.padded_bytes == b.padded_bytes && a.nodes == b.nodes &&
         a.stashes == b.stashes;
}

bool same_blobs(const GetPmReply& a, const GetPmReply& b) {
  auto item_eq = [](const HistoryItem& x, const HistoryItem& y) {
    return x.epoch == y.epoch && x.path_map == y.path_map;
  };
  auto reg_eq = [](const RegistryItem& x, const RegistryItem& y) {
    return x.client == y.client && x.counter == y.counter && x.address == y.address;
  };
  return a.seq == b.seq && a.head_epoch == b.head_epoch && a.key_commitment == b.key_commitment &&
         std::equal(a.items.begin(), a.items.end(), b.items.begin(), b.items.end(), item_eq) &&
         std::equal(a.registry.begin(), a.registry.end(), b.registry.begin(), b.registry.end(), reg_eq);
}
bool same_blobs(const EvictReply&, const EvictReply&) { return false; }

}  // namespace

const char* fault_name(FaultBehavior f) noexcept {
  switch (f) {
    case FaultBehavior::kCrash:
      return "crash";
    case FaultBehavior::kCorruptReplies:
      return "corrupt-replies";
    case FaultBehavior::kCorruptShares:
      return "corrupt-shares";
    case FaultBehavior::kEquivocateHash:
      return "equivocate-hash";
  }
  return "?";
}

std::optional<FaultBehavior> parse_fault(const std::string& s) {
  for (auto f : {FaultBehavior::kCrash, FaultBehavior::kCorruptReplies, FaultBehavior::kCorruptShares,
                 FaultBehavior::kEquivocateHash}) {
    if (s == fault_name(f)) return f;
  }
  return std::nullopt;
}

ReplicaSet::ReplicaSet(ReplicationConfig config, const SetupImage& image, std::vector<KeyShare> shares)
    : config_(config), shares_(std::move(shares)), faults_(config.n) {
  if (config_.n == 0) throw InvalidArgument("need at least one replica");
  if (config_.n <= 3 * config_.t) throw InvalidArgument("need n > 3t");
  if (shares_.size() != config_.n) throw InvalidArgument("need one key share per replica");
  replicas_.reserve(config_.n);
  for (unsigned i = 0; i < config_.n; ++i) replicas_.emplace_back(config_.server, image);
}

void ReplicaSet::inject_fault(unsigned replica, FaultBehavior behavior) {
  if (replica >= config_.n) throw InvalidArgument("no such replica");
  const auto faulty = static_cast<unsigned>(
      std::count_if(faults_.begin(), faults_.end(), [](const auto& f) { return f.has_value(); }));
  if (!faults_[replica] && faulty + 1 > config_.t) throw InvalidArgument("more than t faulty replicas");
  faults_[replica] = behavior;
}

const OramServer& ReplicaSet::reference() const {
  for (unsigned i = 0; i < config_.n; ++i) {
    if (!faults_[i]) return replicas_[i];
  }
  throw ProtocolError("no correct replica");
}

bool ReplicaSet::correct_states_agree() const {
  std::optional<Digest> first;
  for (unsigned i = 0; i < config_.n; ++i) {
    if (faults_[i]) continue;
    const auto h = replicas_[i].state_hash();
    if (!first) {
      first = h;
    } else if (h != *first) {
      return false;
    }
  }
  return true;
}

KeyMaterial ReplicaSet::fetch_key() const {
  KeyMaterial km;
  std::map<Digest, unsigned> votes;
  for (unsigned i = 0; i < config_.n; ++i) {
    if (!live(i)) continue;
    KeyShare s = shares_[i];
    if (faults_[i] == FaultBehavior::kCorruptShares) s.y[0] = gf::add(s.y[0], 1);
    km.shares.push_back(std::move(s));
    Digest c = replicas_[i].key_commitment();
    if (faults_[i] == FaultBehavior::kCorruptReplies) c = flipped(c, i);
    ++votes[c];
  }
  for (const auto& [c, v] : votes) {
    if (v >= config_.t + 1) {
      km.commitment = c;
      return km;
    }
  }
  throw TransportError("no key commitment gathered t+1 votes");
}

template <class Reply, class Exec, class Corrupt>
Reply ReplicaSet::execute(OpKind op, std::size_t req_bytes, Exec exec, Corrupt corrupt, Rng& chooser) {
  const unsigned n = config_.n;
  ++log_;
  last_ = OpMetrics{op, log_, req_bytes, 0, 0, 0, false};

  std::vector<std::optional<Reply>> replies(n);
  std::exception_ptr error;
  unsigned errors = 0, live_count = 0;
  for (unsigned i = 0; i < n; ++i) {
    if (!live(i)) continue;
    ++live_count;
    try {
      replies[i] = exec(replicas_[i]);
    } catch (const Error&) {
      ++errors;
      if (!error) error = std::current_exception();
    }
  }
  if (errors > 0) {
    // Replicas are deterministic, so a rejection is unanimous among correct ones.
    if (errors != live_count) throw ProtocolError("replicas disagree on a rejection");
    last_.resp_bytes = live_count * 32;
    std::rethrow_exception(error);
  }

  std::vector<std::optional<Reply>> full(n);
  std::vector<std::optional<Digest>> digests(n);  // digest of full[i]
  std::vector<std::optional<Digest>> hashes(n);
  for (unsigned i = 0; i < n; ++i) {
    if (!replies[i]) continue;
    full[i] = faults_[i] == FaultBehavior::kCorruptReplies ? corrupt(*replies[i], i + 1) : *replies[i];
    for (unsigned j = 0; j < i && !digests[i]; ++j) {
      if (full[j] && same_blobs(*full[i], *full[j])) digests[i] = digests[j];
    }
    if (!digests[i]) digests[i] = full[i]->digest();
    const auto f = faults_[i];
    hashes[i] = (f == FaultBehavior::kCorruptReplies || f == FaultBehavior::kEquivocateHash)
                    ? flipped(*digests[i], i)
                    : *digests[i];
  }

  const unsigned designated = static_cast<unsigned>(chooser.below(n));
  std::vector<std::optional<Digest>> fetched(n);  // digests of full replies received
  auto support = [&](const Digest& d) {
    unsigned s = 0;
    for (unsigned j = 0; j < n; ++j) {
      if ((hashes[j] && *hashes[j] == d) || (fetched[j] && *fetched[j] == d)) ++s;
    }
    return s;
  };
  auto fetch = [&](unsigned j) {
    if (!full[j]) return;
    fetched[j] = digests[j];
    last_.resp_bytes += full[j]->wire_bytes();
    ++last_.full_replies;
  };

  for (unsigned j = 0; j < n; ++j) {
    if (j != designated && hashes[j]) last_.resp_bytes += 32;
  }
  fetch(designated);
  if (fetched[designated] && support(*fetched[designated]) >= config_.t + 1) {
    last_.reply_bytes = full[designated]->wire_bytes();
    return *full[designated];
  }

  last_.fallback = true;
  ++fallbacks_;
  std::vector<unsigned> others;
  for (unsigned j = 0; j < n; ++j) {
    if (j != designated) others.push_back(j);
  }
  for (std::size_t i = 0; i + 1 < others.size(); ++i) {
    std::swap(others[i], others[i + chooser.below(others.size() - i)]);
  }
  const std::size_t batch = std::max(1u, config_.t);
  for (std::size_t at = 0; at < others.size(); at += batch) {
    for (std::size_t k = at; k < std::min(others.size(), at + batch); ++k) fetch(others[k]);
    for (unsigned j = 0; j < n; ++j) {
      if (fetched[j] && support(*fetched[j]) >= config_.t + 1) {
        last_.reply_bytes = full[j]->wire_bytes();
        return *full[j];
      }
    }
  }
  throw TransportError("no reply gathered t+1 matching votes");
}

GetPmResult ReplicaSet::get_pm(const GetPmRequest& req, Rng& chooser) {
  GetPmResult out;
  out.reply = execute<GetPmReply>(
      OpKind::kGetPm, config_.n * req.wire_bytes(), [&](OramServer& s) { return s.get_pm(req); },
      [](const GetPmReply& r, unsigned salt) { return corrupt_reply(r, salt); }, chooser);
  for (unsigned i = 0; i < config_.n; ++i) {
    if (!live(i)) continue;
    KeyShare s = shares_[i];
    if (faults_[i] == FaultBehavior::kCorruptShares) s.y[0] = gf::add(s.y[0], 1);
    last_.resp_bytes += share_wire_bytes(32);
    out.shares.push_back(std::move(s));
  }
  return out;
}

GetPsReply ReplicaSet::get_ps(const GetPsRequest& req, Rng& chooser) {
  return execute<GetPsReply>(
      OpKind::kGetPs, config_.n * req.wire_bytes(), [&](OramServer& s) { return s.get_ps(req); },
      [](const GetPsReply& r, unsigned salt) { return corrupt_reply(r, salt); }, chooser);
}

EvictReply ReplicaSet::evict(const EvictRequest& req, Rng& chooser) {
  // The payload goes to every replica directly; only its 32-byte digest
  // passes through the ordering layer.
  return execute<EvictReply>(
      OpKind::kEvict, config_.n * req.wire_bytes() + 32, [&](OramServer& s) { return s.evict(req); },
      [](const EvictReply& r, unsigned salt) { return corrupt_reply(r, salt); }, chooser);
}

}  // namespace mvp
