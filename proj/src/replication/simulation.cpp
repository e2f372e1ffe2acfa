#include "mvp/simulation.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mvp/codec.hpp"
#include "mvp/error.hpp"
#include "mvp/zipf.hpp"

namespace mvp {
namespace {

// Consolidated plaintext view maintained from every evicted path map.
class Observer {
 public:
  explicit Observer(std::size_t n) : pm_(fresh_position_map(n)) {}

  void apply(const PathMap& m) {
    for (const auto& e : m.entries) {
      auto& cur = pm_.at(e.addr);
      if (!(e.ts > cur.ts)) continue;
      if (cur.loc.is_stash() && !cur.ts.is_sentinel()) --stash_;
      if (e.loc.is_stash()) ++stash_;
      cur = PmEntry{e.loc, e.ts};
    }
  }

  const PositionMap& pm() const noexcept { return pm_; }
  std::size_t stash_size() const noexcept { return stash_; }

 private:
  PositionMap pm_;
  std::size_t stash_ = 0;
};

// Holds the key and checks every address against the latest evicted write.
class Auditor {
 public:
  Auditor(const Key& key, const TreeGeometry& geom, std::size_t n)
      : key_(key), geom_(geom), shadow_(n) {}

  void record_write(Address a, Seq seq, const Bytes& value) {
    auto& s = shadow_.at(a);
    if (!s || s->first < seq) s = std::make_pair(seq, value);
  }

  void check(const OramServer& server, const PositionMap& pm, AuditReport& report) {
    ++report.accesses_checked;
    const Bytes zero(geom_.block_size, 0);
    for (std::size_t a = 0; a < pm.size(); ++a) {
      const auto& e = pm[a];
      if (e.ts.is_sentinel()) {
        if (shadow_[a]) fail(report, a, "written block has no position-map entry");
        continue;
      }
      ++report.blocks_checked;
      const Block* found = nullptr;
      if (e.loc.is_stash()) {
        for (const auto& s : server.stashes()) {
          const auto& blocks = stash(s.blob);
          auto it = blocks.find(static_cast<Address>(a));
          if (it != blocks.end() && it->second.ts == e.ts) {
            found = &it->second;
            break;
          }
        }
      } else {
        for (const auto& v : server.versions_at(e.loc.node)) {
          const auto& slot = bucket(v)[e.loc.idx];
          if (slot && slot->addr == a && slot->ts == e.ts) {
            found = &*slot;
            break;
          }
        }
      }
      if (!found) {
        fail(report, a, "block named by the position map is not stored");
        continue;
      }
      const Bytes& want = shadow_[a] ? shadow_[a]->second : zero;
      const Seq want_v = shadow_[a] ? shadow_[a]->first : 0;
      if (found->data != want || found->ts.v != want_v) fail(report, a, "stored value is not the latest write");
    }
    if (memo_.size() > 4096) prune();
  }

 private:
  struct Memo {
    BlobPtr keep;
    std::vector<std::optional<Block>> bucket;
    std::unordered_map<Address, Block> stash;
  };

  const std::vector<std::optional<Block>>& bucket(const BlobPtr& b) {
    auto [it, fresh] = memo_.try_emplace(b.get());
    if (fresh) {
      it->second.keep = b;
      it->second.bucket = decode_bucket(open_envelope(key_, b->bytes(), EnvelopeKind::kBucket),
                                        geom_.bucket_size, geom_.block_size);
    }
    return it->second.bucket;
  }

  const std::unordered_map<Address, Block>& stash(const BlobPtr& b) {
    auto [it, fresh] = memo_.try_emplace(b.get());
    if (fresh) {
      it->second.keep = b;
      auto s = decode_stash(open_envelope(key_, b->bytes(), EnvelopeKind::kStash), geom_.block_size);
      for (auto& blk : s.blocks) it->second.stash.emplace(blk.addr, std::move(blk));
    }
    return it->second.stash;
  }

  void prune() {
    for (auto it = memo_.begin(); it != memo_.end();) {
      it = it->second.keep.use_count() == 1 ? memo_.erase(it) : std::next(it);
    }
  }

  void fail(AuditReport& r, std::size_t a, const char* why) {
    if (r.mismatches++ == 0) {
      std::ostringstream s;
      s << "address " << a << " after access " << r.accesses_checked << ": " << why;
      r.first_mismatch = s.str();
    }
  }

  Key key_;
  TreeGeometry geom_;
  std::vector<std::optional<std::pair<Seq, Bytes>>> shadow_;
  std::unordered_map<const Blob*, Memo> memo_;
};

Bytes payload_for(ClientId client, std::uint64_t index, std::size_t size) {
  const std::uint64_t tag = (std::uint64_t{client + 1} << 40) | (index + 1);
  Bytes b(size);
  for (std::size_t i = 0; i < size; ++i) b[i] = static_cast<std::uint8_t>(tag >> (8 * (i % 8)));
  return b;
}

struct ClientSlot {
  ClientSlot(ClientId id, ClientConfig cfg, std::uint64_t seed, ReplicaSet& set)
      : client(id, cfg, derive_seed(seed, 1000 + id)),
        facade(set, derive_seed(seed, 2000 + id)),
        workload(derive_seed(seed, 3000 + id)) {}

  OramClient client;
  ReplicatedFacade facade;
  Rng workload;
  bool frozen = false;
  std::uint64_t started = 0;
  std::uint64_t start_round = 0;
  std::uint64_t real_round = 0;
};

}  // namespace

const char* schedule_name(SchedulePolicy p) noexcept {
  switch (p) {
    case SchedulePolicy::kRoundRobin:
      return "round-robin";
    case SchedulePolicy::kRandom:
      return "random";
    case SchedulePolicy::kAdversarial:
      return "adversarial";
  }
  return "?";
}

std::optional<SchedulePolicy> parse_schedule(const std::string& s) {
  for (auto p : {SchedulePolicy::kRoundRobin, SchedulePolicy::kRandom, SchedulePolicy::kAdversarial}) {
    if (s == schedule_name(p)) return p;
  }
  return std::nullopt;
}

std::vector<ClientId> round_order(SchedulePolicy p, unsigned clients, std::uint64_t seed,
                                  std::uint64_t round) {
  std::vector<ClientId> order;
  order.reserve(3 * clients);
  switch (p) {
    case SchedulePolicy::kRoundRobin:
      for (unsigned slot = 0; slot < clients + 2; ++slot) {
        for (unsigned i = 0; i < clients; ++i) {
          if (slot >= i && slot - i <= 2) order.push_back(i);
        }
      }
      break;
    case SchedulePolicy::kRandom: {
      Rng rng(derive_seed(seed, 0x5eed0000ull + round));
      std::vector<unsigned> left(clients, 3);
      std::vector<ClientId> pending(clients);
      for (unsigned i = 0; i < clients; ++i) pending[i] = i;
      while (!pending.empty()) {
        const auto k = rng.below(pending.size());
        const ClientId c = pending[k];
        order.push_back(c);
        if (--left[c] == 0) pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
      }
      break;
    }
    case SchedulePolicy::kAdversarial:
      for (int phase = 0; phase < 3; ++phase) {
        for (unsigned i = 0; i < clients; ++i) order.push_back(i);
      }
      break;
  }
  return order;
}

std::size_t SimConfig::blocks() const noexcept {
  return num_blocks ? num_blocks : static_cast<std::size_t>(geom.node_count());
}

std::uint64_t SimConfig::rounds() const noexcept {
  const std::uint64_t per_client = (accesses + clients - 1) / std::max(1u, clients);
  return per_client * (strong ? sigma + 1 : 1);
}

void SimConfig::validate() const {
  geom.validate();
  if (clients == 0) throw InvalidArgument("need at least one client");
  if (n == 0 || n <= 3 * t) throw InvalidArgument("need n > 3t");
  if (blocks() > geom.capacity()) throw InvalidArgument("more blocks than tree slots");
  if (c_max == 0) throw InvalidArgument("c_max must be positive");
  if (!(workload.alpha >= 0)) throw InvalidArgument("alpha must be >= 0");
  if (!(workload.write_ratio >= 0 && workload.write_ratio <= 1)) {
    throw InvalidArgument("write ratio must be in [0, 1]");
  }
  if (workload.fixed_address && *workload.fixed_address >= blocks()) {
    throw InvalidArgument("fixed address out of range");
  }
  if (faults.size() > t) throw InvalidArgument("more than t faulty replicas");
  for (const auto& [r, f] : faults) {
    if (r >= n) throw InvalidArgument("fault names a replica that does not exist");
  }
  for (const auto& f : freezes) {
    if (f.client >= clients) throw InvalidArgument("freeze names a client that does not exist");
  }
}

std::string SimConfig::describe() const {
  std::ostringstream s;
  s << "L=" << geom.height << " Z=" << geom.bucket_size << " block_size=" << geom.block_size
    << " N=" << blocks() << " initialize=" << initialize << " n=" << n << " t=" << t
    << " c=" << clients << " c_max=" << c_max << " gamma=" << gamma << " strong=" << strong
    << " sigma=" << sigma << " reclaim_after=";
  if (reclaim_after) {
    s << *reclaim_after;
  } else {
    s << "off";
  }
  s << " schedule=" << schedule_name(policy) << " accesses=" << accesses << " seed=" << seed
    << " alpha=" << workload.alpha << " write_ratio=" << workload.write_ratio << " fixed_address=";
  if (workload.fixed_address) {
    s << *workload.fixed_address;
  } else {
    s << "none";
  }
  s << " faults=";
  if (faults.empty()) s << "none";
  for (std::size_t i = 0; i < faults.size(); ++i) {
    s << (i ? ";" : "") << fault_name(faults[i].second) << ':' << faults[i].first;
  }
  s << " freezes=";
  if (freezes.empty()) s << "none";
  for (std::size_t i = 0; i < freezes.size(); ++i) {
    static const char* kPoint[] = {"start", "pm", "ps"};
    s << (i ? ";" : "") << freezes[i].client << '@' << freezes[i].round << ':'
      << kPoint[static_cast<int>(freezes[i].point)];
  }
  return s.str();
}

SimResult run_simulation(const SimConfig& cfg) {
  cfg.validate();
  const std::size_t num_blocks = cfg.blocks();
  const auto& geom = cfg.geom;

  Rng key_rng(derive_seed(cfg.seed, 0xC0FFEE));
  const Key key = random_key(key_rng);
  auto shares = share_key(key, cfg.n, cfg.t, key_rng);
  SetupImage image;
  if (cfg.initialize) {
    image = prepare_zero_setup(geom, key, num_blocks);
  } else {
    image.key_commitment = key_commitment(key);
  }

  ReplicationConfig rc;
  rc.n = cfg.n;
  rc.t = cfg.t;
  rc.server = ServerConfig{geom, cfg.c_max, cfg.strong, cfg.sigma, cfg.reclaim_after};
  ReplicaSet set(rc, image, shares);
  for (const auto& [r, f] : cfg.faults) set.inject_fault(r, f);

  Observer observer(num_blocks);
  if (image.path_map) {
    observer.apply(decode_path_map(open_envelope(key, image.path_map->bytes(), EnvelopeKind::kPathMap)));
  }
  std::optional<Auditor> auditor;
  if (cfg.audit) auditor.emplace(key, geom, num_blocks);

  ClientConfig cc{geom, num_blocks, cfg.t, cfg.gamma, cfg.strong, cfg.sigma};
  std::vector<std::unique_ptr<ClientSlot>> slots;
  for (unsigned i = 0; i < cfg.clients; ++i) {
    slots.push_back(std::make_unique<ClientSlot>(i, cc, cfg.seed, set));
  }
  const ZipfSampler zipf(cfg.workload.alpha, num_blocks);

  SimResult res;
  res.initial_value_digest = value_digest(Bytes(geom.block_size, 0));
  const std::uint64_t rounds = cfg.rounds();
  std::uint64_t completed = 0;

  auto frozen_at = [&](ClientId c, std::uint64_t round, FreezePoint p) {
    return std::any_of(cfg.freezes.begin(), cfg.freezes.end(), [&](const FreezeSpec& f) {
      return f.client == c && f.round == round && f.point == p;
    });
  };

  for (std::uint64_t round = 0; round < rounds; ++round) {
    for (auto& slot : slots) {
      auto& s = *slot;
      if (s.frozen || s.client.in_progress()) continue;
      if (frozen_at(s.client.id(), round, FreezePoint::kBeforeAccess)) {
        s.frozen = true;
        continue;
      }
      AccessRequest req;
      req.op = s.workload.unit() < cfg.workload.write_ratio ? OpType::kWrite : OpType::kRead;
      req.addr = cfg.workload.fixed_address ? *cfg.workload.fixed_address
                                            : static_cast<Address>(zipf.sample(s.workload) - 1);
      if (req.op == OpType::kWrite) req.data = payload_for(s.client.id(), s.started, geom.block_size);
      s.client.begin(std::move(req));
      s.start_round = round;
      ++s.started;
    }

    std::vector<bool> busy(cfg.clients, false);
    std::unordered_set<Address> real_this_round;
    for (const ClientId id : round_order(cfg.policy, cfg.clients, cfg.seed, round)) {
      auto& s = *slots[id];
      if (s.frozen || busy[id] || !s.client.in_progress()) continue;
      StepInfo info;
      try {
        info = s.client.step(s.facade);
      } catch (const BusyError&) {
        busy[id] = true;
        ++res.busy_retries;
        continue;
      }
      ++res.server_ops;
      const auto& req = s.client.request();
      const auto& out = s.client.result();
      const auto pos = set.log_size();

      if (info.op == OpKind::kGetPm && info.real) {
        HistoryEvent e;
        e.kind = EventKind::kInv;
        e.client = id;
        e.op = req.op;
        e.addr = req.addr;
        if (req.op == OpType::kWrite) e.value = value_digest(req.data);
        e.pos = pos;
        res.history.events.push_back(std::move(e));
        s.real_round = round;
        if (cfg.strong && !real_this_round.insert(req.addr).second) ++res.same_round_collisions;
      }
      if (info.op == OpKind::kGetPs) res.getps_reply_sizes.insert(set.last_metrics().reply_bytes);
      if (info.op == OpKind::kEvict) {
        observer.apply(s.client.last_path_map());
        if (info.real) {
          HistoryEvent e;
          e.kind = EventKind::kRep;
          e.client = id;
          e.op = req.op;
          e.value = value_digest(out.value);
          e.pos = pos;
          res.history.events.push_back(std::move(e));
          if (auditor && req.op == OpType::kWrite) auditor->record_write(req.addr, out.seq, req.data);
        }
        if (auditor) auditor->check(set.reference(), observer.pm(), res.audit);
      }
      if (cfg.record_metrics) {
        const auto& m = set.last_metrics();
        res.metrics.push_back({round, id, info.op, m.req_bytes, m.resp_bytes, info.seq,
                               observer.stash_size(), set.reference().open_contexts()});
      }
      if (info.finished) {
        ++completed;
        res.accesses.push_back({id, s.started - 1, req.op, req.addr, out.value, out.seq, s.start_round,
                                s.real_round, out.server_ops, out.tau_real});
      }
      if (!info.finished && s.client.in_progress()) {
        if (info.op == OpKind::kGetPm && out.server_ops == 1 &&
            frozen_at(id, s.start_round, FreezePoint::kAfterGetPm)) {
          s.frozen = true;
        }
        if (info.op == OpKind::kGetPs && out.server_ops == 2 &&
            frozen_at(id, s.start_round, FreezePoint::kAfterGetPs)) {
          s.frozen = true;
        }
      }
    }

    res.stash.push_back({round + 1, completed, observer.stash_size()});
    res.max_stashes = std::max(res.max_stashes, set.reference().stash_count());
    if (cfg.check_replicas) {
      ++res.replica_checks;
      if (!set.correct_states_agree()) res.replicas_agree = false;
    }
  }
  res.max_versions = set.reference().max_versions();
  res.peak_contexts = set.reference().peak_contexts();
  res.fallbacks = set.fallbacks();
  return res;
}

std::vector<SimResult> run_simulations(const std::vector<SimConfig>& configs) {
  std::vector<SimResult> out(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(configs.size()); ++i) {
    try {
      out[i] = run_simulation(configs[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

SimConfig stash_config(unsigned L, unsigned Z, unsigned c, double alpha, std::uint64_t accesses,
                       std::uint64_t seed) {
  SimConfig cfg;
  cfg.geom = TreeGeometry{L, Z, 8};
  cfg.clients = c;
  cfg.c_max = std::max(10u, c);
  cfg.policy = SchedulePolicy::kAdversarial;
  cfg.accesses = accesses;
  cfg.seed = seed;
  cfg.workload.alpha = alpha;
  return cfg;
}

std::vector<StashSample> simulate_stash(unsigned L, unsigned Z, unsigned c, double alpha,
                                        std::uint64_t accesses, std::uint64_t seed) {
  return run_simulation(stash_config(L, Z, c, alpha, accesses, seed)).stash;
}

}  // namespace mvp
