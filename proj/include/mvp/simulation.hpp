#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mvp/history.hpp"
#include "mvp/replication.hpp"

namespace mvp {

enum class SchedulePolicy : std::uint8_t { kRoundRobin, kRandom, kAdversarial };

const char* schedule_name(SchedulePolicy p) noexcept;
std::optional<SchedulePolicy> parse_schedule(const std::string& s);

/// Order of the 3c steps of one round: client ids, each appearing three
/// times (getPM, getPS, evict in that order).
///  round-robin: staggered pipeline c0.pm, c0.ps, c1.pm, c0.ev, c1.ps, c2.pm, ...
///  random:      uniform interleaving drawn from (seed, round)
///  adversarial: every getPM, then every getPS, then every evict
std::vector<ClientId> round_order(SchedulePolicy p, unsigned clients, std::uint64_t seed,
                                  std::uint64_t round);

enum class FreezePoint : std::uint8_t { kBeforeAccess, kAfterGetPm, kAfterGetPs };

/// Client `client` stops for good at `point` of the access it starts in `round`.
struct FreezeSpec {
  ClientId client = 0;
  std::uint64_t round = 0;
  FreezePoint point = FreezePoint::kBeforeAccess;
};

struct WorkloadConfig {
  double alpha = 1.0;
  double write_ratio = 0.5;
  /// Every access targets this address when set.
  std::optional<Address> fixed_address;
};

struct SimConfig {
  TreeGeometry geom{8, 4, 8};
  /// 0 means 2^(L+1) - 1.
  std::size_t num_blocks = 0;
  /// Start with every address present (zero payload) in the leaf levels.
  bool initialize = true;
  unsigned n = 1;
  unsigned t = 0;
  unsigned clients = 1;
  unsigned c_max = 10;
  unsigned gamma = 64;
  bool strong = false;
  unsigned sigma = 0;
  std::optional<std::uint64_t> reclaim_after;
  SchedulePolicy policy = SchedulePolicy::kRoundRobin;
  /// Total accesses; the run lasts ceil(accesses / clients) access slots per client.
  std::uint64_t accesses = 10000;
  std::uint64_t seed = 1;
  WorkloadConfig workload;
  std::vector<std::pair<unsigned, FaultBehavior>> faults;
  std::vector<FreezeSpec> freezes;

  bool record_metrics = false;
  /// Check the consolidated server view against a shadow map after every access.
  bool audit = false;
  /// Compare state hashes of correct replicas after every round.
  bool check_replicas = false;

  std::size_t blocks() const noexcept;
  std::uint64_t rounds() const noexcept;
  /// Throws InvalidArgument.
  void validate() const;
  /// Space-separated key=value echo of every field.
  std::string describe() const;
};

struct CompletedAccess {
  ClientId client = 0;
  std::uint64_t index = 0;  // per-client access number
  OpType op = OpType::kRead;
  Address addr = 0;
  Bytes value;
  Seq seq = 0;
  std::uint64_t start_round = 0;
  std::uint64_t real_round = 0;
  unsigned server_ops = 0;
  unsigned tau = 0;
};

struct MetricRow {
  std::uint64_t round = 0;
  ClientId client = 0;
  OpKind op = OpKind::kGetPm;
  std::size_t req_bytes = 0;
  std::size_t resp_bytes = 0;
  Seq seq = 0;
  std::size_t stash_size = 0;
  std::size_t open_contexts = 0;
};

struct StashSample {
  std::uint64_t timestep = 0;
  std::uint64_t accesses_so_far = 0;
  std::size_t stash_size = 0;
};

struct AuditReport {
  std::uint64_t accesses_checked = 0;
  std::uint64_t blocks_checked = 0;
  std::uint64_t mismatches = 0;
  std::string first_mismatch;
};

struct SimResult {
  AccessHistory history;
  std::vector<CompletedAccess> accesses;
  std::vector<MetricRow> metrics;
  std::vector<StashSample> stash;
  AuditReport audit;
  bool replicas_agree = true;
  std::uint64_t replica_checks = 0;
  std::uint64_t server_ops = 0;
  std::uint64_t busy_retries = 0;
  std::uint64_t fallbacks = 0;
  /// Rounds in which two real strong-mode accesses hit the same address.
  std::uint64_t same_round_collisions = 0;
  std::size_t max_stashes = 0;
  std::size_t max_versions = 0;
  std::size_t peak_contexts = 0;
  std::set<std::size_t> getps_reply_sizes;
  std::string initial_value_digest;
};

SimResult run_simulation(const SimConfig& config);

/// Independent runs fanned out over OpenMP threads; results keep input order.
std::vector<SimResult> run_simulations(const std::vector<SimConfig>& configs);

/// Configuration used by simulate_stash.
SimConfig stash_config(unsigned L, unsigned Z, unsigned c, double alpha, std::uint64_t accesses,
                       std::uint64_t seed);

/// Stash-size time series under the adversarial schedule with c concurrent
/// clients, one replica, and Zipf(alpha) accesses over 2^(L+1) - 1 blocks.
std::vector<StashSample> simulate_stash(unsigned L, unsigned Z, unsigned c, double alpha,
                                        std::uint64_t accesses, std::uint64_t seed);

}  // namespace mvp
