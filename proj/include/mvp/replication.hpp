#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvp/client.hpp"
#include "mvp/server.hpp"
#include "mvp/shamir.hpp"

namespace mvp {

enum class FaultBehavior : std::uint8_t {
  kCrash,           // stops executing and replying
  kCorruptReplies,  // tampers with every full reply and hash it sends
  kCorruptShares,   // sends a wrong key share
  kEquivocateHash,  // correct full replies, wrong hashes
};

const char* fault_name(FaultBehavior f) noexcept;
std::optional<FaultBehavior> parse_fault(const std::string& s);

struct ReplicationConfig {
  unsigned n = 1;
  unsigned t = 0;
  ServerConfig server;
};

struct OpMetrics {
  OpKind op = OpKind::kGetPm;
  std::uint64_t log_pos = 0;
  std::size_t req_bytes = 0;
  std::size_t resp_bytes = 0;
  /// Wire size of the accepted reply.
  std::size_t reply_bytes = 0;
  unsigned full_replies = 0;
  bool fallback = false;
};

/// n replicas of the ORAM state machine behind a simulated total order.
/// Consensus is an oracle: every live replica executes each operation at the
/// same log position. Evict payloads reach every replica before their digest
/// is ordered.
class ReplicaSet {
 public:
  ReplicaSet(ReplicationConfig config, const SetupImage& image, std::vector<KeyShare> shares);

  /// Throws InvalidArgument for a bad replica id or if more than t replicas
  /// would be faulty.
  void inject_fault(unsigned replica, FaultBehavior behavior);

  GetPmResult get_pm(const GetPmRequest& req, Rng& chooser);
  GetPsReply get_ps(const GetPsRequest& req, Rng& chooser);
  EvictReply evict(const EvictRequest& req, Rng& chooser);
  KeyMaterial fetch_key() const;

  unsigned n() const noexcept { return config_.n; }
  unsigned t() const noexcept { return config_.t; }
  std::uint64_t log_size() const noexcept { return log_; }
  const OpMetrics& last_metrics() const noexcept { return last_; }
  std::uint64_t fallbacks() const noexcept { return fallbacks_; }

  const OramServer& replica(unsigned i) const { return replicas_.at(i); }
  std::optional<FaultBehavior> fault(unsigned i) const { return faults_.at(i); }
  /// First replica with no injected fault.
  const OramServer& reference() const;
  /// True iff every fault-free replica has the same state hash.
  bool correct_states_agree() const;

 private:
  template <class Reply, class Exec, class Corrupt>
  Reply execute(OpKind op, std::size_t req_bytes, Exec exec, Corrupt corrupt, Rng& chooser);

  bool live(unsigned i) const { return faults_[i] != FaultBehavior::kCrash; }

  ReplicationConfig config_;
  std::vector<OramServer> replicas_;
  std::vector<KeyShare> shares_;
  std::vector<std::optional<FaultBehavior>> faults_;
  std::uint64_t log_ = 0;
  std::uint64_t fallbacks_ = 0;
  OpMetrics last_;
};

/// Client-side endpoint: consolidated replies from a replica set, with a
/// private generator choosing the designated full replier.
class ReplicatedFacade : public ServerFacade {
 public:
  ReplicatedFacade(ReplicaSet& set, std::uint64_t seed) : set_(set), rng_(seed) {}

  KeyMaterial fetch_key() override { return set_.fetch_key(); }
  GetPmResult get_pm(const GetPmRequest& req) override { return set_.get_pm(req, rng_); }
  GetPsReply get_ps(const GetPsRequest& req) override { return set_.get_ps(req, rng_); }
  EvictReply evict(const EvictRequest& req) override { return set_.evict(req, rng_); }

 private:
  ReplicaSet& set_;
  Rng rng_;
};

}  // namespace mvp
