#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mvp/core.hpp"
#include "mvp/crypto.hpp"
#include "mvp/protocol.hpp"
#include "mvp/shamir.hpp"

namespace mvp {

using WorkingSet = std::map<Address, Block>;

/// Keeps, per address, the entry with the highest timestamp.
void apply_path_map(PositionMap& pm, const PathMap& m);

/// Folds `history` into `base` (pass fresh_position_map(N) for a cold start).
PositionMap consolidate_path_maps(std::span<const PathMap> history, PositionMap base);

/// Blocks of `path` and `stashes` whose location and timestamp agree with pm.
WorkingSet merge_path_stashes(const MultiVersionPath& path, std::span<const Stash> stashes,
                              const PositionMap& pm, const TreeGeometry& geom);

struct PopulateResult {
  NewPath path;
  Stash stash;
  PathMap map;
};

/// Builds the new contents of path `leaf` and the new stash from W. `pm` is the
/// consolidated map of this access and `addr` the accessed block, whose entry
/// in W must already carry its updated timestamp.
PopulateResult populate_path(WorkingSet w, LeafId leaf, Address addr, const PositionMap& pm,
                             Seq seq, const TreeGeometry& geom, Rng& rng);

enum class OpType : std::uint8_t { kRead, kWrite };

struct AccessRequest {
  OpType op = OpType::kRead;
  Address addr = 0;
  Bytes data;  // write only
};

struct GetPmResult {
  GetPmReply reply;
  std::vector<KeyShare> shares;
};

struct KeyMaterial {
  std::vector<KeyShare> shares;
  Digest commitment{};
};

/// The three server operations as seen by a client, plus a read-only key
/// share query used once by strong-mode clients that must seal their address
/// before their first getPM.
class ServerFacade {
 public:
  virtual ~ServerFacade() = default;
  virtual KeyMaterial fetch_key() = 0;
  virtual GetPmResult get_pm(const GetPmRequest& req) = 0;
  virtual GetPsReply get_ps(const GetPsRequest& req) = 0;
  virtual EvictReply evict(const EvictRequest& req) = 0;
};

struct ClientConfig {
  TreeGeometry geom;
  std::size_t num_blocks = 0;
  /// Fault threshold of the replica set, for key reconstruction.
  unsigned t = 0;
  /// Compaction period in sequence numbers; 0 disables it.
  unsigned gamma = 64;
  bool strong = false;
  unsigned sigma = 0;
};

struct AccessResult {
  Bytes value;
  Seq seq = 0;  // sequence number of the real round
  Timestamp ts;
  unsigned rounds = 0;
  unsigned server_ops = 0;
  unsigned tau_real = 0;
};

struct StepInfo {
  OpKind op = OpKind::kGetPm;
  /// The step belongs to the round that actually touches the block.
  bool real = true;
  bool finished = false;
  Seq seq = 0;
};

/// One client. An access is a fixed sequence of server operations driven one
/// step at a time; it never waits for any other client.
class OramClient {
 public:
  OramClient(ClientId id, ClientConfig config, std::uint64_t seed);

  ClientId id() const noexcept { return id_; }
  const ClientConfig& config() const noexcept { return config_; }

  /// Starts an access. Throws InvalidArgument on a malformed request or if
  /// another access is still in progress.
  void begin(AccessRequest req);
  bool in_progress() const noexcept { return active_; }
  OpKind next_op() const noexcept { return phase_; }
  /// Whether the pending step belongs to the real round. Before the first
  /// getPM of a strong access the real round is not yet known; reported true
  /// only when sigma = 0.
  bool next_is_real() const noexcept;

  /// Performs the next server operation. Errors from the server (BusyError,
  /// TransportError) leave the client ready to retry the same step.
  StepInfo step(ServerFacade& server);

  const AccessResult& result() const noexcept { return result_; }
  const AccessRequest& request() const noexcept { return req_; }

  /// Runs a whole access.
  Bytes access(const AccessRequest& req, ServerFacade& server);

  const PositionMap& position_map() const noexcept { return pm_; }
  /// Plaintext path map of the last submitted evict.
  const PathMap& last_path_map() const noexcept { return last_map_; }
  const std::vector<unsigned>& last_offending_shares() const noexcept { return offending_; }
  std::uint64_t compactions() const noexcept { return compactions_; }

 private:
  StepInfo do_get_pm(ServerFacade& server);
  StepInfo do_get_ps(ServerFacade& server);
  StepInfo do_evict(ServerFacade& server);
  bool round_is_real() const noexcept { return !tau_known_ || round_ == tau_; }

  ClientId id_;
  ClientConfig config_;
  SizePolicy policy_;
  Rng rng_;
  Sealer sealer_;
  std::optional<Key> key_;

  PositionMap pm_;
  std::uint64_t last_epoch_ = 0;

  bool active_ = false;
  AccessRequest req_;
  OpKind phase_ = OpKind::kGetPm;
  unsigned round_ = 0;
  unsigned tau_ = 0;
  bool tau_known_ = false;
  Seq seq_ = 0;
  LeafId leaf_ = 0;
  EvictRequest pending_;
  PathMap last_map_;
  AccessResult result_;
  std::vector<unsigned> offending_;
  std::uint64_t compactions_ = 0;
};

}  // namespace mvp
