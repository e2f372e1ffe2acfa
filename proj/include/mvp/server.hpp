#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "mvp/core.hpp"
#include "mvp/crypto.hpp"
#include "mvp/protocol.hpp"

namespace mvp {

struct ServerConfig {
  TreeGeometry geom;
  /// Maximum number of simultaneously open contexts.
  std::uint32_t c_max = 10;
  bool strong = false;
  std::uint32_t sigma = 0;
  /// Drop contexts opened more than this many sequence numbers ago. Off by default.
  std::optional<std::uint64_t> reclaim_after;
};

/// Sealed initial contents handed identically to every replica.
struct SetupImage {
  std::vector<std::pair<std::uint32_t, BlobPtr>> buckets;  // (heap node, bucket)
  BlobPtr path_map;                                        // null when empty
  Digest key_commitment{};
};

/// Seals `initial` blocks into a tree image. Blocks are placed from the leaf
/// level upwards; within a level, slot index major and node minor, in the
/// order given. Every initial block gets timestamp <0,0,0>.
SetupImage prepare_setup(const TreeGeometry& geom, const Key& key, std::size_t num_blocks,
                         const std::vector<std::pair<Address, Bytes>>& initial);

/// Convenience: all addresses [0, num_blocks) present with zero payloads.
SetupImage prepare_zero_setup(const TreeGeometry& geom, const Key& key, std::size_t num_blocks);

/// Deterministic ORAM state machine. Operations must be fed in one total order.
class OramServer {
 public:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct StashItem {
    Seq id = 0;
    BlobPtr blob;
  };

  OramServer(ServerConfig config, const SetupImage& image);

  /// Throws ContextError if the client already has an open context and
  /// BusyError if c_max contexts are open.
  GetPmReply get_pm(const GetPmRequest& req);
  /// Throws ContextError without an open context.
  GetPsReply get_ps(const GetPsRequest& req);
  EvictReply evict(const EvictRequest& req);

  Digest state_hash() const;
  /// Canonical full export of the replicated state.
  Bytes serialize_state() const;

  Seq next_seq() const noexcept { return next_seq_; }
  std::size_t open_contexts() const noexcept { return contexts_.size(); }
  bool has_context(ClientId c) const { return contexts_.count(c) != 0; }
  std::size_t stash_count() const noexcept { return stashes_.size(); }
  const std::vector<StashItem>& stashes() const noexcept { return stashes_; }
  std::size_t history_size() const noexcept { return history_.size(); }
  const std::vector<HistoryItem>& history() const noexcept { return history_; }
  /// Bucket versions currently stored at heap node `node` (empty if none).
  std::vector<BlobPtr> versions_at(std::uint32_t node) const;
  /// Largest number of versions held by any node.
  std::size_t max_versions() const;
  std::size_t peak_contexts() const noexcept { return peak_contexts_; }
  const ServerConfig& config() const noexcept { return config_; }
  const Digest& key_commitment() const noexcept { return key_commitment_; }

 private:
  struct Snapshot {
    NodePtr root;
    std::vector<StashItem> stashes;
    std::uint64_t epoch = 0;
  };
  struct Context {
    Snapshot snap;
    Seq seq = 0;
    std::optional<LeafId> leaf;
  };

  const Node* descend(const NodePtr& root, std::uint32_t node) const;
  void reclaim();

  ServerConfig config_;
  SizePolicy policy_;
  NodePtr root_;
  std::vector<StashItem> stashes_;
  std::vector<HistoryItem> history_;
  std::uint64_t head_epoch_ = 0;
  Seq next_seq_ = 1;
  std::map<ClientId, Context> contexts_;
  std::map<ClientId, RegistryItem> registry_;
  Digest key_commitment_{};
  std::size_t peak_contexts_ = 0;
};

}  // namespace mvp
