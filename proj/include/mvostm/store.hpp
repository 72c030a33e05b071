#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "mvostm/common.hpp"

namespace mvostm {

using Key = std::uint64_t;
// Values are opaque fixed-size payloads; 8 bytes is enough to carry anything
// the benchmarks or tests want to round-trip.
using Value = std::uint64_t;
// Transaction timestamps double as transaction ids. 0 is reserved for the
// sentinel version that marks "key absent since the beginning".
using TxTimestamp = std::uint64_t;

constexpr TxTimestamp kSentinelTs = 0;

enum class OpStatus { kOk, kFail, kAbort };

// One committed (or sentinel) version of a key.
//
//   ts       timestamp of the writer (0 for the sentinel)
//   val      written value; absent exactly when mark is true
//   mark     true when this version is a deletion (or the sentinel)
//   rvl      timestamps of every transaction that returned this version
//   max_rvl  max(rvl), 0 when rvl is empty; conflict checks read only this
//   vnext    next version in ascending-ts order
//
// The whole tuple is guarded by the owning node's latch.
struct VersionTuple {
  TxTimestamp ts{kSentinelTs};
  std::optional<Value> val{};
  bool mark{true};
  std::vector<TxTimestamp> rvl{};
  TxTimestamp max_rvl{0};
  VersionTuple* vnext{nullptr};
};

enum class NodeKind : std::uint8_t { kHead = 0, kUser = 1, kTail = 2 };

// A key's node in a bucket's red-blue lazy list. Every node ever created
// stays reachable through red links; blue links chain only the unmarked
// (live) nodes. key/kind/bucket_id are immutable; marked and the version
// list are guarded by the latch; the links are atomics so the optimistic
// unlatched traversal can read them while a latched writer splices.
class KeyNode {
 public:
  KeyNode(std::uint32_t bucket, NodeKind k, Key key_value)
      : key(key_value), kind(k), bucket_id(bucket) {}
  ~KeyNode();

  KeyNode(const KeyNode&) = delete;
  KeyNode& operator=(const KeyNode&) = delete;

  // True when this node orders strictly before key k on the list.
  bool precedes(Key k) const {
    if (kind == NodeKind::kHead) return true;
    if (kind == NodeKind::kTail) return false;
    return key < k;
  }
  bool is_user(Key k) const { return kind == NodeKind::kUser && key == k; }

  Key key;
  NodeKind kind;
  std::uint32_t bucket_id;
  std::mutex latch;
  bool marked{false};              // guarded by latch
  bool red_unlinked{false};        // physically off the red list; latched
  VersionTuple* versions{nullptr}; // ascending ts, guarded by latch
  // Highest reader timestamp among versions evicted by bounded retention;
  // conflict checks treat it as a key-level reader mark so a writer can
  // never slip under a reader whose version was dropped. Guarded by latch.
  TxTimestamp evicted_reader_floor{0};
  std::atomic<KeyNode*> red_next{nullptr};
  std::atomic<KeyNode*> blue_next{nullptr};
};

// Global acquisition order over nodes: bucket, then list position. Within a
// bucket the red list is key-sorted, so (kind, key) is position order.
struct NodeRank {
  std::uint32_t bucket;
  std::uint8_t kind;
  Key key;
  friend bool operator<(const NodeRank& a, const NodeRank& b) {
    if (a.bucket != b.bucket) return a.bucket < b.bucket;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.key < b.key;
  }
  friend bool operator==(const NodeRank& a, const NodeRank& b) {
    return a.bucket == b.bucket && a.kind == b.kind && a.key == b.key;
  }
};

inline NodeRank node_rank(const KeyNode* n) {
  return NodeRank{n->bucket_id, static_cast<std::uint8_t>(n->kind), n->key};
}

// The four nodes bracketing a key on the blue and red lists.
struct LocationQuad {
  KeyNode* blue_pred{nullptr};
  KeyNode* blue_curr{nullptr};
  KeyNode* red_pred{nullptr};
  KeyNode* red_curr{nullptr};
};

enum class ValidationResult { kOk, kRetry };

enum class InsertMode {
  kRedOnly,    // new marked node, red list only
  kRedAndBlue, // new unmarked node on both lists
  kPromote,    // splice an existing red-only node into the blue list
};

// Tracks the latches a method holds. Ordered acquisition (strictly ascending
// NodeRank) is asserted on every lock; nodes created while latched join via
// adopt_fresh, which must never contend. Releases happen in acquisition
// order, mirroring the protocol's unlock discipline.
class LatchSet {
 public:
  LatchSet() = default;
  ~LatchSet() { unlock_all(); }
  LatchSet(const LatchSet&) = delete;
  LatchSet& operator=(const LatchSet&) = delete;

  void lock(KeyNode* n);
  void lock_quad(const LocationQuad& q);
  void adopt_fresh(KeyNode* n);
  bool holds(const KeyNode* n) const;
  void unlock_all();
  std::size_t size() const { return held_.size(); }

 private:
  std::vector<KeyNode*> held_;
  bool have_ordered_{false};
  NodeRank max_ordered_{};
};

// Global version accounting: the memory metric is creations minus deletions.
struct VersionCounters {
  std::atomic<std::uint64_t> created{0};
  std::atomic<std::uint64_t> deleted{0};
  std::int64_t live() const {
    return static_cast<std::int64_t>(created.load()) -
           static_cast<std::int64_t>(deleted.load());
  }
};

// Retention policy callback run after every version append, still under the
// owning node's latch.
class RetentionHook {
 public:
  virtual ~RetentionHook() = default;
  virtual void on_append(KeyNode& node) = 0;
};

// One hash bucket: a red-blue lazy list between permanent sentinels.
// Unlinked nodes are retired, never freed mid-run, so optimistic traversals
// may keep walking through them; everything is reclaimed on destruction.
class Bucket {
 public:
  explicit Bucket(std::uint32_t id);
  ~Bucket();
  Bucket(const Bucket&) = delete;
  Bucket& operator=(const Bucket&) = delete;

  // Optimistic two-phase walk: blue links from head, then red links starting
  // at the blue predecessor. No latches taken; sentinels bound the walk.
  LocationQuad locate(Key key) const;

  // Splices a node at a validated, latched quad. Creation modes return the
  // new node already latched (adopted into `latches`); kPromote returns the
  // promoted red_curr.
  KeyNode* insert_node(const LocationQuad& q, Key key, InsertMode mode,
                       LatchSet& latches);

  // Unlinks blue_curr from the blue list and marks it; the node stays on the
  // red list. Quad must be latched.
  void unlink_blue(const LocationQuad& q);

  // Unlinks a marked node from the red list (quad latched, red_curr is the
  // node). The node is retired, not freed.
  void unlink_red(const LocationQuad& q);

  KeyNode* head() { return &head_; }
  KeyNode* tail() { return &tail_; }
  const KeyNode* head() const { return &head_; }
  std::uint32_t id() const { return id_; }

 private:
  std::uint32_t id_;
  KeyNode head_;
  KeyNode tail_;
  mutable std::mutex retired_mu_;
  std::vector<KeyNode*> retired_;
};

// OK iff the quad still brackets the key: both blue ends unmarked and both
// pred->curr links intact. RETRY means a concurrent method moved the ground
// under us; the caller unlatches and re-traverses.
ValidationResult validate_location(const LocationQuad& q);

// Version with the largest ts strictly below `ts`, or nullptr when every
// version (if any) is at or above it. Node latched.
VersionTuple* find_lts(const KeyNode* node, TxTimestamp ts);

// Adds `ts` to the tuple's reader list; idempotent. Owning node latched.
void record_reader(VersionTuple* tuple, TxTimestamp ts);

// Splices a fresh version into the node's ascending list, bumps the creation
// counter and runs the retention hook. Duplicate timestamps are a caller bug.
VersionTuple* append_version(KeyNode* node, TxTimestamp ts,
                             std::optional<Value> val, bool mark,
                             VersionCounters& counters, RetentionHook* hook);

VersionTuple* latest_version(const KeyNode* node);
std::size_t version_count(const KeyNode* node);
std::size_t non_sentinel_version_count(const KeyNode* node);

}  // namespace mvostm
