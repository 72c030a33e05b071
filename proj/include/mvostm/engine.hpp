#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "mvostm/history.hpp"
#include "mvostm/policy.hpp"
#include "mvostm/store.hpp"

namespace mvostm {

enum class TxStatus { kLive, kCommitted, kAborted };
enum class OpName { kInsert, kDelete, kLookup };

struct LookupResult {
  std::optional<Value> value;
  OpStatus status;
};

enum class PendingWrite { kNone, kInsert, kDelete };

// A transaction's private record for one key. last_op/val/op_status feed the
// local-reuse rules for later methods on the same key; pending carries the
// deferred shared-memory effect applied at commit. A later lookup must not
// erase a pending delete, which is why the two are tracked separately.
struct LocalRecord {
  std::uint32_t bucket_id{0};
  Key key{0};
  OpName last_op{OpName::kLookup};
  std::optional<Value> val{};
  OpStatus op_status{OpStatus::kOk};
  PendingWrite pending{PendingWrite::kNone};
  std::optional<Value> pending_val{};
  LocationQuad quad{};            // cached location, refreshed in tryCommit
  KeyNode* commit_node{nullptr};  // node found during commit validation
  KeyNode* blue_effect_node{nullptr};  // node this record made blue-reachable
  KeyNode* red_effect_node{nullptr};   // red node this record created
};

struct EngineOptions {
  bool retry_backoff{false};  // bounded exponential backoff on RETRY loops
};

class MvostmMap;

// Single-threaded handle for one transaction. Created by MvostmMap::begin,
// resolved by exactly one try_commit or abort; any method after resolution is
// a well-formedness violation and throws.
class Transaction {
 public:
  Transaction(Transaction&& other) noexcept;
  Transaction& operator=(Transaction&& other) noexcept;
  Transaction(const Transaction&) = delete;
  Transaction& operator=(const Transaction&) = delete;
  ~Transaction();  // a still-live transaction aborts on destruction

  TxTimestamp id() const { return id_; }
  TxStatus status() const { return status_; }

  // Purely local: the shared structure is untouched until try_commit.
  void insert(Key key, Value val);

  // Return-value methods. Never abort under unbounded retention; may return
  // kAbort under the single-version baseline, which resolves the transaction.
  LookupResult lookup(Key key);
  LookupResult erase(Key key);

  TxStatus try_commit();
  void abort();

 private:
  friend class MvostmMap;
  Transaction(MvostmMap* map, TxTimestamp id) : map_(map), id_(id) {}

  void require_live() const;

  MvostmMap* map_{nullptr};
  TxTimestamp id_{0};
  TxStatus status_{TxStatus::kLive};
  std::map<Key, LocalRecord> records_;  // key-sorted
};

// Latched per-node view used by invariant walks and samplers.
struct NodeSnapshot {
  Key key;
  bool marked;
  bool on_blue;  // reachable via blue links at snapshot time
  std::vector<VersionTuple> versions;  // rvl/links omitted from copies
};

// The shared multi-version map: B red-blue buckets, a global timestamp
// counter, a retention policy and an optional history recorder. Thread-safe;
// hand each thread its own Transaction objects.
class MvostmMap {
 public:
  explicit MvostmMap(std::size_t bucket_count,
                     PolicyConfig policy = PolicyConfig::unbounded(),
                     HistoryRecorder* recorder = nullptr,
                     EngineOptions options = {});
  MvostmMap(const MvostmMap&) = delete;
  MvostmMap& operator=(const MvostmMap&) = delete;

  Transaction begin();

  std::size_t bucket_count() const { return buckets_.size(); }
  PolicyRuntime& policy() { return policy_; }
  const PolicyConfig& policy_config() const { return policy_.config(); }
  HistoryRecorder* recorder() { return recorder_; }

  std::uint64_t commit_count() const { return commits_.load(); }
  std::uint64_t abort_count() const { return aborts_.load(); }
  std::uint64_t versions_created() const { return counters_.created.load(); }
  std::uint64_t versions_deleted() const { return counters_.deleted.load(); }
  std::int64_t live_version_count() const { return counters_.live(); }

  // Walks every user node still on a red list, latching each for the visit.
  // Exact at quiescence; a sampling view under concurrency.
  void for_each_node(const std::function<void(const KeyNode&)>& fn) const;
  std::vector<NodeSnapshot> snapshot_bucket(std::size_t b) const;

  // Physically unlinks reclaim-eligible marked nodes from the red lists.
  // Only meaningful under the GC policy; returns nodes reclaimed.
  std::size_t reclaim_marked();

  Bucket& bucket_for(Key key) { return *buckets_[key % buckets_.size()]; }

 private:
  friend class Transaction;

  LookupResult shared_read(Transaction& tx, Key key, OpName op);
  TxStatus commit(Transaction& tx);
  void resolve_abort(Transaction& tx, bool record_event);
  bool check_versions(TxTimestamp tx_id, const KeyNode& node) const;
  void intra_trans_validation(std::vector<LocalRecord*>& updates,
                              std::size_t i, LatchSet& latches);
  void backoff(unsigned attempt) const;

  std::vector<std::unique_ptr<Bucket>> buckets_;
  std::atomic<TxTimestamp> clock_{1};
  VersionCounters counters_;
  PolicyRuntime policy_;
  HistoryRecorder* recorder_{nullptr};
  EngineOptions options_;
  std::atomic<std::uint64_t> commits_{0};
  std::atomic<std::uint64_t> aborts_{0};
};

}  // namespace mvostm
