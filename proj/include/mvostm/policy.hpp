#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "mvostm/store.hpp"

namespace mvostm {

enum class PolicyKind { kUnbounded, kGc, kKBounded, kSingleVersion };

// Version-retention configuration. kSingleVersion behaves as kKBounded with
// k = 1 plus abort-on-stale-read; it is the baseline the multi-version
// variants are measured against.
struct PolicyConfig {
  PolicyKind kind{PolicyKind::kUnbounded};
  std::uint32_t k{5};
  std::uint32_t gc_threshold{8};

  static PolicyConfig unbounded() { return {PolicyKind::kUnbounded, 5, 8}; }
  static PolicyConfig gc(std::uint32_t threshold = 8) {
    return {PolicyKind::kGc, 5, threshold};
  }
  static PolicyConfig k_bounded(std::uint32_t k = 5) {
    return {PolicyKind::kKBounded, k, 8};
  }
  static PolicyConfig single_version() {
    return {PolicyKind::kSingleVersion, 1, 8};
  }

  void validate() const {
    if (k < 1) throw std::invalid_argument("version bound k must be >= 1");
    if (gc_threshold < 1) throw std::invalid_argument("gc threshold must be >= 1");
  }
};

// Set of in-flight transaction timestamps, used by garbage collection to
// find live reader windows. Internally synchronized; gc holds the latch for
// the duration of a sweep via the scan helpers.
class LiveList {
 public:
  void add(TxTimestamp ts) {
    std::lock_guard<std::mutex> g(mu_);
    live_.insert(ts);
  }
  // Caller holds scan_mutex: used to make timestamp issue and registration
  // one atomic step against a collector scanning for live windows.
  void add_locked(TxTimestamp ts) { live_.insert(ts); }
  void remove(TxTimestamp ts) {
    std::lock_guard<std::mutex> g(mu_);
    live_.erase(ts);
  }
  std::optional<TxTimestamp> least() const {
    std::lock_guard<std::mutex> g(mu_);
    if (live_.empty()) return std::nullopt;
    return *live_.begin();
  }
  bool contains(TxTimestamp ts) const {
    std::lock_guard<std::mutex> g(mu_);
    return live_.count(ts) != 0;
  }
  std::size_t size() const {
    std::lock_guard<std::mutex> g(mu_);
    return live_.size();
  }

  std::mutex& scan_mutex() const { return mu_; }
  // Callers must hold scan_mutex.
  bool any_in_window_locked(TxTimestamp lo, TxTimestamp hi) const {
    auto it = live_.upper_bound(lo);
    return it != live_.end() && *it < hi;
  }
  std::vector<TxTimestamp> ids_in_window_locked(TxTimestamp lo,
                                                TxTimestamp hi) const {
    std::vector<TxTimestamp> out;
    for (auto it = live_.upper_bound(lo); it != live_.end() && *it < hi; ++it) {
      out.push_back(*it);
    }
    return out;
  }
  std::optional<TxTimestamp> least_locked() const {
    if (live_.empty()) return std::nullopt;
    return *live_.begin();
  }

 private:
  mutable std::mutex mu_;
  std::set<TxTimestamp> live_;
};

// One line per version the collector dropped; tests replay these to prove no
// deleted version still had a live reader window. live_in_window holds every
// live timestamp found strictly inside (ts, next_ts) at deletion time, so a
// correct run records only empty vectors.
struct GcDeletionAudit {
  Key key;
  TxTimestamp ts;
  TxTimestamp next_ts;
  std::vector<TxTimestamp> live_in_window;
};

// Runtime state for the retention policy: dispatches the post-append hook,
// runs version sweeps and decides marked-node reclamation.
class PolicyRuntime final : public RetentionHook {
 public:
  PolicyRuntime(PolicyConfig cfg, VersionCounters& counters)
      : cfg_(cfg), counters_(counters) {
    cfg_.validate();
    if (cfg_.kind == PolicyKind::kSingleVersion) cfg_.k = 1;
  }

  const PolicyConfig& config() const { return cfg_; }
  LiveList& live() { return live_; }
  const LiveList& live() const { return live_; }

  // Post-append hook (node latched): no-op when unbounded, oldest-eviction
  // when bounded, threshold-triggered sweep under gc.
  void on_append(KeyNode& node) override;

  // Deletes every non-latest version whose (ts, next ts) window contains no
  // live transaction. Node latched; the live list stays latched for the scan.
  void gc_node(KeyNode& node);

  // Evicts the lowest-ts non-sentinel version. The evicted reader high-water
  // mark folds into the preceding version so conflict checks stay sound.
  void evict_oldest(KeyNode& node);

  // True when a marked node may leave the red list: its last version can no
  // longer be read or invalidated by any live or future transaction.
  bool reclaim_eligible(const KeyNode& node) const;

  std::vector<GcDeletionAudit> gc_audit() const {
    std::lock_guard<std::mutex> g(audit_mu_);
    return audit_;
  }

 private:
  PolicyConfig cfg_;
  VersionCounters& counters_;
  LiveList live_;
  mutable std::mutex audit_mu_;
  std::vector<GcDeletionAudit> audit_;
};

// Baseline read rule: a reader may only see the latest retained version.
// Returns kAbort when the node holds versions only above the reader's
// timestamp, which is exactly the case multi-versioning eliminates.
struct SingleVersionRead {
  std::optional<Value> value;
  OpStatus status;
};
SingleVersionRead single_version_read(const KeyNode& node, TxTimestamp ts);

}  // namespace mvostm
