#include "mvostm/policy.hpp"

#include <algorithm>

namespace mvostm {

void PolicyRuntime::on_append(KeyNode& node) {
  switch (cfg_.kind) {
    case PolicyKind::kUnbounded:
      return;
    case PolicyKind::kKBounded:
    case PolicyKind::kSingleVersion:
      while (non_sentinel_version_count(&node) > cfg_.k) evict_oldest(node);
      return;
    case PolicyKind::kGc:
      if (version_count(&node) > cfg_.gc_threshold) gc_node(node);
      return;
  }
}

void PolicyRuntime::gc_node(KeyNode& node) {
  std::lock_guard<std::mutex> live_guard(live_.scan_mutex());
  VersionTuple* prev = nullptr;
  VersionTuple* cur = node.versions;
  while (cur != nullptr) {
    VersionTuple* next = cur->vnext;
    if (next == nullptr) break;  // the latest version is never deleted
    if (live_.any_in_window_locked(cur->ts, next->ts)) {
      prev = cur;
      cur = next;
      continue;
    }
    {
      // Re-enumerate the window for the audit trail; a correct sweep always
      // records an empty set here.
      std::lock_guard<std::mutex> g(audit_mu_);
      audit_.push_back({node.key, cur->ts, next->ts,
                        live_.ids_in_window_locked(cur->ts, next->ts)});
    }
    if (prev == nullptr) {
      node.versions = next;
    } else {
      prev->vnext = next;
    }
    delete cur;
    counters_.deleted.fetch_add(1, std::memory_order_relaxed);
    cur = next;
  }
}

void PolicyRuntime::evict_oldest(KeyNode& node) {
  VersionTuple* prev = nullptr;
  VersionTuple* cur = node.versions;
  while (cur != nullptr && cur->ts == kSentinelTs) {
    prev = cur;
    cur = cur->vnext;
  }
  if (cur == nullptr || cur->vnext == nullptr) return;  // keep the latest
  if (prev != nullptr) {
    // Fold the reader high-water mark down so a writer that would have
    // conflicted with the evicted version's readers still aborts.
    prev->max_rvl = std::max(prev->max_rvl, cur->max_rvl);
  }
  node.evicted_reader_floor = std::max(node.evicted_reader_floor, cur->max_rvl);
  if (prev == nullptr) {
    node.versions = cur->vnext;
  } else {
    prev->vnext = cur->vnext;
  }
  delete cur;
  counters_.deleted.fetch_add(1, std::memory_order_relaxed);
}

bool PolicyRuntime::reclaim_eligible(const KeyNode& node) const {
  if (!node.marked) return false;
  const VersionTuple* last = latest_version(&node);
  if (last == nullptr) return false;
  std::optional<TxTimestamp> least = live_.least();
  if (!least.has_value()) return true;  // no live transactions at all
  // Both the last version itself and its reader high-water mark must sit
  // below every live timestamp: live readers then see the node's current
  // "absent" answer whether or not the node exists, and no write a reader of
  // the node could invalidate is still possible.
  return last->ts < *least && last->max_rvl < *least;
}

SingleVersionRead single_version_read(const KeyNode& node, TxTimestamp ts) {
  VersionTuple* closest = find_lts(&node, ts);
  if (closest != nullptr && closest->ts != kSentinelTs) {
    if (closest->mark) return {std::nullopt, OpStatus::kFail};
    return {closest->val, OpStatus::kOk};
  }
  // Nothing readable below us; abort if a newer version exists, otherwise the
  // key is genuinely absent.
  for (const VersionTuple* v = node.versions; v != nullptr; v = v->vnext) {
    if (v->ts > ts) return {std::nullopt, OpStatus::kAbort};
  }
  return {std::nullopt, OpStatus::kFail};
}

}  // namespace mvostm
