#pragma once

// Shared helpers for checker and acceptance tests: a hand-rolled history
// builder and a miniature random workload that yields recorded histories.

#include <optional>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "mvostm/bench.hpp"
#include "mvostm/checker.hpp"
#include "mvostm/engine.hpp"
#include "mvostm/history.hpp"

namespace mvostm::testing {

struct HistoryBuilder {
  History h;
  std::uint64_t seq{0};

  HistoryBuilder& begin(TxTimestamp tx) {
    h.events.push_back({++seq, tx, Method::kBegin, std::nullopt, std::nullopt,
                        EventStatus::kOk, {}});
    return *this;
  }
  HistoryBuilder& ins(TxTimestamp tx, Key k, Value v) {
    h.events.push_back(
        {++seq, tx, Method::kInsert, k, v, EventStatus::kOk, {}});
    return *this;
  }
  HistoryBuilder& lu(TxTimestamp tx, Key k, std::optional<Value> v) {
    h.events.push_back({++seq, tx, Method::kLookup, k, v,
                        v ? EventStatus::kOk : EventStatus::kFail, {}});
    return *this;
  }
  HistoryBuilder& del(TxTimestamp tx, Key k, std::optional<Value> v) {
    h.events.push_back({++seq, tx, Method::kDelete, k, v,
                        v ? EventStatus::kOk : EventStatus::kFail, {}});
    return *this;
  }
  HistoryBuilder& commit(TxTimestamp tx, std::vector<WriteRecord> writes = {}) {
    h.events.push_back({++seq, tx, Method::kTryCommit, std::nullopt,
                        std::nullopt, EventStatus::kCommit, std::move(writes)});
    return *this;
  }
  HistoryBuilder& tryc_abort(TxTimestamp tx) {
    h.events.push_back({++seq, tx, Method::kTryCommit, std::nullopt,
                        std::nullopt, EventStatus::kAbort, {}});
    return *this;
  }
  HistoryBuilder& user_abort(TxTimestamp tx) {
    h.events.push_back({++seq, tx, Method::kAbort, std::nullopt, std::nullopt,
                        EventStatus::kAbort, {}});
    return *this;
  }
};

// Runs a small seeded workload with the recorder attached.
inline History engine_history(std::uint64_t seed, unsigned threads = 2,
                              std::uint64_t txns_per_thread = 4,
                              unsigned ops = 3, std::uint64_t keys = 6,
                              std::size_t buckets = 2,
                              PolicyConfig variant = PolicyConfig::unbounded(),
                              bench::Mix mix = bench::Mix::w2()) {
  HistoryRecorder rec;
  bench::WorkloadSpec spec;
  spec.mix = mix;
  spec.threads = threads;
  spec.txns_per_thread = txns_per_thread;
  spec.ops_per_txn = ops;
  spec.key_space = keys;
  spec.buckets = buckets;
  spec.seed = seed;
  spec.variant = variant;
  bench::run(spec, &rec);
  return rec.snapshot();
}

// Keeps only the first n transactions by order of appearance.
inline History first_transactions(const History& h, std::size_t n) {
  std::set<TxTimestamp> keep;
  History out;
  for (const auto& e : h.events) {
    if (keep.count(e.tx) == 0) {
      if (keep.size() == n) continue;
      keep.insert(e.tx);
    }
    out.events.push_back(e);
  }
  return out;
}

}  // namespace mvostm::testing
