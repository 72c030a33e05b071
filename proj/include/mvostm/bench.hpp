#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvostm/engine.hpp"

namespace mvostm::bench {

// Percent split of lookup/insert/delete operations. Must sum to 100.
struct Mix {
  int lookup_pct{90};
  int insert_pct{8};
  int delete_pct{2};

  static Mix w1() { return {90, 8, 2}; }
  static Mix w2() { return {50, 25, 25}; }
  static Mix w3() { return {10, 45, 45}; }
  static Mix lookup_only() { return {100, 0, 0}; }

  void validate() const;
};

struct WorkloadSpec {
  Mix mix{Mix::w1()};
  unsigned threads{2};
  std::uint64_t txns_per_thread{100};
  unsigned ops_per_txn{10};
  std::uint64_t key_space{1000};
  std::size_t buckets{5};
  std::uint64_t seed{1};
  PolicyConfig variant{};
  bool retry_aborted{false};
  std::string label{};  // defaults to the variant name

  void validate() const;
  std::string variant_label() const;
};

struct ThreadStats {
  std::uint64_t commits{0};
  std::uint64_t aborts{0};
  std::uint64_t retries{0};
};

struct RunStats {
  double wall_seconds{0.0};
  std::uint64_t commits{0};
  std::uint64_t aborts{0};
  std::uint64_t retries{0};
  std::uint64_t versions_created{0};
  std::uint64_t versions_deleted{0};
  std::vector<ThreadStats> per_thread{};

  std::int64_t version_counter() const {
    return static_cast<std::int64_t>(versions_created) -
           static_cast<std::int64_t>(versions_deleted);
  }
};

// Runs the workload on a caller-owned map; the caller may observe the map
// concurrently (samplers, invariant walks).
RunStats run_on(MvostmMap& map, const WorkloadSpec& spec);

// Builds a map from the spec and runs on it; history lands in `recorder`
// when one is given.
RunStats run(const WorkloadSpec& spec, HistoryRecorder* recorder = nullptr);

struct CompareRow {
  std::string label;
  RunStats stats;
};

struct Report {
  std::vector<CompareRow> rows;
  std::string table() const;
  std::string csv() const;
};

// Runs each spec and tabulates; specs must differ only in variant and carry
// distinct labels.
Report compare(const std::vector<WorkloadSpec>& specs);

// Runs the spec once per k; spec.variant must be the k-bounded kind.
Report sweep_k(const WorkloadSpec& spec, const std::vector<std::uint32_t>& ks);

}  // namespace mvostm::bench
