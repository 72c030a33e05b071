#include "mvostm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mvostm::bench {

namespace {

enum class OpKind : std::uint8_t { kLookup, kInsert, kDelete };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Exact quota scheduling: cumulative rounding keeps every transaction within
// one op of the mix and the stream as a whole exactly on it.
std::vector<OpKind> ops_for_txn(const Mix& mix, unsigned ops_per_txn,
                                std::uint64_t txn_index, std::mt19937_64& rng) {
  auto quota = [&](int pct, std::uint64_t upto) -> std::uint64_t {
    return (upto * ops_per_txn * static_cast<std::uint64_t>(pct) + 50) / 100;
  };
  std::vector<OpKind> ops;
  ops.reserve(ops_per_txn);
  std::uint64_t lo = quota(mix.lookup_pct, txn_index);
  std::uint64_t hi = quota(mix.lookup_pct, txn_index + 1);
  for (std::uint64_t i = lo; i < hi; ++i) ops.push_back(OpKind::kLookup);
  lo = quota(mix.insert_pct, txn_index);
  hi = quota(mix.insert_pct, txn_index + 1);
  for (std::uint64_t i = lo; i < hi; ++i) ops.push_back(OpKind::kInsert);
  while (ops.size() < ops_per_txn) ops.push_back(OpKind::kDelete);
  std::shuffle(ops.begin(), ops.end(), rng);
  return ops;
}

struct PlannedOp {
  OpKind kind;
  Key key;
  Value val;
};

}  // namespace

void Mix::validate() const {
  if (lookup_pct < 0 || insert_pct < 0 || delete_pct < 0 ||
      lookup_pct + insert_pct + delete_pct != 100) {
    throw std::invalid_argument("mix percentages must be >= 0 and sum to 100");
  }
}

void WorkloadSpec::validate() const {
  mix.validate();
  variant.validate();
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (ops_per_txn < 1) throw std::invalid_argument("ops per txn must be >= 1");
  if (key_space < 1) throw std::invalid_argument("key space must be >= 1");
  if (buckets < 1) throw std::invalid_argument("buckets must be >= 1");
}

std::string WorkloadSpec::variant_label() const {
  if (!label.empty()) return label;
  switch (variant.kind) {
    case PolicyKind::kUnbounded: return "unbounded";
    case PolicyKind::kGc: return "gc";
    case PolicyKind::kKBounded: return "k" + std::to_string(variant.k);
    case PolicyKind::kSingleVersion: return "single";
  }
  return "?";
}

RunStats run_on(MvostmMap& map, const WorkloadSpec& spec) {
  spec.validate();
  std::vector<ThreadStats> per_thread(spec.threads);
  auto worker = [&](unsigned tid) {
    std::mt19937_64 rng(splitmix64(spec.seed ^ (0x1000ULL + tid)));
    ThreadStats& stats = per_thread[tid];
    for (std::uint64_t t = 0; t < spec.txns_per_thread; ++t) {
      std::vector<OpKind> kinds = ops_for_txn(spec.mix, spec.ops_per_txn, t, rng);
      std::vector<PlannedOp> plan;
      plan.reserve(kinds.size());
      for (OpKind k : kinds) {
        plan.push_back({k, rng() % spec.key_space, rng()});
      }
      for (;;) {  // one pass, or repeat with a fresh timestamp when retrying
        Transaction tx = map.begin();
        bool aborted = false;
        for (const PlannedOp& op : plan) {
          switch (op.kind) {
            case OpKind::kLookup:
              aborted = tx.lookup(op.key).status == OpStatus::kAbort;
              break;
            case OpKind::kInsert:
              tx.insert(op.key, op.val);
              break;
            case OpKind::kDelete:
              aborted = tx.erase(op.key).status == OpStatus::kAbort;
              break;
          }
          if (aborted) break;
        }
        if (!aborted) {
          aborted = tx.try_commit() == TxStatus::kAborted;
        }
        if (!aborted) {
          ++stats.commits;
          break;
        }
        ++stats.aborts;
        if (!spec.retry_aborted) break;
        ++stats.retries;
      }
    }
  };

  std::uint64_t created_before = map.versions_created();
  std::uint64_t deleted_before = map.versions_deleted();
  auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  threads.reserve(spec.threads);
  for (unsigned tid = 0; tid < spec.threads; ++tid) {
    threads.emplace_back(worker, tid);
  }
  for (auto& th : threads) th.join();
  auto stop = std::chrono::steady_clock::now();

  RunStats out;
  out.wall_seconds = std::chrono::duration<double>(stop - start).count();
  out.per_thread = per_thread;
  for (const auto& ts : per_thread) {
    out.commits += ts.commits;
    out.aborts += ts.aborts;
    out.retries += ts.retries;
  }
  out.versions_created = map.versions_created() - created_before;
  out.versions_deleted = map.versions_deleted() - deleted_before;
  return out;
}

RunStats run(const WorkloadSpec& spec, HistoryRecorder* recorder) {
  spec.validate();
  MvostmMap map(spec.buckets, spec.variant, recorder);
  return run_on(map, spec);
}

std::string Report::table() const {
  std::ostringstream out;
  out << "variant        time_s    commits     aborts    retries   versions\n";
  for (const auto& row : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %8.3f %10llu %10llu %10llu %10lld\n",
                  row.label.c_str(), row.stats.wall_seconds,
                  static_cast<unsigned long long>(row.stats.commits),
                  static_cast<unsigned long long>(row.stats.aborts),
                  static_cast<unsigned long long>(row.stats.retries),
                  static_cast<long long>(row.stats.version_counter()));
    out << line;
  }
  return out.str();
}

std::string Report::csv() const {
  std::ostringstream out;
  out << "variant,time_s,commits,aborts,retries,versions_created,"
         "versions_deleted,version_counter\n";
  for (const auto& row : rows) {
    out << row.label << ',' << row.stats.wall_seconds << ','
        << row.stats.commits << ',' << row.stats.aborts << ','
        << row.stats.retries << ',' << row.stats.versions_created << ','
        << row.stats.versions_deleted << ',' << row.stats.version_counter()
        << '\n';
  }
  return out.str();
}

Report compare(const std::vector<WorkloadSpec>& specs) {
  if (specs.size() < 2) {
    throw std::invalid_argument("compare needs at least two variants");
  }
  for (const auto& spec : specs) spec.validate();
  const WorkloadSpec& base = specs.front();
  std::vector<std::string> labels;
  for (const auto& spec : specs) {
    auto same = [](const Mix& a, const Mix& b) {
      return a.lookup_pct == b.lookup_pct && a.insert_pct == b.insert_pct &&
             a.delete_pct == b.delete_pct;
    };
    if (!same(spec.mix, base.mix) || spec.threads != base.threads ||
        spec.txns_per_thread != base.txns_per_thread ||
        spec.ops_per_txn != base.ops_per_txn ||
        spec.key_space != base.key_space || spec.buckets != base.buckets ||
        spec.seed != base.seed || spec.retry_aborted != base.retry_aborted) {
      throw std::invalid_argument("compare specs may differ only in variant");
    }
    std::string label = spec.variant_label();
    for (const auto& seen : labels) {
      if (seen == label) {
        throw std::invalid_argument("compare variants must carry distinct labels");
      }
    }
    labels.push_back(label);
  }
  Report report;
  for (const auto& spec : specs) {
    report.rows.push_back({spec.variant_label(), run(spec)});
  }
  return report;
}

Report sweep_k(const WorkloadSpec& spec, const std::vector<std::uint32_t>& ks) {
  if (spec.variant.kind != PolicyKind::kKBounded) {
    throw std::invalid_argument("sweep_k requires the k-bounded variant");
  }
  if (ks.empty()) throw std::invalid_argument("sweep_k needs at least one k");
  Report report;
  for (std::uint32_t k : ks) {
    WorkloadSpec s = spec;
    s.variant = PolicyConfig::k_bounded(k);
    s.label = "k" + std::to_string(k);
    report.rows.push_back({s.label, run(s)});
  }
  return report;
}

}  // namespace mvostm::bench
