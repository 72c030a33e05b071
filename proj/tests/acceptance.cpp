// Acceptance suite: each criterion runs at its stated tolerance and prints
// one PASS/FAIL line. Exits nonzero when any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "mvostm/bench.hpp"
#include "mvostm/checker.hpp"
#include "mvostm/engine.hpp"
#include "support.hpp"

using namespace mvostm;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// 1. Read-only transactions never abort under unbounded retention:
//    8 threads x 500 txns of 10 lookups each, 20 seeds, under 10 s.
Outcome criterion1() {
  auto start = Clock::now();
  std::uint64_t aborts = 0;
  std::uint64_t txns = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    bench::WorkloadSpec spec;
    spec.mix = bench::Mix::lookup_only();
    spec.threads = 8;
    spec.txns_per_thread = 500;
    spec.ops_per_txn = 10;
    spec.key_space = 1000;
    spec.buckets = 5;
    spec.seed = seed;
    spec.variant = PolicyConfig::unbounded();
    bench::RunStats stats = bench::run(spec);
    aborts += stats.aborts;
    txns += stats.commits + stats.aborts;
  }
  double elapsed = seconds_since(start);
  std::ostringstream d;
  d << aborts << " aborts across " << txns << " lookup-only txns, " << elapsed
    << " s (limit 10)";
  return {aborts == 0 && elapsed < 10.0, d.str()};
}

// Shared by criteria 2 and 4: one hundred recorded runs, checked for
// legality + acyclicity, every edge checked for timestamp order.
struct HistoryBatch {
  int legality_failures = 0;
  int cycle_failures = 0;
  std::uint64_t edges = 0;
  std::uint64_t edge_order_failures = 0;
  double elapsed = 0;
  bool ran = false;
};
HistoryBatch g_batch;

void run_history_batch() {
  if (g_batch.ran) return;
  auto start = Clock::now();
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    HistoryRecorder rec;
    bench::WorkloadSpec spec;
    spec.mix = bench::Mix::w2();
    spec.threads = 4;
    spec.txns_per_thread = 13;  // ~50 transactions per run
    spec.ops_per_txn = 4;
    spec.key_space = 16;
    spec.buckets = 5;
    spec.seed = seed;
    spec.variant = PolicyConfig::unbounded();
    bench::run(spec, &rec);

    History done = rec.snapshot().completed();
    if (!check_legality(done).ok) {
      ++g_batch.legality_failures;
      continue;
    }
    OpacityGraph g = build_graph(done, version_order_by_timestamp(done));
    if (!is_acyclic(g).acyclic) ++g_batch.cycle_failures;
    for (const auto& [from, tos] : g.edges) {
      for (const auto& [to, kind] : tos) {
        (void)kind;
        ++g_batch.edges;
        if (from >= to) ++g_batch.edge_order_failures;
      }
    }
  }
  g_batch.elapsed = seconds_since(start);
  g_batch.ran = true;
}

// 2. Every history emitted by 100 seeded mixed runs is legal and its
//    opacity graph acyclic, within 60 s.
Outcome criterion2() {
  run_history_batch();
  std::ostringstream d;
  d << g_batch.legality_failures << " legality / " << g_batch.cycle_failures
    << " acyclicity failures over 100 runs, " << g_batch.elapsed
    << " s (limit 60)";
  return {g_batch.legality_failures == 0 && g_batch.cycle_failures == 0 &&
              g_batch.elapsed < 60.0,
          d.str()};
}

// 3. Graph verdict equals the exhaustive serialization oracle on 1000
//    engine histories truncated to at most 5 transactions, within 120 s.
Outcome criterion3() {
  auto start = Clock::now();
  int legal = 0;
  int mismatches = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    History h = mvostm::testing::engine_history(seed);
    History small = mvostm::testing::first_transactions(h, 5).completed();
    if (!check_legality(small).ok) continue;
    ++legal;
    OpacityGraph g = build_graph(small, version_order_by_timestamp(small));
    if (is_acyclic(g).acyclic != brute_force_opaque(small, 5)) ++mismatches;
  }
  double elapsed = seconds_since(start);
  std::ostringstream d;
  d << mismatches << " disagreements over " << legal << " legal histories, "
    << elapsed << " s (limit 120)";
  return {mismatches == 0 && legal > 0 && elapsed < 120.0, d.str()};
}

// 4. Every edge of every criterion-2 graph runs from the smaller timestamp
//    to the larger.
Outcome criterion4() {
  run_history_batch();
  std::ostringstream d;
  d << g_batch.edge_order_failures << " out-of-order edges among "
    << g_batch.edges;
  return {g_batch.edge_order_failures == 0 && g_batch.edges > 0, d.str()};
}

// 5. Under k=5 retention no key ever holds more than 5 non-sentinel
//    versions, sampled during an 8-thread update-heavy run and at the end.
Outcome criterion5() {
  MvostmMap map(5, PolicyConfig::k_bounded(5));
  std::atomic<bool> done{false};
  std::atomic<std::uint64_t> samples{0};
  std::atomic<std::uint64_t> live_violations{0};
  std::thread sampler([&] {
    while (!done.load()) {
      map.for_each_node([&](const KeyNode& node) {
        ++samples;
        if (non_sentinel_version_count(&node) > 5) ++live_violations;
      });
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  });

  bench::WorkloadSpec spec;
  spec.mix = bench::Mix::w3();
  spec.threads = 8;
  spec.txns_per_thread = 1250;  // 10k transactions overall
  spec.ops_per_txn = 10;
  spec.key_space = 64;
  spec.buckets = 5;
  spec.seed = 99;
  spec.variant = PolicyConfig::k_bounded(5);
  bench::run_on(map, spec);
  done = true;
  sampler.join();

  std::size_t final_max = 0;
  map.for_each_node([&](const KeyNode& node) {
    final_max = std::max(final_max, non_sentinel_version_count(&node));
  });
  std::ostringstream d;
  d << live_violations.load() << " live violations over " << samples.load()
    << " sampled nodes, max at quiescence " << final_max;
  return {live_violations.load() == 0 && samples.load() > 0 && final_max <= 5,
          d.str()};
}

// 6. On the same single-threaded schedule, gc retains strictly fewer
//    versions than unbounded, and no deleted version had a live reader
//    window.
Outcome criterion6() {
  bench::WorkloadSpec spec;
  spec.mix = bench::Mix::w3();
  spec.threads = 1;
  spec.txns_per_thread = 4000;
  spec.ops_per_txn = 10;
  spec.key_space = 48;
  spec.buckets = 5;
  spec.seed = 7;

  spec.variant = PolicyConfig::unbounded();
  bench::RunStats unbounded = bench::run(spec);

  spec.variant = PolicyConfig::gc();
  MvostmMap gc_map(spec.buckets, spec.variant);
  bench::RunStats gc = bench::run_on(gc_map, spec);

  std::vector<GcDeletionAudit> audit = gc_map.policy().gc_audit();
  std::uint64_t window_violations = 0;
  for (const auto& a : audit) {
    if (!a.live_in_window.empty()) ++window_violations;
  }

  std::ostringstream d;
  d << "version counter gc " << gc.version_counter() << " vs unbounded "
    << unbounded.version_counter() << "; " << audit.size()
    << " audited deletions, " << window_violations << " live-window hits";
  bool same_schedule = gc.versions_created == unbounded.versions_created &&
                       gc.commits == unbounded.commits;
  return {same_schedule &&
              gc.version_counter() < unbounded.version_counter() &&
              !audit.empty() && window_violations == 0,
          d.str()};
}

// 7. The single-version baseline aborts at least as much as the unbounded
//    variant under a contended lookup-heavy load: per-seed means over 5
//    runs (each reported data point is an average), medians ordered,
//    strictly more in >= 7/10 seeds.
Outcome criterion7() {
  constexpr int kReps = 9;
  std::vector<double> single_means;
  std::vector<double> unbounded_means;
  int strict = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    double s_sum = 0;
    double u_sum = 0;
    for (int rep = 0; rep < kReps; ++rep) {
      bench::WorkloadSpec spec;
      spec.mix = bench::Mix::w1();
      spec.threads = 8;
      spec.txns_per_thread = 100;
      spec.ops_per_txn = 20;
      spec.key_space = 128;
      spec.buckets = 5;
      spec.seed = seed;
      spec.variant = PolicyConfig::single_version();
      s_sum += static_cast<double>(bench::run(spec).aborts);
      spec.variant = PolicyConfig::unbounded();
      u_sum += static_cast<double>(bench::run(spec).aborts);
    }
    single_means.push_back(s_sum / kReps);
    unbounded_means.push_back(u_sum / kReps);
    if (s_sum > u_sum) ++strict;
  }
  std::sort(single_means.begin(), single_means.end());
  std::sort(unbounded_means.begin(), unbounded_means.end());
  double med_s = single_means[5];
  double med_u = unbounded_means[5];
  std::ostringstream d;
  d << "median aborts single " << med_s << " vs unbounded " << med_u
    << ", strictly greater in " << strict << "/10 seeds";
  return {med_s >= med_u && strict >= 7, d.str()};
}

// 8. 60 s update-heavy soak over 8 threads plus a reclamation thread with
//    latch-order and structure assertions live; a watchdog flags a hang.
Outcome criterion8() {
  auto soak = [](PolicyConfig variant, int soak_seconds) {
    MvostmMap map(5, variant);
    auto deadline = Clock::now() + std::chrono::seconds(soak_seconds);
    std::atomic<std::uint64_t> done_txns{0};
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < 8; ++t) {
      workers.emplace_back([&, t] {
        std::mt19937_64 rng(t * 7919 + 13);
        while (Clock::now() < deadline) {
          Transaction tx = map.begin();
          bool dead = false;
          for (int op = 0; op < 10 && !dead; ++op) {
            Key key = rng() % 128;
            switch (rng() % 10) {
              case 0:
                dead = tx.lookup(key).status == OpStatus::kAbort;
                break;
              case 1:
              case 2:
              case 3:
              case 4:
                tx.insert(key, rng());
                break;
              default:
                dead = tx.erase(key).status == OpStatus::kAbort;
                break;
            }
          }
          if (!dead) tx.try_commit();
          ++done_txns;
        }
      });
    }
    std::thread reclaimer([&] {
      while (Clock::now() < deadline) {
        map.reclaim_marked();
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      }
    });
    for (auto& w : workers) w.join();
    reclaimer.join();
    return done_txns.load();
  };

  auto worker = std::async(std::launch::async, [&] {
    std::uint64_t total = 0;
    total += soak(PolicyConfig::unbounded(), 30);
    total += soak(PolicyConfig::gc(4), 30);
    return total;
  });
  // watchdog: the soak must finish well inside 120 s
  if (worker.wait_for(std::chrono::seconds(120)) !=
      std::future_status::ready) {
    std::cout << "CRITERION 8 FAIL deadlock-freedom (watchdog expired after "
                 "120 s)\n";
    std::exit(1);
  }
  std::uint64_t txns = worker.get();
  std::ostringstream d;
  d << txns << " transactions across the 60 s soak, no assertion failures";
  return {txns > 0, d.str()};
}

// 9. The tabulated legality verdicts: local-reuse, stale-read, and
//    null-return rules, the old-version-read scenario and the
//    sentinel-abort scenario.
Outcome criterion9() {
  using mvostm::testing::HistoryBuilder;
  int failed = 0;
  std::ostringstream d;
  auto expect = [&](bool cond, const char* what) {
    if (!cond) {
      ++failed;
      d << " [" << what << "]";
    }
  };

  {  // direct reads-from: legal
    HistoryBuilder b;
    b.begin(1).ins(1, 100, 5).commit(1, {{100, Value{5}}});
    b.begin(2).lu(2, 100, Value{5}).commit(2);
    expect(check_legality(b.h.completed()).ok, "rule-2a ok");
    expect(brute_force_opaque(b.h.completed()), "rule-2a oracle");
  }
  {  // overwritten read: violation
    HistoryBuilder b;
    b.begin(1).ins(1, 100, 5).commit(1, {{100, Value{5}}});
    b.begin(2).ins(2, 100, 7).commit(2, {{100, Value{7}}});
    b.begin(3).lu(3, 100, Value{5}).commit(3);
    LegalityResult r = check_legality(b.h.completed());
    expect(!r.ok && r.violation->rule == "rule-2", "rule-2b violation");
    expect(!brute_force_opaque(b.h.completed()), "rule-2b oracle");
  }
  {  // lookup after own delete returning a value: violation
    HistoryBuilder b;
    b.begin(1).ins(1, 4, 40).del(1, 4, Value{40}).lu(1, 4, Value{40}).commit(1);
    LegalityResult r = check_legality(b.h.completed());
    expect(!r.ok && r.violation->rule == "rule-1", "rule-1c violation");
  }
  {  // null return over a committed insert: violation
    HistoryBuilder b;
    b.begin(1).ins(1, 9, 90).commit(1, {{9, Value{90}}});
    b.begin(2).lu(2, 9, std::nullopt).commit(2);
    LegalityResult r = check_legality(b.h.completed());
    expect(!r.ok && r.violation->rule == "rule-3", "rule-3 violation");
  }
  {  // old-version read after a newer delete: opaque, reader serializes first
    HistoryRecorder rec;
    MvostmMap map(5, PolicyConfig::unbounded(), &rec);
    {
      Transaction t0 = map.begin();
      t0.insert(2, 200);
      expect(t0.try_commit() == TxStatus::kCommitted, "retained-read setup");
    }
    Transaction t1 = map.begin();
    Transaction t2 = map.begin();
    expect(t1.lookup(3).status == OpStatus::kFail, "retained-read first read");
    t2.insert(3, 33);
    expect(t2.erase(2).value == Value{200}, "retained-read delete");
    expect(t2.try_commit() == TxStatus::kCommitted, "retained-read deleter commit");
    auto read = t1.lookup(2);
    expect(read.value == Value{200} && read.status == OpStatus::kOk,
           "retained-read old-version read");
    expect(t1.try_commit() == TxStatus::kCommitted, "retained-read reader commit");

    History done = rec.snapshot().completed();
    expect(check_legality(done).ok, "retained-read legality");
    OpacityGraph g = build_graph(done, version_order_by_timestamp(done));
    expect(is_acyclic(g).acyclic, "retained-read acyclic");
    auto it = g.edges.find(t1.id());
    expect(it != g.edges.end() && it->second.count(t2.id()) != 0,
           "retained-read reader-before-deleter edge");
    expect(brute_force_opaque(done), "retained-read oracle");
  }
  {  // sentinel read aborts the smaller-timestamp writer
    HistoryRecorder rec;
    MvostmMap map(5, PolicyConfig::unbounded(), &rec);
    Transaction t1 = map.begin();
    Transaction t2 = map.begin();
    expect(t2.lookup(8).status == OpStatus::kFail, "sentinel read");
    expect(t2.try_commit() == TxStatus::kCommitted, "sentinel reader commit");
    t1.insert(8, 80);
    expect(t1.try_commit() == TxStatus::kAborted, "stale writer aborts");
    expect(check_opacity(rec.snapshot()).opaque, "sentinel history opaque");
  }

  std::ostringstream out;
  out << (failed == 0 ? "all tabulated verdicts match" : "mismatches:")
      << d.str();
  return {failed == 0, out.str()};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc == 3 && std::strcmp(argv[1], "--criterion") == 0) {
    only = std::atoi(argv[2]);
  }

  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {1, "no-read-abort", criterion1},
      {2, "history-opacity", criterion2},
      {3, "oracle-equivalence", criterion3},
      {4, "edge-order", criterion4},
      {5, "k-bound", criterion5},
      {6, "gc-effectiveness-and-safety", criterion6},
      {7, "abort-ordering-vs-baseline", criterion7},
      {8, "deadlock-freedom", criterion8},
      {9, "legality-verdicts", criterion9},
  };

  bool all_pass = true;
  for (const Entry& e : entries) {
    if (only != 0 && e.id != only) continue;
    auto start = Clock::now();
    Outcome o = e.fn();
    double secs = seconds_since(start);
    std::cout << "CRITERION " << e.id << " " << (o.pass ? "PASS" : "FAIL")
              << " " << e.name << " (" << o.detail << ") [" << secs << " s]"
              << std::endl;
    if (!o.pass) all_pass = false;
  }
  return all_pass ? 0 : 1;
}
