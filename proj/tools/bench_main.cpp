#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvostm/bench.hpp"
#include "mvostm/checker.hpp"

namespace {

using namespace mvostm;

bench::Mix parse_workload(const std::string& w) {
  if (w == "w1") return bench::Mix::w1();
  if (w == "w2") return bench::Mix::w2();
  if (w == "w3") return bench::Mix::w3();
  if (w == "lookup") return bench::Mix::lookup_only();
  throw CLI::ValidationError("--workload must be one of w1|w2|w3|lookup");
}

PolicyConfig parse_variant(const std::string& v, std::uint32_t k,
                           std::uint32_t gc_threshold) {
  if (v == "unbounded") return PolicyConfig::unbounded();
  if (v == "gc") return PolicyConfig::gc(gc_threshold);
  if (v == "k") return PolicyConfig::k_bounded(k);
  if (v == "single") return PolicyConfig::single_version();
  throw CLI::ValidationError("--variant must be one of unbounded|gc|k|single");
}

void print_stats(const bench::RunStats& s) {
  std::cout << "time_s           " << s.wall_seconds << "\n"
            << "commits          " << s.commits << "\n"
            << "aborts           " << s.aborts << "\n"
            << "retries          " << s.retries << "\n"
            << "versions_created " << s.versions_created << "\n"
            << "versions_deleted " << s.versions_deleted << "\n"
            << "version_counter  " << s.version_counter() << "\n";
  for (std::size_t i = 0; i < s.per_thread.size(); ++i) {
    std::cout << "thread " << i << ": commits=" << s.per_thread[i].commits
              << " aborts=" << s.per_thread[i].aborts
              << " retries=" << s.per_thread[i].retries << "\n";
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"workload harness for the multi-version object STM"};
  app.require_subcommand(0, 1);

  std::string workload = "w1";
  unsigned threads = 2;
  std::uint64_t txns = 100;
  unsigned ops = 10;
  std::uint64_t keys = 1000;
  std::size_t buckets = 5;
  std::string variant = "unbounded";
  std::uint32_t k = 5;
  std::uint32_t gc_threshold = 8;
  std::uint64_t seed = 1;
  bool retry = false;
  std::string csv_path;
  std::string history_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--workload", workload, "w1|w2|w3|lookup");
    cmd->add_option("--threads", threads, "worker threads");
    cmd->add_option("--txns", txns, "transactions per thread");
    cmd->add_option("--ops", ops, "operations per transaction");
    cmd->add_option("--keys", keys, "key space size");
    cmd->add_option("--buckets", buckets, "hash buckets");
    cmd->add_option("--k", k, "version bound for the k variant");
    cmd->add_option("--gc-threshold", gc_threshold,
                    "version-list length that triggers a gc sweep");
    cmd->add_option("--seed", seed, "base PRNG seed");
    cmd->add_flag("--retry", retry, "retry aborted transactions");
    cmd->add_option("--csv", csv_path, "write machine-readable rows here");
  };

  add_common(&app);
  app.add_option("--variant", variant, "unbounded|gc|k|single");
  app.add_option("--emit-history", history_path,
                 "record the run and write a JSONL history here");

  std::vector<std::string> compare_variants;
  CLI::App* cmp = app.add_subcommand("compare", "run several variants side by side");
  add_common(cmp);
  cmp->add_option("--variants", compare_variants,
                  "variant list, e.g. --variants unbounded single")
      ->required()
      ->expected(-2);

  std::vector<std::uint32_t> ks;
  CLI::App* sweep = app.add_subcommand("sweep-k", "run the k variant for several bounds");
  add_common(sweep);
  sweep->add_option("--ks", ks, "k values, e.g. --ks 1 2 5 8")->required()->expected(-1);

  CLI11_PARSE(app, argc, argv);

  try {
    bench::WorkloadSpec spec;
    spec.mix = parse_workload(workload);
    spec.threads = threads;
    spec.txns_per_thread = txns;
    spec.ops_per_txn = ops;
    spec.key_space = keys;
    spec.buckets = buckets;
    spec.seed = seed;
    spec.retry_aborted = retry;

    if (cmp->parsed()) {
      std::vector<bench::WorkloadSpec> specs;
      for (const auto& v : compare_variants) {
        bench::WorkloadSpec s = spec;
        s.variant = parse_variant(v, k, gc_threshold);
        specs.push_back(s);
      }
      bench::Report report = bench::compare(specs);
      std::cout << report.table();
      if (!csv_path.empty()) write_file(csv_path, report.csv());
      return 0;
    }

    if (sweep->parsed()) {
      spec.variant = PolicyConfig::k_bounded(k);
      bench::Report report = bench::sweep_k(spec, ks);
      std::cout << report.table();
      if (!csv_path.empty()) write_file(csv_path, report.csv());
      return 0;
    }

    spec.variant = parse_variant(variant, k, gc_threshold);
    HistoryRecorder recorder;
    HistoryRecorder* rec = history_path.empty() ? nullptr : &recorder;
    bench::RunStats stats = bench::run(spec, rec);
    print_stats(stats);
    if (rec != nullptr) {
      std::ofstream out(history_path);
      if (!out) throw std::runtime_error("cannot open " + history_path);
      recorder.snapshot().to_jsonl(out);
      std::cout << "history: " << history_path << " (" << recorder.size()
                << " events)\n";
    }
    if (!csv_path.empty()) {
      bench::Report report;
      report.rows.push_back({spec.variant_label(), stats});
      write_file(csv_path, report.csv());
    }
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
