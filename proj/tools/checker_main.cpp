#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mvostm/checker.hpp"
#include "mvostm/history.hpp"

// Exit codes: 0 the history is opaque, 1 a violation was found (witness on
// stdout), 2 the input could not be parsed.
int main(int argc, char** argv) {
  CLI::App app{"offline opacity checker for recorded histories"};

  std::string path;
  bool run_oracle = false;
  std::size_t max_oracle_txns = 6;
  app.add_option("history", path, "JSONL history file")->required();
  app.add_flag("--oracle", run_oracle,
               "cross-check with the exhaustive serialization oracle");
  app.add_option("--max-oracle-txns", max_oracle_txns,
                 "largest transaction count the oracle will attempt");

  CLI11_PARSE(app, argc, argv);

  mvostm::History history;
  try {
    std::ifstream in(path);
    if (!in) {
      std::cerr << "cannot open " << path << "\n";
      return 2;
    }
    history = mvostm::History::from_jsonl(in);
  } catch (const std::exception& ex) {
    std::cerr << "malformed history: " << ex.what() << "\n";
    return 2;
  }

  mvostm::History completed = history.completed();
  mvostm::LegalityResult legal = mvostm::check_legality(completed);
  if (!legal.ok) {
    std::cout << "violation (" << legal.violation->rule << ") at seq "
              << legal.violation->seq << ": " << legal.violation->detail
              << "\n";
    return 1;
  }

  mvostm::OpacityGraph g =
      mvostm::build_graph(completed, mvostm::version_order_by_timestamp(completed));
  mvostm::AcyclicityResult acyc = mvostm::is_acyclic(g);
  if (!acyc.acyclic) {
    std::cout << "violation (cycle):";
    for (auto tx : acyc.cycle) std::cout << " T" << tx;
    std::cout << "\n";
    return 1;
  }

  std::cout << "opaque: " << completed.transactions().size()
            << " transactions, " << g.edge_count() << " edges\n";

  if (run_oracle) {
    if (completed.transactions().size() > max_oracle_txns) {
      std::cout << "oracle skipped: history exceeds " << max_oracle_txns
                << " transactions\n";
    } else {
      bool oracle = mvostm::brute_force_opaque(completed, max_oracle_txns);
      std::cout << "oracle: " << (oracle ? "opaque" : "not opaque") << "\n";
      if (!oracle) {
        std::cerr << "oracle disagrees with the graph verdict\n";
        return 1;
      }
    }
  }
  return 0;
}
