#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mvostm/history.hpp"

namespace mvostm {

struct Violation {
  std::uint64_t seq;  // event that broke the rule
  std::string rule;
  std::string detail;
};

struct LegalityResult {
  bool ok;
  std::optional<Violation> violation;
};

// Per key, the committed writers in ascending timestamp order. Timestamps
// double as commit identity, so this is the version order the protocol
// installs.
using VersionOrder = std::map<Key, std::vector<TxTimestamp>>;

VersionOrder version_order_by_timestamp(const History& h);

// Rule 1: a later method on a key a transaction already touched must return
// the prior local effect. Rules 2/3: a first-access return must come from
// the committed writer with the largest timestamp below the reader, with no
// other committed writer between them in version order (non-null returns
// need an insert there, null returns a deletion or no writer at all).
// The history must be sequential and completed.
LegalityResult check_legality(const History& h);

enum class EdgeKind { kRealTime, kReadsFrom, kMultiVersion };

struct OpacityGraph {
  std::set<TxTimestamp> vertices;
  // adjacency with the kind that first introduced each edge
  std::map<TxTimestamp, std::map<TxTimestamp, EdgeKind>> edges;

  void add_edge(TxTimestamp from, TxTimestamp to, EdgeKind kind) {
    if (from == to) return;  // no self-edges
    edges[from].emplace(to, kind);
  }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [from, tos] : edges) n += tos.size();
    return n;
  }
};

// Real-time, reads-from and multi-version edges over the completed history,
// with versions ordered by timestamp.
OpacityGraph build_graph(const History& h, const VersionOrder& vo);

struct AcyclicityResult {
  bool acyclic;
  std::vector<TxTimestamp> cycle;  // one witness when acyclic is false
};

AcyclicityResult is_acyclic(const OpacityGraph& g);

// Exhaustive serialization oracle: true iff some permutation of the
// completed history's transactions is serially legal and contains the
// history's transactional real-time order. Factorial in the transaction
// count; throws when the history exceeds max_txns.
bool brute_force_opaque(const History& h, std::size_t max_txns = 6);

// Convenience: legality + graph acyclicity on the completed history.
struct OpacityVerdict {
  bool opaque;
  std::optional<Violation> violation;
  std::vector<TxTimestamp> cycle;
};
OpacityVerdict check_opacity(const History& h);

}  // namespace mvostm
