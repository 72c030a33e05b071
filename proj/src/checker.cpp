#include "mvostm/checker.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace mvostm {

namespace {

bool is_rvm(const HistoryEvent& e) {
  return e.m == Method::kLookup || e.m == Method::kDelete;
}

struct CommittedWrite {
  TxTimestamp writer;
  std::uint64_t commit_seq;
  std::optional<Value> val;  // absent = deletion
};

// Committed writers per key, ascending by timestamp.
std::map<Key, std::vector<CommittedWrite>> committed_writes(const History& h) {
  std::map<Key, std::vector<CommittedWrite>> out;
  for (const auto& e : h.events) {
    if (e.m != Method::kTryCommit || e.st != EventStatus::kCommit) continue;
    for (const auto& w : e.writes) {
      out[w.key].push_back({e.tx, e.seq, w.val});
    }
  }
  for (auto& [key, writers] : out) {
    std::sort(writers.begin(), writers.end(),
              [](const CommittedWrite& a, const CommittedWrite& b) {
                return a.writer < b.writer;
              });
  }
  return out;
}

// The committed writer the reader observed: largest timestamp below the
// reader among the key's committed writers, or none (the initial absence).
const CommittedWrite* read_source(
    const std::map<Key, std::vector<CommittedWrite>>& writes, Key key,
    TxTimestamp reader) {
  auto it = writes.find(key);
  if (it == writes.end()) return nullptr;
  const CommittedWrite* best = nullptr;
  for (const auto& w : it->second) {
    if (w.writer >= reader) break;
    best = &w;
  }
  return best;
}

std::string val_str(const std::optional<Value>& v) {
  return v.has_value() ? std::to_string(*v) : "null";
}

}  // namespace

VersionOrder version_order_by_timestamp(const History& h) {
  VersionOrder vo;
  for (const auto& [key, writers] : committed_writes(h)) {
    for (const auto& w : writers) vo[key].push_back(w.writer);
  }
  return vo;
}

LegalityResult check_legality(const History& h) {
  auto writes = committed_writes(h);
  // last event of each transaction per key, for the local-reuse rule
  std::map<std::pair<TxTimestamp, Key>, const HistoryEvent*> prior;

  for (const auto& e : h.events) {
    if (!e.key.has_value()) continue;
    Key key = *e.key;
    auto pk = std::make_pair(e.tx, key);
    auto prior_it = prior.find(pk);

    if (is_rvm(e) && e.st != EventStatus::kAbort) {
      if (prior_it != prior.end()) {
        // Rule 1: replay of this transaction's own prior effect.
        const HistoryEvent& p = *prior_it->second;
        std::optional<Value> want_val;
        EventStatus want_st = EventStatus::kOk;
        switch (p.m) {
          case Method::kInsert:
            want_val = p.val;
            want_st = EventStatus::kOk;
            break;
          case Method::kLookup:
            want_val = p.val;
            want_st = p.st;
            break;
          case Method::kDelete:
            want_val = std::nullopt;
            want_st = EventStatus::kFail;
            break;
          default:
            break;
        }
        if (e.val != want_val || e.st != want_st) {
          std::ostringstream msg;
          msg << "tx " << e.tx << " returned " << val_str(e.val) << "/"
              << status_name(e.st) << " for key " << key << " but its prior "
              << method_name(p.m) << " implies " << val_str(want_val) << "/"
              << status_name(want_st);
          return {false, Violation{e.seq, "rule-1", msg.str()}};
        }
      } else {
        const CommittedWrite* src = read_source(writes, key, e.tx);
        if (e.st == EventStatus::kOk) {
          // Rule 2: a non-null return must be the closest committed insert
          // below the reader, already committed when the read happened.
          if (src == nullptr) {
            std::ostringstream msg;
            msg << "tx " << e.tx << " returned " << val_str(e.val)
                << " for key " << key << " with no committed writer below it";
            return {false, Violation{e.seq, "rule-2", msg.str()}};
          }
          if (!src->val.has_value() || src->val != e.val ||
              src->commit_seq > e.seq) {
            std::ostringstream msg;
            msg << "tx " << e.tx << " returned " << val_str(e.val)
                << " for key " << key << " but the closest committed writer "
                << src->writer << " wrote " << val_str(src->val)
                << (src->commit_seq > e.seq ? " (committed after the read)"
                                            : "");
            return {false, Violation{e.seq, "rule-2", msg.str()}};
          }
        } else {
          // Rule 3: a null return needs a deletion (or nothing) below.
          if (src != nullptr &&
              (src->val.has_value() || src->commit_seq > e.seq)) {
            std::ostringstream msg;
            msg << "tx " << e.tx << " returned null for key " << key
                << " but the closest committed writer " << src->writer
                << " wrote " << val_str(src->val)
                << (src->commit_seq > e.seq ? " (committed after the read)"
                                            : "");
            return {false, Violation{e.seq, "rule-3", msg.str()}};
          }
        }
      }
    }
    if (e.m == Method::kInsert || is_rvm(e)) {
      prior[pk] = &e;
    }
  }
  return {true, std::nullopt};
}

OpacityGraph build_graph(const History& h, const VersionOrder& vo) {
  OpacityGraph g;
  auto writes = committed_writes(h);

  std::map<TxTimestamp, std::uint64_t> first_seq;
  std::map<TxTimestamp, std::uint64_t> last_seq;
  for (const auto& e : h.events) {
    if (first_seq.find(e.tx) == first_seq.end()) first_seq[e.tx] = e.seq;
    last_seq[e.tx] = e.seq;
    g.vertices.insert(e.tx);
  }

  // Real-time edges: a transaction that finished before another began.
  for (const auto& [a, la] : last_seq) {
    for (const auto& [b, fb] : first_seq) {
      if (a != b && la < fb) g.add_edge(a, b, EdgeKind::kRealTime);
    }
  }

  // Reads-from and multi-version edges, one bundle per first-access read.
  std::set<std::pair<TxTimestamp, Key>> seen;
  for (const auto& e : h.events) {
    if (!is_rvm(e) || !e.key.has_value() || e.st == EventStatus::kAbort) {
      if (e.key.has_value() &&
          (e.m == Method::kInsert || is_rvm(e))) {
        seen.insert({e.tx, *e.key});
      }
      continue;
    }
    Key key = *e.key;
    if (!seen.insert({e.tx, key}).second) continue;  // local reuse, no edge

    const CommittedWrite* src = read_source(writes, key, e.tx);
    if (src != nullptr) g.add_edge(src->writer, e.tx, EdgeKind::kReadsFrom);

    auto vo_it = vo.find(key);
    if (vo_it == vo.end()) continue;
    TxTimestamp from_version = src != nullptr ? src->writer : 0;
    for (TxTimestamp other : vo_it->second) {
      if (other == e.tx || other == from_version) continue;
      if (other < from_version) {
        // the other version precedes the one we read
        g.add_edge(other, from_version, EdgeKind::kMultiVersion);
      } else {
        // the other version follows it, so the reader precedes that writer
        g.add_edge(e.tx, other, EdgeKind::kMultiVersion);
      }
    }
  }
  return g;
}

AcyclicityResult is_acyclic(const OpacityGraph& g) {
  enum class Color { kWhite, kGray, kBlack };
  std::map<TxTimestamp, Color> color;
  for (TxTimestamp v : g.vertices) color[v] = Color::kWhite;

  std::vector<TxTimestamp> stack;
  // Iterative DFS keeping the gray path so a back edge yields its cycle.
  std::function<std::optional<std::vector<TxTimestamp>>(TxTimestamp)> visit =
      [&](TxTimestamp v) -> std::optional<std::vector<TxTimestamp>> {
    color[v] = Color::kGray;
    stack.push_back(v);
    auto it = g.edges.find(v);
    if (it != g.edges.end()) {
      for (const auto& [to, kind] : it->second) {
        if (color[to] == Color::kGray) {
          auto at = std::find(stack.begin(), stack.end(), to);
          return std::vector<TxTimestamp>(at, stack.end());
        }
        if (color[to] == Color::kWhite) {
          if (auto cycle = visit(to)) return cycle;
        }
      }
    }
    stack.pop_back();
    color[v] = Color::kBlack;
    return std::nullopt;
  };

  for (TxTimestamp v : g.vertices) {
    if (color[v] == Color::kWhite) {
      if (auto cycle = visit(v)) return {false, *cycle};
    }
  }
  return {true, {}};
}

namespace {

// Serial replay of one transaction against the committed state. Returns
// false on the first return value the serial order cannot explain. The
// pending write is tracked apart from the last operation so that a lookup
// between a delete and the commit does not lose the deletion.
struct LocalSim {
  Method last_op;
  std::optional<Value> val;
  EventStatus st;
  enum class Pending { kNone, kInsert, kDelete } pending{Pending::kNone};
  std::optional<Value> pending_val;
};

bool replay_serial(const std::vector<const HistoryEvent*>& events,
                   std::unordered_map<Key, std::optional<Value>>& state) {
  std::unordered_map<Key, LocalSim> overlay;
  bool committed = false;
  for (const HistoryEvent* e : events) {
    switch (e->m) {
      case Method::kBegin:
        break;
      case Method::kInsert: {
        LocalSim& sim = overlay[*e->key];
        sim.last_op = Method::kInsert;
        sim.val = e->val;
        sim.st = EventStatus::kOk;
        sim.pending = LocalSim::Pending::kInsert;
        sim.pending_val = e->val;
        break;
      }
      case Method::kLookup:
      case Method::kDelete: {
        if (e->st == EventStatus::kAbort) break;  // no value to explain
        Key key = *e->key;
        std::optional<Value> want_val;
        EventStatus want_st;
        auto it = overlay.find(key);
        if (it != overlay.end()) {
          switch (it->second.last_op) {
            case Method::kInsert:
              want_val = it->second.val;
              want_st = EventStatus::kOk;
              break;
            case Method::kLookup:
              want_val = it->second.val;
              want_st = it->second.st;
              break;
            default:  // kDelete
              want_val = std::nullopt;
              want_st = EventStatus::kFail;
              break;
          }
        } else {
          auto st_it = state.find(key);
          if (st_it != state.end() && st_it->second.has_value()) {
            want_val = st_it->second;
            want_st = EventStatus::kOk;
          } else {
            want_val = std::nullopt;
            want_st = EventStatus::kFail;
          }
        }
        if (e->val != want_val || e->st != want_st) return false;
        LocalSim& sim = overlay[key];
        if (e->m == Method::kDelete) {
          sim.last_op = Method::kDelete;
          sim.val = std::nullopt;
          sim.st = want_st;
          sim.pending = LocalSim::Pending::kDelete;
          sim.pending_val.reset();
        } else {
          sim.last_op = Method::kLookup;
          sim.val = want_val;
          sim.st = want_st;
        }
        break;
      }
      case Method::kTryCommit:
        if (e->st == EventStatus::kCommit) committed = true;
        break;
      case Method::kAbort:
        break;
    }
  }
  if (committed) {
    for (const auto& [key, sim] : overlay) {
      if (sim.pending == LocalSim::Pending::kInsert) {
        state[key] = sim.pending_val;
      } else if (sim.pending == LocalSim::Pending::kDelete) {
        state[key] = std::nullopt;
      }
    }
  }
  return true;
}

}  // namespace

bool brute_force_opaque(const History& h, std::size_t max_txns) {
  std::vector<TxTimestamp> txs = h.transactions();
  if (txs.size() > max_txns) {
    throw std::invalid_argument("history too large for the exhaustive oracle");
  }

  std::map<TxTimestamp, std::vector<const HistoryEvent*>> per_tx;
  std::map<TxTimestamp, std::uint64_t> first_seq;
  std::map<TxTimestamp, std::uint64_t> last_seq;
  for (const auto& e : h.events) {
    per_tx[e.tx].push_back(&e);
    if (first_seq.find(e.tx) == first_seq.end()) first_seq[e.tx] = e.seq;
    last_seq[e.tx] = e.seq;
  }

  std::sort(txs.begin(), txs.end());
  do {
    bool respects_rt = true;
    for (std::size_t i = 0; i < txs.size() && respects_rt; ++i) {
      for (std::size_t j = i + 1; j < txs.size(); ++j) {
        // a transaction placed later must not have finished before an
        // earlier-placed one began
        if (last_seq[txs[j]] < first_seq[txs[i]]) {
          respects_rt = false;
          break;
        }
      }
    }
    if (!respects_rt) continue;

    std::unordered_map<Key, std::optional<Value>> state;
    bool ok = true;
    for (TxTimestamp tx : txs) {
      if (!replay_serial(per_tx[tx], state)) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(txs.begin(), txs.end()));
  return false;
}

OpacityVerdict check_opacity(const History& h) {
  History done = h.completed();
  LegalityResult legal = check_legality(done);
  if (!legal.ok) return {false, legal.violation, {}};
  OpacityGraph g = build_graph(done, version_order_by_timestamp(done));
  AcyclicityResult acyc = is_acyclic(g);
  if (!acyc.acyclic) return {false, std::nullopt, acyc.cycle};
  return {true, std::nullopt, {}};
}

}  // namespace mvostm
