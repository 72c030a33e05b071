#include "mvostm/history.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace mvostm {

using nlohmann::json;

const char* method_name(Method m) {
  switch (m) {
    case Method::kBegin: return "BEGIN";
    case Method::kInsert: return "INSERT";
    case Method::kLookup: return "LOOKUP";
    case Method::kDelete: return "DELETE";
    case Method::kTryCommit: return "TRYC";
    case Method::kAbort: return "ABORT";
  }
  return "?";
}

const char* status_name(EventStatus s) {
  switch (s) {
    case EventStatus::kOk: return "OK";
    case EventStatus::kFail: return "FAIL";
    case EventStatus::kAbort: return "ABORT";
    case EventStatus::kCommit: return "COMMIT";
  }
  return "?";
}

namespace {

Method parse_method(const std::string& s) {
  if (s == "BEGIN") return Method::kBegin;
  if (s == "INSERT") return Method::kInsert;
  if (s == "LOOKUP") return Method::kLookup;
  if (s == "DELETE") return Method::kDelete;
  if (s == "TRYC") return Method::kTryCommit;
  if (s == "ABORT") return Method::kAbort;
  throw std::runtime_error("unknown method: " + s);
}

EventStatus parse_status(const std::string& s) {
  if (s == "OK") return EventStatus::kOk;
  if (s == "FAIL") return EventStatus::kFail;
  if (s == "ABORT") return EventStatus::kAbort;
  if (s == "COMMIT") return EventStatus::kCommit;
  throw std::runtime_error("unknown status: " + s);
}

bool is_terminal(const HistoryEvent& e) {
  return e.m == Method::kTryCommit || e.m == Method::kAbort ||
         e.st == EventStatus::kAbort;
}

}  // namespace

std::vector<TxTimestamp> History::transactions() const {
  std::vector<TxTimestamp> out;
  std::unordered_set<TxTimestamp> seen;
  for (const auto& e : events) {
    if (seen.insert(e.tx).second) out.push_back(e.tx);
  }
  return out;
}

std::set<TxTimestamp> History::committed() const {
  std::set<TxTimestamp> out;
  for (const auto& e : events) {
    if (e.m == Method::kTryCommit && e.st == EventStatus::kCommit) {
      out.insert(e.tx);
    }
  }
  return out;
}

std::set<TxTimestamp> History::aborted() const {
  std::set<TxTimestamp> out;
  for (const auto& e : events) {
    if (is_terminal(e) && e.st == EventStatus::kAbort) out.insert(e.tx);
  }
  return out;
}

std::set<TxTimestamp> History::live() const {
  std::set<TxTimestamp> out;
  for (const auto& e : events) out.insert(e.tx);
  for (const auto& e : events) {
    if (is_terminal(e)) out.erase(e.tx);
  }
  return out;
}

History History::completed() const {
  History out = *this;
  std::uint64_t seq = events.empty() ? 0 : events.back().seq;
  for (TxTimestamp tx : live()) {
    HistoryEvent ev;
    ev.seq = ++seq;
    ev.tx = tx;
    ev.m = Method::kAbort;
    ev.st = EventStatus::kAbort;
    out.events.push_back(ev);
  }
  return out;
}

void History::to_jsonl(std::ostream& out) const {
  for (const auto& e : events) {
    json j;
    j["seq"] = e.seq;
    j["tx"] = e.tx;
    j["m"] = method_name(e.m);
    if (e.key.has_value()) j["key"] = *e.key;
    if (e.val.has_value()) {
      j["val"] = *e.val;
    } else {
      j["val"] = nullptr;
    }
    j["st"] = status_name(e.st);
    if (e.m == Method::kTryCommit) {
      json writes = json::array();
      for (const auto& w : e.writes) {
        json wj;
        wj["key"] = w.key;
        if (w.val.has_value()) {
          wj["val"] = *w.val;
        } else {
          wj["val"] = nullptr;
        }
        writes.push_back(wj);
      }
      j["writes"] = writes;
    }
    out << j.dump() << '\n';
  }
}

History History::from_jsonl(std::istream& in) {
  History h;
  std::string line;
  std::uint64_t last_seq = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);  // throws json::parse_error on bad input
    HistoryEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.tx = j.at("tx").get<TxTimestamp>();
    e.m = parse_method(j.at("m").get<std::string>());
    if (j.contains("key") && !j["key"].is_null()) {
      e.key = j["key"].get<Key>();
    }
    if (j.contains("val") && !j["val"].is_null()) {
      e.val = j["val"].get<Value>();
    }
    e.st = parse_status(j.at("st").get<std::string>());
    if (j.contains("writes")) {
      for (const auto& wj : j["writes"]) {
        WriteRecord w;
        w.key = wj.at("key").get<Key>();
        if (!wj.at("val").is_null()) w.val = wj["val"].get<Value>();
        e.writes.push_back(w);
      }
    }
    if (e.seq <= last_seq) {
      throw std::runtime_error("seq numbers must be strictly increasing");
    }
    last_seq = e.seq;
    h.events.push_back(std::move(e));
  }
  return h;
}

void HistoryRecorder::record(TxTimestamp tx, Method m, EventStatus st,
                             std::optional<Key> key, std::optional<Value> val,
                             std::vector<WriteRecord> writes) {
  std::lock_guard<std::mutex> g(mu_);
  HistoryEvent e;
  e.seq = next_seq_++;
  e.tx = tx;
  e.m = m;
  e.key = key;
  e.val = val;
  e.st = st;
  e.writes = std::move(writes);
  events_.push_back(std::move(e));
}

TxTimestamp HistoryRecorder::record_begin(std::atomic<TxTimestamp>& counter) {
  std::lock_guard<std::mutex> g(mu_);
  TxTimestamp id = counter.fetch_add(1, std::memory_order_relaxed);
  HistoryEvent e;
  e.seq = next_seq_++;
  e.tx = id;
  e.m = Method::kBegin;
  e.st = EventStatus::kOk;
  events_.push_back(std::move(e));
  return id;
}

History HistoryRecorder::snapshot() const {
  std::lock_guard<std::mutex> g(mu_);
  return History{events_};
}

std::size_t HistoryRecorder::size() const {
  std::lock_guard<std::mutex> g(mu_);
  return events_.size();
}

}  // namespace mvostm
