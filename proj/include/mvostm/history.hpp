#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mvostm/store.hpp"

namespace mvostm {

enum class Method { kBegin, kInsert, kLookup, kDelete, kTryCommit, kAbort };
enum class EventStatus { kOk, kFail, kAbort, kCommit };

struct WriteRecord {
  Key key;
  std::optional<Value> val;  // absent = deletion version
};

// One recorded method. seq is drawn at the method's first-unlock point for
// latched methods and at the response for purely local ones, so seq order is
// the unlock-order linearization of the run.
struct HistoryEvent {
  std::uint64_t seq{0};
  TxTimestamp tx{0};
  Method m{Method::kBegin};
  std::optional<Key> key{};
  std::optional<Value> val{};
  EventStatus st{EventStatus::kOk};
  std::vector<WriteRecord> writes{};  // kTryCommit only: versions installed
};

const char* method_name(Method m);
const char* status_name(EventStatus s);

// A sequential history: events whole and ordered by seq.
struct History {
  std::vector<HistoryEvent> events;

  std::vector<TxTimestamp> transactions() const;  // by first appearance
  std::set<TxTimestamp> committed() const;
  std::set<TxTimestamp> aborted() const;
  std::set<TxTimestamp> live() const;

  // Appends a terminal abort for every live transaction. Idempotent.
  History completed() const;

  void to_jsonl(std::ostream& out) const;
  static History from_jsonl(std::istream& in);  // throws on malformed input
};

// Thread-safe event sink. Disabled recording is simply "no recorder": the
// engine takes a nullable pointer and skips every call.
class HistoryRecorder {
 public:
  void record(TxTimestamp tx, Method m, EventStatus st,
              std::optional<Key> key = std::nullopt,
              std::optional<Value> val = std::nullopt,
              std::vector<WriteRecord> writes = {});

  // Draws the transaction id and records its begin under one latch, so begin
  // order in the history matches id order exactly.
  TxTimestamp record_begin(std::atomic<TxTimestamp>& counter);

  History snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::uint64_t next_seq_{1};
  std::vector<HistoryEvent> events_;
};

}  // namespace mvostm
