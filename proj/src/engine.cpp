#include "mvostm/engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace mvostm {

namespace {

EventStatus to_event_status(OpStatus st) {
  switch (st) {
    case OpStatus::kOk: return EventStatus::kOk;
    case OpStatus::kFail: return EventStatus::kFail;
    case OpStatus::kAbort: return EventStatus::kAbort;
  }
  return EventStatus::kFail;
}

KeyNode* node_for_key(const LocationQuad& q, Key key) {
  if (q.blue_curr->is_user(key)) return q.blue_curr;
  if (q.red_curr->is_user(key)) return q.red_curr;
  return nullptr;
}

}  // namespace

MvostmMap::MvostmMap(std::size_t bucket_count, PolicyConfig policy,
                     HistoryRecorder* recorder, EngineOptions options)
    : policy_(policy, counters_), recorder_(recorder), options_(options) {
  if (bucket_count < 1) {
    throw std::invalid_argument("bucket count must be >= 1");
  }
  buckets_.reserve(bucket_count);
  for (std::size_t i = 0; i < bucket_count; ++i) {
    buckets_.push_back(std::make_unique<Bucket>(static_cast<std::uint32_t>(i)));
  }
}

Transaction MvostmMap::begin() {
  auto draw = [&] {
    return recorder_ != nullptr
               ? recorder_->record_begin(clock_)
               : clock_.fetch_add(1, std::memory_order_relaxed);
  };
  TxTimestamp id;
  if (policy_.config().kind == PolicyKind::kGc) {
    // Issue the timestamp and register it as one step under the live-list
    // latch. A collector scanning between the two would treat this
    // transaction as non-live and could drop a version it must still read;
    // a scan that finishes first is safe because any id issued afterwards
    // lies above every version the scan considered.
    std::lock_guard<std::mutex> g(policy_.live().scan_mutex());
    id = draw();
    policy_.live().add_locked(id);
  } else {
    id = draw();
  }
  return Transaction(this, id);
}

void MvostmMap::backoff(unsigned attempt) const {
  if (!options_.retry_backoff) return;  // immediate re-traversal
  unsigned rounds = 1u << std::min(attempt, 10u);
  for (unsigned i = 0; i < rounds; ++i) std::this_thread::yield();
}

bool MvostmMap::check_versions(TxTimestamp tx_id, const KeyNode& node) const {
  const VersionTuple* closest = find_lts(&node, tx_id);
  TxTimestamp max_reader = closest != nullptr ? closest->max_rvl : 0;
  // Readers of evicted versions survive as a key-level floor.
  max_reader = std::max(max_reader, node.evicted_reader_floor);
  return max_reader <= tx_id;
}

LookupResult MvostmMap::shared_read(Transaction& tx, Key key, OpName op) {
  Bucket& bucket = bucket_for(key);
  LatchSet latches;
  LocationQuad q;
  unsigned attempt = 0;
  for (;;) {
    q = bucket.locate(key);
    latches.lock_quad(q);
    if (validate_location(q) == ValidationResult::kOk) break;
    latches.unlock_all();
    backoff(attempt++);
  }

  KeyNode* node = node_for_key(q, key);
  LookupResult out{std::nullopt, OpStatus::kFail};
  bool read_abort = false;
  if (node != nullptr) {
    if (policy_.config().kind == PolicyKind::kSingleVersion &&
        single_version_read(*node, tx.id_).status == OpStatus::kAbort) {
      out = {std::nullopt, OpStatus::kAbort};
      read_abort = true;
    } else {
      VersionTuple* closest = find_lts(node, tx.id_);
      if (closest == nullptr) {
        // The node was created by a committing update and carries versions
        // only above us. Materialize the sentinel so this read leaves a
        // reader mark that later smaller-timestamp writers must respect.
        closest = append_version(node, kSentinelTs, std::nullopt, true,
                                 counters_, &policy_);
      }
      record_reader(closest, tx.id_);
      out = closest->mark ? LookupResult{std::nullopt, OpStatus::kFail}
                          : LookupResult{closest->val, OpStatus::kOk};
    }
  } else {
    // First access to an absent key: a red-only node with the sentinel
    // version records this read for future validation.
    node = bucket.insert_node(q, key, InsertMode::kRedOnly, latches);
    VersionTuple* sentinel = append_version(node, kSentinelTs, std::nullopt,
                                            true, counters_, &policy_);
    record_reader(sentinel, tx.id_);
    out = {std::nullopt, OpStatus::kFail};
  }

  if (recorder_ != nullptr) {
    recorder_->record(tx.id_,
                      op == OpName::kLookup ? Method::kLookup : Method::kDelete,
                      to_event_status(out.status), key, out.value);
  }
  latches.unlock_all();

  if (read_abort) {
    tx.status_ = TxStatus::kAborted;
    resolve_abort(tx, /*record_event=*/false);
    return out;
  }

  LocalRecord rec;
  rec.bucket_id = static_cast<std::uint32_t>(key % buckets_.size());
  rec.key = key;
  rec.last_op = op == OpName::kLookup ? OpName::kLookup : OpName::kDelete;
  rec.val = out.value;
  rec.op_status = out.status;
  rec.pending =
      op == OpName::kDelete ? PendingWrite::kDelete : PendingWrite::kNone;
  rec.quad = q;
  tx.records_.emplace(key, std::move(rec));
  return out;
}

void MvostmMap::intra_trans_validation(std::vector<LocalRecord*>& updates,
                                       std::size_t i, LatchSet& latches) {
  LocalRecord* rec = updates[i];
  LocationQuad& q = rec->quad;
  auto nearest_prev = [&]() -> LocalRecord* {
    for (std::size_t j = i; j-- > 0;) {
      if (updates[j]->bucket_id == rec->bucket_id) return updates[j];
    }
    return nullptr;
  };
  // An earlier update of this transaction may have spliced or unlinked nodes
  // inside this record's cached quad; outsiders are fenced off by the held
  // latches. Swap stale predecessors for the earlier record's, which are
  // already part of our latch set.
  if (q.blue_pred->marked ||
      q.blue_pred->blue_next.load(std::memory_order_relaxed) != q.blue_curr) {
    LocalRecord* prev = nearest_prev();
    MVOSTM_CHECK(prev != nullptr, "blue rewire without an earlier record");
    KeyNode* np = prev->blue_effect_node != nullptr ? prev->blue_effect_node
                                                    : prev->quad.blue_pred;
    MVOSTM_CHECK(latches.holds(np), "rewired blue predecessor not latched");
    q.blue_pred = np;
  }
  if (q.red_pred->red_next.load(std::memory_order_relaxed) != q.red_curr) {
    LocalRecord* prev = nearest_prev();
    MVOSTM_CHECK(prev != nullptr, "red rewire without an earlier record");
    KeyNode* np = prev->red_effect_node != nullptr ? prev->red_effect_node
                                                   : prev->quad.red_pred;
    MVOSTM_CHECK(latches.holds(np), "rewired red predecessor not latched");
    q.red_pred = np;
  }
}

TxStatus MvostmMap::commit(Transaction& tx) {
  std::vector<LocalRecord*> updates;  // records_ is key-sorted already
  for (auto& [key, rec] : tx.records_) {
    if (rec.pending != PendingWrite::kNone) updates.push_back(&rec);
  }

  if (updates.empty()) {
    // Read-only transactions commit without touching a single latch.
    if (recorder_ != nullptr) {
      recorder_->record(tx.id_, Method::kTryCommit, EventStatus::kCommit);
    }
    tx.status_ = TxStatus::kCommitted;
    commits_.fetch_add(1, std::memory_order_relaxed);
    if (policy_.config().kind == PolicyKind::kGc) policy_.live().remove(tx.id_);
    return TxStatus::kCommitted;
  }

  LatchSet latches;
  unsigned attempt = 0;
  for (;;) {
    for (LocalRecord* rec : updates) {
      rec->quad = bucket_for(rec->key).locate(rec->key);
    }
    // Every latch this commit will ever need, acquired in one ascending pass
    // over the global node order; that is what keeps commits deadlock-free.
    std::vector<KeyNode*> nodes;
    nodes.reserve(updates.size() * 4);
    for (LocalRecord* rec : updates) {
      nodes.push_back(rec->quad.blue_pred);
      nodes.push_back(rec->quad.red_pred);
      nodes.push_back(rec->quad.red_curr);
      nodes.push_back(rec->quad.blue_curr);
    }
    std::sort(nodes.begin(), nodes.end(), [](KeyNode* a, KeyNode* b) {
      return node_rank(a) < node_rank(b);
    });
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (KeyNode* n : nodes) latches.lock(n);

    bool all_valid = true;
    for (LocalRecord* rec : updates) {
      if (validate_location(rec->quad) != ValidationResult::kOk) {
        all_valid = false;
        break;
      }
    }
    if (all_valid) break;
    latches.unlock_all();
    backoff(attempt++);
  }

  // Phase 1: a version this transaction would install must not invalidate a
  // read already taken by a higher-timestamp transaction.
  for (LocalRecord* rec : updates) {
    rec->commit_node = node_for_key(rec->quad, rec->key);
    if (rec->commit_node != nullptr &&
        !check_versions(tx.id_, *rec->commit_node)) {
      if (recorder_ != nullptr) {
        recorder_->record(tx.id_, Method::kTryCommit, EventStatus::kAbort);
      }
      latches.unlock_all();
      tx.status_ = TxStatus::kAborted;
      resolve_abort(tx, /*record_event=*/false);
      return TxStatus::kAborted;
    }
  }

  // Phase 2: apply effects in key order.
  std::vector<WriteRecord> writes;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    LocalRecord* rec = updates[i];
    intra_trans_validation(updates, i, latches);
    KeyNode* node = rec->commit_node;
    Bucket& bucket = bucket_for(rec->key);
    if (rec->pending == PendingWrite::kInsert) {
      if (node == nullptr) {
        node = bucket.insert_node(rec->quad, rec->key, InsertMode::kRedAndBlue,
                                  latches);
        rec->blue_effect_node = node;
        rec->red_effect_node = node;
        append_version(node, tx.id_, rec->pending_val, false, counters_,
                       &policy_);
      } else {
        append_version(node, tx.id_, rec->pending_val, false, counters_,
                       &policy_);
        VersionTuple* last = latest_version(node);
        if (node->marked && last != nullptr && last->ts == tx.id_) {
          // Red-only node whose newest version is now our value: promote.
          bucket.insert_node(rec->quad, rec->key, InsertMode::kPromote,
                             latches);
          rec->blue_effect_node = node;
        }
      }
      writes.push_back({rec->key, rec->pending_val});
    } else {  // PendingWrite::kDelete
      if (node != nullptr) {
        VersionTuple* closest = find_lts(node, tx.id_);
        if (closest != nullptr && !closest->mark) {
          // The key is present at our timestamp: install the deletion.
          append_version(node, tx.id_, std::nullopt, true, counters_,
                         &policy_);
          VersionTuple* last = latest_version(node);
          if (!node->marked && last != nullptr && last->ts == tx.id_) {
            MVOSTM_CHECK(rec->quad.blue_curr == node,
                         "blue unlink target mismatch");
            bucket.unlink_blue(rec->quad);
          }
          writes.push_back({rec->key, std::nullopt});
        }
        // Deleting an already-absent key validates but has no effect.
      }
    }
  }

  if (recorder_ != nullptr) {
    recorder_->record(tx.id_, Method::kTryCommit, EventStatus::kCommit,
                      std::nullopt, std::nullopt, writes);
  }
  latches.unlock_all();
  tx.status_ = TxStatus::kCommitted;
  commits_.fetch_add(1, std::memory_order_relaxed);
  if (policy_.config().kind == PolicyKind::kGc) policy_.live().remove(tx.id_);
  return TxStatus::kCommitted;
}

void MvostmMap::resolve_abort(Transaction& tx, bool record_event) {
  if (record_event && recorder_ != nullptr) {
    recorder_->record(tx.id_, Method::kAbort, EventStatus::kAbort);
  }
  aborts_.fetch_add(1, std::memory_order_relaxed);
  if (policy_.config().kind == PolicyKind::kGc) policy_.live().remove(tx.id_);
}

void MvostmMap::for_each_node(
    const std::function<void(const KeyNode&)>& fn) const {
  for (const auto& bucket : buckets_) {
    const KeyNode* n = bucket->head()->red_next.load(std::memory_order_acquire);
    while (n->kind != NodeKind::kTail) {
      auto* mut = const_cast<KeyNode*>(n);
      mut->latch.lock();
      fn(*n);
      mut->latch.unlock();
      n = n->red_next.load(std::memory_order_acquire);
    }
  }
}

std::vector<NodeSnapshot> MvostmMap::snapshot_bucket(std::size_t b) const {
  MVOSTM_CHECK(b < buckets_.size(), "bucket index out of range");
  const Bucket& bucket = *buckets_[b];
  std::vector<Key> blue_keys;
  const KeyNode* n = bucket.head()->blue_next.load(std::memory_order_acquire);
  while (n->kind != NodeKind::kTail) {
    blue_keys.push_back(n->key);
    n = n->blue_next.load(std::memory_order_acquire);
  }
  std::vector<NodeSnapshot> out;
  n = bucket.head()->red_next.load(std::memory_order_acquire);
  while (n->kind != NodeKind::kTail) {
    auto* mut = const_cast<KeyNode*>(n);
    mut->latch.lock();
    NodeSnapshot snap;
    snap.key = n->key;
    snap.marked = n->marked;
    snap.on_blue =
        std::find(blue_keys.begin(), blue_keys.end(), n->key) != blue_keys.end();
    for (const VersionTuple* v = n->versions; v != nullptr; v = v->vnext) {
      VersionTuple copy;
      copy.ts = v->ts;
      copy.val = v->val;
      copy.mark = v->mark;
      copy.rvl = v->rvl;
      copy.max_rvl = v->max_rvl;
      snap.versions.push_back(std::move(copy));
    }
    mut->latch.unlock();
    out.push_back(std::move(snap));
    n = n->red_next.load(std::memory_order_acquire);
  }
  return out;
}

std::size_t MvostmMap::reclaim_marked() {
  if (policy_.config().kind != PolicyKind::kGc) return 0;
  std::vector<Key> candidates;
  for_each_node([&](const KeyNode& n) {
    if (n.marked) candidates.push_back(n.key);
  });
  std::size_t reclaimed = 0;
  for (Key key : candidates) {
    Bucket& bucket = bucket_for(key);
    LatchSet latches;
    LocationQuad q;
    unsigned attempt = 0;
    for (;;) {
      q = bucket.locate(key);
      latches.lock_quad(q);
      if (validate_location(q) == ValidationResult::kOk) break;
      latches.unlock_all();
      backoff(attempt++);
    }
    KeyNode* node = q.red_curr;
    if (node->is_user(key) && node->marked && policy_.reclaim_eligible(*node)) {
      std::size_t versions = version_count(node);
      bucket.unlink_red(q);
      counters_.deleted.fetch_add(versions, std::memory_order_relaxed);
      ++reclaimed;
    }
    latches.unlock_all();
  }
  return reclaimed;
}

Transaction::Transaction(Transaction&& other) noexcept
    : map_(other.map_),
      id_(other.id_),
      status_(other.status_),
      records_(std::move(other.records_)) {
  other.map_ = nullptr;
  other.status_ = TxStatus::kAborted;
}

Transaction& Transaction::operator=(Transaction&& other) noexcept {
  if (this != &other) {
    if (map_ != nullptr && status_ == TxStatus::kLive) {
      status_ = TxStatus::kAborted;
      map_->resolve_abort(*this, /*record_event=*/true);
    }
    map_ = other.map_;
    id_ = other.id_;
    status_ = other.status_;
    records_ = std::move(other.records_);
    other.map_ = nullptr;
    other.status_ = TxStatus::kAborted;
  }
  return *this;
}

Transaction::~Transaction() {
  if (map_ != nullptr && status_ == TxStatus::kLive) {
    status_ = TxStatus::kAborted;
    map_->resolve_abort(*this, /*record_event=*/true);
  }
}

void Transaction::require_live() const {
  if (map_ == nullptr || status_ != TxStatus::kLive) {
    throw std::logic_error("method invoked on a resolved transaction");
  }
}

void Transaction::insert(Key key, Value val) {
  require_live();
  auto [it, created] = records_.try_emplace(key);
  LocalRecord& rec = it->second;
  if (created) {
    rec.bucket_id = static_cast<std::uint32_t>(key % map_->bucket_count());
    rec.key = key;
  }
  rec.last_op = OpName::kInsert;
  rec.val = val;
  rec.op_status = OpStatus::kOk;
  rec.pending = PendingWrite::kInsert;
  rec.pending_val = val;
  if (auto* r = map_->recorder_) {
    r->record(id_, Method::kInsert, EventStatus::kOk, key, val);
  }
}

LookupResult Transaction::lookup(Key key) {
  require_live();
  auto it = records_.find(key);
  if (it == records_.end()) {
    return map_->shared_read(*this, key, OpName::kLookup);
  }
  LocalRecord& rec = it->second;
  LookupResult out{std::nullopt, OpStatus::kFail};
  switch (rec.last_op) {
    case OpName::kInsert:
    case OpName::kLookup:
      out = {rec.val, rec.op_status};
      break;
    case OpName::kDelete:
      out = {std::nullopt, OpStatus::kFail};
      break;
  }
  rec.last_op = OpName::kLookup;
  rec.val = out.value;
  rec.op_status = out.status;
  if (auto* r = map_->recorder_) {
    r->record(id_, Method::kLookup, to_event_status(out.status), key,
              out.value);
  }
  return out;
}

LookupResult Transaction::erase(Key key) {
  require_live();
  auto it = records_.find(key);
  if (it == records_.end()) {
    return map_->shared_read(*this, key, OpName::kDelete);
  }
  LocalRecord& rec = it->second;
  LookupResult out{std::nullopt, OpStatus::kFail};
  switch (rec.last_op) {
    case OpName::kInsert:
      out = {rec.val, OpStatus::kOk};
      break;
    case OpName::kDelete:
      out = {std::nullopt, OpStatus::kFail};
      break;
    case OpName::kLookup:
      out = {rec.val, rec.op_status};
      break;
  }
  rec.last_op = OpName::kDelete;
  rec.val = std::nullopt;
  rec.op_status = out.status;
  rec.pending = PendingWrite::kDelete;
  rec.pending_val.reset();
  if (auto* r = map_->recorder_) {
    r->record(id_, Method::kDelete, to_event_status(out.status), key,
              out.value);
  }
  return out;
}

TxStatus Transaction::try_commit() {
  require_live();
  return map_->commit(*this);
}

void Transaction::abort() {
  require_live();
  status_ = TxStatus::kAborted;
  map_->resolve_abort(*this, /*record_event=*/true);
}

}  // namespace mvostm
