#include "mvostm/store.hpp"

#include <algorithm>
#include <stdexcept>

namespace mvostm {

KeyNode::~KeyNode() {
  VersionTuple* v = versions;
  while (v != nullptr) {
    VersionTuple* next = v->vnext;
    delete v;
    v = next;
  }
}

void LatchSet::lock(KeyNode* n) {
  if (holds(n)) return;
  NodeRank r = node_rank(n);
  if (have_ordered_) {
    MVOSTM_CHECK(max_ordered_ < r, "latch acquisition out of global order");
  }
  n->latch.lock();
  held_.push_back(n);
  max_ordered_ = r;
  have_ordered_ = true;
}

void LatchSet::lock_quad(const LocationQuad& q) {
  // Quad order is list-position order: blue_pred <= red_pred <= red_curr <=
  // blue_curr, so locking in this sequence keeps the global order.
  lock(q.blue_pred);
  lock(q.red_pred);
  lock(q.red_curr);
  lock(q.blue_curr);
}

void LatchSet::adopt_fresh(KeyNode* n) {
  // A node created under the quad latches is unpublished to contenders, so
  // this can never block; its rank sits between held ranks and is exempt
  // from the ordering assertion.
  bool acquired = n->latch.try_lock();
  MVOSTM_CHECK(acquired, "fresh node latch contended");
  held_.push_back(n);
}

bool LatchSet::holds(const KeyNode* n) const {
  return std::find(held_.begin(), held_.end(), n) != held_.end();
}

void LatchSet::unlock_all() {
  for (KeyNode* n : held_) n->latch.unlock();
  held_.clear();
  have_ordered_ = false;
}

Bucket::Bucket(std::uint32_t id)
    : id_(id),
      head_(id, NodeKind::kHead, 0),
      tail_(id, NodeKind::kTail, ~Key{0}) {
  head_.red_next.store(&tail_, std::memory_order_relaxed);
  head_.blue_next.store(&tail_, std::memory_order_relaxed);
}

Bucket::~Bucket() {
  KeyNode* n = head_.red_next.load(std::memory_order_relaxed);
  while (n != &tail_) {
    KeyNode* next = n->red_next.load(std::memory_order_relaxed);
    delete n;
    n = next;
  }
  for (KeyNode* r : retired_) delete r;
}

LocationQuad Bucket::locate(Key key) const {
  LocationQuad q;
  const KeyNode* bp = &head_;
  const KeyNode* bc = bp->blue_next.load(std::memory_order_acquire);
  while (bc->precedes(key)) {
    bp = bc;
    bc = bc->blue_next.load(std::memory_order_acquire);
  }
  const KeyNode* rp = bp;
  const KeyNode* rc = rp->red_next.load(std::memory_order_acquire);
  while (rc->precedes(key)) {
    rp = rc;
    rc = rc->red_next.load(std::memory_order_acquire);
  }
  q.blue_pred = const_cast<KeyNode*>(bp);
  q.blue_curr = const_cast<KeyNode*>(bc);
  q.red_pred = const_cast<KeyNode*>(rp);
  q.red_curr = const_cast<KeyNode*>(rc);
  return q;
}

KeyNode* Bucket::insert_node(const LocationQuad& q, Key key, InsertMode mode,
                             LatchSet& latches) {
  switch (mode) {
    case InsertMode::kRedOnly: {
      MVOSTM_CHECK(
          q.red_pred->red_next.load(std::memory_order_relaxed) == q.red_curr,
          "red splice point went stale");
      KeyNode* node = new KeyNode(id_, NodeKind::kUser, key);
      node->marked = true;
      latches.adopt_fresh(node);
      node->red_next.store(q.red_curr, std::memory_order_relaxed);
      q.red_pred->red_next.store(node, std::memory_order_release);
      return node;
    }
    case InsertMode::kRedAndBlue: {
      MVOSTM_CHECK(
          q.red_pred->red_next.load(std::memory_order_relaxed) == q.red_curr &&
              q.blue_pred->blue_next.load(std::memory_order_relaxed) ==
                  q.blue_curr &&
              !q.blue_pred->marked,
          "splice point went stale");
      KeyNode* node = new KeyNode(id_, NodeKind::kUser, key);
      node->marked = false;
      latches.adopt_fresh(node);
      node->red_next.store(q.red_curr, std::memory_order_relaxed);
      node->blue_next.store(q.blue_curr, std::memory_order_relaxed);
      q.red_pred->red_next.store(node, std::memory_order_release);
      q.blue_pred->blue_next.store(node, std::memory_order_release);
      return node;
    }
    case InsertMode::kPromote: {
      KeyNode* node = q.red_curr;
      MVOSTM_CHECK(node->is_user(key) && node->marked,
                   "promote target must be a marked node with the key");
      MVOSTM_CHECK(q.blue_pred->blue_next.load(std::memory_order_relaxed) ==
                           q.blue_curr &&
                       !q.blue_pred->marked,
                   "blue splice point went stale");
      node->blue_next.store(q.blue_curr, std::memory_order_relaxed);
      q.blue_pred->blue_next.store(node, std::memory_order_release);
      node->marked = false;
      return node;
    }
  }
  MVOSTM_CHECK(false, "unreachable insert mode");
  return nullptr;
}

void Bucket::unlink_blue(const LocationQuad& q) {
  KeyNode* node = q.blue_curr;
  MVOSTM_CHECK(
      q.blue_pred->blue_next.load(std::memory_order_relaxed) == node &&
          !q.blue_pred->marked,
      "blue unlink point went stale");
  q.blue_pred->blue_next.store(node->blue_next.load(std::memory_order_relaxed),
                               std::memory_order_release);
  node->marked = true;
}

void Bucket::unlink_red(const LocationQuad& q) {
  KeyNode* node = q.red_curr;
  MVOSTM_CHECK(node->kind == NodeKind::kUser && node->marked &&
                   !node->red_unlinked,
               "red unlink requires a marked, still-linked user node");
  // The node keeps its own links so a traversal standing on it can continue.
  node->red_unlinked = true;
  q.red_pred->red_next.store(node->red_next.load(std::memory_order_relaxed),
                             std::memory_order_release);
  std::lock_guard<std::mutex> g(retired_mu_);
  retired_.push_back(node);
}

ValidationResult validate_location(const LocationQuad& q) {
  // An unlinked red predecessor keeps consistent outgoing links, so it must
  // be rejected explicitly or a writer could splice onto a removed node.
  if (q.blue_pred->marked || q.blue_curr->marked ||
      q.red_pred->red_unlinked || q.red_curr->red_unlinked ||
      q.blue_pred->blue_next.load(std::memory_order_relaxed) != q.blue_curr ||
      q.red_pred->red_next.load(std::memory_order_relaxed) != q.red_curr) {
    return ValidationResult::kRetry;
  }
  return ValidationResult::kOk;
}

VersionTuple* find_lts(const KeyNode* node, TxTimestamp ts) {
  VersionTuple* best = nullptr;
  for (VersionTuple* v = node->versions; v != nullptr; v = v->vnext) {
    if (v->ts >= ts) break;  // list is ascending
    best = v;
  }
  return best;
}

void record_reader(VersionTuple* tuple, TxTimestamp ts) {
  if (std::find(tuple->rvl.begin(), tuple->rvl.end(), ts) == tuple->rvl.end()) {
    tuple->rvl.push_back(ts);
  }
  tuple->max_rvl = std::max(tuple->max_rvl, ts);
}

VersionTuple* append_version(KeyNode* node, TxTimestamp ts,
                             std::optional<Value> val, bool mark,
                             VersionCounters& counters, RetentionHook* hook) {
  MVOSTM_CHECK(mark == !val.has_value(), "mark must match value absence");
  VersionTuple* prev = nullptr;
  VersionTuple* cur = node->versions;
  while (cur != nullptr && cur->ts < ts) {
    prev = cur;
    cur = cur->vnext;
  }
  if (cur != nullptr && cur->ts == ts) {
    throw std::logic_error("duplicate version timestamp");
  }
  auto* tuple = new VersionTuple{ts, val, mark, {}, 0, nullptr};
  tuple->vnext = cur;
  if (prev == nullptr) {
    node->versions = tuple;
  } else {
    prev->vnext = tuple;
  }
  counters.created.fetch_add(1, std::memory_order_relaxed);
  if (hook != nullptr) hook->on_append(*node);
  return tuple;
}

VersionTuple* latest_version(const KeyNode* node) {
  VersionTuple* v = node->versions;
  if (v == nullptr) return nullptr;
  while (v->vnext != nullptr) v = v->vnext;
  return v;
}

std::size_t version_count(const KeyNode* node) {
  std::size_t n = 0;
  for (VersionTuple* v = node->versions; v != nullptr; v = v->vnext) ++n;
  return n;
}

std::size_t non_sentinel_version_count(const KeyNode* node) {
  std::size_t n = 0;
  for (VersionTuple* v = node->versions; v != nullptr; v = v->vnext) {
    if (v->ts != kSentinelTs) ++n;
  }
  return n;
}

}  // namespace mvostm
