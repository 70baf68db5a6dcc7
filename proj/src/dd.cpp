#include "ncsynth/dd.hpp"

#include <algorithm>
#include <memory>
#include <unordered_map>

#include "ncsynth/errors.hpp"

namespace ncsynth::dd {

namespace {

constexpr Var kFreeVar = kTerminalVar - 1;
constexpr NodeId kNil = std::numeric_limits<NodeId>::max();

inline std::uint64_t mix(std::uint64_t h) {
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

inline std::uint64_t node_hash(Var v, NodeId lo, NodeId hi) {
  return mix((std::uint64_t{v} << 40) ^ (std::uint64_t{lo} << 20) ^ hi ^
             (std::uint64_t{hi} << 52));
}

inline std::uint64_t op_hash(std::uint32_t op, NodeId a, NodeId b, NodeId c) {
  return mix((std::uint64_t{a} << 32 | b) ^ mix(std::uint64_t{c} << 8 | op));
}

} // namespace

std::string to_string(Count c) {
  if (c == 0)
    return "0";
  std::string s;
  while (c > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(c % 10)));
    c /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

// ---------------------------------------------------------------------------
// Bdd handle

Bdd::Bdd(DdManager *mgr, NodeId id) noexcept : mgr_(mgr), id_(id) {
  if (mgr_)
    mgr_->ref(id_);
}

Bdd::Bdd(const Bdd &other) noexcept : mgr_(other.mgr_), id_(other.id_) {
  if (mgr_)
    mgr_->ref(id_);
}

Bdd::Bdd(Bdd &&other) noexcept : mgr_(other.mgr_), id_(other.id_) {
  other.mgr_ = nullptr;
  other.id_ = kFalse;
}

Bdd &Bdd::operator=(const Bdd &other) noexcept {
  if (this != &other) {
    if (other.mgr_)
      other.mgr_->ref(other.id_);
    if (mgr_)
      mgr_->deref(id_);
    mgr_ = other.mgr_;
    id_ = other.id_;
  }
  return *this;
}

Bdd &Bdd::operator=(Bdd &&other) noexcept {
  if (this != &other) {
    if (mgr_)
      mgr_->deref(id_);
    mgr_ = other.mgr_;
    id_ = other.id_;
    other.mgr_ = nullptr;
    other.id_ = kFalse;
  }
  return *this;
}

Bdd::~Bdd() {
  if (mgr_)
    mgr_->deref(id_);
}

Bdd Bdd::operator&(const Bdd &rhs) const { return mgr_->apply(BinOp::And, *this, rhs); }
Bdd Bdd::operator|(const Bdd &rhs) const { return mgr_->apply(BinOp::Or, *this, rhs); }
Bdd Bdd::operator^(const Bdd &rhs) const { return mgr_->apply(BinOp::Xor, *this, rhs); }
Bdd Bdd::operator!() const { return mgr_->negate(*this); }
Bdd &Bdd::operator&=(const Bdd &rhs) { return *this = *this & rhs; }
Bdd &Bdd::operator|=(const Bdd &rhs) { return *this = *this | rhs; }

bool Bdd::implies(const Bdd &g) const {
  return mgr_->apply(BinOp::And, *this, mgr_->negate(g)).is_false();
}

// ---------------------------------------------------------------------------
// Manager basics

DdManager::DdManager(Var var_count) : DdManager(var_count, Options{}) {}

DdManager::DdManager(Var var_count, Options options)
    : var_count_(var_count), options_(options), free_head_(kNil) {
  nodes_.push_back({kTerminalVar, kFalse, kFalse, kNil});
  nodes_.push_back({kTerminalVar, kTrue, kTrue, kNil});
  refs_.assign(2, 0);
  resize_buckets(std::size_t{1} << 12);
  cache_.assign(std::size_t{1} << options_.cache_log2, CacheEntry{0, 0, 0, 0, 0});
  cache_mask_ = cache_.size() - 1;
}

DdManager::~DdManager() = default;

Var DdManager::add_vars(Var n) {
  Var first = var_count_;
  var_count_ += n;
  return first;
}

void DdManager::ensure_vars(Var n) { var_count_ = std::max(var_count_, n); }

void DdManager::check_owned(const Bdd &f) const {
  if (f.mgr_ != this)
    throw UsageError("BDD belongs to a different manager");
}

void DdManager::ref(NodeId n) noexcept {
  if (n > kTrue)
    ++refs_[n];
}

void DdManager::deref(NodeId n) noexcept {
  if (n > kTrue && refs_[n] > 0)
    --refs_[n];
}

void DdManager::pin(NodeId n) noexcept { ref(n); }
void DdManager::unpin(NodeId n) noexcept { deref(n); }

void DdManager::set_cache_enabled(bool enabled) {
  options_.cache_enabled = enabled;
  std::fill(cache_.begin(), cache_.end(), CacheEntry{0, 0, 0, 0, 0});
}

void DdManager::resize_buckets(std::size_t n) {
  buckets_.assign(n, kNil);
  std::size_t mask = n - 1;
  for (NodeId i = 2; i < nodes_.size(); ++i) {
    Node &nd = nodes_[i];
    if (nd.var == kFreeVar)
      continue;
    std::size_t b = node_hash(nd.var, nd.lo, nd.hi) & mask;
    nd.next = buckets_[b];
    buckets_[b] = i;
  }
}

NodeId DdManager::make_node(Var v, NodeId lo, NodeId hi) {
  if (lo == hi)
    return lo;
  std::size_t b = node_hash(v, lo, hi) & (buckets_.size() - 1);
  for (NodeId i = buckets_[b]; i != kNil; i = nodes_[i].next) {
    const Node &nd = nodes_[i];
    if (nd.var == v && nd.lo == lo && nd.hi == hi)
      return i;
  }
  NodeId id;
  if (free_head_ != kNil) {
    id = free_head_;
    free_head_ = nodes_[id].next;
    nodes_[id] = {v, lo, hi, buckets_[b]};
    refs_[id] = 0;
  } else {
    id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back({v, lo, hi, buckets_[b]});
    refs_.push_back(0);
  }
  buckets_[b] = id;
  ++live_;
  if (live_ > buckets_.size())
    resize_buckets(buckets_.size() * 2);
  return id;
}

Bdd DdManager::make(Var v, const Bdd &lo, const Bdd &hi) {
  check_owned(lo);
  check_owned(hi);
  if (v >= var_count_)
    throw UsageError("variable index out of range");
  if ((!lo.is_const() && top(lo.id_) <= v) || (!hi.is_const() && top(hi.id_) <= v))
    throw UsageError("node children must lie strictly below their parent");
  maybe_gc();
  return {this, make_node(v, lo.id_, hi.id_)};
}

void DdManager::maybe_gc() {
  if (live_ <= options_.gc_threshold)
    return;
  collect_garbage();
  if (live_ > options_.gc_threshold / 2)
    options_.gc_threshold *= 2;
}

void DdManager::collect_garbage() {
  std::vector<bool> marked(nodes_.size(), false);
  std::vector<NodeId> stack;
  for (NodeId i = 2; i < nodes_.size(); ++i) {
    if (refs_[i] > 0 && nodes_[i].var != kFreeVar)
      stack.push_back(i);
  }
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    if (n <= kTrue || marked[n])
      continue;
    marked[n] = true;
    stack.push_back(nodes_[n].lo);
    stack.push_back(nodes_[n].hi);
  }
  free_head_ = kNil;
  for (NodeId i = static_cast<NodeId>(nodes_.size()); i-- > 2;) {
    Node &nd = nodes_[i];
    if (nd.var == kFreeVar || !marked[i]) {
      if (nd.var != kFreeVar)
        --live_;
      nd = {kFreeVar, kFalse, kFalse, free_head_};
      free_head_ = i;
    }
  }
  resize_buckets(buckets_.size());
  std::fill(cache_.begin(), cache_.end(), CacheEntry{0, 0, 0, 0, 0});
}

// ---------------------------------------------------------------------------
// Cache

bool DdManager::cache_lookup(std::uint32_t op, NodeId a, NodeId b, NodeId c,
                             NodeId &out) const {
  if (!options_.cache_enabled)
    return false;
  const CacheEntry &e = cache_[op_hash(op, a, b, c) & cache_mask_];
  if (e.op == op && e.a == a && e.b == b && e.c == c) {
    out = e.result;
    return true;
  }
  return false;
}

void DdManager::cache_insert(std::uint32_t op, NodeId a, NodeId b, NodeId c, NodeId r) {
  if (!options_.cache_enabled)
    return;
  cache_[op_hash(op, a, b, c) & cache_mask_] = {op, a, b, c, r};
}

// ---------------------------------------------------------------------------
// Core recursive operations

NodeId DdManager::apply_rec(std::uint32_t op, NodeId f, NodeId g) {
  switch (op) {
  case kOpAnd:
    if (f == kFalse || g == kFalse)
      return kFalse;
    if (f == kTrue || f == g)
      return g;
    if (g == kTrue)
      return f;
    break;
  case kOpOr:
    if (f == kTrue || g == kTrue)
      return kTrue;
    if (f == kFalse || f == g)
      return g;
    if (g == kFalse)
      return f;
    break;
  default: // xor
    if (f == g)
      return kFalse;
    if (f == kFalse)
      return g;
    if (g == kFalse)
      return f;
    if (f == kTrue)
      return not_rec(g);
    if (g == kTrue)
      return not_rec(f);
    break;
  }
  if (f > g)
    std::swap(f, g);
  NodeId r;
  if (cache_lookup(op, f, g, 0, r))
    return r;
  Var vf = top(f), vg = top(g);
  Var v = std::min(vf, vg);
  NodeId f0 = vf == v ? nodes_[f].lo : f, f1 = vf == v ? nodes_[f].hi : f;
  NodeId g0 = vg == v ? nodes_[g].lo : g, g1 = vg == v ? nodes_[g].hi : g;
  NodeId lo = apply_rec(op, f0, g0);
  NodeId hi = apply_rec(op, f1, g1);
  r = make_node(v, lo, hi);
  cache_insert(op, f, g, 0, r);
  return r;
}

NodeId DdManager::not_rec(NodeId f) {
  if (f <= kTrue)
    return f ^ 1u;
  NodeId r;
  if (cache_lookup(kOpNot, f, 0, 0, r))
    return r;
  Var v = top(f);
  NodeId f0 = nodes_[f].lo, f1 = nodes_[f].hi;
  NodeId lo = not_rec(f0);
  NodeId hi = not_rec(f1);
  r = make_node(v, lo, hi);
  cache_insert(kOpNot, f, 0, 0, r);
  return r;
}

NodeId DdManager::ite_rec(NodeId f, NodeId g, NodeId h) {
  if (f == kTrue || g == h)
    return g;
  if (f == kFalse)
    return h;
  if (g == kTrue && h == kFalse)
    return f;
  if (g == kFalse && h == kTrue)
    return not_rec(f);
  if (g == kTrue)
    return apply_rec(kOpOr, f, h);
  if (h == kFalse)
    return apply_rec(kOpAnd, f, g);
  NodeId r;
  if (cache_lookup(kOpIte, f, g, h, r))
    return r;
  Var v = std::min({top(f), top(g), top(h)});
  auto lo_of = [&](NodeId n) { return top(n) == v ? nodes_[n].lo : n; };
  auto hi_of = [&](NodeId n) { return top(n) == v ? nodes_[n].hi : n; };
  NodeId f0 = lo_of(f), f1 = hi_of(f), g0 = lo_of(g), g1 = hi_of(g), h0 = lo_of(h),
         h1 = hi_of(h);
  NodeId lo = ite_rec(f0, g0, h0);
  NodeId hi = ite_rec(f1, g1, h1);
  r = make_node(v, lo, hi);
  cache_insert(kOpIte, f, g, h, r);
  return r;
}

NodeId DdManager::quant_rec(std::uint32_t op, NodeId f, NodeId cube) {
  if (f <= kTrue)
    return f;
  Var v = top(f);
  while (cube > kTrue && top(cube) < v)
    cube = nodes_[cube].hi;
  if (cube == kTrue)
    return f;
  NodeId r;
  if (cache_lookup(op, f, cube, 0, r))
    return r;
  NodeId f0 = nodes_[f].lo, f1 = nodes_[f].hi;
  if (top(cube) == v) {
    NodeId rest = nodes_[cube].hi;
    NodeId lo = quant_rec(op, f0, rest);
    if (op == kOpExists && lo == kTrue) {
      r = kTrue;
    } else if (op == kOpForall && lo == kFalse) {
      r = kFalse;
    } else {
      NodeId hi = quant_rec(op, f1, rest);
      r = apply_rec(op == kOpExists ? kOpOr : kOpAnd, lo, hi);
    }
  } else {
    NodeId lo = quant_rec(op, f0, cube);
    NodeId hi = quant_rec(op, f1, cube);
    r = make_node(v, lo, hi);
  }
  cache_insert(op, f, cube, 0, r);
  return r;
}

NodeId DdManager::and_exists_rec(NodeId f, NodeId g, NodeId cube) {
  if (f == kFalse || g == kFalse)
    return kFalse;
  if (f == kTrue && g == kTrue)
    return kTrue;
  if (cube == kTrue)
    return apply_rec(kOpAnd, f, g);
  if (f == kTrue || f == g)
    return quant_rec(kOpExists, g, cube);
  if (g == kTrue)
    return quant_rec(kOpExists, f, cube);
  if (f > g)
    std::swap(f, g);
  Var v = std::min(top(f), top(g));
  while (cube > kTrue && top(cube) < v)
    cube = nodes_[cube].hi;
  if (cube == kTrue)
    return apply_rec(kOpAnd, f, g);
  NodeId r;
  if (cache_lookup(kOpAndExists, f, g, cube, r))
    return r;
  NodeId f0 = top(f) == v ? nodes_[f].lo : f, f1 = top(f) == v ? nodes_[f].hi : f;
  NodeId g0 = top(g) == v ? nodes_[g].lo : g, g1 = top(g) == v ? nodes_[g].hi : g;
  if (top(cube) == v) {
    NodeId rest = nodes_[cube].hi;
    NodeId lo = and_exists_rec(f0, g0, rest);
    if (lo == kTrue) {
      r = kTrue;
    } else {
      NodeId hi = and_exists_rec(f1, g1, rest);
      r = apply_rec(kOpOr, lo, hi);
    }
  } else {
    NodeId lo = and_exists_rec(f0, g0, cube);
    NodeId hi = and_exists_rec(f1, g1, cube);
    r = make_node(v, lo, hi);
  }
  cache_insert(kOpAndExists, f, g, cube, r);
  return r;
}

NodeId DdManager::cube_of(std::span<const Var> vars) {
  std::vector<Var> sorted(vars.begin(), vars.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  NodeId c = kTrue;
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (*it >= var_count_)
      throw UsageError("variable index " + std::to_string(*it) + " out of range");
    c = make_node(*it, kFalse, c);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Public operations

Bdd DdManager::var(Var v) {
  if (v >= var_count_)
    throw UsageError("variable index " + std::to_string(v) + " out of range");
  maybe_gc();
  return {this, make_node(v, kFalse, kTrue)};
}

Bdd DdManager::nvar(Var v) {
  if (v >= var_count_)
    throw UsageError("variable index " + std::to_string(v) + " out of range");
  maybe_gc();
  return {this, make_node(v, kTrue, kFalse)};
}

Bdd DdManager::cube(std::span<const Var> vars, std::span<const bool> values) {
  if (vars.size() != values.size())
    throw UsageError("cube: vars/values size mismatch");
  maybe_gc();
  std::vector<std::pair<Var, bool>> lits;
  lits.reserve(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] >= var_count_)
      throw UsageError("variable index " + std::to_string(vars[i]) + " out of range");
    lits.emplace_back(vars[i], values[i]);
  }
  std::sort(lits.begin(), lits.end());
  NodeId c = kTrue;
  for (std::size_t i = lits.size(); i-- > 0;) {
    if (i + 1 < lits.size() && lits[i].first == lits[i + 1].first) {
      if (lits[i].second != lits[i + 1].second)
        return bdd_false();
      continue;
    }
    c = lits[i].second ? make_node(lits[i].first, kFalse, c)
                       : make_node(lits[i].first, c, kFalse);
  }
  return {this, c};
}

Bdd DdManager::positive_cube(std::span<const Var> vars) {
  maybe_gc();
  return {this, cube_of(vars)};
}

Bdd DdManager::apply(BinOp op, const Bdd &f, const Bdd &g) {
  check_owned(f);
  check_owned(g);
  maybe_gc();
  std::uint32_t tag = op == BinOp::And ? kOpAnd : op == BinOp::Or ? kOpOr : kOpXor;
  return {this, apply_rec(tag, f.id_, g.id_)};
}

Bdd DdManager::negate(const Bdd &f) {
  check_owned(f);
  maybe_gc();
  return {this, not_rec(f.id_)};
}

Bdd DdManager::ite(const Bdd &f, const Bdd &g, const Bdd &h) {
  check_owned(f);
  check_owned(g);
  check_owned(h);
  maybe_gc();
  return {this, ite_rec(f.id_, g.id_, h.id_)};
}

Bdd DdManager::quantify(Quant kind, const Bdd &f, std::span<const Var> vars) {
  check_owned(f);
  maybe_gc();
  Bdd c(this, cube_of(vars));
  return {this, quant_rec(kind == Quant::Exists ? kOpExists : kOpForall, f.id_, c.id_)};
}

Bdd DdManager::and_exists(const Bdd &f, const Bdd &g, std::span<const Var> vars) {
  check_owned(f);
  check_owned(g);
  maybe_gc();
  Bdd c(this, cube_of(vars));
  return {this, and_exists_rec(f.id_, g.id_, c.id_)};
}

Bdd DdManager::rename(const Bdd &f, std::span<const std::pair<Var, Var>> map) {
  check_owned(f);
  std::vector<Var> target(var_count_);
  for (Var v = 0; v < var_count_; ++v)
    target[v] = v;
  std::vector<bool> used_from(var_count_, false), used_to(var_count_, false);
  for (auto [from, to] : map) {
    if (from >= var_count_ || to >= var_count_)
      throw UsageError("rename: variable index out of range");
    if (used_from[from] || used_to[to])
      throw UsageError("rename: map is not injective");
    used_from[from] = used_to[to] = true;
    target[from] = to;
  }
  // Injective on the support: variables not mentioned by the map stay put.
  std::vector<bool> hit(var_count_, false);
  for (Var v : support(f)) {
    if (hit[target[v]])
      throw UsageError("rename: map is not injective on the function's support");
    hit[target[v]] = true;
  }
  maybe_gc();
  std::unordered_map<NodeId, NodeId> memo;
  std::function<NodeId(NodeId)> rec = [&](NodeId n) -> NodeId {
    if (n <= kTrue)
      return n;
    if (auto it = memo.find(n); it != memo.end())
      return it->second;
    Var v = top(n);
    NodeId n0 = nodes_[n].lo, n1 = nodes_[n].hi;
    NodeId lo = rec(n0);
    NodeId hi = rec(n1);
    NodeId x = make_node(target[v], kFalse, kTrue);
    NodeId r = ite_rec(x, hi, lo);
    memo.emplace(n, r);
    return r;
  };
  return {this, rec(f.id_)};
}

Bdd DdManager::transfer(const Bdd &f, std::span<const Var> var_map) {
  if (!f.valid())
    throw UsageError("transfer: invalid BDD");
  const DdManager &src = *f.mgr_;
  maybe_gc();
  std::unordered_map<NodeId, NodeId> memo;
  std::function<NodeId(NodeId)> rec = [&](NodeId n) -> NodeId {
    if (n <= kTrue)
      return n;
    if (auto it = memo.find(n); it != memo.end())
      return it->second;
    Var v = src.nodes_[n].var;
    if (v >= var_map.size() || var_map[v] >= var_count_)
      throw UsageError("transfer: source variable " + std::to_string(v) + " has no target");
    NodeId lo = rec(src.nodes_[n].lo);
    NodeId hi = rec(src.nodes_[n].hi);
    NodeId x = make_node(var_map[v], kFalse, kTrue);
    NodeId r = ite_rec(x, hi, lo);
    memo.emplace(n, r);
    return r;
  };
  return {this, rec(f.id_)};
}

Bdd DdManager::cofactor(const Bdd &f, std::span<const Var> vars,
                        std::span<const bool> values) {
  check_owned(f);
  if (vars.size() != values.size())
    throw UsageError("cofactor: vars/values size mismatch");
  maybe_gc();
  std::vector<std::int8_t> fixed(var_count_, -1);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] >= var_count_)
      throw UsageError("cofactor: variable index out of range");
    fixed[vars[i]] = values[i] ? 1 : 0;
  }
  std::unordered_map<NodeId, NodeId> memo;
  std::function<NodeId(NodeId)> rec = [&](NodeId n) -> NodeId {
    if (n <= kTrue)
      return n;
    if (auto it = memo.find(n); it != memo.end())
      return it->second;
    Var v = top(n);
    NodeId r;
    if (fixed[v] >= 0) {
      r = rec(fixed[v] ? nodes_[n].hi : nodes_[n].lo);
    } else {
      NodeId n0 = nodes_[n].lo, n1 = nodes_[n].hi;
      NodeId lo = rec(n0);
      NodeId hi = rec(n1);
      r = make_node(v, lo, hi);
    }
    memo.emplace(n, r);
    return r;
  };
  return {this, rec(f.id_)};
}

Count DdManager::sat_count(const Bdd &f, std::span<const Var> support) {
  check_owned(f);
  std::vector<Var> sup(support.begin(), support.end());
  std::sort(sup.begin(), sup.end());
  sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
  if (sup.size() > 127)
    throw UsageError("sat_count: support larger than 127 variables overflows the count");
  std::vector<std::uint32_t> pos(var_count_, kNil);
  for (std::uint32_t i = 0; i < sup.size(); ++i) {
    if (sup[i] >= var_count_)
      throw UsageError("sat_count: variable index out of range");
    pos[sup[i]] = i;
  }
  const auto k = static_cast<std::uint32_t>(sup.size());
  auto level = [&](NodeId n) -> std::uint32_t {
    if (n <= kTrue)
      return k;
    std::uint32_t p = pos[top(n)];
    if (p == kNil)
      throw UsageError("sat_count: function depends on variable " + std::to_string(top(n)) +
                       " outside the support");
    return p;
  };
  std::unordered_map<NodeId, Count> memo;
  std::function<Count(NodeId)> rec = [&](NodeId n) -> Count {
    if (n == kFalse)
      return 0;
    if (n == kTrue)
      return 1;
    if (auto it = memo.find(n); it != memo.end())
      return it->second;
    std::uint32_t l = level(n);
    NodeId lo = nodes_[n].lo, hi = nodes_[n].hi;
    Count c = (rec(lo) << (level(lo) - l - 1)) + (rec(hi) << (level(hi) - l - 1));
    memo.emplace(n, c);
    return c;
  };
  return rec(f.id_) << level(f.id_);
}

void DdManager::for_each_sat(const Bdd &f, std::span<const Var> support,
                             const std::function<void(std::span<const bool>)> &visit) {
  check_owned(f);
  std::vector<Var> sup(support.begin(), support.end());
  std::sort(sup.begin(), sup.end());
  sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
  auto actual = this->support(f);
  if (!std::includes(sup.begin(), sup.end(), actual.begin(), actual.end()))
    throw UsageError("for_each_sat: function depends on variables outside the support");

  // Position of each caller-order support entry in the sorted order.
  std::vector<std::size_t> sorted_pos(support.size());
  for (std::size_t i = 0; i < support.size(); ++i)
    sorted_pos[i] = static_cast<std::size_t>(
        std::lower_bound(sup.begin(), sup.end(), support[i]) - sup.begin());
  std::vector<char> values(sup.size(), 0);
  auto out = std::make_unique<bool[]>(support.size());
  std::function<void(std::size_t, NodeId)> rec = [&](std::size_t p, NodeId n) {
    if (n == kFalse)
      return;
    if (p == sup.size()) {
      for (std::size_t i = 0; i < support.size(); ++i)
        out[i] = values[sorted_pos[i]] != 0;
      visit(std::span<const bool>(out.get(), support.size()));
      return;
    }
    bool branches = n > kTrue && top(n) == sup[p];
    values[p] = 0;
    rec(p + 1, branches ? nodes_[n].lo : n);
    values[p] = 1;
    rec(p + 1, branches ? nodes_[n].hi : n);
  };
  rec(0, f.id_);
}

std::vector<bool> DdManager::pick_min(const Bdd &f, std::span<const Var> support) {
  check_owned(f);
  if (f.is_false())
    return {};
  std::vector<Var> sup(support.begin(), support.end());
  std::sort(sup.begin(), sup.end());
  std::vector<bool> values(sup.size(), false);
  NodeId n = f.id_;
  for (std::size_t p = 0; p < sup.size(); ++p) {
    if (n > kTrue && top(n) < sup[p])
      throw UsageError("pick_min: function depends on variables outside the support");
    if (n > kTrue && top(n) == sup[p]) {
      if (nodes_[n].lo != kFalse) {
        n = nodes_[n].lo;
      } else {
        values[p] = true;
        n = nodes_[n].hi;
      }
    }
  }
  if (n != kTrue)
    throw UsageError("pick_min: function depends on variables outside the support");
  std::vector<bool> out(support.size());
  for (std::size_t i = 0; i < support.size(); ++i)
    out[i] = values[static_cast<std::size_t>(
        std::lower_bound(sup.begin(), sup.end(), support[i]) - sup.begin())];
  return out;
}

bool DdManager::eval(const Bdd &f, std::span<const bool> values_by_var) const {
  check_owned(f);
  NodeId n = f.id_;
  while (n > kTrue) {
    Var v = top(n);
    if (v >= values_by_var.size())
      throw UsageError("eval: assignment too short");
    n = values_by_var[v] ? nodes_[n].hi : nodes_[n].lo;
  }
  return n == kTrue;
}

std::vector<Var> DdManager::support(const Bdd &f) const {
  check_owned(f);
  std::vector<bool> seen_var(var_count_, false);
  std::unordered_map<NodeId, bool> seen;
  std::vector<NodeId> stack{f.id_};
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    if (n <= kTrue || !seen.emplace(n, true).second)
      continue;
    seen_var[top(n)] = true;
    stack.push_back(nodes_[n].lo);
    stack.push_back(nodes_[n].hi);
  }
  std::vector<Var> out;
  for (Var v = 0; v < var_count_; ++v)
    if (seen_var[v])
      out.push_back(v);
  return out;
}

std::size_t DdManager::node_count(const Bdd &f) const {
  return topological_nodes(f).size();
}

std::vector<NodeId> DdManager::topological_nodes(const Bdd &f) const {
  check_owned(f);
  std::vector<NodeId> order;
  std::unordered_map<NodeId, bool> done;
  // Iterative post-order DFS, lo child before hi child.
  std::vector<std::pair<NodeId, bool>> stack{{f.id_, false}};
  while (!stack.empty()) {
    auto [n, expanded] = stack.back();
    stack.pop_back();
    if (n <= kTrue)
      continue;
    if (expanded) {
      if (done.emplace(n, true).second)
        order.push_back(n);
      continue;
    }
    if (done.count(n))
      continue;
    stack.emplace_back(n, true);
    stack.emplace_back(nodes_[n].hi, false);
    stack.emplace_back(nodes_[n].lo, false);
  }
  return order;
}

} // namespace ncsynth::dd
