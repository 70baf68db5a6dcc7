/// @file  dd.hpp
/// @brief Reduced ordered binary decision diagrams (no complement edges)
///
/// Every set and relation in ncsynth is a `Bdd` owned by a `DdManager`. The
/// variable order is static: variable index equals level, index 0 on top.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ncsynth::dd {

using Var = std::uint32_t;
using NodeId = std::uint32_t;
/// Satisfying-assignment counts; model sizes routinely exceed 2^64.
using Count = unsigned __int128;

inline constexpr NodeId kFalse = 0;
inline constexpr NodeId kTrue = 1;
inline constexpr Var kTerminalVar = std::numeric_limits<Var>::max();

enum class BinOp : std::uint8_t { And, Or, Xor };
enum class Quant : std::uint8_t { Exists, Forall };

std::string to_string(Count c);

class DdManager;

/// Handle to a BDD root. Holding a handle keeps the root (and everything
/// below it) alive across garbage collections.
class Bdd {
public:
  Bdd() noexcept = default;
  Bdd(const Bdd &other) noexcept;
  Bdd(Bdd &&other) noexcept;
  Bdd &operator=(const Bdd &other) noexcept;
  Bdd &operator=(Bdd &&other) noexcept;
  ~Bdd();

  [[nodiscard]] DdManager *manager() const noexcept { return mgr_; }
  [[nodiscard]] NodeId id() const noexcept { return id_; }
  [[nodiscard]] bool valid() const noexcept { return mgr_ != nullptr; }
  [[nodiscard]] bool is_true() const noexcept { return mgr_ && id_ == kTrue; }
  [[nodiscard]] bool is_false() const noexcept { return mgr_ && id_ == kFalse; }
  [[nodiscard]] bool is_const() const noexcept { return id_ <= kTrue; }

  /// Same manager and same root, i.e. the same boolean function.
  friend bool operator==(const Bdd &a, const Bdd &b) noexcept {
    return a.mgr_ == b.mgr_ && a.id_ == b.id_;
  }

  Bdd operator&(const Bdd &rhs) const;
  Bdd operator|(const Bdd &rhs) const;
  Bdd operator^(const Bdd &rhs) const;
  Bdd operator!() const;
  Bdd &operator&=(const Bdd &rhs);
  Bdd &operator|=(const Bdd &rhs);

  /// f => g
  [[nodiscard]] bool implies(const Bdd &g) const;

private:
  friend class DdManager;
  Bdd(DdManager *mgr, NodeId id) noexcept;

  DdManager *mgr_ = nullptr;
  NodeId id_ = kFalse;
};

/// Owner of the unique table and operation cache.
///
/// Confined to one thread at a time. Not copyable or movable since handles
/// keep a pointer to their manager.
class DdManager {
public:
  struct Options {
    /// Live-node count that triggers a sweep at the next top-level operation.
    std::size_t gc_threshold = std::size_t{1} << 20;
    /// log2 of the number of operation-cache slots.
    unsigned cache_log2 = 18;
    bool cache_enabled = true;
  };

  explicit DdManager(Var var_count = 0);
  DdManager(Var var_count, Options options);
  DdManager(const DdManager &) = delete;
  DdManager &operator=(const DdManager &) = delete;
  ~DdManager();

  [[nodiscard]] Var var_count() const noexcept { return var_count_; }
  /// Appends `n` fresh variables at the bottom of the order; returns the first index.
  Var add_vars(Var n);
  void ensure_vars(Var n);

  Bdd bdd_true() { return {this, kTrue}; }
  Bdd bdd_false() { return {this, kFalse}; }
  Bdd var(Var v);
  Bdd nvar(Var v);
  Bdd literal(Var v, bool positive) { return positive ? var(v) : nvar(v); }
  /// Conjunction of literals `vars[i] == values[i]`.
  Bdd cube(std::span<const Var> vars, std::span<const bool> values);
  /// Conjunction of positive literals.
  Bdd positive_cube(std::span<const Var> vars);

  Bdd apply(BinOp op, const Bdd &f, const Bdd &g);
  Bdd negate(const Bdd &f);
  Bdd ite(const Bdd &f, const Bdd &g, const Bdd &h);
  Bdd quantify(Quant kind, const Bdd &f, std::span<const Var> vars);
  Bdd exists(const Bdd &f, std::span<const Var> vars) { return quantify(Quant::Exists, f, vars); }
  Bdd forall(const Bdd &f, std::span<const Var> vars) { return quantify(Quant::Forall, f, vars); }
  /// Relational product: exists vars . f & g, without building f & g.
  Bdd and_exists(const Bdd &f, const Bdd &g, std::span<const Var> vars);

  /// Substitutes variables; `map` pairs are (from, to) and must be injective.
  Bdd rename(const Bdd &f, std::span<const std::pair<Var, Var>> map);
  /// Rebuilds a BDD owned by another manager here; `var_map[v]` is the
  /// target variable for source variable `v`.
  Bdd transfer(const Bdd &f, std::span<const Var> var_map);
  /// Restriction of f by the partial assignment vars[i] := values[i].
  Bdd cofactor(const Bdd &f, std::span<const Var> vars, std::span<const bool> values);

  /// Number of assignments to `support` satisfying f.
  /// Throws UsageError if f depends on a variable outside `support`.
  Count sat_count(const Bdd &f, std::span<const Var> support);
  /// Visits every satisfying assignment of `support`, lexicographically by
  /// variable index (lowest index most significant, 0 before 1).
  void for_each_sat(const Bdd &f, std::span<const Var> support,
                    const std::function<void(std::span<const bool>)> &visit);
  /// Lexicographically smallest satisfying assignment of `support`; empty if f is FALSE.
  std::vector<bool> pick_min(const Bdd &f, std::span<const Var> support);

  /// Evaluates f under a total assignment indexed by variable.
  bool eval(const Bdd &f, std::span<const bool> values_by_var) const;
  std::vector<Var> support(const Bdd &f) const;
  /// Number of internal nodes reachable from f.
  std::size_t node_count(const Bdd &f) const;

  [[nodiscard]] std::size_t live_nodes() const noexcept { return live_; }
  void collect_garbage();
  void set_cache_enabled(bool enabled);
  [[nodiscard]] bool cache_enabled() const noexcept { return options_.cache_enabled; }

  /// Explicit pinning for raw node ids held outside a `Bdd` handle.
  void pin(NodeId n) noexcept;
  void unpin(NodeId n) noexcept;

  // Raw node access for exporters and code generators.
  [[nodiscard]] Var node_var(NodeId n) const noexcept { return nodes_[n].var; }
  [[nodiscard]] NodeId node_lo(NodeId n) const noexcept { return nodes_[n].lo; }
  [[nodiscard]] NodeId node_hi(NodeId n) const noexcept { return nodes_[n].hi; }
  /// Internal nodes below f, children before parents (stable DFS, lo first).
  std::vector<NodeId> topological_nodes(const Bdd &f) const;
  /// Handle for an internal node, for structural construction (loaders).
  Bdd make(Var v, const Bdd &lo, const Bdd &hi);

private:
  friend class Bdd;

  struct Node {
    Var var;
    NodeId lo;
    NodeId hi;
    NodeId next;
  };
  struct CacheEntry {
    std::uint32_t op;
    NodeId a, b, c;
    NodeId result;
  };

  enum OpTag : std::uint32_t {
    kOpAnd = 1,
    kOpOr,
    kOpXor,
    kOpNot,
    kOpIte,
    kOpExists,
    kOpForall,
    kOpAndExists,
  };

  void check_owned(const Bdd &f) const;
  void maybe_gc();
  NodeId make_node(Var v, NodeId lo, NodeId hi);
  void resize_buckets(std::size_t n);
  [[nodiscard]] Var top(NodeId n) const noexcept { return nodes_[n].var; }

  bool cache_lookup(std::uint32_t op, NodeId a, NodeId b, NodeId c, NodeId &out) const;
  void cache_insert(std::uint32_t op, NodeId a, NodeId b, NodeId c, NodeId r);

  NodeId apply_rec(std::uint32_t op, NodeId f, NodeId g);
  NodeId not_rec(NodeId f);
  NodeId ite_rec(NodeId f, NodeId g, NodeId h);
  NodeId quant_rec(std::uint32_t op, NodeId f, NodeId cube);
  NodeId and_exists_rec(NodeId f, NodeId g, NodeId cube);
  NodeId cube_of(std::span<const Var> vars);

  void ref(NodeId n) noexcept;
  void deref(NodeId n) noexcept;

  Var var_count_ = 0;
  Options options_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> refs_;
  std::vector<NodeId> buckets_;
  NodeId free_head_;
  std::size_t live_ = 0;
  std::vector<CacheEntry> cache_;
  std::size_t cache_mask_ = 0;
};

} // namespace ncsynth::dd
