/// @file  grid.hpp
/// @brief Uniform quantization of continuous spaces and its binary encoding
///
/// A grid over [lb, ub] with width eta has floor((ub - lb) / eta) + 1 points
/// per dimension, both endpoints included. Cell i of a dimension is centred
/// at lb + i * eta. Indices are stored in binary over ceil(log2(points))
/// BDD variables, least significant bit first.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ncsynth/dd.hpp"

namespace ncsynth {

using Index = std::uint64_t;
using IndexVec = std::vector<Index>;

class UniformGrid {
public:
  UniformGrid() = default;
  UniformGrid(std::vector<double> lb, std::vector<double> ub, std::vector<double> eta);

  [[nodiscard]] std::size_t dim() const noexcept { return lb_.size(); }
  [[nodiscard]] const std::vector<double> &lb() const noexcept { return lb_; }
  [[nodiscard]] const std::vector<double> &ub() const noexcept { return ub_; }
  [[nodiscard]] const std::vector<double> &eta() const noexcept { return eta_; }

  [[nodiscard]] Index points(std::size_t d) const { return points_.at(d); }
  [[nodiscard]] unsigned bits(std::size_t d) const;
  [[nodiscard]] unsigned total_bits() const;
  /// Product of points over all dimensions.
  [[nodiscard]] Index total_points() const;

  [[nodiscard]] double center(std::size_t d, Index i) const { return lb_[d] + double(i) * eta_[d]; }
  [[nodiscard]] std::vector<double> center(std::span<const Index> idx) const;

  /// Mixed-radix flat index, dimension 0 varying fastest.
  [[nodiscard]] Index flatten(std::span<const Index> idx) const;
  [[nodiscard]] IndexVec unflatten(Index flat) const;

  friend bool operator==(const UniformGrid &, const UniformGrid &) = default;

private:
  std::vector<double> lb_, ub_, eta_;
  std::vector<Index> points_;
};

/// Nearest cell centre, per dimension: round((x - lb) / eta), clamped.
/// Throws UsageError when x lies outside [lb - eta/2, ub + eta/2].
IndexVec point_to_symbol(const UniformGrid &grid, std::span<const double> x);

// Unsigned-integer predicates over LSB-first bit vectors.
dd::Bdd uint_equals(dd::DdManager &mgr, std::span<const dd::Var> bits, std::uint64_t value);
dd::Bdd uint_range(dd::DdManager &mgr, std::span<const dd::Var> bits, std::uint64_t lo,
                   std::uint64_t hi);
/// Bitwise equivalence a == b (same width).
dd::Bdd bits_equal(dd::DdManager &mgr, std::span<const dd::Var> a, std::span<const dd::Var> b);

/// A set of grid cells, encoded as a BDD over per-dimension variable lists.
class SymbolicSet {
public:
  SymbolicSet() = default;
  /// Empty set over the given variables. `var_ids[d]` must have grid.bits(d) entries.
  SymbolicSet(dd::DdManager &mgr, UniformGrid grid, std::vector<std::vector<dd::Var>> var_ids);
  /// Empty set over freshly appended variables.
  static SymbolicSet allocate(dd::DdManager &mgr, UniformGrid grid);

  [[nodiscard]] dd::DdManager &manager() const { return *mgr_; }
  [[nodiscard]] const UniformGrid &grid() const noexcept { return grid_; }
  [[nodiscard]] const std::vector<std::vector<dd::Var>> &var_ids() const noexcept { return var_ids_; }
  [[nodiscard]] std::vector<dd::Var> vars() const;
  [[nodiscard]] const dd::Bdd &chi() const noexcept { return chi_; }
  void set_chi(dd::Bdd chi);

  /// All in-range codes.
  [[nodiscard]] dd::Bdd domain() const;
  [[nodiscard]] dd::Bdd cell(std::span<const Index> idx) const;
  /// Cells with lo[d] <= idx[d] <= hi[d] for every d.
  [[nodiscard]] dd::Bdd cell_range(std::span<const Index> lo, std::span<const Index> hi) const;
  /// Same set, re-encoded over another variable list of the same shape.
  [[nodiscard]] SymbolicSet with_vars(std::vector<std::vector<dd::Var>> var_ids) const;

  [[nodiscard]] dd::Count size() const;
  [[nodiscard]] bool contains(std::span<const Index> idx) const;
  /// Cell indices of an assignment (indexed by variable). No membership check.
  [[nodiscard]] IndexVec indices(std::span<const bool> values_by_var) const;

private:
  dd::DdManager *mgr_ = nullptr;
  UniformGrid grid_;
  std::vector<std::vector<dd::Var>> var_ids_;
  dd::Bdd chi_;
};

/// chi | cells whose centres lie in [lo, hi]. An empty intersection leaves the
/// set unchanged and prints a warning.
SymbolicSet add_box(const SymbolicSet &set, std::span<const double> lo, std::span<const double> hi);

/// Cell centre of a member assignment; throws UsageError if the assignment is not in chi.
std::vector<double> decode(const SymbolicSet &set, std::span<const bool> values_by_var);

} // namespace ncsynth
