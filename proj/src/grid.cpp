#include "ncsynth/grid.hpp"

#include <cmath>
#include <iostream>
#include <memory>

#include "ncsynth/errors.hpp"

namespace ncsynth {

namespace {

// Slack for floating-point grid arithmetic, in units of eta.
constexpr double kTol = 1e-9;

unsigned bits_for(Index points) {
  unsigned b = 0;
  while ((Index{1} << b) < points)
    ++b;
  return b;
}

} // namespace

UniformGrid::UniformGrid(std::vector<double> lb, std::vector<double> ub, std::vector<double> eta)
    : lb_(std::move(lb)), ub_(std::move(ub)), eta_(std::move(eta)) {
  if (lb_.size() != ub_.size() || lb_.size() != eta_.size())
    throw UsageError("grid: lb, ub and eta must have the same dimension");
  for (std::size_t d = 0; d < lb_.size(); ++d) {
    if (!std::isfinite(lb_[d]) || !std::isfinite(ub_[d]) || !(lb_[d] <= ub_[d]))
      throw UsageError("grid: require finite lb <= ub in dimension " + std::to_string(d));
    if (!(eta_[d] > 0) || !std::isfinite(eta_[d]))
      throw UsageError("grid: eta must be positive in dimension " + std::to_string(d));
    points_.push_back(static_cast<Index>(std::floor((ub_[d] - lb_[d]) / eta_[d] + kTol)) + 1);
  }
}

unsigned UniformGrid::bits(std::size_t d) const { return bits_for(points_.at(d)); }

unsigned UniformGrid::total_bits() const {
  unsigned b = 0;
  for (std::size_t d = 0; d < dim(); ++d)
    b += bits(d);
  return b;
}

Index UniformGrid::total_points() const {
  Index n = 1;
  for (Index p : points_)
    n *= p;
  return n;
}

std::vector<double> UniformGrid::center(std::span<const Index> idx) const {
  std::vector<double> x(dim());
  for (std::size_t d = 0; d < dim(); ++d)
    x[d] = center(d, idx[d]);
  return x;
}

Index UniformGrid::flatten(std::span<const Index> idx) const {
  Index flat = 0;
  for (std::size_t d = dim(); d-- > 0;)
    flat = flat * points_[d] + idx[d];
  return flat;
}

IndexVec UniformGrid::unflatten(Index flat) const {
  IndexVec idx(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    idx[d] = flat % points_[d];
    flat /= points_[d];
  }
  return idx;
}

IndexVec point_to_symbol(const UniformGrid &grid, std::span<const double> x) {
  if (x.size() != grid.dim())
    throw UsageError("point_to_symbol: dimension mismatch");
  IndexVec idx(grid.dim());
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    double half = grid.eta()[d] / 2;
    if (!(x[d] >= grid.lb()[d] - half - kTol * grid.eta()[d]) ||
        !(x[d] <= grid.ub()[d] + half + kTol * grid.eta()[d]))
      throw UsageError("point_to_symbol: point outside the grid domain in dimension " +
                       std::to_string(d));
    double r = std::round((x[d] - grid.lb()[d]) / grid.eta()[d]);
    r = std::clamp(r, 0.0, double(grid.points(d) - 1));
    idx[d] = static_cast<Index>(r);
  }
  return idx;
}

dd::Bdd uint_equals(dd::DdManager &mgr, std::span<const dd::Var> bits, std::uint64_t value) {
  if (bits.size() < 64 && (value >> bits.size()) != 0)
    return mgr.bdd_false();
  auto vals = std::make_unique<bool[]>(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    vals[i] = (value >> i) & 1u;
  return mgr.cube(bits, std::span<const bool>(vals.get(), bits.size()));
}

dd::Bdd uint_range(dd::DdManager &mgr, std::span<const dd::Var> bits, std::uint64_t lo,
                   std::uint64_t hi) {
  if (lo > hi)
    return mgr.bdd_false();
  // x <= hi and x >= lo, built from the least significant bit upwards.
  auto leq = mgr.bdd_true();
  auto geq = mgr.bdd_true();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    auto x = mgr.var(bits[i]);
    leq = ((hi >> i) & 1u) ? ((!x) | leq) : ((!x) & leq);
    geq = ((lo >> i) & 1u) ? (x & geq) : (x | geq);
  }
  if (bits.size() < 64 && (hi >> bits.size()) != 0)
    leq = mgr.bdd_true();
  if (bits.size() < 64 && (lo >> bits.size()) != 0)
    geq = mgr.bdd_false();
  return leq & geq;
}

dd::Bdd bits_equal(dd::DdManager &mgr, std::span<const dd::Var> a, std::span<const dd::Var> b) {
  if (a.size() != b.size())
    throw UsageError("bits_equal: width mismatch");
  auto eq = mgr.bdd_true();
  // bottom-up keeps each intermediate small under interleaved orders
  for (std::size_t i = a.size(); i-- > 0;)
    eq &= !(mgr.var(a[i]) ^ mgr.var(b[i]));
  return eq;
}

SymbolicSet::SymbolicSet(dd::DdManager &mgr, UniformGrid grid,
                         std::vector<std::vector<dd::Var>> var_ids)
    : mgr_(&mgr), grid_(std::move(grid)), var_ids_(std::move(var_ids)), chi_(mgr.bdd_false()) {
  if (var_ids_.size() != grid_.dim())
    throw UsageError("symbolic set: one variable list per dimension required");
  for (std::size_t d = 0; d < grid_.dim(); ++d) {
    if (var_ids_[d].size() != grid_.bits(d))
      throw UsageError("symbolic set: dimension " + std::to_string(d) + " needs " +
                       std::to_string(grid_.bits(d)) + " variables");
    for (dd::Var v : var_ids_[d])
      if (v >= mgr.var_count())
        throw UsageError("symbolic set: variable index out of range");
  }
}

SymbolicSet SymbolicSet::allocate(dd::DdManager &mgr, UniformGrid grid) {
  std::vector<std::vector<dd::Var>> ids(grid.dim());
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    dd::Var first = mgr.add_vars(grid.bits(d));
    for (unsigned b = 0; b < grid.bits(d); ++b)
      ids[d].push_back(first + b);
  }
  return SymbolicSet(mgr, std::move(grid), std::move(ids));
}

std::vector<dd::Var> SymbolicSet::vars() const {
  std::vector<dd::Var> out;
  for (const auto &d : var_ids_)
    out.insert(out.end(), d.begin(), d.end());
  return out;
}

void SymbolicSet::set_chi(dd::Bdd chi) {
  if (chi.manager() != mgr_)
    throw UsageError("symbolic set: chi belongs to another manager");
  chi_ = std::move(chi);
}

dd::Bdd SymbolicSet::domain() const {
  auto dom = mgr_->bdd_true();
  for (std::size_t d = 0; d < grid_.dim(); ++d)
    dom &= uint_range(*mgr_, var_ids_[d], 0, grid_.points(d) - 1);
  return dom;
}

dd::Bdd SymbolicSet::cell(std::span<const Index> idx) const {
  if (idx.size() != grid_.dim())
    throw UsageError("cell: dimension mismatch");
  auto c = mgr_->bdd_true();
  for (std::size_t d = 0; d < grid_.dim(); ++d) {
    if (idx[d] >= grid_.points(d))
      throw UsageError("cell: index out of range");
    c &= uint_equals(*mgr_, var_ids_[d], idx[d]);
  }
  return c;
}

dd::Bdd SymbolicSet::cell_range(std::span<const Index> lo, std::span<const Index> hi) const {
  auto c = mgr_->bdd_true();
  for (std::size_t d = 0; d < grid_.dim(); ++d)
    c &= uint_range(*mgr_, var_ids_[d], lo[d], std::min<Index>(hi[d], grid_.points(d) - 1));
  return c;
}

SymbolicSet SymbolicSet::with_vars(std::vector<std::vector<dd::Var>> var_ids) const {
  SymbolicSet out(*mgr_, grid_, std::move(var_ids));
  std::vector<std::pair<dd::Var, dd::Var>> map;
  for (std::size_t d = 0; d < grid_.dim(); ++d)
    for (std::size_t b = 0; b < var_ids_[d].size(); ++b)
      map.emplace_back(var_ids_[d][b], out.var_ids_[d][b]);
  out.chi_ = mgr_->rename(chi_, map);
  return out;
}

dd::Count SymbolicSet::size() const { return mgr_->sat_count(chi_, vars()); }

bool SymbolicSet::contains(std::span<const Index> idx) const {
  for (std::size_t d = 0; d < grid_.dim(); ++d)
    if (idx[d] >= grid_.points(d))
      return false;
  return !(chi_ & cell(idx)).is_false();
}

IndexVec SymbolicSet::indices(std::span<const bool> values_by_var) const {
  IndexVec idx(grid_.dim(), 0);
  for (std::size_t d = 0; d < grid_.dim(); ++d)
    for (std::size_t b = 0; b < var_ids_[d].size(); ++b)
      if (values_by_var[var_ids_[d][b]])
        idx[d] |= Index{1} << b;
  return idx;
}

SymbolicSet add_box(const SymbolicSet &set, std::span<const double> lo, std::span<const double> hi) {
  const UniformGrid &g = set.grid();
  if (lo.size() != g.dim() || hi.size() != g.dim())
    throw UsageError("add_box: dimension mismatch");
  IndexVec ilo(g.dim()), ihi(g.dim());
  bool empty = false;
  for (std::size_t d = 0; d < g.dim(); ++d) {
    if (!(lo[d] <= hi[d]))
      throw UsageError("add_box: require lo <= hi in dimension " + std::to_string(d));
    double a = std::ceil((lo[d] - g.lb()[d]) / g.eta()[d] - kTol);
    double b = std::floor((hi[d] - g.lb()[d]) / g.eta()[d] + kTol);
    a = std::max(a, 0.0);
    b = std::min(b, double(g.points(d) - 1));
    if (a > b) {
      empty = true;
      break;
    }
    ilo[d] = static_cast<Index>(a);
    ihi[d] = static_cast<Index>(b);
  }
  SymbolicSet out = set;
  if (empty) {
    std::cerr << "warning: add_box: box contains no cell centre; set unchanged\n";
    return out;
  }
  out.set_chi(set.chi() | set.cell_range(ilo, ihi));
  return out;
}

std::vector<double> decode(const SymbolicSet &set, std::span<const bool> values_by_var) {
  if (!set.manager().eval(set.chi(), values_by_var))
    throw UsageError("decode: assignment is not a member of the set");
  auto idx = set.indices(values_by_var);
  return set.grid().center(idx);
}

} // namespace ncsynth
