/// @file  abstraction.hpp
/// @brief Symbolic models of sampled plants
///
/// A plant x' = f(x, u) sampled with period tau is abstracted on a state grid
/// and an input grid. For every cell centre x_c and input u the successor
/// x' = phi(tau; x_c, u) is enlarged by a growth radius r' = e^{L tau} r,
/// r = eta / 2, and every cell whose interior meets [x' - r', x' + r'] becomes
/// a post cell. Successor boxes that leave the grid are dropped (blocking).

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ncsynth/bdd_io.hpp"
#include "ncsynth/dd.hpp"
#include "ncsynth/grid.hpp"

namespace ncsynth {

using Vec = std::vector<double>;

struct PlantSpec {
  std::string name;
  std::size_t n = 0; // state dimension
  std::size_t m = 0; // input dimension
  double tau = 1.0;

  std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> dx)> rhs;
  /// Closed-form solution after time t; used instead of RK4 when present.
  std::function<void(std::span<const double> x, std::span<const double> u, double t,
                     std::span<double> out)>
      flow;
  /// Growth-bound matrix, possibly input dependent. Ignored when exact.
  std::function<Eigen::MatrixXd(std::span<const double> u)> growth;
  /// Zero growth: successor boxes keep the radius of the source cell.
  bool exact = false;
};

/// Built-in plants: "robot" (dim-dimensional integrator), "integrator1d"
/// (x' = c), "di", "jet", "dcdc", "vehicle", "pendulum".
PlantSpec make_plant(const std::string &name, const nlohmann::json &params, double tau);

/// State after one sampling period: closed form if available, otherwise
/// classical RK4 with 5 substeps.
Vec integrate(const PlantSpec &spec, std::span<const double> x, std::span<const double> u);
Vec growth_radius(const PlantSpec &spec, std::span<const double> r, std::span<const double> u);

/// Base transition system S = (X, X0, U, F) over one manager.
///
/// Variable layout: input bits first, then for every state bit the pre and
/// post variables adjacent.
struct TransitionSystem {
  std::shared_ptr<dd::DdManager> mgr;
  SymbolicSet pre, input, post;
  dd::Bdd trans;   // over pre, input, post
  dd::Bdd initial; // over pre
  double tau = 1.0;
  std::string plant_name;

  /// Allocates variables for the given grids in a fresh manager; trans = FALSE,
  /// initial = all states.
  static TransitionSystem empty(const UniformGrid &states, const UniformGrid &inputs, double tau);

  [[nodiscard]] std::vector<dd::Var> pre_vars() const { return pre.vars(); }
  [[nodiscard]] std::vector<dd::Var> input_vars() const { return input.vars(); }
  [[nodiscard]] std::vector<dd::Var> post_vars() const { return post.vars(); }
  [[nodiscard]] std::vector<dd::Var> all_vars() const;

  /// Pre-state cube, input cube and post-state cube of an explicit transition.
  [[nodiscard]] dd::Bdd transition(Index x, Index u, Index x_post) const;
  /// Post-state predicate renamed onto pre variables (and the converse).
  [[nodiscard]] dd::Bdd post_to_pre(const dd::Bdd &f) const;
  [[nodiscard]] dd::Bdd pre_to_post(const dd::Bdd &f) const;

  [[nodiscard]] dd::Count size() const; // number of transitions
  [[nodiscard]] bool deterministic() const;

  [[nodiscard]] dd::MetaBlock meta() const;
  void save(const std::filesystem::path &trans_path, const std::filesystem::path &init_path) const;
  static TransitionSystem load(const std::filesystem::path &trans_path,
                               const std::optional<std::filesystem::path> &init_path = {});
};

/// Explicit transitions (flat state, flat input, flat post-state).
struct ExplicitTransition {
  Index x, u, x_post;
  friend auto operator<=>(const ExplicitTransition &, const ExplicitTransition &) = default;
};

TransitionSystem from_explicit(const UniformGrid &states, const UniformGrid &inputs,
                               std::span<const ExplicitTransition> transitions, double tau = 1.0);
std::vector<ExplicitTransition> to_explicit(const TransitionSystem &ts);

TransitionSystem build_abstraction(const PlantSpec &spec, const UniformGrid &states,
                                   const UniformGrid &inputs);

/// trans & !region(pre) & !region(post); region is a set over the pre grid.
void remove_region(TransitionSystem &ts, const SymbolicSet &region);

} // namespace ncsynth
