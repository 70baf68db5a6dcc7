/// @file  ncs.hpp
/// @brief Symbolic models of networked control loops
///
/// A plant model S_q is lifted to a model over delayed channels by adding
/// shift registers:
///   x_1 .. x_Ms      recent plant states (x_1 newest), or the dummy symbol q
///   u_1 .. u_Ma      inputs in flight (u_1 sent last)
///   nsc_1 .. nsc_Ms  sensor-to-controller delays, in [nsc_min, nsc_max]
///   nca_1 .. nca_Ma  controller-to-actuator delays, in [nca_min, nca_max]
/// with Ms = nsc_max and Ma = nca_max. A step under control input u shifts
/// every chain by one, pushes u onto the input chain, picks fresh head delays
/// and advances x_1 by a plant transition under one of the buffered inputs.
///
/// Delay registers store value - min and need no variables when min = max.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ncsynth/abstraction.hpp"
#include "ncsynth/bdd_io.hpp"
#include "ncsynth/dd.hpp"
#include "ncsynth/grid.hpp"

namespace ncsynth {

struct DelayBounds {
  unsigned nsc_min = 1, nsc_max = 1, nca_min = 1, nca_max = 1;

  /// Buffered channels: every packet waits exactly the channel maximum.
  [[nodiscard]] bool prolonged() const noexcept {
    return nsc_min == nsc_max && nca_min == nca_max;
  }
  void validate() const;
  friend bool operator==(const DelayBounds &, const DelayBounds &) = default;
};

/// Which buffered input drives the plant during a step.
enum class InputSelector {
  /// Always u_Ma, the oldest input in the chain.
  OldestBuffered,
  /// u_i for the smallest i whose delay has elapsed (nca_i <= i). Equals
  /// OldestBuffered on prolonged channels.
  NewestArrived,
};

std::string to_string(InputSelector s);
InputSelector selector_from_string(const std::string &s);

enum class Anchor { Newest, Oldest };

struct Register {
  std::string kind; // "state" | "input" | "nsc" | "nca" | "control"
  int index = 0;    // 1-based position in the chain
  UniformGrid grid;
  std::vector<std::vector<dd::Var>> pre, post; // post is empty for the control input
  std::optional<dd::Var> flag_pre, flag_post;

  [[nodiscard]] std::string name() const;
  /// All variables of one side, flag last.
  [[nodiscard]] std::vector<dd::Var> vars(bool post_side) const;
};

/// Decoded expanded state. Plant states and inputs are flat grid indices; -1
/// marks the dummy symbol q. Delays are in sampling periods.
struct NcsState {
  std::vector<std::int64_t> x;
  std::vector<Index> u;
  std::vector<unsigned> nsc, nca;
  friend auto operator<=>(const NcsState &, const NcsState &) = default;
};

struct NcsModel {
  std::shared_ptr<dd::DdManager> mgr;
  DelayBounds bounds;
  InputSelector selector = InputSelector::NewestArrived;
  double tau = 1.0;
  std::string plant_name;
  UniformGrid state_grid, input_grid;

  std::vector<Register> x, u, nsc, nca;
  Register control;
  /// Dimension and index of the code used for q, or nullopt when a flag bit
  /// marks q (all state codes in use).
  std::optional<std::pair<std::size_t, Index>> q_code;
  bool base_deterministic = true;

  dd::Bdd trans;   // over pre, control, post
  dd::Bdd initial; // over pre

  [[nodiscard]] std::vector<dd::Var> pre_vars() const;
  [[nodiscard]] std::vector<dd::Var> post_vars() const;
  [[nodiscard]] std::vector<dd::Var> input_vars() const { return control.vars(false); }

  [[nodiscard]] dd::Bdd state_valid(const Register &r, bool post_side) const;
  [[nodiscard]] dd::Bdd is_q(const Register &r, bool post_side) const;
  [[nodiscard]] dd::Bdd code_valid(const Register &r, bool post_side) const;
  /// Every register holds a legal value: the expanded state set.
  [[nodiscard]] dd::Bdd domain() const;
  [[nodiscard]] dd::Bdd input_domain() const;

  [[nodiscard]] dd::Bdd post_to_pre(const dd::Bdd &f) const;
  [[nodiscard]] dd::Bdd pre_to_post(const dd::Bdd &f) const;
  /// Successor states of `states` (over pre vars), as a pre-var predicate.
  [[nodiscard]] dd::Bdd image(const dd::Bdd &states) const;

  [[nodiscard]] dd::Bdd state_cube(const NcsState &s, bool post_side = false) const;
  [[nodiscard]] dd::Bdd input_cube(Index u_flat) const;
  [[nodiscard]] NcsState decode_state(std::span<const bool> values_by_var, bool post_side = false) const;
  [[nodiscard]] Index decode_input(std::span<const bool> values_by_var) const;

  [[nodiscard]] dd::Count state_count() const; // |expanded state set|
  [[nodiscard]] dd::Count size() const;        // transitions

  [[nodiscard]] dd::MetaBlock meta() const;
  void save(const std::filesystem::path &trans_path, const std::filesystem::path &init_path) const;
  static NcsModel load(const std::filesystem::path &trans_path,
                       const std::optional<std::filesystem::path> &init_path = {});
};

/// Builds the expanded model in a new manager. Prints a warning when the
/// channels are prolonged but the plant model is not deterministic.
NcsModel expand(const TransitionSystem &base, const DelayBounds &bounds,
                InputSelector selector = InputSelector::NewestArrived);

/// Lifts a plant-state predicate (over base.pre variables) to expanded
/// states: the anchored register satisfies it and every register is legal.
dd::Bdd expand_spec_set(const TransitionSystem &base, const dd::Bdd &set, const NcsModel &model,
                        Anchor anchor = Anchor::Newest);

/// Forward-reachable expanded states from the initial set.
dd::Bdd reachable(const NcsModel &model);

} // namespace ncsynth
