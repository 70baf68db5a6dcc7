/// @file  synthesis.hpp
/// @brief Fixed-point controller synthesis on symbolic transition systems
///
/// Games are played on pairs (x, u). pre(Z) holds the pairs with at least one
/// successor, all of whose successors lie in the state projection of Z.

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ncsynth/abstraction.hpp"
#include "ncsynth/dd.hpp"
#include "ncsynth/ncs.hpp"

namespace ncsynth {

/// The parts of a model the solvers need.
struct GameView {
  std::shared_ptr<dd::DdManager> mgr;
  std::vector<dd::Var> pre, input, post; // post[i] is the successor copy of pre[i]
  dd::Bdd trans;
  dd::Bdd state_domain; // legal state codes, over pre
  dd::Bdd input_domain; // legal input codes, over input

  static GameView of(const NcsModel &m);
  static GameView of(const TransitionSystem &ts);

  [[nodiscard]] dd::Bdd states_of(const dd::Bdd &pairs) const; // exists input
  [[nodiscard]] dd::Bdd to_post(const dd::Bdd &states) const;
  [[nodiscard]] dd::Bdd pairs(const dd::Bdd &states) const; // states x legal inputs
};

struct ControllerMode {
  dd::Bdd relation; // over pre and input
  dd::Bdd goal;     // states where this mode hands over to `next`
  int next = 0;
};

struct Controller {
  std::string kind; // safety | reach | persistence | recurrence | gen_buchi
  dd::Bdd relation;
  dd::Bdd domain;
  /// Non-empty for mode-switching controllers.
  std::vector<ControllerMode> modes;
  /// Iterations of each fixed-point loop, outermost first.
  std::vector<int> iterations;

  [[nodiscard]] bool empty() const { return domain.is_false(); }
};

dd::Bdd cpre(const GameView &g, const dd::Bdd &z);

Controller solve_safety(const GameView &g, const dd::Bdd &safe);
Controller solve_reach(const GameView &g, const dd::Bdd &target);
Controller solve_persistence(const GameView &g, const dd::Bdd &safe);
Controller solve_recurrence(const GameView &g, const dd::Bdd &target);
/// Visits every target infinitely often while staying in `safe`. Mode i drives
/// to targets[i]; from its goal states control passes to mode i + 1 (cyclic).
Controller solve_gen_buchi(const GameView &g, const std::vector<dd::Bdd> &targets,
                           const dd::Bdd &safe);

/// Writes `<stem>.bdd` (relation), `<stem>.json` (sidecar) and one relation and
/// goal file per mode. `meta` describes the model's variables.
void save_controller(const Controller &c, const dd::MetaBlock &meta,
                     const std::filesystem::path &dir, const std::string &stem = "controller");
/// Loads into the manager that holds the model.
Controller load_controller(dd::DdManager &mgr, const std::filesystem::path &dir,
                           const std::string &stem = "controller");

} // namespace ncsynth
