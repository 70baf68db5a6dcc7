#include "ncsynth/synthesis.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ncsynth/bdd_io.hpp"
#include "ncsynth/errors.hpp"

namespace ncsynth {

namespace {

struct ReachResult {
  dd::Bdd controller; // first-entry pairs
  dd::Bdd win;        // winning states
  int iterations = 0;
};

// Least fixed point Z = target ∪ (filter ∩ pre(Z)), keeping for each state
// the pairs of the iteration in which it first became winning.
ReachResult reach_core(const GameView &g, const dd::Bdd &target_pairs, const dd::Bdd &filter) {
  ReachResult r;
  dd::Bdd z = target_pairs;
  r.controller = target_pairs;
  r.win = g.states_of(z);
  r.iterations = 1;
  for (;;) {
    z = target_pairs | (filter & cpre(g, z));
    auto states = g.states_of(z);
    ++r.iterations;
    if (states == r.win)
      return r;
    r.controller |= z & states & !r.win;
    r.win = states;
  }
}

} // namespace

GameView GameView::of(const NcsModel &m) {
  GameView g;
  g.mgr = m.mgr;
  g.pre = m.pre_vars();
  g.input = m.input_vars();
  g.post = m.post_vars();
  g.trans = m.trans;
  g.state_domain = m.domain();
  g.input_domain = m.input_domain();
  return g;
}

GameView GameView::of(const TransitionSystem &ts) {
  GameView g;
  g.mgr = ts.mgr;
  g.pre = ts.pre_vars();
  g.input = ts.input_vars();
  g.post = ts.post_vars();
  g.trans = ts.trans;
  g.state_domain = ts.pre.domain();
  g.input_domain = ts.input.domain();
  return g;
}

dd::Bdd GameView::states_of(const dd::Bdd &pairs) const { return mgr->exists(pairs, input); }

dd::Bdd GameView::to_post(const dd::Bdd &states) const {
  std::vector<std::pair<dd::Var, dd::Var>> map;
  for (std::size_t i = 0; i < pre.size(); ++i)
    map.emplace_back(pre[i], post[i]);
  return mgr->rename(states, map);
}

dd::Bdd GameView::pairs(const dd::Bdd &states) const { return states & state_domain & input_domain; }

dd::Bdd cpre(const GameView &g, const dd::Bdd &z) {
  auto target = g.to_post(g.states_of(z));
  auto enabled = g.mgr->exists(g.trans, g.post);
  auto escape = g.mgr->and_exists(g.trans, !target, g.post);
  return enabled & !escape;
}

Controller solve_safety(const GameView &g, const dd::Bdd &safe) {
  Controller c;
  c.kind = "safety";
  auto s = g.pairs(safe);
  auto z = s;
  int it = 0;
  for (;;) {
    ++it;
    auto next = s & cpre(g, z);
    if (next == z)
      break;
    z = next;
  }
  c.relation = z;
  c.domain = g.states_of(z);
  c.iterations = {it};
  return c;
}

Controller solve_reach(const GameView &g, const dd::Bdd &target) {
  Controller c;
  c.kind = "reach";
  auto r = reach_core(g, g.pairs(target), g.mgr->bdd_true());
  c.relation = r.controller;
  c.domain = r.win;
  c.iterations = {r.iterations};
  return c;
}

Controller solve_persistence(const GameView &g, const dd::Bdd &safe) {
  Controller c;
  c.kind = "persistence";
  auto s = g.pairs(safe);
  auto all = g.pairs(g.mgr->bdd_true());
  // mu X . nu Y . (S & pre(Y)) | pre(X)
  auto x = g.mgr->bdd_false();
  auto won = g.mgr->bdd_false();
  c.relation = g.mgr->bdd_false();
  int outer = 0, inner_total = 0;
  for (;;) {
    ++outer;
    auto from_x = cpre(g, x);
    auto y = all;
    for (;;) {
      ++inner_total;
      auto next = (s & cpre(g, y)) | from_x;
      if (next == y)
        break;
      y = next;
    }
    auto states = g.states_of(y);
    if (states == won)
      break;
    c.relation |= y & states & !won;
    won = states;
    x = y;
  }
  c.domain = won;
  c.iterations = {outer, inner_total};
  return c;
}

Controller solve_recurrence(const GameView &g, const dd::Bdd &target) {
  Controller c;
  c.kind = "recurrence";
  auto t = g.pairs(target);
  auto truth = g.mgr->bdd_true();
  // nu Y . mu X . (T & pre(Y)) | pre(X)
  auto y = g.state_domain;
  int outer = 0, inner_total = 0;
  ReachResult r;
  for (;;) {
    ++outer;
    auto tp = t & cpre(g, g.pairs(y));
    r = reach_core(g, tp, truth);
    inner_total += r.iterations;
    if (r.win == y)
      break;
    y = r.win;
  }
  c.relation = r.controller;
  c.domain = r.win;
  c.iterations = {outer, inner_total};
  return c;
}

Controller solve_gen_buchi(const GameView &g, const std::vector<dd::Bdd> &targets,
                           const dd::Bdd &safe) {
  if (targets.empty())
    throw UsageError("solve_gen_buchi: at least one target is required");
  Controller c;
  c.kind = "gen_buchi";
  auto s = g.pairs(safe);
  auto y = g.states_of(s);
  int outer = 0, inner_total = 0;
  std::vector<ReachResult> reach(targets.size());
  std::vector<dd::Bdd> goals(targets.size());
  for (;;) {
    ++outer;
    auto into_y = cpre(g, g.pairs(y));
    auto next = y;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      auto tp = g.pairs(targets[i]) & s & into_y;
      goals[i] = g.states_of(tp);
      reach[i] = reach_core(g, tp, s);
      inner_total += reach[i].iterations;
      next &= reach[i].win;
    }
    if (next == y)
      break;
    y = next;
  }
  c.relation = g.mgr->bdd_false();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    c.modes.push_back({reach[i].controller, goals[i], int((i + 1) % targets.size())});
    c.relation |= reach[i].controller & y;
  }
  c.domain = y;
  c.iterations = {outer, inner_total};
  return c;
}

void save_controller(const Controller &c, const dd::MetaBlock &meta,
                     const std::filesystem::path &dir, const std::string &stem) {
  std::filesystem::create_directories(dir);
  auto write = [&](const dd::Bdd &f, const std::string &set, const std::string &file) {
    auto m = meta;
    m.extra["controller"] = c.kind;
    m.extra["set"] = set;
    dd::save(f, m, dir / file);
    return file;
  };
  nlohmann::json side;
  side["kind"] = c.kind;
  side["iterations"] = c.iterations;
  side["relation"] = write(c.relation, "relation", stem + ".bdd");
  side["domain"] = write(c.domain, "domain", stem + ".domain.bdd");
  side["modes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < c.modes.size(); ++i) {
    auto tag = std::to_string(i);
    side["modes"].push_back(
        {{"relation", write(c.modes[i].relation, "relation", stem + ".mode" + tag + ".bdd")},
         {"goal", write(c.modes[i].goal, "goal", stem + ".goal" + tag + ".bdd")},
         {"next", c.modes[i].next}});
  }
  std::ofstream out(dir / (stem + ".json"));
  out << side.dump(2) << "\n";
  if (!out)
    throw std::runtime_error("cannot write controller sidecar in " + dir.string());
}

Controller load_controller(dd::DdManager &mgr, const std::filesystem::path &dir,
                           const std::string &stem) {
  std::ifstream in(dir / (stem + ".json"));
  if (!in)
    throw FormatError("cannot open " + (dir / (stem + ".json")).string());
  Controller c;
  try {
    auto side = nlohmann::json::parse(in);
    auto read = [&](const nlohmann::json &file) {
      return dd::load(mgr, dir / file.get<std::string>()).first;
    };
    c.kind = side.at("kind").get<std::string>();
    c.iterations = side.value("iterations", std::vector<int>{});
    c.relation = read(side.at("relation"));
    c.domain = read(side.at("domain"));
    for (const auto &m : side.at("modes"))
      c.modes.push_back({read(m.at("relation")), read(m.at("goal")), m.at("next").get<int>()});
  } catch (const nlohmann::json::exception &e) {
    throw FormatError("malformed controller sidecar: " + std::string(e.what()));
  }
  for (const auto &m : c.modes)
    if (m.next < 0 || std::size_t(m.next) >= c.modes.size())
      throw FormatError("controller sidecar: mode successor out of range");
  return c;
}

} // namespace ncsynth
