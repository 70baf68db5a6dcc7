#include <filesystem>
#include <random>

#include "doctest.h"
#include "ncsynth/abstraction.hpp"
#include "ncsynth/errors.hpp"

using namespace ncsynth;

namespace {

UniformGrid robot_states() { return UniformGrid({0, 0}, {64, 64}, {1, 1}); }
UniformGrid robot_inputs() { return UniformGrid({-1, -1}, {1, 1}, {1, 1}); }

} // namespace

TEST_CASE("integrate: closed forms and RK4") {
  auto robot = make_plant("robot", {}, 1.0);
  CHECK(integrate(robot, Vec{10, 10}, Vec{1, 0}) == Vec{11, 10});
  CHECK(integrate(robot, Vec{10, 10}, Vec{0, 0}) == Vec{10, 10});

  auto di = make_plant("di", {}, 0.5);
  auto x = integrate(di, Vec{0, 0}, Vec{1});
  CHECK(x[0] == doctest::Approx(0.125));
  CHECK(x[1] == doctest::Approx(0.5));

  // RK4 is exact for polynomial solutions of degree <= 4
  di.flow = nullptr;
  auto y = integrate(di, Vec{0.3, -1.2}, Vec{0.7});
  CHECK(y[0] == doctest::Approx(0.3 - 1.2 * 0.5 + 0.7 * 0.125).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(-1.2 + 0.35).epsilon(1e-12));

  // pendulum: RK4 vs a much finer explicit Euler reference
  auto pend = make_plant("pendulum", {}, 0.1);
  auto p = integrate(pend, Vec{0.4, 0.2}, Vec{0.3});
  Vec ref{0.4, 0.2};
  const int steps = 200000;
  for (int i = 0; i < steps; ++i) {
    double dt = 0.1 / steps;
    double d0 = ref[1], d1 = 9.81 * std::sin(ref[0]) - 0.5 * ref[1] + 0.3;
    ref[0] += dt * d0;
    ref[1] += dt * d1;
  }
  CHECK(p[0] == doctest::Approx(ref[0]).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(ref[1]).epsilon(1e-4));

  CHECK_THROWS_AS(make_plant("nope", {}, 1.0), ConfigError);
  CHECK_THROWS_AS(make_plant("robot", {}, 0.0), ConfigError);
}

TEST_CASE("growth radius") {
  auto di = make_plant("di", {}, 0.5);
  auto r = growth_radius(di, Vec{0.5, 0.5}, Vec{0});
  CHECK(r[0] == doctest::Approx(0.75));
  CHECK(r[1] == doctest::Approx(0.5));
  auto robot = make_plant("robot", {}, 1.0);
  CHECK(growth_radius(robot, Vec{0.5, 0.5}, Vec{1, 1}) == Vec{0.5, 0.5});
  auto still = make_plant("di", {}, 0.5);
  still.growth = [](auto) { return Eigen::MatrixXd::Zero(2, 2).eval(); };
  CHECK(growth_radius(still, Vec{0.5, 0.25}, Vec{0}) == Vec{0.5, 0.25});
}

TEST_CASE("1-D plants") {
  UniformGrid states({0}, {3}, {1}), inputs({0}, {0}, {1});
  auto still = build_abstraction(make_plant("integrator1d", {{"c", 0.0}}, 1.0), states, inputs);
  CHECK(still.size() == 4);
  auto ex = to_explicit(still);
  for (Index i = 0; i < 4; ++i)
    CHECK(ex[i] == ExplicitTransition{i, 0, i});

  auto shift = build_abstraction(make_plant("integrator1d", {{"c", 1.0}}, 1.0), states, inputs);
  CHECK(shift.size() == 3);
  CHECK(shift.deterministic());
  ex = to_explicit(shift);
  for (Index i = 0; i < 3; ++i)
    CHECK(ex[i] == ExplicitTransition{i, 0, i + 1});
}

TEST_CASE("robot abstraction matches the explicit shift relation") {
  auto ts = build_abstraction(make_plant("robot", {}, 1.0), robot_states(), robot_inputs());
  CHECK(ts.deterministic());
  std::vector<ExplicitTransition> expected;
  auto sg = robot_states(), ig = robot_inputs();
  for (Index fx = 0; fx < sg.total_points(); ++fx)
    for (Index fu = 0; fu < ig.total_points(); ++fu) {
      auto xi = sg.unflatten(fx);
      auto ui = ig.unflatten(fu);
      long a = long(xi[0]) + long(ui[0]) - 1, b = long(xi[1]) + long(ui[1]) - 1;
      if (a < 0 || b < 0 || a > 64 || b > 64)
        continue;
      IndexVec post{Index(a), Index(b)};
      expected.push_back({fx, fu, sg.flatten(post)});
    }
  std::sort(expected.begin(), expected.end());
  CHECK(ts.size() == expected.size());
  CHECK(to_explicit(ts) == expected);
  // cell 0 with input -1 in the first dimension is blocked
  IndexVec u_neg{0, 1};
  auto from0 = ts.pre.cell(IndexVec{0, 0}) & ts.input.cell(u_neg) & ts.trans;
  CHECK(from0.is_false());
}

TEST_CASE("over-approximation is sound for sampled trajectories") {
  std::mt19937_64 rng(11);
  for (const char *name : {"di", "jet", "pendulum"}) {
    CAPTURE(name);
    auto spec = make_plant(name, {}, 0.2);
    UniformGrid states({-1, -1}, {1, 1}, {0.2, 0.2}), inputs({-1}, {1}, {0.5});
    auto ts = build_abstraction(spec, states, inputs);
    std::uniform_real_distribution<double> off(-0.1, 0.1);
    std::uniform_int_distribution<Index> cell(0, states.total_points() - 1);
    std::uniform_int_distribution<Index> inp(0, inputs.total_points() - 1);
    int checked = 0;
    for (int trial = 0; trial < 2000; ++trial) {
      Index fx = cell(rng), fu = inp(rng);
      auto xi = states.unflatten(fx);
      auto xc = states.center(xi);
      Vec x{xc[0] + off(rng), xc[1] + off(rng)};
      auto u = inputs.center(inputs.unflatten(fu));
      auto posts = ts.trans & ts.pre.cell(xi) & ts.input.cell(inputs.unflatten(fu));
      if (posts.is_false())
        continue; // blocked pair
      auto xp = integrate(spec, x, u);
      auto pi = point_to_symbol(states, xp);
      CHECK_FALSE((posts & ts.post.cell(pi)).is_false());
      ++checked;
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("remove_region") {
  auto ts = build_abstraction(make_plant("robot", {}, 1.0), UniformGrid({0, 0}, {7, 7}, {1, 1}),
                              robot_inputs());
  auto before = ts.trans;
  SymbolicSet none = ts.pre;
  none.set_chi(ts.mgr->bdd_false());
  remove_region(ts, none);
  CHECK(ts.trans == before);

  SymbolicSet box = ts.pre;
  box.set_chi(ts.mgr->bdd_false());
  std::vector<double> lo{2, 2}, hi{3, 4};
  box = add_box(box, lo, hi);
  remove_region(ts, box);
  CHECK((ts.trans & box.chi()).is_false());
  CHECK((ts.trans & ts.pre_to_post(box.chi())).is_false());
  // only the touching transitions disappear
  dd::Count touching = 0;
  for (const auto &t : to_explicit(TransitionSystem{ts.mgr, ts.pre, ts.input, ts.post, before,
                                                    ts.initial, 1.0, ""})) {
    auto in = [&](Index f) { return box.contains(ts.pre.grid().unflatten(f)); };
    touching += in(t.x) || in(t.x_post);
  }
  CHECK(ts.size() + touching == ts.mgr->sat_count(before, ts.all_vars()));

  SymbolicSet all = ts.pre;
  all.set_chi(ts.pre.domain());
  remove_region(ts, all);
  CHECK(ts.trans.is_false());
}

TEST_CASE("save and load a plant model") {
  auto ts = build_abstraction(make_plant("di", {}, 0.5), UniformGrid({-1, -1}, {1, 1}, {0.25, 0.25}),
                              UniformGrid({-1}, {1}, {1}));
  auto dir = std::filesystem::temp_directory_path() / "ncsynth_test_abs";
  std::filesystem::create_directories(dir);
  ts.save(dir / "p.bdd", dir / "p.init.bdd");
  auto back = TransitionSystem::load(dir / "p.bdd", dir / "p.init.bdd");
  CHECK(back.tau == 0.5);
  CHECK(back.plant_name == "di");
  CHECK(back.pre.grid() == ts.pre.grid());
  CHECK(back.size() == ts.size());
  CHECK(to_explicit(back) == to_explicit(ts));
  CHECK(back.mgr->sat_count(back.initial, back.pre_vars()) == 81);
  std::filesystem::remove_all(dir);
}
