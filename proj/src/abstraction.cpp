#include "ncsynth/abstraction.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "ncsynth/errors.hpp"

namespace ncsynth {

namespace {

constexpr int kSubsteps = 5;
constexpr double kEdgeTol = 1e-9;

// Balanced OR of many small terms: slot i holds the OR of 2^i terms.
class Disjunction {
public:
  void add(dd::Bdd f) {
    for (std::size_t i = 0;; ++i) {
      if (i == slots_.size()) {
        slots_.push_back(std::move(f));
        return;
      }
      if (!slots_[i].valid()) {
        slots_[i] = std::move(f);
        return;
      }
      f = f | slots_[i];
      slots_[i] = dd::Bdd();
    }
  }

  dd::Bdd result(dd::DdManager &mgr) const {
    auto acc = mgr.bdd_false();
    for (const auto &s : slots_)
      if (s.valid())
        acc |= s;
    return acc;
  }

private:
  std::vector<dd::Bdd> slots_;
};

double param(const nlohmann::json &p, const char *key, double fallback) {
  if (!p.is_object() || !p.contains(key))
    return fallback;
  if (!p.at(key).is_number())
    throw ConfigError(std::string("plant parameter '") + key + "' must be a number");
  return p.at(key).get<double>();
}

PlantSpec integrator(std::size_t dim) {
  PlantSpec s;
  s.n = s.m = dim;
  s.rhs = [](auto, auto u, auto dx) { std::copy(u.begin(), u.end(), dx.begin()); };
  s.flow = [](auto x, auto u, double t, auto out) {
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = x[i] + u[i] * t;
  };
  s.exact = true;
  return s;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

} // namespace

PlantSpec make_plant(const std::string &name, const nlohmann::json &params, double tau) {
  if (!(tau > 0) || !std::isfinite(tau))
    throw ConfigError("plant: tau must be positive");
  PlantSpec s;
  if (name == "robot") {
    double dim = param(params, "dim", 2);
    if (dim < 1 || dim != std::floor(dim))
      throw ConfigError("robot: dim must be a positive integer");
    s = integrator(static_cast<std::size_t>(dim));
  } else if (name == "integrator1d") {
    double c = param(params, "c", 0.0);
    s.n = s.m = 1;
    s.rhs = [c](auto, auto, auto dx) { dx[0] = c; };
    s.flow = [c](auto x, auto, double t, auto out) { out[0] = x[0] + c * t; };
    s.exact = true;
  } else if (name == "di") {
    s.n = 2;
    s.m = 1;
    s.rhs = [](auto x, auto u, auto dx) {
      dx[0] = x[1];
      dx[1] = u[0];
    };
    s.flow = [](auto x, auto u, double t, auto out) {
      out[0] = x[0] + x[1] * t + u[0] * t * t / 2;
      out[1] = x[1] + u[0] * t;
    };
    s.growth = [](auto) { return mat2(0, 1, 0, 0); };
  } else if (name == "jet") {
    s.n = 2;
    s.m = 1;
    s.rhs = [](auto x, auto u, auto dx) {
      dx[0] = -x[1] - 1.5 * x[0] * x[0] - 0.5 * x[0] * x[0] * x[0];
      dx[1] = x[0] - u[0];
    };
    // sup of -3x - 1.5x^2 is 1.5
    s.growth = [](auto) { return mat2(1.5, 1, 1, 0); };
  } else if (name == "dcdc") {
    double xc = param(params, "xc", 70), xl = param(params, "xl", 3);
    double rc = param(params, "rc", 0.005), rl = param(params, "rl", 0.05);
    double ro = param(params, "ro", 1), vs = param(params, "vs", 1);
    Eigen::Matrix2d a1, a2;
    a1 << -rl / xl, 0, 0, -1 / (xc * (ro + rc));
    // second state is the output voltage scaled by 5
    a2 << -(rl + ro * rc / (ro + rc)) / xl, -(ro / (ro + rc)) / xl / 5, 5 * (ro / (ro + rc)) / xc,
        -1 / (xc * (ro + rc));
    Eigen::Vector2d b(vs / xl, 0);
    s.n = 2;
    s.m = 1;
    // input 1 selects the first switching mode, anything else the second
    s.rhs = [a1, a2, b](auto x, auto u, auto dx) {
      const Eigen::Matrix2d &a = std::abs(u[0] - 1) < 0.5 ? a1 : a2;
      Eigen::Vector2d d = a * Eigen::Vector2d(x[0], x[1]) + b;
      dx[0] = d[0];
      dx[1] = d[1];
    };
    s.growth = [a1, a2](auto u) {
      Eigen::MatrixXd l = std::abs(u[0] - 1) < 0.5 ? a1 : a2;
      l(0, 1) = std::abs(l(0, 1));
      l(1, 0) = std::abs(l(1, 0));
      return l;
    };
  } else if (name == "vehicle") {
    s.n = 3;
    s.m = 2;
    s.rhs = [](auto x, auto u, auto dx) {
      double alpha = std::atan(std::tan(u[1]) / 2);
      dx[0] = u[0] * std::cos(alpha + x[2]) / std::cos(alpha);
      dx[1] = u[0] * std::sin(alpha + x[2]) / std::cos(alpha);
      dx[2] = u[0] * std::tan(u[1]);
    };
    s.growth = [](auto u) {
      double c = std::abs(u[0]) * std::sqrt(std::tan(u[1]) * std::tan(u[1]) / 4 + 1);
      Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3, 3);
      l(0, 2) = c;
      l(1, 2) = c;
      return l;
    };
  } else if (name == "pendulum") {
    double g = param(params, "g", 9.81), len = param(params, "l", 1.0), damp = param(params, "b", 0.5);
    s.n = 2;
    s.m = 1;
    s.rhs = [g, len, damp](auto x, auto u, auto dx) {
      dx[0] = x[1];
      dx[1] = g / len * std::sin(x[0]) - damp * x[1] + u[0];
    };
    s.growth = [g, len, damp](auto) { return mat2(0, 1, g / len, -damp); };
  } else {
    throw ConfigError("unknown plant '" + name + "'");
  }
  s.name = name;
  s.tau = tau;
  return s;
}

Vec integrate(const PlantSpec &spec, std::span<const double> x, std::span<const double> u) {
  if (x.size() != spec.n || u.size() != spec.m)
    throw UsageError("integrate: dimension mismatch");
  Vec out(spec.n);
  if (spec.flow) {
    spec.flow(x, u, spec.tau, out);
    return out;
  }
  const std::size_t n = spec.n;
  const double h = spec.tau / kSubsteps;
  Vec y(x.begin(), x.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int s = 0; s < kSubsteps; ++s) {
    spec.rhs(y, u, k1);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h / 2 * k1[i];
    spec.rhs(tmp, u, k2);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h / 2 * k2[i];
    spec.rhs(tmp, u, k3);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * k3[i];
    spec.rhs(tmp, u, k4);
    for (std::size_t i = 0; i < n; ++i)
      y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return y;
}

Vec growth_radius(const PlantSpec &spec, std::span<const double> r, std::span<const double> u) {
  if (r.size() != spec.n)
    throw UsageError("growth_radius: dimension mismatch");
  if (spec.exact || !spec.growth)
    return Vec(r.begin(), r.end());
  Eigen::MatrixXd l = spec.growth(u);
  if (l.rows() != Eigen::Index(spec.n) || l.cols() != Eigen::Index(spec.n))
    throw UsageError("growth_radius: growth matrix has wrong shape");
  Eigen::MatrixXd e = (l * spec.tau).exp();
  Eigen::VectorXd rv = Eigen::Map<const Eigen::VectorXd>(r.data(), Eigen::Index(r.size()));
  Eigen::VectorXd out = e * rv;
  return Vec(out.data(), out.data() + out.size());
}

TransitionSystem TransitionSystem::empty(const UniformGrid &states, const UniformGrid &inputs,
                                         double tau) {
  TransitionSystem ts;
  ts.mgr = std::make_shared<dd::DdManager>(0);
  ts.tau = tau;
  auto &mgr = *ts.mgr;
  std::vector<std::vector<dd::Var>> in_ids(inputs.dim()), pre_ids(states.dim()),
      post_ids(states.dim());
  for (std::size_t d = 0; d < inputs.dim(); ++d)
    for (unsigned b = 0; b < inputs.bits(d); ++b)
      in_ids[d].push_back(mgr.add_vars(1));
  for (std::size_t d = 0; d < states.dim(); ++d)
    for (unsigned b = 0; b < states.bits(d); ++b) {
      pre_ids[d].push_back(mgr.add_vars(1));
      post_ids[d].push_back(mgr.add_vars(1));
    }
  ts.input = SymbolicSet(mgr, inputs, std::move(in_ids));
  ts.pre = SymbolicSet(mgr, states, std::move(pre_ids));
  ts.post = SymbolicSet(mgr, states, std::move(post_ids));
  ts.input.set_chi(ts.input.domain());
  ts.pre.set_chi(ts.pre.domain());
  ts.post.set_chi(ts.post.domain());
  ts.trans = mgr.bdd_false();
  ts.initial = ts.pre.chi();
  return ts;
}

std::vector<dd::Var> TransitionSystem::all_vars() const {
  auto v = pre_vars();
  auto i = input_vars();
  auto p = post_vars();
  v.insert(v.end(), i.begin(), i.end());
  v.insert(v.end(), p.begin(), p.end());
  return v;
}

dd::Bdd TransitionSystem::transition(Index x, Index u, Index x_post) const {
  const auto &sg = pre.grid();
  return pre.cell(sg.unflatten(x)) & input.cell(input.grid().unflatten(u)) &
         post.cell(sg.unflatten(x_post));
}

dd::Bdd TransitionSystem::post_to_pre(const dd::Bdd &f) const {
  std::vector<std::pair<dd::Var, dd::Var>> map;
  auto from = post_vars(), to = pre_vars();
  for (std::size_t i = 0; i < from.size(); ++i)
    map.emplace_back(from[i], to[i]);
  return mgr->rename(f, map);
}

dd::Bdd TransitionSystem::pre_to_post(const dd::Bdd &f) const {
  std::vector<std::pair<dd::Var, dd::Var>> map;
  auto from = pre_vars(), to = post_vars();
  for (std::size_t i = 0; i < from.size(); ++i)
    map.emplace_back(from[i], to[i]);
  return mgr->rename(f, map);
}

dd::Count TransitionSystem::size() const { return mgr->sat_count(trans, all_vars()); }

bool TransitionSystem::deterministic() const {
  auto pv = pre_vars(), iv = input_vars();
  pv.insert(pv.end(), iv.begin(), iv.end());
  auto pairs = mgr->exists(trans, post_vars());
  return mgr->sat_count(pairs, pv) == size();
}

namespace {

dd::VarBlock block_of(const SymbolicSet &s, std::string name, std::string role,
                      std::string kind) {
  dd::VarBlock b;
  b.name = std::move(name);
  b.role = std::move(role);
  b.register_kind = std::move(kind);
  b.lb = s.grid().lb();
  b.ub = s.grid().ub();
  b.eta = s.grid().eta();
  b.vars = s.var_ids();
  return b;
}

SymbolicSet set_of(dd::DdManager &mgr, const dd::VarBlock &b) {
  SymbolicSet s(mgr, UniformGrid(b.lb, b.ub, b.eta), b.vars);
  s.set_chi(s.domain());
  return s;
}

} // namespace

dd::MetaBlock TransitionSystem::meta() const {
  dd::MetaBlock m;
  m.tau = tau;
  m.blocks.push_back(block_of(pre, "pre", "pre", "state"));
  m.blocks.push_back(block_of(input, "input", "input", "input"));
  m.blocks.push_back(block_of(post, "post", "post", "state"));
  m.extra = {{"model", "plant"}, {"plant", plant_name}};
  return m;
}

void TransitionSystem::save(const std::filesystem::path &trans_path,
                            const std::filesystem::path &init_path) const {
  auto m = meta();
  dd::save(trans, m, trans_path);
  m.extra["set"] = "initial";
  dd::save(initial, m, init_path);
}

TransitionSystem TransitionSystem::load(const std::filesystem::path &trans_path,
                                        const std::optional<std::filesystem::path> &init_path) {
  TransitionSystem ts;
  ts.mgr = std::make_shared<dd::DdManager>(0);
  auto [trans, meta] = dd::load(*ts.mgr, trans_path);
  if (meta.extra.value("model", "") != "plant")
    throw FormatError(trans_path.string() + " is not a plant model");
  const auto *pre = meta.find("pre");
  const auto *in = meta.find("input");
  const auto *post = meta.find("post");
  if (!pre || !in || !post)
    throw FormatError(trans_path.string() + ": missing pre/input/post blocks");
  ts.pre = set_of(*ts.mgr, *pre);
  ts.input = set_of(*ts.mgr, *in);
  ts.post = set_of(*ts.mgr, *post);
  ts.trans = trans;
  ts.tau = meta.tau;
  ts.plant_name = meta.extra.value("plant", "");
  ts.initial = ts.pre.chi();
  if (init_path) {
    auto [init, init_meta] = dd::load(*ts.mgr, *init_path);
    if (init_meta.blocks != meta.blocks)
      throw FormatError(init_path->string() + ": layout differs from the transition file");
    ts.initial = init;
  }
  return ts;
}

TransitionSystem from_explicit(const UniformGrid &states, const UniformGrid &inputs,
                               std::span<const ExplicitTransition> transitions, double tau) {
  auto ts = TransitionSystem::empty(states, inputs, tau);
  Disjunction acc;
  for (const auto &t : transitions) {
    if (t.x >= states.total_points() || t.x_post >= states.total_points() ||
        t.u >= inputs.total_points())
      throw UsageError("from_explicit: index out of range");
    acc.add(ts.transition(t.x, t.u, t.x_post));
  }
  ts.trans = acc.result(*ts.mgr);
  return ts;
}

std::vector<ExplicitTransition> to_explicit(const TransitionSystem &ts) {
  std::vector<ExplicitTransition> out;
  auto vars = ts.all_vars();
  std::vector<bool> by_var(ts.mgr->var_count());
  ts.mgr->for_each_sat(ts.trans, vars, [&](std::span<const bool> vals) {
    for (std::size_t i = 0; i < vars.size(); ++i)
      by_var[vars[i]] = vals[i];
    std::unique_ptr<bool[]> buf(new bool[by_var.size()]);
    std::copy(by_var.begin(), by_var.end(), buf.get());
    std::span<const bool> s(buf.get(), by_var.size());
    out.push_back({ts.pre.grid().flatten(ts.pre.indices(s)),
                   ts.input.grid().flatten(ts.input.indices(s)),
                   ts.post.grid().flatten(ts.post.indices(s))});
  });
  std::sort(out.begin(), out.end());
  return out;
}

TransitionSystem build_abstraction(const PlantSpec &spec, const UniformGrid &states,
                                   const UniformGrid &inputs) {
  if (states.dim() != spec.n || inputs.dim() != spec.m)
    throw UsageError("build_abstraction: grid dimensions do not match the plant");
  auto ts = TransitionSystem::empty(states, inputs, spec.tau);
  ts.plant_name = spec.name;
  auto &mgr = *ts.mgr;

  Vec r(spec.n);
  for (std::size_t d = 0; d < spec.n; ++d)
    r[d] = states.eta()[d] / 2;

  Disjunction all;
  IndexVec lo(spec.n), hi(spec.n);
  for (Index fu = 0; fu < inputs.total_points(); ++fu) {
    auto uidx = inputs.unflatten(fu);
    Vec u = inputs.center(uidx);
    Vec rp = growth_radius(spec, r, u);
    Disjunction per_input;
    for (Index fx = 0; fx < states.total_points(); ++fx) {
      auto xidx = states.unflatten(fx);
      Vec xc = states.center(xidx);
      Vec xp = integrate(spec, xc, u);
      bool inside = true;
      for (std::size_t d = 0; d < spec.n && inside; ++d) {
        if (!std::isfinite(xp[d]) || !std::isfinite(rp[d])) {
          std::ostringstream msg;
          msg << "non-finite successor at cell " << fx << " under input " << fu;
          throw AbstractionError(msg.str());
        }
        double eta = states.eta()[d], lb = states.lb()[d];
        double jl = std::floor((xp[d] - rp[d] - lb) / eta - 0.5 + kEdgeTol) + 1;
        double jh = std::ceil((xp[d] + rp[d] - lb) / eta + 0.5 - kEdgeTol) - 1;
        if (jl < 0 || jh > double(states.points(d) - 1)) {
          inside = false;
          break;
        }
        lo[d] = static_cast<Index>(jl);
        hi[d] = static_cast<Index>(jh);
      }
      if (!inside)
        continue;
      per_input.add(ts.pre.cell(xidx) & ts.post.cell_range(lo, hi));
    }
    all.add(per_input.result(mgr) & ts.input.cell(uidx));
  }
  ts.trans = all.result(mgr);
  return ts;
}

void remove_region(TransitionSystem &ts, const SymbolicSet &region) {
  if (region.manager().var_count() != ts.mgr->var_count() || &region.manager() != ts.mgr.get())
    throw UsageError("remove_region: region belongs to another manager");
  if (region.var_ids() != ts.pre.var_ids())
    throw UsageError("remove_region: region must be over the pre-state variables");
  auto r = region.chi();
  ts.trans = ts.trans & !r & !ts.pre_to_post(r);
  ts.initial = ts.initial & !r;
}

} // namespace ncsynth
