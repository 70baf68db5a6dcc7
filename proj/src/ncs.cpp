#include "ncsynth/ncs.hpp"

#include <iostream>

#include "ncsynth/errors.hpp"

namespace ncsynth {

namespace {

constexpr std::size_t kVarBudget = 1u << 16;

dd::Bdd equal_vars(dd::DdManager &mgr, const std::vector<dd::Var> &a, const std::vector<dd::Var> &b) {
  return bits_equal(mgr, a, b);
}

std::vector<dd::Var> flatten(const std::vector<std::vector<dd::Var>> &ids) {
  std::vector<dd::Var> out;
  for (const auto &d : ids)
    out.insert(out.end(), d.begin(), d.end());
  return out;
}

Register make_register(std::string kind, int index, const UniformGrid &grid) {
  Register r;
  r.kind = std::move(kind);
  r.index = index;
  r.grid = grid;
  r.pre.resize(grid.dim());
  if (r.kind != "control")
    r.post.resize(grid.dim());
  return r;
}

NcsModel layout(const UniformGrid &states, const UniformGrid &inputs, const DelayBounds &b) {
  std::size_t need = 0;
  need += std::size_t(2) * b.nsc_max * (states.total_bits() + 1);
  need += (std::size_t(2) * b.nca_max + 1) * inputs.total_bits();
  need += std::size_t(2) * (b.nsc_max + b.nca_max) * 32;
  if (need > kVarBudget)
    throw UsageError("expand: the expanded model needs too many BDD variables");

  NcsModel m;
  m.mgr = std::make_shared<dd::DdManager>(0);
  m.bounds = b;
  m.state_grid = states;
  m.input_grid = inputs;
  auto &mgr = *m.mgr;

  for (std::size_t d = 0; d < states.dim(); ++d)
    if (states.points(d) < (Index{1} << states.bits(d))) {
      m.q_code = std::pair{d, states.points(d)};
      break;
    }

  UniformGrid gsc({double(b.nsc_min)}, {double(b.nsc_max)}, {1.0});
  UniformGrid gca({double(b.nca_min)}, {double(b.nca_max)}, {1.0});
  for (unsigned i = 1; i <= b.nsc_max; ++i) {
    m.x.push_back(make_register("state", int(i), states));
    m.nsc.push_back(make_register("nsc", int(i), gsc));
  }
  for (unsigned i = 1; i <= b.nca_max; ++i) {
    m.u.push_back(make_register("input", int(i), inputs));
    m.nca.push_back(make_register("nca", int(i), gca));
  }
  m.control = make_register("control", 0, inputs);

  auto fresh = [&] { return mgr.add_vars(1); };
  // delay chains on top, then inputs, then states; each register's pre and
  // post bit adjacent
  for (auto *chain : {&m.nsc, &m.nca}) {
    const auto &g = chain->front().grid;
    for (unsigned bit = 0; bit < g.bits(0); ++bit)
      for (auto &r : *chain) {
        r.pre[0].push_back(fresh());
        r.post[0].push_back(fresh());
      }
  }
  for (std::size_t d = 0; d < inputs.dim(); ++d)
    for (unsigned bit = 0; bit < inputs.bits(d); ++bit) {
      m.control.pre[d].push_back(fresh());
      for (auto &r : m.u) {
        r.pre[d].push_back(fresh());
        r.post[d].push_back(fresh());
      }
    }
  for (std::size_t d = 0; d < states.dim(); ++d)
    for (unsigned bit = 0; bit < states.bits(d); ++bit)
      for (auto &r : m.x) {
        r.pre[d].push_back(fresh());
        r.post[d].push_back(fresh());
      }
  if (!m.q_code)
    for (auto &r : m.x) {
      r.flag_pre = fresh();
      r.flag_post = fresh();
    }
  return m;
}

/// Step condition under which buffered input u_i is the one applied.
dd::Bdd applied_input(const NcsModel &m, InputSelector sel, unsigned i) {
  auto &mgr = *m.mgr;
  const unsigned ma = m.bounds.nca_max;
  if (sel == InputSelector::OldestBuffered || m.bounds.prolonged())
    return i == ma ? mgr.bdd_true() : mgr.bdd_false();
  auto arrived = [&](unsigned j) {
    if (j < m.bounds.nca_min)
      return mgr.bdd_false();
    return uint_range(mgr, m.nca[j - 1].pre[0], 0, j - m.bounds.nca_min);
  };
  auto c = arrived(i);
  for (unsigned j = 1; j < i; ++j)
    c &= !arrived(j);
  return c;
}

std::vector<dd::Var> base_map(const TransitionSystem &base, const Register &state_reg,
                              bool with_post) {
  std::vector<dd::Var> map(base.mgr->var_count(), dd::kTerminalVar);
  for (std::size_t d = 0; d < base.pre.grid().dim(); ++d)
    for (std::size_t b = 0; b < base.pre.var_ids()[d].size(); ++b) {
      map[base.pre.var_ids()[d][b]] = state_reg.pre[d][b];
      if (with_post)
        map[base.post.var_ids()[d][b]] = state_reg.post[d][b];
    }
  return map;
}

} // namespace

void DelayBounds::validate() const {
  if (nsc_min < 1 || nca_min < 1 || nsc_min > nsc_max || nca_min > nca_max)
    throw UsageError("delay bounds must satisfy 1 <= min <= max on both channels");
}

std::string to_string(InputSelector s) {
  return s == InputSelector::OldestBuffered ? "oldest_buffered" : "newest_arrived";
}

InputSelector selector_from_string(const std::string &s) {
  if (s == "oldest_buffered")
    return InputSelector::OldestBuffered;
  if (s == "newest_arrived")
    return InputSelector::NewestArrived;
  throw UsageError("unknown input selector '" + s + "'");
}

std::string Register::name() const {
  if (kind == "state")
    return "x" + std::to_string(index);
  if (kind == "input")
    return "u" + std::to_string(index);
  if (kind == "control")
    return "u";
  return kind + std::to_string(index);
}

std::vector<dd::Var> Register::vars(bool post_side) const {
  auto out = flatten(post_side ? post : pre);
  auto flag = post_side ? flag_post : flag_pre;
  if (flag)
    out.push_back(*flag);
  return out;
}

std::vector<dd::Var> NcsModel::pre_vars() const {
  std::vector<dd::Var> out;
  for (const auto *chain : {&x, &u, &nsc, &nca})
    for (const auto &r : *chain) {
      auto v = r.vars(false);
      out.insert(out.end(), v.begin(), v.end());
    }
  return out;
}

std::vector<dd::Var> NcsModel::post_vars() const {
  std::vector<dd::Var> out;
  for (const auto *chain : {&x, &u, &nsc, &nca})
    for (const auto &r : *chain) {
      auto v = r.vars(true);
      out.insert(out.end(), v.begin(), v.end());
    }
  return out;
}

dd::Bdd NcsModel::state_valid(const Register &r, bool post_side) const {
  auto &ids = post_side ? r.post : r.pre;
  auto flag = post_side ? r.flag_post : r.flag_pre;
  auto c = flag ? mgr->nvar(*flag) : mgr->bdd_true();
  for (std::size_t d = 0; d < r.grid.dim(); ++d)
    c &= uint_range(*mgr, ids[d], 0, r.grid.points(d) - 1);
  return c;
}

dd::Bdd NcsModel::is_q(const Register &r, bool post_side) const {
  auto &ids = post_side ? r.post : r.pre;
  auto flag = post_side ? r.flag_post : r.flag_pre;
  auto c = flag ? mgr->var(*flag) : mgr->bdd_true();
  for (std::size_t d = 0; d < r.grid.dim(); ++d) {
    Index v = (q_code && q_code->first == d) ? q_code->second : 0;
    c &= uint_equals(*mgr, ids[d], v);
  }
  return c;
}

dd::Bdd NcsModel::code_valid(const Register &r, bool post_side) const {
  if (r.kind == "state")
    return state_valid(r, post_side) | is_q(r, post_side);
  auto &ids = post_side ? r.post : r.pre;
  auto c = mgr->bdd_true();
  for (std::size_t d = 0; d < r.grid.dim(); ++d)
    c &= uint_range(*mgr, ids[d], 0, r.grid.points(d) - 1);
  return c;
}

dd::Bdd NcsModel::domain() const {
  auto c = mgr->bdd_true();
  for (const auto *chain : {&nca, &nsc, &u, &x})
    for (const auto &r : *chain)
      c &= code_valid(r, false);
  return c;
}

dd::Bdd NcsModel::input_domain() const { return code_valid(control, false); }

dd::Bdd NcsModel::post_to_pre(const dd::Bdd &f) const {
  auto from = post_vars(), to = pre_vars();
  std::vector<std::pair<dd::Var, dd::Var>> map;
  for (std::size_t i = 0; i < from.size(); ++i)
    map.emplace_back(from[i], to[i]);
  return mgr->rename(f, map);
}

dd::Bdd NcsModel::pre_to_post(const dd::Bdd &f) const {
  auto from = pre_vars(), to = post_vars();
  std::vector<std::pair<dd::Var, dd::Var>> map;
  for (std::size_t i = 0; i < from.size(); ++i)
    map.emplace_back(from[i], to[i]);
  return mgr->rename(f, map);
}

dd::Bdd NcsModel::image(const dd::Bdd &states) const {
  auto q = pre_vars();
  auto in = input_vars();
  q.insert(q.end(), in.begin(), in.end());
  return post_to_pre(mgr->and_exists(trans, states, q));
}

dd::Bdd NcsModel::state_cube(const NcsState &s, bool post_side) const {
  if (s.x.size() != x.size() || s.u.size() != u.size() || s.nsc.size() != nsc.size() ||
      s.nca.size() != nca.size())
    throw UsageError("state_cube: register count mismatch");
  auto c = mgr->bdd_true();
  auto cell_of = [&](const Register &r, Index flat) {
    if (flat >= r.grid.total_points())
      throw UsageError("state_cube: index out of range in " + r.name());
    auto idx = r.grid.unflatten(flat);
    auto &ids = post_side ? r.post : r.pre;
    auto cc = mgr->bdd_true();
    for (std::size_t d = 0; d < r.grid.dim(); ++d)
      cc &= uint_equals(*mgr, ids[d], idx[d]);
    return cc;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (s.x[i] < 0) {
      c &= is_q(x[i], post_side);
    } else {
      c &= cell_of(x[i], Index(s.x[i]));
      auto flag = post_side ? x[i].flag_post : x[i].flag_pre;
      if (flag)
        c &= mgr->nvar(*flag);
    }
  }
  for (std::size_t i = 0; i < u.size(); ++i)
    c &= cell_of(u[i], s.u[i]);
  auto delay = [&](const Register &r, unsigned v) {
    double lo = r.grid.lb()[0];
    if (v < lo || v > r.grid.ub()[0])
      throw UsageError("state_cube: delay out of range in " + r.name());
    return cell_of(r, Index(v - unsigned(lo)));
  };
  for (std::size_t i = 0; i < nsc.size(); ++i)
    c &= delay(nsc[i], s.nsc[i]);
  for (std::size_t i = 0; i < nca.size(); ++i)
    c &= delay(nca[i], s.nca[i]);
  return c;
}

dd::Bdd NcsModel::input_cube(Index u_flat) const {
  if (u_flat >= input_grid.total_points())
    throw UsageError("input_cube: index out of range");
  auto idx = input_grid.unflatten(u_flat);
  auto c = mgr->bdd_true();
  for (std::size_t d = 0; d < input_grid.dim(); ++d)
    c &= uint_equals(*mgr, control.pre[d], idx[d]);
  return c;
}

namespace {

IndexVec read_indices(const std::vector<std::vector<dd::Var>> &ids, std::span<const bool> vals) {
  IndexVec idx(ids.size(), 0);
  for (std::size_t d = 0; d < ids.size(); ++d)
    for (std::size_t b = 0; b < ids[d].size(); ++b)
      if (vals[ids[d][b]])
        idx[d] |= Index{1} << b;
  return idx;
}

Index checked_flat(const Register &r, const IndexVec &idx) {
  for (std::size_t d = 0; d < idx.size(); ++d)
    if (idx[d] >= r.grid.points(d))
      throw UsageError("decode: out-of-range code in register " + r.name());
  return r.grid.flatten(idx);
}

} // namespace

NcsState NcsModel::decode_state(std::span<const bool> vals, bool post_side) const {
  NcsState s;
  for (const auto &r : x) {
    auto flag = post_side ? r.flag_post : r.flag_pre;
    auto idx = read_indices(post_side ? r.post : r.pre, vals);
    if (flag && vals[*flag]) {
      s.x.push_back(-1);
      continue;
    }
    if (q_code) {
      bool q = true;
      for (std::size_t d = 0; d < idx.size(); ++d)
        q = q && idx[d] == (d == q_code->first ? q_code->second : 0);
      if (q) {
        s.x.push_back(-1);
        continue;
      }
    }
    s.x.push_back(std::int64_t(checked_flat(r, idx)));
  }
  for (const auto &r : u)
    s.u.push_back(checked_flat(r, read_indices(post_side ? r.post : r.pre, vals)));
  auto delay = [&](const Register &r) {
    return unsigned(r.grid.lb()[0]) +
           unsigned(checked_flat(r, read_indices(post_side ? r.post : r.pre, vals)));
  };
  for (const auto &r : nsc)
    s.nsc.push_back(delay(r));
  for (const auto &r : nca)
    s.nca.push_back(delay(r));
  return s;
}

Index NcsModel::decode_input(std::span<const bool> vals) const {
  return checked_flat(control, read_indices(control.pre, vals));
}

dd::Count NcsModel::state_count() const { return mgr->sat_count(domain(), pre_vars()); }

dd::Count NcsModel::size() const {
  auto v = pre_vars();
  auto i = input_vars();
  auto p = post_vars();
  v.insert(v.end(), i.begin(), i.end());
  v.insert(v.end(), p.begin(), p.end());
  return mgr->sat_count(trans, v);
}

namespace {

dd::VarBlock block_of(const Register &r, bool post_side) {
  dd::VarBlock b;
  b.name = r.name() + (post_side ? "'" : "");
  b.role = r.kind == "control" ? "input" : (post_side ? "post" : "pre");
  b.register_kind = r.kind;
  b.register_index = r.index;
  b.lb = r.grid.lb();
  b.ub = r.grid.ub();
  b.eta = r.grid.eta();
  b.vars = post_side ? r.post : r.pre;
  b.q_flag = post_side ? r.flag_post : r.flag_pre;
  b.has_q = r.kind == "state";
  return b;
}

} // namespace

dd::MetaBlock NcsModel::meta() const {
  dd::MetaBlock m;
  m.tau = tau;
  for (const auto *chain : {&x, &u, &nsc, &nca})
    for (const auto &r : *chain) {
      m.blocks.push_back(block_of(r, false));
      m.blocks.push_back(block_of(r, true));
    }
  m.blocks.push_back(block_of(control, false));
  m.extra = {{"model", "ncs"},
             {"plant", plant_name},
             {"delays",
              {{"nsc_min", bounds.nsc_min},
               {"nsc_max", bounds.nsc_max},
               {"nca_min", bounds.nca_min},
               {"nca_max", bounds.nca_max}}},
             {"prolonged", bounds.prolonged()},
             {"selector", to_string(selector)},
             {"base_deterministic", base_deterministic},
             {"state_grid", {{"lb", state_grid.lb()}, {"ub", state_grid.ub()}, {"eta", state_grid.eta()}}},
             {"input_grid", {{"lb", input_grid.lb()}, {"ub", input_grid.ub()}, {"eta", input_grid.eta()}}}};
  if (q_code)
    m.extra["q"] = {{"dim", q_code->first}, {"index", q_code->second}};
  else
    m.extra["q"] = "flag";
  return m;
}

void NcsModel::save(const std::filesystem::path &trans_path,
                    const std::filesystem::path &init_path) const {
  auto m = meta();
  dd::save(trans, m, trans_path);
  m.extra["set"] = "initial";
  dd::save(initial, m, init_path);
}

NcsModel NcsModel::load(const std::filesystem::path &trans_path,
                        const std::optional<std::filesystem::path> &init_path) {
  NcsModel m;
  m.mgr = std::make_shared<dd::DdManager>(0);
  auto [trans, meta] = dd::load(*m.mgr, trans_path);
  const auto &ex = meta.extra;
  if (ex.value("model", "") != "ncs")
    throw FormatError(trans_path.string() + " is not an expanded model");
  try {
    const auto &d = ex.at("delays");
    m.bounds = {d.at("nsc_min").get<unsigned>(), d.at("nsc_max").get<unsigned>(),
                d.at("nca_min").get<unsigned>(), d.at("nca_max").get<unsigned>()};
    m.selector = selector_from_string(ex.at("selector").get<std::string>());
    m.plant_name = ex.value("plant", "");
    m.base_deterministic = ex.value("base_deterministic", true);
    auto grid_of = [](const nlohmann::json &g) {
      return UniformGrid(g.at("lb").get<std::vector<double>>(), g.at("ub").get<std::vector<double>>(),
                         g.at("eta").get<std::vector<double>>());
    };
    m.state_grid = grid_of(ex.at("state_grid"));
    m.input_grid = grid_of(ex.at("input_grid"));
    if (ex.at("q").is_object())
      m.q_code = std::pair{ex.at("q").at("dim").get<std::size_t>(), ex.at("q").at("index").get<Index>()};
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(trans_path.string() + ": malformed model metadata: " + e.what());
  } catch (const UsageError &e) {
    throw FormatError(trans_path.string() + ": " + e.what());
  }
  m.tau = meta.tau;

  auto fill = [&](Register &r) {
    const auto *pre = meta.find(r.name());
    const auto *post = r.kind == "control" ? nullptr : meta.find(r.name() + "'");
    if (!pre || (r.kind != "control" && !post))
      throw FormatError(trans_path.string() + ": missing register block " + r.name());
    r.pre = pre->vars;
    r.flag_pre = pre->q_flag;
    if (post) {
      r.post = post->vars;
      r.flag_post = post->q_flag;
    }
  };
  UniformGrid gsc({double(m.bounds.nsc_min)}, {double(m.bounds.nsc_max)}, {1.0});
  UniformGrid gca({double(m.bounds.nca_min)}, {double(m.bounds.nca_max)}, {1.0});
  for (unsigned i = 1; i <= m.bounds.nsc_max; ++i) {
    m.x.push_back(make_register("state", int(i), m.state_grid));
    m.nsc.push_back(make_register("nsc", int(i), gsc));
  }
  for (unsigned i = 1; i <= m.bounds.nca_max; ++i) {
    m.u.push_back(make_register("input", int(i), m.input_grid));
    m.nca.push_back(make_register("nca", int(i), gca));
  }
  m.control = make_register("control", 0, m.input_grid);
  for (auto *chain : {&m.x, &m.u, &m.nsc, &m.nca})
    for (auto &r : *chain)
      fill(r);
  fill(m.control);
  m.trans = trans;
  m.initial = m.mgr->bdd_false();
  if (init_path) {
    auto [init, init_meta] = dd::load(*m.mgr, *init_path);
    if (init_meta.blocks != meta.blocks)
      throw FormatError(init_path->string() + ": layout differs from the transition file");
    m.initial = init;
  }
  return m;
}

NcsModel expand(const TransitionSystem &base, const DelayBounds &bounds, InputSelector selector) {
  bounds.validate();
  NcsModel m = layout(base.pre.grid(), base.input.grid(), bounds);
  m.selector = selector;
  m.tau = base.tau;
  m.plant_name = base.plant_name;
  m.base_deterministic = base.deterministic();
  if (bounds.prolonged() && !m.base_deterministic)
    std::cerr << "warning: plant model is not deterministic; controllers for the expanded "
                 "model cannot be refined to the plant\n";
  auto &mgr = *m.mgr;
  const Register &x1 = m.x.front();

  // head: x1 -> x1' under the selected buffered input
  auto map = base_map(base, x1, true);
  auto head = mgr.bdd_false();
  for (unsigned i = 1; i <= bounds.nca_max; ++i) {
    auto sel = applied_input(m, selector, i);
    if (sel.is_false())
      continue;
    for (std::size_t d = 0; d < base.input.grid().dim(); ++d)
      for (std::size_t b = 0; b < base.input.var_ids()[d].size(); ++b)
        map[base.input.var_ids()[d][b]] = m.u[i - 1].pre[d][b];
    head |= sel & mgr.transfer(base.trans, map);
  }
  if (x1.flag_pre)
    head &= mgr.nvar(*x1.flag_pre) & mgr.nvar(*x1.flag_post);

  auto shift = mgr.bdd_true();
  for (std::size_t i = m.nsc.size(); i-- > 1;)
    shift &= equal_vars(mgr, m.nsc[i].vars(true), m.nsc[i - 1].vars(false));
  shift &= m.code_valid(m.nsc.front(), true);
  for (std::size_t i = m.nca.size(); i-- > 1;)
    shift &= equal_vars(mgr, m.nca[i].vars(true), m.nca[i - 1].vars(false));
  shift &= m.code_valid(m.nca.front(), true);
  for (std::size_t i = m.u.size(); i-- > 1;)
    shift &= equal_vars(mgr, m.u[i].vars(true), m.u[i - 1].vars(false));
  shift &= equal_vars(mgr, m.u.front().vars(true), m.control.vars(false));
  for (std::size_t i = m.x.size(); i-- > 1;)
    shift &= equal_vars(mgr, m.x[i].vars(true), m.x[i - 1].vars(false));

  m.trans = m.domain() & m.input_domain() & shift & head;

  auto init = mgr.transfer(base.initial, base_map(base, x1, false));
  if (x1.flag_pre)
    init &= mgr.nvar(*x1.flag_pre);
  for (std::size_t i = 1; i < m.x.size(); ++i)
    init &= m.is_q(m.x[i], false);
  init &= m.code_valid(m.u.front(), false);
  for (std::size_t i = 1; i < m.u.size(); ++i)
    init &= equal_vars(mgr, m.u[i].vars(false), m.u.front().vars(false));
  for (const auto &r : m.nsc)
    init &= uint_equals(mgr, r.pre[0], bounds.nsc_max - bounds.nsc_min);
  for (const auto &r : m.nca)
    init &= uint_equals(mgr, r.pre[0], bounds.nca_max - bounds.nca_min);
  m.initial = init;
  return m;
}

dd::Bdd expand_spec_set(const TransitionSystem &base, const dd::Bdd &set, const NcsModel &model,
                        Anchor anchor) {
  const Register &r = anchor == Anchor::Newest ? model.x.front() : model.x.back();
  auto lifted = model.mgr->transfer(set, base_map(base, r, false));
  return lifted & model.state_valid(r, false) & model.domain();
}

dd::Bdd reachable(const NcsModel &model) {
  auto r = model.initial;
  for (;;) {
    auto next = r | model.image(r);
    if (next == r)
      return r;
    r = next;
  }
}

} // namespace ncsynth
