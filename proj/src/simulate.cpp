#include "ncsynth/simulate.hpp"

#include <charconv>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ncsynth/errors.hpp"

namespace ncsynth {

std::string to_string(ChannelMode m) { return m == ChannelMode::Prolonged ? "prolonged" : "random"; }

ChannelMode channel_mode_from_string(const std::string &s) {
  if (s == "prolonged")
    return ChannelMode::Prolonged;
  if (s == "random")
    return ChannelMode::Random;
  throw ConfigError("unknown channel mode '" + s + "' (expected prolonged or random)");
}

namespace {

struct Assignment {
  std::unique_ptr<bool[]> data;
  std::size_t size = 0;
  operator std::span<const bool>() const { return {data.get(), size}; }
};

Assignment by_var(const dd::DdManager &mgr, std::span<const dd::Var> support,
                  const std::vector<bool> &picked) {
  Assignment a{std::make_unique<bool[]>(mgr.var_count()), mgr.var_count()};
  for (std::size_t i = 0; i < support.size(); ++i)
    a.data[support[i]] = picked[i];
  return a;
}

std::pair<std::uint64_t, std::uint64_t> channel_seeds(std::uint64_t seed) {
  std::mt19937_64 g(seed);
  auto a = g();
  return {a, g()};
}

} // namespace

ClosedLoop::ClosedLoop(PlantSpec plant, const TransitionSystem &base, const NcsModel &model,
                       const Controller &controller, SimConfig cfg)
    : plant_(std::move(plant)), base_(&base), model_(&model), cfg_(std::move(cfg)),
      sc_(model.bounds.nsc_min, model.bounds.nsc_max, cfg_.channel_mode, channel_seeds(cfg_.seed).first),
      ca_(model.bounds.nca_min, model.bounds.nca_max, cfg_.channel_mode, channel_seeds(cfg_.seed).second) {
  if (cfg_.channel_mode == ChannelMode::Random && model.bounds.prolonged() && !cfg_.unsafe)
    throw ConfigError("random channels void the guarantees of a controller for prolonged channels; "
                      "enable unsafe mode to run anyway");
  if (!(base.pre.grid() == model.state_grid) || !(base.input.grid() == model.input_grid))
    throw UsageError("ClosedLoop: plant model and expanded model use different grids");
  if (!base.deterministic() && !cfg_.unsafe)
    throw ConfigError("the plant model is not deterministic, so delayed measurements do not pin "
                      "down the current state; enable unsafe mode to run anyway");
  auto bits = model.input_vars();
  init_modes(*model.mgr, controller, bits);
}

ClosedLoop::ClosedLoop(PlantSpec plant, const TransitionSystem &base, const Controller &controller,
                       SimConfig cfg)
    : plant_(std::move(plant)), base_(&base), cfg_(std::move(cfg)),
      sc_(0, 0, ChannelMode::Prolonged, 0), ca_(0, 0, ChannelMode::Prolonged, 0) {
  auto bits = base.input_vars();
  init_modes(*base.mgr, controller, bits);
}

void ClosedLoop::init_modes(dd::DdManager &mgr, const Controller &c, std::span<const dd::Var> code_bits) {
  if (c.empty())
    throw ConfigError("the controller is empty");
  input_vars_.assign(code_bits.begin(), code_bits.end());
  if (c.modes.empty()) {
    modes_.push_back({c.relation, mgr.bdd_false(), 0});
  } else {
    for (const auto &m : c.modes)
      modes_.push_back({m.relation, m.goal, m.next});
  }
  const auto &sg = base_->pre.grid();
  const auto &ig = base_->input.grid();
  if (cfg_.x0.size() != sg.dim())
    throw ConfigError("x0 has " + std::to_string(cfg_.x0.size()) + " entries, expected " +
                      std::to_string(sg.dim()));
  if (cfg_.u0.empty())
    cfg_.u0.assign(ig.dim(), 0.0);
  if (cfg_.u0.size() != ig.dim())
    throw ConfigError("u0 has " + std::to_string(cfg_.u0.size()) + " entries, expected " +
                      std::to_string(ig.dim()));
  try {
    u0_ = ig.flatten(point_to_symbol(ig, cfg_.u0));
  } catch (const std::exception &e) {
    throw ConfigError(std::string("u0 is not on the input grid: ") + e.what());
  }
  held_ = u0_;
  x_ = cfg_.x0;
}

Index ClosedLoop::sent_at(std::int64_t j) const { return j < 0 ? u0_ : sent_[std::size_t(j)]; }

dd::Bdd ClosedLoop::predict(const dd::Bdd &cells, Index u) const {
  auto &mgr = *base_->mgr;
  auto pv = base_->pre_vars();
  auto iv = base_->input_vars();
  pv.insert(pv.end(), iv.begin(), iv.end());
  auto from = cells & base_->input.cell(base_->input.grid().unflatten(u));
  return base_->post_to_pre(mgr.and_exists(base_->trans, from, pv));
}

// Belief at step t placed in a state register; q before the first step.
dd::Bdd ClosedLoop::lift(std::int64_t t, const Register &r) const {
  if (t < 0)
    return model_->is_q(r, false);
  std::vector<dd::Var> map(base_->mgr->var_count(), dd::kTerminalVar);
  const auto &ids = base_->pre.var_ids();
  for (std::size_t d = 0; d < ids.size(); ++d)
    for (std::size_t b = 0; b < ids[d].size(); ++b)
      map[ids[d][b]] = r.pre[d][b];
  return model_->mgr->transfer(belief_[std::size_t(t)], map) & model_->state_valid(r, false);
}

dd::Bdd ClosedLoop::reconstruct(std::uint64_t k) {
  const auto kk = std::int64_t(k);
  if (belief_.size() < k + 1)
    belief_.resize(k + 1, base_->pre.domain());
  const std::int64_t lag = model_ ? model_->bounds.nca_max : 0;
  for (auto j = last_delivered_time_ + 1; j <= kk; ++j) {
    auto next = predict(belief_[std::size_t(j - 1)], sent_at(j - 1 - lag));
    if (next.is_false())
      throw DomainViolation("step " + std::to_string(k) +
                            ": the predicted plant state has no successor in the plant model");
    belief_[std::size_t(j)] = next;
  }
  if (!model_)
    return belief_[k];
  // input and delay registers are known exactly
  NcsState st;
  st.x.assign(model_->x.size(), -1);
  for (std::size_t i = 1; i <= model_->u.size(); ++i)
    st.u.push_back(sent_at(kk - std::int64_t(i)));
  st.nsc.assign(model_->nsc.size(), model_->bounds.nsc_max);
  st.nca.assign(model_->nca.size(), model_->bounds.nca_max);
  std::vector<dd::Var> xv;
  for (const auto &r : model_->x) {
    auto v = r.vars(false);
    xv.insert(xv.end(), v.begin(), v.end());
  }
  auto s = model_->mgr->exists(model_->state_cube(st), xv);
  for (std::size_t i = 1; i <= model_->x.size(); ++i)
    s &= lift(kk - std::int64_t(i) + 1, model_->x[i - 1]);
  return s;
}

StepRecord ClosedLoop::step() {
  StepRecord rec;
  rec.k = k_;
  rec.x = x_;
  rec.mode = mode_;

  const auto &sg = base_->pre.grid();
  std::int64_t sym;
  try {
    sym = std::int64_t(sg.flatten(point_to_symbol(sg, x_)));
  } catch (const std::exception &) {
    throw DomainViolation("step " + std::to_string(k_) + ": the plant left the state grid");
  }
  sc_.send(sym, k_);
  if (auto pkt = sc_.deliver(k_)) {
    rec.delivered = pkt->payload;
    if (belief_.size() < pkt->sent + 1)
      belief_.resize(pkt->sent + 1, base_->pre.domain());
    belief_[pkt->sent] = base_->pre.cell(sg.unflatten(Index(pkt->payload)));
    last_delivered_time_ = std::int64_t(pkt->sent);
  }

  Index out = u0_;
  if (last_delivered_time_ >= 0) {
    auto s = reconstruct(k_);
    auto &mgr = *s.manager();
    const auto &m = modes_[std::size_t(mode_)];
    // inputs the controller allows in every state that agrees with the deliveries
    auto pre = model_ ? model_->pre_vars() : base_->pre_vars();
    auto legal = model_ ? model_->input_domain() : base_->input.domain();
    auto allowed = legal & !mgr.exists(s & !m.relation, pre);
    if (s.is_false() || allowed.is_false())
      throw DomainViolation("step " + std::to_string(k_) +
                            ": the reconstructed state is outside the controller domain");
    auto vals = by_var(mgr, input_vars_, mgr.pick_min(allowed, input_vars_));
    out = model_ ? model_->decode_input(vals)
                 : base_->input.grid().flatten(base_->input.indices(vals));
    rec.chosen = std::int64_t(out);
    if (modes_.size() > 1 && (s & !m.goal).is_false())
      mode_ = m.next;
  }
  sent_.push_back(out);
  ca_.send(out, k_);
  if (auto pkt = ca_.deliver(k_))
    held_ = pkt->payload;

  const auto &ig = base_->input.grid();
  rec.u = ig.center(ig.unflatten(held_));
  x_ = integrate(plant_, x_, rec.u);
  ++k_;
  return rec;
}

Trace ClosedLoop::run() {
  Trace t;
  t.reserve(cfg_.steps);
  for (std::size_t i = 0; i < cfg_.steps; ++i)
    t.push_back(step());
  return t;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string &s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw FormatError("trace: bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string &s) {
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw FormatError("trace: bad integer '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');)
    f.push_back(cell);
  if (!line.empty() && line.back() == ',')
    f.emplace_back();
  return f;
}

} // namespace

void write_trace_csv(const Trace &t, std::ostream &out) {
  const std::size_t n = t.empty() ? 0 : t.front().x.size();
  const std::size_t m = t.empty() ? 0 : t.front().u.size();
  out << "k";
  for (std::size_t i = 0; i < n; ++i)
    out << ",x" << i;
  out << ",delivered_symbol,chosen_input_symbol";
  for (std::size_t i = 0; i < m; ++i)
    out << ",u" << i;
  out << ",mode\n";
  for (const auto &r : t) {
    out << r.k;
    for (auto v : r.x)
      out << ',' << fmt(v);
    out << ',' << r.delivered << ',' << r.chosen;
    for (auto v : r.u)
      out << ',' << fmt(v);
    out << ',' << r.mode << '\n';
  }
}

Trace read_trace_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("trace: missing header");
  auto head = split(line);
  std::size_t n = 0, m = 0;
  for (const auto &h : head) {
    if (h.size() > 1 && h[0] == 'x')
      ++n;
    else if (h.size() > 1 && h[0] == 'u')
      ++m;
  }
  if (head.size() != n + m + 4 || head.front() != "k" || head.back() != "mode")
    throw FormatError("trace: unexpected header '" + line + "'");
  Trace t;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    auto f = split(line);
    if (f.size() != head.size())
      throw FormatError("trace: row has " + std::to_string(f.size()) + " fields, expected " +
                        std::to_string(head.size()));
    StepRecord r;
    std::size_t c = 0;
    r.k = std::uint64_t(parse_int(f[c++]));
    for (std::size_t i = 0; i < n; ++i)
      r.x.push_back(parse_double(f[c++]));
    r.delivered = parse_int(f[c++]);
    r.chosen = parse_int(f[c++]);
    for (std::size_t i = 0; i < m; ++i)
      r.u.push_back(parse_double(f[c++]));
    r.mode = int(parse_int(f[c++]));
    t.push_back(std::move(r));
  }
  return t;
}

void write_trace_json(const Trace &t, std::ostream &out) {
  auto rows = nlohmann::json::array();
  for (const auto &r : t)
    rows.push_back({{"k", r.k},
                    {"x", r.x},
                    {"delivered_symbol", r.delivered},
                    {"chosen_input_symbol", r.chosen},
                    {"u", r.u},
                    {"mode", r.mode}});
  out << rows.dump(1) << "\n";
}

Trace read_trace_json(std::istream &in) {
  Trace t;
  try {
    for (const auto &j : nlohmann::json::parse(in)) {
      StepRecord r;
      r.k = j.at("k").get<std::uint64_t>();
      r.x = j.at("x").get<Vec>();
      r.delivered = j.at("delivered_symbol").get<std::int64_t>();
      r.chosen = j.at("chosen_input_symbol").get<std::int64_t>();
      r.u = j.at("u").get<Vec>();
      r.mode = j.at("mode").get<int>();
      t.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("trace: ") + e.what());
  }
  return t;
}

} // namespace ncsynth
