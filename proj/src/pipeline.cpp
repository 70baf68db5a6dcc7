#include "ncsynth/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include "ncsynth/codegen.hpp"
#include "ncsynth/errors.hpp"
#include "ncsynth/synthesis.hpp"

namespace ncsynth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json &at(const json &j, const std::string &key, const std::string &where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

template <class T>
T get(const json &j, const std::string &where) {
  try {
    return j.get<T>();
  } catch (const json::exception &) {
    throw ConfigError(where + ": wrong type (" + j.dump() + ")");
  }
}

Vec vec_of(const json &j, const std::string &where) {
  if (!j.is_array())
    throw ConfigError(where + ": expected an array of numbers");
  return get<Vec>(j, where);
}

UniformGrid grid_of(const json &j, const std::string &where) {
  try {
    return UniformGrid(vec_of(at(j, "lb", where), where + ".lb"), vec_of(at(j, "ub", where), where + ".ub"),
                       vec_of(at(j, "eta", where), where + ".eta"));
  } catch (const UsageError &e) {
    throw ConfigError(where + ": " + e.what());
  }
}

Box box_of(const json &j, std::size_t dim, const std::string &where) {
  Box b{vec_of(at(j, "lb", where), where + ".lb"), vec_of(at(j, "ub", where), where + ".ub")};
  if (b.lb.size() != dim || b.ub.size() != dim)
    throw ConfigError(where + ": box needs " + std::to_string(dim) + " coordinates");
  return b;
}

std::vector<Box> boxes_of(const json &j, std::size_t dim, const std::string &where) {
  std::vector<Box> out;
  if (j.is_object()) {
    out.push_back(box_of(j, dim, where));
    return out;
  }
  if (!j.is_array())
    throw ConfigError(where + ": expected a box or a list of boxes");
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(box_of(j[i], dim, where + "[" + std::to_string(i) + "]"));
  return out;
}

PlantConfig plant_of(const json &j) {
  PlantConfig p;
  p.name = get<std::string>(at(j, "name", "plant"), "plant.name");
  p.tau = get<double>(j.value("tau", json(1.0)), "plant.tau");
  if (!(p.tau > 0))
    throw ConfigError("plant.tau must be positive");
  if (j.contains("params"))
    p.params = j.at("params");
  if (j.contains("explicit")) {
    const auto &e = j.at("explicit");
    ExplicitPlant ex;
    ex.states = get<Index>(at(e, "states", "plant.explicit"), "plant.explicit.states");
    ex.inputs = get<Index>(at(e, "inputs", "plant.explicit"), "plant.explicit.inputs");
    if (ex.states == 0 || ex.inputs == 0)
      throw ConfigError("plant.explicit: need at least one state and one input");
    for (const auto &t : at(e, "transitions", "plant.explicit")) {
      auto v = get<std::vector<Index>>(t, "plant.explicit.transitions");
      if (v.size() != 3 || v[0] >= ex.states || v[1] >= ex.inputs || v[2] >= ex.states)
        throw ConfigError("plant.explicit.transitions: bad entry " + t.dump());
      ex.transitions.push_back({v[0], v[1], v[2]});
    }
    p.grid = UniformGrid({0}, {double(ex.states - 1)}, {1});
    p.input_grid = UniformGrid({0}, {double(ex.inputs - 1)}, {1});
    p.explicit_model = std::move(ex);
  } else {
    p.grid = grid_of(at(j, "grid", "plant"), "plant.grid");
    p.input_grid = grid_of(at(j, "input_grid", "plant"), "plant.input_grid");
  }
  const auto n = p.grid.dim();
  if (j.contains("obstacles"))
    p.obstacles = boxes_of(j.at("obstacles"), n, "plant.obstacles");
  if (j.contains("initial"))
    p.initial = boxes_of(j.at("initial"), n, "plant.initial");
  return p;
}

SpecConfig spec_of(const json &j, std::size_t dim) {
  static const std::vector<std::string> kinds{"safety", "reach", "persistence", "recurrence", "gen_buchi"};
  SpecConfig s;
  s.kind = get<std::string>(at(j, "kind", "spec"), "spec.kind");
  if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end())
    throw ConfigError("spec.kind: unknown kind '" + s.kind + "'");
  if (j.contains("targets")) {
    const auto &t = j.at("targets");
    if (!t.is_array())
      throw ConfigError("spec.targets: expected a list");
    for (std::size_t i = 0; i < t.size(); ++i)
      s.targets.push_back(boxes_of(t[i], dim, "spec.targets[" + std::to_string(i) + "]"));
  }
  if (j.contains("safe"))
    s.safe = boxes_of(j.at("safe"), dim, "spec.safe");
  auto anchor = get<std::string>(j.value("anchor", json("newest")), "spec.anchor");
  if (anchor == "newest")
    s.anchor = Anchor::Newest;
  else if (anchor == "oldest")
    s.anchor = Anchor::Oldest;
  else
    throw ConfigError("spec.anchor: expected newest or oldest");
  if (s.kind != "safety" && s.targets.empty())
    throw ConfigError("spec: kind " + s.kind + " needs targets");
  if (s.kind == "safety" && !s.targets.empty())
    throw ConfigError("spec: safety takes safe boxes, not targets");
  return s;
}

SimConfig sim_of(const json &j, const PlantConfig &p) {
  SimConfig s;
  s.steps = get<std::size_t>(j.value("steps", json(s.steps)), "sim.steps");
  s.x0 = vec_of(at(j, "x0", "sim"), "sim.x0");
  if (s.x0.size() != p.grid.dim())
    throw ConfigError("sim.x0: expected " + std::to_string(p.grid.dim()) + " coordinates");
  if (j.contains("u0")) {
    s.u0 = vec_of(j.at("u0"), "sim.u0");
    if (s.u0.size() != p.input_grid.dim())
      throw ConfigError("sim.u0: expected " + std::to_string(p.input_grid.dim()) + " coordinates");
  }
  s.seed = get<std::uint64_t>(j.value("seed", json(s.seed)), "sim.seed");
  s.channel_mode = channel_mode_from_string(get<std::string>(j.value("channel_mode", json("prolonged")),
                                                             "sim.channel_mode"));
  s.unsafe = get<bool>(j.value("unsafe", json(false)), "sim.unsafe");
  return s;
}

json count_json(dd::Count c) {
  if (c <= dd::Count(UINT64_MAX))
    return std::uint64_t(c);
  return dd::to_string(c);
}

dd::Bdd union_of(const SymbolicSet &base, const std::vector<Box> &boxes) {
  SymbolicSet s = base;
  s.set_chi(base.manager().bdd_false());
  for (const auto &b : boxes)
    s = add_box(s, b.lb, b.ub);
  return s.chi();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Bit positions of every pre-state block in the packed state word.
std::string layout_text(const dd::MetaBlock &meta, const std::vector<dd::Var> &state_bits,
                        const std::vector<dd::Var> &input_bits) {
  std::map<dd::Var, std::size_t> pos;
  for (std::size_t i = 0; i < state_bits.size(); ++i)
    pos[state_bits[i]] = i;
  std::map<dd::Var, std::size_t> upos;
  for (std::size_t i = 0; i < input_bits.size(); ++i)
    upos[input_bits[i]] = i;
  std::ostringstream o;
  o << "packed bits, least significant first:\n";
  for (const auto &b : meta.blocks) {
    if (b.role == "post")
      continue;
    const auto &where = b.role == "input" ? upos : pos;
    const char *word = b.role == "input" ? "u" : "s";
    for (std::size_t d = 0; d < b.vars.size(); ++d) {
      if (b.vars[d].empty())
        continue;
      o << "  " << b.name;
      if (b.vars.size() > 1)
        o << "[" << d << "]";
      o << " (lb " << b.lb[d] << ", eta " << b.eta[d] << "):";
      for (auto v : b.vars[d])
        o << " " << word << where.at(v);
      o << "\n";
    }
    if (b.q_flag)
      o << "  " << b.name << " is q: " << word << where.at(*b.q_flag) << "\n";
  }
  return o.str();
}

} // namespace

Config parse_config(const json &doc) {
  if (!doc.is_object())
    throw ConfigError("config: expected a JSON object");
  Config c;
  c.source = doc;
  c.plant = plant_of(at(doc, "plant", "config"));
  if (doc.contains("delays")) {
    const auto &d = doc.at("delays");
    DelayBounds b{get<unsigned>(at(d, "nsc_min", "delays"), "delays.nsc_min"),
                  get<unsigned>(at(d, "nsc_max", "delays"), "delays.nsc_max"),
                  get<unsigned>(at(d, "nca_min", "delays"), "delays.nca_min"),
                  get<unsigned>(at(d, "nca_max", "delays"), "delays.nca_max")};
    try {
      if (d.contains("selector"))
        c.selector = selector_from_string(get<std::string>(d.at("selector"), "delays.selector"));
      if (b.nsc_max + b.nca_max > 0) {
        b.validate();
        c.delays = b;
      } else if (b.nsc_min + b.nca_min > 0) {
        b.validate();
      }
    } catch (const UsageError &e) {
      throw ConfigError(std::string("delays: ") + e.what());
    }
  }
  if (doc.contains("spec"))
    c.spec = spec_of(doc.at("spec"), c.plant.grid.dim());
  if (doc.contains("sim"))
    c.sim = sim_of(doc.at("sim"), c.plant);
  if (doc.contains("codegen")) {
    const auto &g = doc.at("codegen");
    CodegenConfig cg;
    cg.name = get<std::string>(g.value("name", json(cg.name)), "codegen.name");
    if (g.contains("targets"))
      cg.targets = get<std::vector<std::string>>(g.at("targets"), "codegen.targets");
    for (const auto &t : cg.targets)
      if (t != "c" && t != "verilog")
        throw ConfigError("codegen.targets: unknown target '" + t + "'");
    c.codegen = cg;
  }
  return c;
}

Config load_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

std::string sha256_hex(const std::string &bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream o;
  for (unsigned i = 0; i < len; ++i)
    o << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return o.str();
}

std::string sha256_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return sha256_hex(s.str());
}

Pipeline::Pipeline(Config cfg, fs::path out_dir) : cfg_(std::move(cfg)), out_(std::move(out_dir)) {
  fs::create_directories(out_);
}

fs::path Pipeline::need(const std::string &name, const std::string &stage) const {
  auto p = file(name);
  if (!fs::exists(p))
    throw ConfigError("missing " + p.string() + "; run the " + stage + " stage first");
  return p;
}

void Pipeline::record(const StageReport &r, const std::vector<std::string> &inputs) {
  auto path = file("manifest.json");
  json man = json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      in >> man;
    } catch (const json::exception &) {
      man = json::object();
    }
  }
  man["config"] = {{"sha256", sha256_hex(cfg_.source.dump())}};
  json st;
  st["seconds"] = r.seconds;
  st["sizes"] = r.sizes;
  st["inputs"] = json::object();
  for (const auto &i : inputs)
    st["inputs"][i] = sha256_file(file(i));
  st["outputs"] = json::object();
  for (const auto &o : r.outputs)
    st["outputs"][o.string()] = sha256_file(file(o.string()));
  if (cfg_.sim && r.stage == "sim")
    st["seed"] = cfg_.sim->seed;
  man["stages"][r.stage] = st;
  std::ofstream out(path);
  out << man.dump(2) << "\n";
}

StageReport Pipeline::abstract() {
  auto t0 = std::chrono::steady_clock::now();
  const auto &p = cfg_.plant;
  TransitionSystem ts;
  if (p.explicit_model) {
    ts = from_explicit(p.grid, p.input_grid, p.explicit_model->transitions, p.tau);
  } else {
    ts = build_abstraction(make_plant(p.name, p.params, p.tau), p.grid, p.input_grid);
  }
  ts.plant_name = p.name;
  if (!p.initial.empty())
    ts.initial = union_of(ts.pre, p.initial);
  StageReport r{"abstract", 0, json::object(), {"plant.bdd", "plant.init.bdd"}};
  if (!p.obstacles.empty()) {
    SymbolicSet region = ts.pre;
    region.set_chi(union_of(ts.pre, p.obstacles));
    // drop whole state-input pairs that may enter an obstacle
    auto post = ts.post_vars();
    auto risky = ts.mgr->and_exists(ts.trans, ts.pre_to_post(region.chi()), post);
    ts.trans &= !risky;
    remove_region(ts, region);
    r.sizes["obstacle_cells"] = count_json(region.size());
  }
  ts.save(file("plant.bdd"), file("plant.init.bdd"));
  r.sizes["states"] = std::uint64_t(p.grid.total_points());
  r.sizes["inputs"] = std::uint64_t(p.input_grid.total_points());
  r.sizes["transitions"] = count_json(ts.size());
  r.sizes["initial_states"] = count_json(ts.mgr->sat_count(ts.initial, ts.pre_vars()));
  r.sizes["deterministic"] = ts.deterministic();
  r.sizes["nodes"] = std::uint64_t(ts.mgr->node_count(ts.trans));
  r.seconds = seconds_since(t0);
  record(r, {});
  return r;
}

StageReport Pipeline::expand() {
  if (!cfg_.delays)
    throw ConfigError("expand: the config has no delays section");
  auto t0 = std::chrono::steady_clock::now();
  auto ts = TransitionSystem::load(need("plant.bdd", "abstract"), need("plant.init.bdd", "abstract"));
  auto m = ncsynth::expand(ts, *cfg_.delays, cfg_.selector);
  m.save(file("ncs.bdd"), file("ncs.init.bdd"));
  StageReport r{"expand", 0, json::object(), {"ncs.bdd", "ncs.init.bdd"}};
  r.sizes["states"] = count_json(m.state_count());
  r.sizes["reachable_states"] = count_json(m.mgr->sat_count(reachable(m), m.pre_vars()));
  r.sizes["initial_states"] = count_json(m.mgr->sat_count(m.initial, m.pre_vars()));
  r.sizes["transitions"] = count_json(m.size());
  r.sizes["nodes"] = std::uint64_t(m.mgr->node_count(m.trans));
  r.sizes["variables"] = std::uint64_t(m.mgr->var_count());
  r.sizes["prolonged"] = m.bounds.prolonged();
  r.sizes["base_deterministic"] = m.base_deterministic;
  r.seconds = seconds_since(t0);
  record(r, {"plant.bdd", "plant.init.bdd"});
  return r;
}

StageReport Pipeline::synth() {
  if (!cfg_.spec)
    throw ConfigError("synth: the config has no spec section");
  const auto &spec = *cfg_.spec;
  auto t0 = std::chrono::steady_clock::now();
  auto ts = TransitionSystem::load(need("plant.bdd", "abstract"), need("plant.init.bdd", "abstract"));
  std::vector<std::string> inputs{"plant.bdd", "plant.init.bdd"};

  auto safe = spec.safe.empty() ? ts.pre.domain() : union_of(ts.pre, spec.safe);
  if (!cfg_.plant.obstacles.empty())
    safe &= !union_of(ts.pre, cfg_.plant.obstacles);
  std::vector<dd::Bdd> targets;
  auto any_target = ts.mgr->bdd_false();
  for (const auto &t : spec.targets) {
    targets.push_back(union_of(ts.pre, t) & safe);
    any_target |= targets.back();
  }

  std::optional<NcsModel> m;
  GameView g;
  dd::MetaBlock meta;
  dd::Bdd initial;
  std::function<dd::Bdd(const dd::Bdd &)> lift = [](const dd::Bdd &f) { return f; };
  if (networked()) {
    m = NcsModel::load(need("ncs.bdd", "expand"), need("ncs.init.bdd", "expand"));
    if (m->bounds != *cfg_.delays)
      throw ConfigError("synth: ncs.bdd was expanded with other delay bounds; rerun expand");
    inputs.insert(inputs.end(), {"ncs.bdd", "ncs.init.bdd"});
    g = GameView::of(*m);
    meta = m->meta();
    initial = m->initial;
    lift = [&](const dd::Bdd &f) { return expand_spec_set(ts, f, *m, spec.anchor); };
  } else {
    g = GameView::of(ts);
    meta = ts.meta();
    initial = ts.initial;
  }

  Controller c;
  if (spec.kind == "safety")
    c = solve_safety(g, lift(safe));
  else if (spec.kind == "reach")
    c = solve_reach(g, lift(any_target));
  else if (spec.kind == "persistence")
    c = solve_persistence(g, lift(any_target));
  else if (spec.kind == "recurrence")
    c = solve_recurrence(g, lift(any_target));
  else {
    std::vector<dd::Bdd> lifted;
    for (const auto &t : targets)
      lifted.push_back(lift(t));
    c = solve_gen_buchi(g, lifted, lift(safe));
  }
  if (c.empty())
    throw EmptyController("synth: no state can enforce the " + spec.kind + " specification");

  for (const auto &e : fs::directory_iterator(out_))
    if (e.path().filename().string().rfind("controller", 0) == 0)
      fs::remove(e.path());
  save_controller(c, meta, out_, "controller");

  StageReport r{"synth", 0, json::object(), {}};
  std::vector<std::string> written;
  for (const auto &e : fs::directory_iterator(out_))
    if (e.path().filename().string().rfind("controller", 0) == 0)
      written.push_back(e.path().filename().string());
  std::sort(written.begin(), written.end());
  for (const auto &w : written)
    r.outputs.emplace_back(w);
  auto &mgr = *g.mgr;
  r.sizes["domain_states"] = count_json(mgr.sat_count(c.domain, g.pre));
  r.sizes["modes"] = std::uint64_t(std::max<std::size_t>(1, c.modes.size()));
  r.sizes["iterations"] = c.iterations;
  r.sizes["nodes"] = std::uint64_t(mgr.node_count(c.relation));
  r.sizes["initial_states_winning"] = count_json(mgr.sat_count(initial & c.domain, g.pre));
  r.sizes["initial_states"] = count_json(mgr.sat_count(initial, g.pre));
  r.seconds = seconds_since(t0);
  record(r, inputs);
  return r;
}

StageReport Pipeline::simulate() {
  if (!cfg_.sim)
    throw ConfigError("sim: the config has no sim section");
  if (cfg_.plant.explicit_model)
    throw ConfigError("sim: an explicit plant has no dynamics to simulate");
  auto t0 = std::chrono::steady_clock::now();
  const auto &p = cfg_.plant;
  auto plant = make_plant(p.name, p.params, p.tau);
  auto ts = TransitionSystem::load(need("plant.bdd", "abstract"), need("plant.init.bdd", "abstract"));
  std::vector<std::string> inputs{"plant.bdd", "plant.init.bdd"};
  need("controller.bdd", "synth");
  inputs.push_back("controller.bdd");
  inputs.push_back("controller.json");

  std::optional<NcsModel> m;
  std::optional<ClosedLoop> loop;
  if (networked()) {
    m = NcsModel::load(need("ncs.bdd", "expand"), need("ncs.init.bdd", "expand"));
    inputs.insert(inputs.end(), {"ncs.bdd", "ncs.init.bdd"});
    auto c = load_controller(*m->mgr, out_, "controller");
    loop.emplace(plant, ts, *m, c, *cfg_.sim);
  } else {
    auto c = load_controller(*ts.mgr, out_, "controller");
    loop.emplace(plant, ts, c, *cfg_.sim);
  }

  Trace trace;
  auto write = [&] {
    std::ofstream csv(file("trace.csv")), js(file("trace.json"));
    write_trace_csv(trace, csv);
    write_trace_json(trace, js);
  };
  try {
    for (std::size_t k = 0; k < cfg_.sim->steps; ++k)
      trace.push_back(loop->step());
  } catch (const DomainViolation &) {
    write();
    throw;
  }
  write();

  StageReport r{"sim", 0, json::object(), {"trace.csv", "trace.json"}};
  std::size_t switches = 0;
  for (std::size_t k = 1; k < trace.size(); ++k)
    switches += trace[k].mode != trace[k - 1].mode;
  r.sizes["steps"] = trace.size();
  r.sizes["mode_switches"] = switches;
  r.sizes["sensor_deliveries"] = loop->sensor_deliveries().size();
  r.sizes["actuator_deliveries"] = loop->actuator_deliveries().size();
  r.seconds = seconds_since(t0);
  record(r, inputs);
  return r;
}

StageReport Pipeline::codegen() {
  if (!cfg_.codegen)
    throw ConfigError("codegen: the config has no codegen section");
  if (cfg_.delays && !cfg_.delays->prolonged())
    throw ConfigError(
        "codegen: delays must be prolonged (nsc_min = nsc_max and nca_min = nca_max). The symbolic "
        "controller is only correct for a loop that holds every packet until its delay reaches the "
        "channel maximum; with varying delays it has no refinement guarantee to implement.");
  auto t0 = std::chrono::steady_clock::now();
  const auto &cg = *cfg_.codegen;
  std::vector<std::string> inputs{"controller.bdd", "controller.json"};
  need("controller.bdd", "synth");

  std::shared_ptr<dd::DdManager> mgr;
  std::vector<dd::Var> sb, ib;
  dd::MetaBlock meta;
  std::optional<TransitionSystem> ts;
  std::optional<NcsModel> m;
  if (networked()) {
    m = NcsModel::load(need("ncs.bdd", "expand"), need("ncs.init.bdd", "expand"));
    if (!m->bounds.prolonged())
      throw ConfigError("codegen: ncs.bdd was expanded with non-prolonged delays");
    inputs.insert(inputs.begin(), {"ncs.bdd", "ncs.init.bdd"});
    mgr = m->mgr;
    sb = m->pre_vars();
    ib = m->input_vars();
    meta = m->meta();
  } else {
    ts = TransitionSystem::load(need("plant.bdd", "abstract"), need("plant.init.bdd", "abstract"));
    inputs.insert(inputs.begin(), {"plant.bdd", "plant.init.bdd"});
    mgr = ts->mgr;
    sb = ts->pre_vars();
    ib = ts->input_vars();
    meta = ts->meta();
  }
  auto c = load_controller(*mgr, out_, "controller");
  auto in = prepare_codegen(*mgr, c, cg.name, sb, ib);
  in.description = "plant " + cfg_.plant.name + ", " + c.kind + " controller\n" + layout_text(meta, sb, ib);

  StageReport r{"codegen", 0, json::object(), {}};
  for (const auto &t : cg.targets) {
    if (t == "c") {
      auto src = emit_c(*mgr, in);
      std::ofstream(file(cg.name + ".h")) << src.header;
      std::ofstream(file(cg.name + ".c")) << src.source;
      r.outputs.emplace_back(cg.name + ".h");
      r.outputs.emplace_back(cg.name + ".c");
    } else {
      std::ofstream(file(cg.name + ".v")) << emit_verilog(*mgr, in);
      r.outputs.emplace_back(cg.name + ".v");
    }
  }
  r.sizes["state_bits"] = sb.size();
  r.sizes["input_bits"] = ib.size();
  r.sizes["modes"] = in.modes.size();
  r.sizes["domain_states"] = count_json(mgr->sat_count(c.domain, sb));
  r.seconds = seconds_since(t0);
  record(r, inputs);
  return r;
}

std::vector<StageReport> Pipeline::run_all() {
  std::vector<StageReport> out;
  out.push_back(abstract());
  if (cfg_.delays)
    out.push_back(expand());
  if (cfg_.spec)
    out.push_back(synth());
  if (cfg_.sim)
    out.push_back(simulate());
  if (cfg_.codegen)
    out.push_back(codegen());
  return out;
}

} // namespace ncsynth
