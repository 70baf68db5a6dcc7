#include "ncsynth/inspect.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "ncsynth/errors.hpp"
#include "ncsynth/grid.hpp"

namespace ncsynth {

namespace {

using Row = std::vector<std::int64_t>;

// How the dummy symbol is encoded in blocks that can hold it.
struct QInfo {
  bool code = false;
  std::size_t dim = 0;
  Index index = 0;
};

QInfo q_info(const dd::MetaBlock &meta) {
  QInfo q;
  if (auto it = meta.extra.find("q"); it != meta.extra.end() && it->is_object()) {
    q.code = true;
    q.dim = it->at("dim").get<std::size_t>();
    q.index = it->at("index").get<Index>();
  }
  return q;
}

std::vector<const dd::VarBlock *> select(const dd::MetaBlock &meta, const std::vector<std::string> &roles) {
  std::vector<const dd::VarBlock *> out;
  for (const auto &b : meta.blocks)
    if (std::find(roles.begin(), roles.end(), b.role) != roles.end())
      out.push_back(&b);
  return out;
}

std::vector<dd::Var> block_vars(const dd::VarBlock &b) {
  std::vector<dd::Var> v;
  for (const auto &d : b.vars)
    v.insert(v.end(), d.begin(), d.end());
  if (b.q_flag)
    v.push_back(*b.q_flag);
  return v;
}

std::vector<std::string> block_columns(const dd::VarBlock &b) {
  if (b.vars.size() == 1)
    return {b.name};
  std::vector<std::string> c;
  for (std::size_t d = 0; d < b.vars.size(); ++d)
    c.push_back(b.name + "[" + std::to_string(d) + "]");
  return c;
}

UniformGrid grid_of(const dd::VarBlock &b) { return UniformGrid(b.lb, b.ub, b.eta); }

void decode_block(const dd::VarBlock &b, const QInfo &q, std::span<const bool> by_var, Row &out) {
  Row vals;
  for (const auto &bits : b.vars) {
    std::int64_t v = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (by_var[bits[i]])
        v |= std::int64_t{1} << i;
    vals.push_back(v);
  }
  bool is_q = b.has_q && ((b.q_flag && by_var[*b.q_flag]) ||
                          (!b.q_flag && q.code && q.dim < vals.size() && vals[q.dim] == std::int64_t(q.index)));
  if (is_q)
    std::fill(vals.begin(), vals.end(), -1);
  out.insert(out.end(), vals.begin(), vals.end());
}

dd::Bdd encode_block(dd::DdManager &mgr, const dd::VarBlock &b, const QInfo &q, std::span<const std::int64_t> idx) {
  auto c = mgr.bdd_true();
  bool is_q = !idx.empty() && idx[0] < 0;
  if (is_q) {
    if (!b.has_q)
      throw FormatError("block " + b.name + " cannot hold the dummy symbol");
    if (b.q_flag)
      c &= mgr.var(*b.q_flag);
    for (std::size_t d = 0; d < b.vars.size(); ++d)
      c &= uint_equals(mgr, b.vars[d], (!b.q_flag && q.code && q.dim == d) ? q.index : 0);
    return c;
  }
  if (b.q_flag)
    c &= mgr.nvar(*b.q_flag);
  for (std::size_t d = 0; d < b.vars.size(); ++d) {
    if (idx[d] < 0 || (b.vars[d].size() < 63 && idx[d] >= (std::int64_t{1} << b.vars[d].size())))
      throw FormatError("value " + std::to_string(idx[d]) + " does not fit block " + b.name);
    c &= uint_equals(mgr, b.vars[d], std::uint64_t(idx[d]));
  }
  return c;
}

struct Buffer {
  std::unique_ptr<bool[]> data;
  std::size_t size;
  explicit Buffer(std::size_t n) : data(std::make_unique<bool[]>(n)), size(n) {}
  operator std::span<const bool>() const { return {data.get(), size}; }
};

std::string cell_text(std::int64_t v) { return v < 0 ? "q" : std::to_string(v); }

std::int64_t parse_cell(const std::string &s) {
  if (s == "q")
    return -1;
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v < 0)
    throw FormatError("bad value '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);)
    out.push_back(part);
  return out;
}

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

void check_support(const dd::DdManager &mgr, const dd::Bdd &f, const std::vector<dd::Var> &vars) {
  std::set<dd::Var> allowed(vars.begin(), vars.end());
  for (auto v : mgr.support(f))
    if (!allowed.count(v))
      throw UsageError("the function depends on variable " + std::to_string(v) +
                       " outside the selected blocks");
}

} // namespace

std::vector<std::string> default_roles(const dd::MetaBlock &meta) {
  if (meta.extra.contains("controller")) {
    if (meta.extra.value("set", "") == "relation")
      return {"pre", "input"};
    return {"pre"};
  }
  if (meta.extra.contains("set"))
    return {"pre"};
  return {"pre", "input", "post"};
}

RowTable to_rows(dd::DdManager &mgr, const dd::Bdd &f, const dd::MetaBlock &meta,
                 const std::vector<std::string> &roles, std::size_t max_rows) {
  auto blocks = select(meta, roles);
  RowTable t;
  std::vector<dd::Var> vars;
  for (const auto *b : blocks) {
    auto c = block_columns(*b);
    t.columns.insert(t.columns.end(), c.begin(), c.end());
    auto v = block_vars(*b);
    vars.insert(vars.end(), v.begin(), v.end());
  }
  check_support(mgr, f, vars);
  auto count = mgr.sat_count(f, vars);
  if (count > dd::Count(max_rows))
    throw UsageError("the set has " + dd::to_string(count) + " assignments, more than the limit of " +
                     std::to_string(max_rows));
  const auto q = q_info(meta);
  std::set<Row> rows;
  Buffer buf(mgr.var_count());
  mgr.for_each_sat(f, vars, [&](std::span<const bool> vals) {
    for (std::size_t i = 0; i < vars.size(); ++i)
      buf.data[vars[i]] = vals[i];
    Row r;
    for (const auto *b : blocks)
      decode_block(*b, q, buf, r);
    rows.insert(std::move(r));
  });
  t.rows.assign(rows.begin(), rows.end());
  return t;
}

dd::Bdd from_rows(dd::DdManager &mgr, const RowTable &t, const dd::MetaBlock &meta,
                  const std::vector<std::string> &roles) {
  auto blocks = select(meta, roles);
  std::vector<std::string> cols;
  for (const auto *b : blocks) {
    auto c = block_columns(*b);
    cols.insert(cols.end(), c.begin(), c.end());
  }
  if (cols != t.columns)
    throw FormatError("columns do not match the metadata");
  auto all = meta.all_vars();
  if (!all.empty())
    mgr.ensure_vars(*std::max_element(all.begin(), all.end()) + 1);
  const auto q = q_info(meta);
  auto f = mgr.bdd_false();
  for (const auto &r : t.rows) {
    if (r.size() != cols.size())
      throw FormatError("row width does not match the columns");
    auto c = mgr.bdd_true();
    std::size_t at = 0;
    for (const auto *b : blocks) {
      std::span<const std::int64_t> idx(r.data() + at, b->vars.size());
      c &= encode_block(mgr, *b, q, idx);
      at += b->vars.size();
    }
    f |= c;
  }
  return f;
}

void write_csv(const RowTable &t, std::ostream &out) {
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto &r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      out << (i ? "," : "") << cell_text(r[i]);
    out << "\n";
  }
}

RowTable read_csv(std::istream &in) {
  RowTable t;
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("csv: missing header");
  t.columns = split(trim(line), ',');
  std::set<Row> rows;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty())
      continue;
    auto cells = split(line, ',');
    if (cells.size() != t.columns.size())
      throw FormatError("csv: row '" + line + "' has the wrong width");
    Row r;
    for (const auto &c : cells)
      r.push_back(parse_cell(trim(c)));
    rows.insert(std::move(r));
  }
  t.rows.assign(rows.begin(), rows.end());
  return t;
}

void write_fsm(dd::DdManager &mgr, const dd::Bdd &trans, const dd::Bdd &initial,
               const dd::MetaBlock &meta, std::ostream &out) {
  auto pre = select(meta, {"pre"});
  auto inp = select(meta, {"input"});
  auto post = select(meta, {"post"});
  if (pre.size() != post.size())
    throw UsageError("fsm export needs matching pre and post blocks");
  std::size_t width = 0;
  for (const auto *b : pre)
    width += b->vars.size();
  // columns follow the block order of the metadata; regrouped per edge below
  auto all = to_rows(mgr, trans, meta, {"pre", "input", "post"});
  auto init = to_rows(mgr, initial, meta, {"pre"});

  std::set<Row> seen_init(init.rows.begin(), init.rows.end());
  std::set<Row> others;
  struct Edge {
    Row from, to, label;
  };
  std::vector<Edge> edges;
  for (const auto &r : all.rows) {
    Edge e;
    std::size_t at = 0;
    for (const auto &b : meta.blocks) {
      if (b.role != "pre" && b.role != "input" && b.role != "post")
        continue;
      auto &dst = b.role == "pre" ? e.from : (b.role == "post" ? e.to : e.label);
      dst.insert(dst.end(), r.begin() + std::ptrdiff_t(at), r.begin() + std::ptrdiff_t(at + b.vars.size()));
      at += b.vars.size();
    }
    for (const auto *s : {&e.from, &e.to})
      if (!seen_init.count(*s))
        others.insert(*s);
    edges.push_back(std::move(e));
  }
  std::map<Row, std::size_t> number;
  std::vector<const Row *> states;
  for (const auto &s : seen_init) {
    number.emplace(s, number.size() + 1);
    states.push_back(&s);
  }
  for (const auto &s : others) {
    number.emplace(s, number.size() + 1);
    states.push_back(&s);
  }

  // parameters: one per pre dimension, values are grid points then q
  for (const auto *b : pre) {
    auto g = grid_of(*b);
    auto names = block_columns(*b);
    for (std::size_t d = 0; d < b->vars.size(); ++d) {
      std::string n = names[d];
      std::replace(n.begin(), n.end(), '[', '_');
      n.erase(std::remove(n.begin(), n.end(), ']'), n.end());
      out << n << "(" << g.points(d) + (b->has_q ? 1 : 0) << ") Int";
      for (Index i = 0; i < g.points(d); ++i) {
        std::ostringstream v;
        v << g.center(d, i);
        out << " \"" << v.str() << "\"";
      }
      if (b->has_q)
        out << " \"q\"";
      out << "\n";
    }
  }
  out << "---\n";
  for (const auto *s : states) {
    std::size_t at = 0;
    bool first = true;
    for (const auto *b : pre) {
      auto g = grid_of(*b);
      for (std::size_t d = 0; d < b->vars.size(); ++d, ++at) {
        auto v = (*s)[at];
        out << (first ? "" : " ") << (v < 0 ? std::int64_t(g.points(d)) : v);
        first = false;
      }
    }
    if (width == 0)
      out << "0";
    out << "\n";
  }
  out << "---\n";
  for (const auto &e : edges) {
    std::string label;
    std::size_t at = 0;
    for (const auto *b : inp) {
      label += (label.empty() ? "" : " ") + b->name + "=";
      for (std::size_t d = 0; d < b->vars.size(); ++d, ++at)
        label += (d ? "," : "") + cell_text(e.label[at]);
    }
    out << number.at(e.from) << " " << number.at(e.to) << " \"" << label << "\"\n";
  }
}

std::string dump(dd::DdManager &mgr, const dd::Bdd &f, const dd::MetaBlock &meta) {
  std::ostringstream o;
  o << "model: " << meta.extra.value("model", "?");
  if (!meta.extra.value("plant", "").empty())
    o << " (plant " << meta.extra["plant"].get<std::string>() << ")";
  o << "\n";
  if (meta.extra.contains("controller"))
    o << "controller: " << meta.extra["controller"].get<std::string>() << "\n";
  if (meta.extra.contains("set"))
    o << "set: " << meta.extra["set"].get<std::string>() << "\n";
  o << "tau: " << meta.tau << "\n";
  if (meta.extra.contains("delays")) {
    const auto &d = meta.extra["delays"];
    o << "delays: sensor [" << d.value("nsc_min", 0) << ", " << d.value("nsc_max", 0) << "], actuator ["
      << d.value("nca_min", 0) << ", " << d.value("nca_max", 0) << "]"
      << (meta.extra.value("prolonged", false) ? " prolonged" : "") << "\n";
  }
  o << "blocks:\n";
  for (const auto &b : meta.blocks) {
    o << "  " << b.name << "  role " << b.role;
    if (!b.register_kind.empty())
      o << "  kind " << b.register_kind;
    o << "  bits";
    for (const auto &d : b.vars)
      o << " " << d.size();
    o << "  range";
    for (std::size_t d = 0; d < b.lb.size(); ++d)
      o << " [" << b.lb[d] << ", " << b.ub[d] << "]/" << b.eta[d];
    if (b.q_flag)
      o << "  q flag";
    else if (b.has_q)
      o << "  q code";
    o << "\n";
  }
  o << "variables: " << meta.all_vars().size() << "\n";
  o << "nodes: " << mgr.node_count(f) << "\n";
  auto vars = meta.all_vars();
  std::set<dd::Var> in_meta(vars.begin(), vars.end());
  auto support = mgr.support(f);
  bool covered = std::all_of(support.begin(), support.end(), [&](dd::Var v) { return in_meta.count(v) > 0; });
  if (covered) {
    auto roles = default_roles(meta);
    std::vector<dd::Var> rv;
    for (const auto *b : select(meta, roles)) {
      auto v = block_vars(*b);
      rv.insert(rv.end(), v.begin(), v.end());
    }
    o << "assignments over";
    for (const auto &r : roles)
      o << " " << r;
    std::set<dd::Var> rs(rv.begin(), rv.end());
    if (std::all_of(support.begin(), support.end(), [&](dd::Var v) { return rs.count(v) > 0; }))
      o << ": " << dd::to_string(mgr.sat_count(f, rv)) << "\n";
    else
      o << ": n/a, depends on other roles\n";
    auto pre = meta.vars_with_role("pre");
    std::vector<dd::Var> rest;
    for (auto v : vars)
      if (std::find(pre.begin(), pre.end(), v) == pre.end())
        rest.push_back(v);
    o << "pre-state projection: " << dd::to_string(mgr.sat_count(mgr.exists(f, rest), pre)) << "\n";
  } else {
    o << "the function depends on variables outside the metadata\n";
  }
  return o.str();
}

std::string coverage(dd::DdManager &mgr, const dd::Bdd &set, const dd::MetaBlock &meta,
                     const std::string &block, std::pair<std::size_t, std::size_t> dims) {
  const dd::VarBlock *b = nullptr;
  if (!block.empty())
    b = meta.find(block);
  else if (!(b = meta.find("pre")))
    b = meta.find("x1");
  if (!b)
    throw UsageError("coverage: no block " + (block.empty() ? std::string("pre or x1") : block));
  const std::size_t nd = b->vars.size();
  if (nd == 0)
    throw UsageError("coverage: block " + b->name + " has no dimensions");
  if (nd == 1)
    dims = {0, 0};
  else if (dims.first >= nd || dims.second >= nd || dims.first == dims.second)
    throw UsageError("coverage: dimensions " + std::to_string(dims.first) + "," +
                     std::to_string(dims.second) + " do not fit block " + b->name);
  std::vector<std::size_t> shown{dims.first};
  if (nd > 1)
    shown.push_back(dims.second);
  std::set<dd::Var> ks;
  for (auto d : shown)
    ks.insert(b->vars[d].begin(), b->vars[d].end());
  std::vector<dd::Var> rest;
  for (auto v : mgr.support(set))
    if (!ks.count(v))
      rest.push_back(v);
  auto s = set;
  if (b->q_flag)
    s &= mgr.nvar(*b->q_flag);
  auto proj = mgr.exists(s, rest);
  auto g = grid_of(*b);
  const Index nx = g.points(shown[0]), ny = shown.size() > 1 ? g.points(shown[1]) : 1;
  Buffer buf(mgr.var_count());
  std::ostringstream o;
  Index hits = 0;
  for (Index y = ny; y-- > 0;) {
    for (Index x = 0; x < nx; ++x) {
      Index idx[2] = {x, y};
      for (std::size_t k = 0; k < shown.size(); ++k) {
        const auto &bits = b->vars[shown[k]];
        for (std::size_t i = 0; i < bits.size(); ++i)
          buf.data[bits[i]] = (idx[k] >> i) & 1;
      }
      bool in = mgr.eval(proj, buf);
      hits += in;
      o << (in ? '#' : '.');
    }
    o << "\n";
  }
  o << hits << " of " << nx * ny << " cells of " << b->name << "\n";
  return o.str();
}

Explorer::Explorer(dd::DdManager &mgr, dd::Bdd trans, dd::MetaBlock meta)
    : mgr_(mgr), trans_(std::move(trans)), meta_(std::move(meta)) {}

dd::Bdd Explorer::parse(const std::string &text, const std::string &role) const {
  auto blocks = select(meta_, {role});
  const auto q = q_info(meta_);
  std::istringstream in(text);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;)
    tokens.push_back(t);
  auto c = mgr_.bdd_true();
  if (tokens.empty())
    return c;
  bool bare = tokens[0].find('=') == std::string::npos;
  if (bare) {
    if (blocks.size() != 1)
      throw UsageError("name the blocks, e.g. " + blocks.front()->name + "=0,1");
    std::vector<std::int64_t> idx;
    for (const auto &t : tokens)
      for (const auto &v : split(t, ','))
        if (!v.empty())
          idx.push_back(parse_cell(v));
    if (idx.size() == 1 && idx[0] < 0)
      idx.assign(blocks[0]->vars.size(), -1);
    if (idx.size() != blocks[0]->vars.size())
      throw UsageError("expected " + std::to_string(blocks[0]->vars.size()) + " values");
    return encode_block(mgr_, *blocks[0], q, idx);
  }
  for (const auto &t : tokens) {
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("expected name=value in '" + t + "'");
    auto name = t.substr(0, eq);
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const auto *b) { return b->name == name; });
    if (it == blocks.end())
      throw UsageError("no " + role + " block named " + name);
    std::vector<std::int64_t> idx;
    for (const auto &v : split(t.substr(eq + 1), ','))
      idx.push_back(parse_cell(v));
    if (idx.size() == 1 && idx[0] < 0)
      idx.assign((*it)->vars.size(), -1);
    if (idx.size() != (*it)->vars.size())
      throw UsageError(name + " takes " + std::to_string((*it)->vars.size()) + " values");
    c &= encode_block(mgr_, **it, q, idx);
  }
  return c;
}

std::string Explorer::command(const std::string &raw) {
  auto line = trim(raw);
  std::istringstream in(line);
  std::string cmd;
  in >> cmd;
  std::string rest;
  std::getline(in, rest);
  auto print = [&](const dd::Bdd &f, const std::string &role) {
    auto t = to_rows(mgr_, f, meta_, {role}, std::size_t(1) << 24);
    std::ostringstream o;
    for (std::size_t i = 0; i < t.columns.size(); ++i)
      o << (i ? " " : "") << t.columns[i];
    o << "\n";
    for (std::size_t r = 0; r < t.rows.size() && r < max_rows; ++r) {
      for (std::size_t i = 0; i < t.rows[r].size(); ++i)
        o << (i ? " " : "") << cell_text(t.rows[r][i]);
      o << "\n";
    }
    if (t.rows.size() > max_rows)
      o << "... " << t.rows.size() - max_rows << " more\n";
    if (t.rows.empty())
      o << "(none)\n";
    return o.str();
  };
  try {
    if (cmd.empty())
      return "";
    if (cmd == "quit" || cmd == "exit") {
      done_ = true;
      return "";
    }
    if (cmd == "help")
      return "inputs <state>\npost <state> [: <input> ; <input> ...]\nquit\n"
             "values are name=i[,j..] per block, q for the dummy symbol\n";
    auto pre = meta_.vars_with_role("pre");
    auto inp = meta_.vars_with_role("input");
    auto post = meta_.vars_with_role("post");
    if (cmd == "inputs") {
      auto s = parse(rest, "pre");
      auto pairs = post.empty() ? trans_ & s : mgr_.exists(trans_ & s, post);
      auto allowed = mgr_.exists(pairs, pre);
      if (allowed.is_false())
        return "no input\n";
      return print(allowed, "input");
    }
    if (cmd == "post") {
      if (post.size() != pre.size())
        throw UsageError("post needs a transition relation");
      auto parts = split(rest, ':');
      if (parts.empty())
        parts.emplace_back();
      auto cur = parse(parts[0], "pre");
      if (parts.size() < 2 || trim(parts[1]).empty())
        return print(cur, "pre");
      std::vector<std::pair<dd::Var, dd::Var>> back;
      for (std::size_t i = 0; i < pre.size(); ++i)
        back.emplace_back(post[i], pre[i]);
      auto both = pre;
      both.insert(both.end(), inp.begin(), inp.end());
      std::string out;
      auto steps = split(parts[1], ';');
      for (std::size_t i = 0; i < steps.size(); ++i) {
        auto u = parse(steps[i], "input");
        cur = mgr_.rename(mgr_.and_exists(trans_, cur & u, both), back);
        out += "after " + trim(steps[i]) + ":\n" + print(cur, "pre");
      }
      return out;
    }
    return "unknown command '" + cmd + "' (try help)\n";
  } catch (const std::exception &e) {
    return std::string("error: ") + e.what() + "\n";
  }
}

void Explorer::repl(std::istream &in, std::ostream &out) {
  std::string line;
  while (!done_ && (out << "> " << std::flush, std::getline(in, line)))
    out << command(line);
}

} // namespace ncsynth
