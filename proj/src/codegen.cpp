#include "ncsynth/codegen.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ncsynth/errors.hpp"

namespace ncsynth {

dd::Bdd determinize(dd::DdManager &mgr, const dd::Bdd &relation, std::span<const dd::Var> input_bits) {
  auto c = relation;
  std::vector<dd::Var> all(input_bits.begin(), input_bits.end());
  for (auto it = input_bits.rbegin(); it != input_bits.rend(); ++it) {
    auto zero = mgr.nvar(*it);
    auto has0 = mgr.exists(c & zero, all);
    c &= zero | !has0;
  }
  return c;
}

Controller determinize(dd::DdManager &mgr, const Controller &c, std::span<const dd::Var> input_bits) {
  Controller d = c;
  d.relation = determinize(mgr, c.relation, input_bits);
  for (auto &m : d.modes)
    m.relation = determinize(mgr, m.relation, input_bits);
  return d;
}

std::vector<dd::Bdd> decompose_outputs(dd::DdManager &mgr, const dd::Bdd &det,
                                       std::span<const dd::Var> state_bits,
                                       std::span<const dd::Var> input_bits) {
  std::vector<dd::Var> sv(state_bits.begin(), state_bits.end());
  std::vector<dd::Var> all = sv;
  all.insert(all.end(), input_bits.begin(), input_bits.end());
  if (mgr.sat_count(det, all) != mgr.sat_count(mgr.exists(det, input_bits), sv))
    throw UsageError("decompose_outputs: relation allows several inputs in some state");
  std::vector<dd::Bdd> bits;
  for (auto v : input_bits)
    bits.push_back(mgr.exists(det & mgr.var(v), input_bits));
  return bits;
}

CodegenInput prepare_codegen(dd::DdManager &mgr, const Controller &c, std::string name,
                             std::vector<dd::Var> state_bits, std::vector<dd::Var> input_bits) {
  if (input_bits.size() > 64)
    throw UsageError("codegen: input codes wider than 64 bits are not supported");
  CodegenInput in;
  in.name = std::move(name);
  in.state_bits = std::move(state_bits);
  in.input_bits = std::move(input_bits);
  auto add = [&](const dd::Bdd &relation, const dd::Bdd &goal, int next) {
    auto det = determinize(mgr, relation, in.input_bits);
    CodegenMode m;
    m.bits = decompose_outputs(mgr, det, in.state_bits, in.input_bits);
    m.domain = mgr.exists(det, in.input_bits);
    m.goal = goal;
    m.next = next;
    in.modes.push_back(std::move(m));
  };
  if (c.modes.empty())
    add(c.relation, mgr.bdd_false(), 0);
  else
    for (const auto &m : c.modes)
      add(m.relation, m.goal, m.next);
  return in;
}

namespace {

bool valid_identifier(const std::string &s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0])))
    return false;
  return std::all_of(s.begin(), s.end(),
                     [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; });
}

// Shared node table over every function that gets emitted.
struct NodeTable {
  std::vector<dd::NodeId> order; // children first
  std::unordered_map<dd::Var, std::size_t> bit_of;
  std::unordered_map<dd::NodeId, std::size_t> ordinal; // emitted names, independent of node ids

  NodeTable(const dd::DdManager &mgr, const CodegenInput &in) {
    for (std::size_t i = 0; i < in.state_bits.size(); ++i)
      bit_of[in.state_bits[i]] = i;
    std::unordered_set<dd::NodeId> seen;
    auto add = [&](const dd::Bdd &f) {
      for (auto n : mgr.topological_nodes(f))
        if (seen.insert(n).second) {
          if (!bit_of.count(mgr.node_var(n)))
            throw UsageError("codegen: controller depends on a variable outside the state layout");
          ordinal[n] = order.size();
          order.push_back(n);
        }
    };
    for (const auto &m : in.modes) {
      for (const auto &b : m.bits)
        add(b);
      add(m.domain);
      if (in.modes.size() > 1)
        add(m.goal);
    }
  }
};

std::string c_ref(const NodeTable &t, dd::NodeId n) {
  if (n == dd::kFalse)
    return "0";
  if (n == dd::kTrue)
    return "1";
  return "n" + std::to_string(t.ordinal.at(n)) + "(s)";
}

std::string v_ref(const NodeTable &t, dd::NodeId n) {
  if (n == dd::kFalse)
    return "1'b0";
  if (n == dd::kTrue)
    return "1'b1";
  return "n" + std::to_string(t.ordinal.at(n));
}

std::string comment_block(const CodegenInput &in, const char *lead) {
  std::ostringstream o;
  o << lead << " " << in.name << ": generated controller\n";
  std::istringstream desc(in.description);
  for (std::string line; std::getline(desc, line);)
    o << lead << " " << line << "\n";
  o << lead << " state bits: " << in.state_bits.size() << ", input bits: " << in.input_bits.size()
    << ", modes: " << in.modes.size() << "\n";
  return o.str();
}

} // namespace

CSource emit_c(dd::DdManager &mgr, const CodegenInput &in) {
  if (!valid_identifier(in.name))
    throw UsageError("codegen: '" + in.name + "' is not a valid identifier");
  if (in.modes.empty())
    throw UsageError("codegen: nothing to emit");
  NodeTable table(mgr, in);
  const auto words = std::max<std::size_t>(1, (in.state_bits.size() + 63) / 64);
  const bool multi = in.modes.size() > 1;
  std::string up = in.name;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char ch) { return char(std::toupper(ch)); });

  CSource out;
  {
    std::ostringstream h;
    h << comment_block(in, "//");
    h << "#ifndef " << up << "_H\n#define " << up << "_H\n\n#include <stdint.h>\n\n";
    h << "#define " << up << "_STATE_BITS " << in.state_bits.size() << "\n";
    h << "#define " << up << "_STATE_WORDS " << words << "\n";
    h << "#define " << up << "_INPUT_BITS " << in.input_bits.size() << "\n";
    h << "#define " << up << "_MODES " << in.modes.size() << "\n\n";
    h << "#ifdef __cplusplus\nextern \"C\" {\n#endif\n\n";
    h << "// Input code for a packed state; meaningful only inside the domain.\n";
    if (multi) {
      h << "uint64_t " << in.name << "_control(unsigned mode, const uint64_t s[" << up << "_STATE_WORDS]);\n";
      h << "int " << in.name << "_in_domain(unsigned mode, const uint64_t s[" << up << "_STATE_WORDS]);\n";
      h << "// Nonzero when the mode hands over after this step.\n";
      h << "int " << in.name << "_at_goal(unsigned mode, const uint64_t s[" << up << "_STATE_WORDS]);\n";
      h << "unsigned " << in.name << "_next_mode(unsigned mode);\n";
    } else {
      h << "uint64_t " << in.name << "_control(const uint64_t s[" << up << "_STATE_WORDS]);\n";
      h << "int " << in.name << "_in_domain(const uint64_t s[" << up << "_STATE_WORDS]);\n";
    }
    h << "\n#ifdef __cplusplus\n}\n#endif\n\n#endif\n";
    out.header = h.str();
  }

  std::ostringstream c;
  c << comment_block(in, "//");
  c << "#include \"" << in.name << ".h\"\n\n";
  c << "#define BIT(i) ((int)((s[(i) >> 6] >> ((i) & 63)) & 1u))\n\n";
  for (auto n : table.order) {
    auto bit = table.bit_of.at(mgr.node_var(n));
    c << "static int n" << table.ordinal.at(n) << "(const uint64_t *s) { return BIT(" << bit << ") ? "
      << c_ref(table, mgr.node_hi(n)) << " : " << c_ref(table, mgr.node_lo(n)) << "; }\n";
  }
  c << "\n";

  // one function per output bit, then the word that collects them
  auto collector = [&](const CodegenMode &m, const std::string &tag, const std::string &fn) {
    for (std::size_t j = 0; j < m.bits.size(); ++j) {
      c << "static inline int " << tag << "_u" << j << "(const uint64_t *s) { ";
      if (m.bits[j].is_const())
        c << "(void)s; ";
      c << "return " << c_ref(table, m.bits[j].id()) << "; }\n";
    }
    std::uint64_t constant = 0;
    std::vector<std::size_t> dynamic;
    for (std::size_t j = 0; j < m.bits.size(); ++j) {
      if (m.bits[j].is_true())
        constant |= std::uint64_t{1} << j;
      else if (!m.bits[j].is_false())
        dynamic.push_back(j);
    }
    c << (multi ? "static " : "") << "uint64_t " << fn << "(const uint64_t s[" << up << "_STATE_WORDS]) {\n";
    if (dynamic.empty()) {
      c << "  (void)s;\n  return UINT64_C(" << constant << ");\n}\n\n";
      return;
    }
    c << "  uint64_t u = UINT64_C(" << constant << ");\n";
    for (auto j : dynamic)
      c << "  u |= (uint64_t)" << tag << "_u" << j << "(s) << " << j << ";\n";
    c << "  return u;\n}\n\n";
  };
  auto predicate = [&](const dd::Bdd &f, const std::string &fn) {
    c << "int " << fn << "(const uint64_t s[" << up << "_STATE_WORDS]) {\n";
    if (f.is_const())
      c << "  (void)s;\n";
    c << "  return " << c_ref(table, f.id()) << ";\n}\n\n";
  };

  if (!multi) {
    collector(in.modes[0], in.name, in.name + "_control");
    predicate(in.modes[0].domain, in.name + "_in_domain");
  } else {
    for (std::size_t i = 0; i < in.modes.size(); ++i) {
      auto tag = in.name + "_mode" + std::to_string(i);
      collector(in.modes[i], tag, tag + "_control");
      c << "static ";
      predicate(in.modes[i].domain, tag + "_in_domain");
      c << "static ";
      predicate(in.modes[i].goal, tag + "_at_goal");
    }
    auto dispatch = [&](const char *ret, const std::string &suffix, const char *fallback) {
      c << ret << " " << in.name << "_" << suffix << "(unsigned mode, const uint64_t s[" << up
        << "_STATE_WORDS]) {\n  switch (mode) {\n";
      for (std::size_t i = 0; i < in.modes.size(); ++i)
        c << "  case " << i << ": return " << in.name << "_mode" << i << "_" << suffix << "(s);\n";
      c << "  default: return " << fallback << ";\n  }\n}\n\n";
    };
    dispatch("uint64_t", "control", "0");
    dispatch("int", "in_domain", "0");
    dispatch("int", "at_goal", "0");
    c << "unsigned " << in.name << "_next_mode(unsigned mode) {\n  switch (mode) {\n";
    for (std::size_t i = 0; i < in.modes.size(); ++i)
      c << "  case " << i << ": return " << in.modes[i].next << ";\n";
    c << "  default: return mode;\n  }\n}\n";
  }
  out.source = c.str();
  return out;
}

std::string emit_verilog(dd::DdManager &mgr, const CodegenInput &in) {
  if (!valid_identifier(in.name))
    throw UsageError("codegen: '" + in.name + "' is not a valid identifier");
  if (in.modes.empty())
    throw UsageError("codegen: nothing to emit");
  NodeTable table(mgr, in);
  const bool multi = in.modes.size() > 1;
  std::size_t mode_width = 1;
  while ((std::size_t{1} << mode_width) < in.modes.size())
    ++mode_width;
  const auto sbits = std::max<std::size_t>(1, in.state_bits.size());
  const auto ubits = std::max<std::size_t>(1, in.input_bits.size());

  std::ostringstream v;
  v << comment_block(in, "//");
  v << "module " << in.name << " (\n";
  v << "  input  wire [" << sbits - 1 << ":0] s,\n";
  if (multi)
    v << "  input  wire [" << mode_width - 1 << ":0] mode,\n";
  v << "  output wire [" << ubits - 1 << ":0] u,\n";
  if (multi)
    v << "  output wire goal,\n";
  v << "  output wire valid\n);\n";
  for (auto n : table.order)
    v << "  wire " << v_ref(table, n) << " = s[" << table.bit_of.at(mgr.node_var(n)) << "] ? "
      << v_ref(table, mgr.node_hi(n)) << " : " << v_ref(table, mgr.node_lo(n)) << ";\n";

  // mode mux, last mode as the default arm
  auto mux = [&](auto pick) {
    std::string e = v_ref(table, pick(in.modes.back()));
    for (std::size_t i = in.modes.size() - 1; i-- > 0;)
      e = "(mode == " + std::to_string(i) + ") ? " + v_ref(table, pick(in.modes[i])) + " : " + e;
    return e;
  };
  for (std::size_t j = 0; j < in.input_bits.size(); ++j)
    v << "  assign u[" << j << "] = " << mux([j](const CodegenMode &m) { return m.bits[j].id(); })
      << ";\n";
  if (in.input_bits.empty())
    v << "  assign u[0] = 1'b0;\n";
  v << "  assign valid = " << mux([](const CodegenMode &m) { return m.domain.id(); }) << ";\n";
  if (multi)
    v << "  assign goal = " << mux([](const CodegenMode &m) { return m.goal.id(); }) << ";\n";
  v << "endmodule\n";
  return v.str();
}

std::uint64_t eval_bits(const dd::DdManager &mgr, const CodegenMode &mode,
                        std::span<const dd::Var> state_bits, std::span<const bool> state_values) {
  dd::Var top = 0;
  for (auto s : state_bits)
    top = std::max(top, s + 1);
  const std::size_t n = std::max<dd::Var>(top, mgr.var_count());
  auto by_var = std::make_unique<bool[]>(n);
  for (std::size_t i = 0; i < state_bits.size(); ++i)
    by_var[state_bits[i]] = state_values[i];
  std::uint64_t u = 0;
  for (std::size_t j = 0; j < mode.bits.size(); ++j)
    if (mgr.eval(mode.bits[j], std::span<const bool>(by_var.get(), n)))
      u |= std::uint64_t{1} << j;
  return u;
}

} // namespace ncsynth
