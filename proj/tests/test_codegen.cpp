#include <algorithm>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "ncsynth/codegen.hpp"
#include "ncsynth/errors.hpp"
#include "support/c_driver.hpp"
#include "support/verilog_eval.hpp"

using namespace ncsynth;

namespace {

// Explicit controller: per state the set of allowed input codes.
struct Table {
  std::vector<dd::Var> state_bits, input_bits;
  std::vector<std::vector<unsigned>> allowed; // by state index
  std::vector<bool> goal;

  [[nodiscard]] bool in_domain(std::size_t s) const { return !allowed[s].empty(); }
  [[nodiscard]] unsigned min_code(std::size_t s) const {
    return *std::min_element(allowed[s].begin(), allowed[s].end());
  }
};

Table random_table(std::mt19937 &rng, std::vector<dd::Var> sb, std::vector<dd::Var> ib, double p) {
  Table t{std::move(sb), std::move(ib), {}, {}};
  std::bernoulli_distribution dom(p), half(0.5);
  const unsigned codes = 1u << t.input_bits.size();
  for (std::size_t s = 0; s < (std::size_t{1} << t.state_bits.size()); ++s) {
    std::vector<unsigned> a;
    if (dom(rng)) {
      for (unsigned u = 0; u < codes; ++u)
        if (half(rng))
          a.push_back(u);
      if (a.empty())
        a.push_back(std::uniform_int_distribution<unsigned>(0, codes - 1)(rng));
    }
    t.allowed.push_back(a);
    t.goal.push_back(half(rng));
  }
  return t;
}

dd::Bdd word(dd::DdManager &mgr, const std::vector<dd::Var> &bits, std::uint64_t v) {
  auto c = mgr.bdd_true();
  for (std::size_t i = 0; i < bits.size(); ++i)
    c &= mgr.literal(bits[i], (v >> i) & 1);
  return c;
}

dd::Bdd relation_of(dd::DdManager &mgr, const Table &t) {
  auto f = mgr.bdd_false();
  for (std::size_t s = 0; s < t.allowed.size(); ++s)
    for (auto u : t.allowed[s])
      f |= word(mgr, t.state_bits, s) & word(mgr, t.input_bits, u);
  return f;
}

dd::Bdd goal_of(dd::DdManager &mgr, const Table &t) {
  auto f = mgr.bdd_false();
  for (std::size_t s = 0; s < t.goal.size(); ++s)
    if (t.goal[s])
      f |= word(mgr, t.state_bits, s);
  return f;
}

std::vector<bool> unpack(std::uint64_t s, std::size_t n) {
  std::vector<bool> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = (s >> i) & 1;
  return v;
}

std::filesystem::path scratch(const std::string &tag) {
  auto d = std::filesystem::temp_directory_path() / ("ncsynth_codegen_" + tag);
  std::filesystem::remove_all(d);
  return d;
}

const std::vector<dd::Var> kStateBits{0, 2, 3, 5, 7, 8};
const std::vector<dd::Var> kInputBits{1, 4, 9};

} // namespace

TEST_CASE("determinize keeps the smallest input code per state") {
  std::mt19937 rng(3);
  for (int round = 0; round < 20; ++round) {
    dd::DdManager mgr(10);
    auto t = random_table(rng, kStateBits, kInputBits, 0.7);
    auto rel = relation_of(mgr, t);
    auto det = determinize(mgr, rel, kInputBits);
    for (std::size_t s = 0; s < t.allowed.size(); ++s)
      for (unsigned u = 0; u < 8; ++u) {
        bool expect = t.in_domain(s) && u == t.min_code(s);
        CHECK(!(det & word(mgr, kStateBits, s) & word(mgr, kInputBits, u)).is_false() == expect);
      }
    CHECK(mgr.exists(det, kInputBits) == mgr.exists(rel, kInputBits));
  }
}

TEST_CASE("decompose_outputs rejects nondeterministic relations") {
  dd::DdManager mgr(4);
  std::vector<dd::Var> s{0, 1}, u{2, 3};
  auto rel = mgr.var(0) & (mgr.var(2) | mgr.var(3));
  CHECK_THROWS_AS(decompose_outputs(mgr, rel, s, u), UsageError);
  auto bits = decompose_outputs(mgr, determinize(mgr, rel, u), s, u);
  REQUIRE(bits.size() == 2);
  // smallest code among {1, 2, 3} is 1
  CHECK(bits[0] == mgr.var(0));
  CHECK(bits[1].is_false());
}

TEST_CASE("generated C matches the controller on every state") {
  std::mt19937 rng(5);
  for (int round = 0; round < 3; ++round) {
    dd::DdManager mgr(10);
    auto t = random_table(rng, kStateBits, kInputBits, 0.75);
    Controller c;
    c.kind = "safety";
    c.relation = relation_of(mgr, t);
    c.domain = mgr.exists(c.relation, kInputBits);
    auto in = prepare_codegen(mgr, c, "ctl", kStateBits, kInputBits);
    auto src = emit_c(mgr, in);
    CHECK(src.header.find("#define CTL_STATE_WORDS 1") != std::string::npos);
    std::vector<std::vector<std::uint64_t>> states;
    for (std::uint64_t s = 0; s < 64; ++s)
      states.push_back({s});
    auto ans = oracle::run_c(src, "ctl", 1, 1, states, scratch("c" + std::to_string(round)));
    for (std::size_t s = 0; s < 64; ++s) {
      CHECK(ans[0][s].in_domain == int(t.in_domain(s)));
      if (t.in_domain(s))
        CHECK(ans[0][s].control == t.min_code(s));
    }
  }
}

TEST_CASE("generated Verilog matches the controller on every state") {
  std::mt19937 rng(8);
  dd::DdManager mgr(10);
  auto t = random_table(rng, kStateBits, kInputBits, 0.75);
  Controller c;
  c.relation = relation_of(mgr, t);
  c.domain = mgr.exists(c.relation, kInputBits);
  auto in = prepare_codegen(mgr, c, "ctl", kStateBits, kInputBits);
  oracle::Netlist net(emit_verilog(mgr, in));
  CHECK(net.wire_count() > 0);
  for (std::uint64_t s = 0; s < 64; ++s) {
    auto out = net.eval(unpack(s, 6), 0);
    CHECK(out.at("valid") == t.in_domain(s));
    if (t.in_domain(s)) {
      unsigned code = 0;
      for (unsigned j = 0; j < 3; ++j)
        code |= unsigned(out.at("u[" + std::to_string(j) + "]")) << j;
      CHECK(code == t.min_code(s));
    }
  }
}

TEST_CASE("mode-switching controllers in C and Verilog") {
  std::mt19937 rng(13);
  dd::DdManager mgr(10);
  std::vector<Table> tables{random_table(rng, kStateBits, kInputBits, 0.6),
                            random_table(rng, kStateBits, kInputBits, 0.6),
                            random_table(rng, kStateBits, kInputBits, 0.6)};
  Controller c;
  c.kind = "gen_buchi";
  c.relation = mgr.bdd_false();
  for (std::size_t i = 0; i < tables.size(); ++i) {
    c.modes.push_back({relation_of(mgr, tables[i]), goal_of(mgr, tables[i]), int((i + 1) % 3)});
    c.relation |= c.modes.back().relation;
  }
  c.domain = mgr.exists(c.relation, kInputBits);
  auto in = prepare_codegen(mgr, c, "multi", kStateBits, kInputBits);
  auto src = emit_c(mgr, in);
  CHECK(emit_c(mgr, in).source == src.source);
  CHECK(src.source.find("case 2: return 0;") != std::string::npos);
  std::vector<std::vector<std::uint64_t>> states;
  for (std::uint64_t s = 0; s < 64; ++s)
    states.push_back({s});
  auto ans = oracle::run_c(src, "multi", 3, 1, states, scratch("modes"));
  oracle::Netlist net(emit_verilog(mgr, in));
  for (unsigned m = 0; m < 3; ++m)
    for (std::size_t s = 0; s < 64; ++s) {
      const auto &t = tables[m];
      auto out = net.eval(unpack(s, 6), m);
      CHECK(ans[m][s].in_domain == int(t.in_domain(s)));
      CHECK(ans[m][s].at_goal == int(t.goal[s]));
      CHECK(out.at("valid") == t.in_domain(s));
      CHECK(out.at("goal") == t.goal[s]);
      if (t.in_domain(s)) {
        CHECK(ans[m][s].control == t.min_code(s));
        unsigned code = 0;
        for (unsigned j = 0; j < 3; ++j)
          code |= unsigned(out.at("u[" + std::to_string(j) + "]")) << j;
        CHECK(code == t.min_code(s));
      }
    }
}

TEST_CASE("states wider than one word") {
  dd::DdManager mgr(72);
  std::vector<dd::Var> sb, ib{70, 71};
  for (dd::Var v = 0; v < 70; ++v)
    sb.push_back(v);
  // u = (s0 xor s64) | s69 << 1, defined where s63 is clear
  auto b0 = mgr.var(0) ^ mgr.var(64);
  auto rel = !mgr.var(63) & !(mgr.var(70) ^ b0) & !(mgr.var(71) ^ mgr.var(69));
  Controller c;
  c.relation = rel;
  c.domain = mgr.exists(rel, ib);
  auto in = prepare_codegen(mgr, c, "wide", sb, ib);
  auto src = emit_c(mgr, in);
  CHECK(src.header.find("#define WIDE_STATE_WORDS 2") != std::string::npos);
  std::mt19937_64 rng(17);
  std::vector<std::vector<std::uint64_t>> states;
  for (int i = 0; i < 300; ++i)
    states.push_back({rng(), rng() & 0x3f});
  auto ans = oracle::run_c(src, "wide", 1, 2, states, scratch("wide"));
  for (std::size_t i = 0; i < states.size(); ++i) {
    auto bit = [&](unsigned k) { return unsigned((states[i][k / 64] >> (k % 64)) & 1); };
    CHECK(ans[0][i].in_domain == int(!bit(63)));
    if (!bit(63))
      CHECK(ans[0][i].control == ((bit(0) ^ bit(64)) | bit(69) << 1));
  }
}

TEST_CASE("constant controllers and bad inputs") {
  dd::DdManager mgr(4);
  std::vector<dd::Var> sb{0, 1}, ib{2, 3};
  Controller c;
  c.relation = mgr.bdd_true();
  c.domain = mgr.bdd_true();
  auto in = prepare_codegen(mgr, c, "konst", sb, ib);
  auto src = emit_c(mgr, in);
  CHECK(src.source.find("return UINT64_C(0);") != std::string::npos);
  CHECK(src.source.find("static inline int konst_u1(const uint64_t *s) { (void)s; return 0; }") != std::string::npos);
  auto ans = oracle::run_c(src, "konst", 1, 1, {{0}, {3}}, scratch("konst"));
  CHECK(ans[0][1].in_domain == 1);
  CHECK(ans[0][1].control == 0);

  in.name = "9lives";
  CHECK_THROWS_AS(emit_c(mgr, in), UsageError);
  CHECK_THROWS_AS(emit_verilog(mgr, in), UsageError);

  // depends on variable 1, which is not part of the layout
  c.relation = mgr.var(1) & mgr.nvar(2) & mgr.nvar(3);
  CHECK_THROWS_AS(prepare_codegen(mgr, c, "narrow", {0}, ib), UsageError);
  CodegenInput narrow{"narrow", {0}, ib, {CodegenMode{{mgr.var(1), mgr.bdd_false()}, mgr.var(0), {}, 0}}, ""};
  CHECK_THROWS_AS(emit_c(mgr, narrow), UsageError);
  CHECK_THROWS_AS(emit_verilog(mgr, narrow), UsageError);
}
