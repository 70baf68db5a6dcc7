#include "doctest.h"

#include <filesystem>
#include <random>

#include "ncsynth/bdd_io.hpp"
#include "ncsynth/dd.hpp"
#include "ncsynth/errors.hpp"
#include "support/truth_table.hpp"

using namespace ncsynth;
using dd::Bdd;
using dd::BinOp;
using dd::DdManager;
using dd::Var;

namespace {

std::vector<Var> iota_vars(unsigned n) {
  std::vector<Var> v(n);
  for (unsigned i = 0; i < n; ++i)
    v[i] = i;
  return v;
}

} // namespace

TEST_CASE("apply: identities and truth-table agreement") {
  DdManager mgr(3);
  auto x0 = mgr.var(0), x1 = mgr.var(1), x2 = mgr.var(2);
  auto g = x1 | x2;
  CHECK(mgr.apply(BinOp::And, mgr.bdd_true(), g) == g);
  CHECK(mgr.apply(BinOp::Xor, g, g).is_false());

  auto f = mgr.apply(BinOp::Or, x0 & x1, x2);
  auto tt = oracle::from_bdd(mgr, f, 3);
  for (std::size_t a = 0; a < 8; ++a) {
    bool b0 = a & 1, b1 = a & 2, b2 = a & 4;
    CHECK(tt.at(a) == ((b0 && b1) || b2));
  }
}

TEST_CASE("apply rejects operands from another manager") {
  DdManager a(2), b(2);
  CHECK_THROWS_AS(a.apply(BinOp::And, a.var(0), b.var(0)), UsageError);
}

TEST_CASE("negate") {
  DdManager mgr(6);
  CHECK(mgr.negate(mgr.bdd_true()).is_false());
  auto x0 = mgr.var(0);
  CHECK(!!x0 == x0);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    auto tf = oracle::random_table(6, rng), tg = oracle::random_table(6, rng);
    auto f = oracle::to_bdd(mgr, tf), g = oracle::to_bdd(mgr, tg);
    CHECK(!(f & g) == (!f | !g));
    CHECK(oracle::from_bdd(mgr, !(f & g), 6) ==
          oracle::combine(tf, tg, [](bool a, bool b) { return !(a && b); }));
  }
}

TEST_CASE("quantify") {
  DdManager mgr(5);
  auto x0 = mgr.var(0), x1 = mgr.var(1);
  std::vector<Var> v0{0};
  CHECK(mgr.exists(x0 & x1, v0) == x1);
  CHECK(mgr.forall(x0 | x1, v0) == x1);

  std::mt19937_64 rng(11);
  std::vector<Var> v01{0, 1};
  for (int i = 0; i < 50; ++i) {
    auto tf = oracle::random_table(5, rng);
    auto f = oracle::to_bdd(mgr, tf);
    auto cof = [&](bool a, bool b) {
      std::vector<bool> vals{a, b};
      std::unique_ptr<bool[]> raw(new bool[2]{a, b});
      return mgr.cofactor(f, v01, std::span<const bool>(raw.get(), 2));
    };
    auto expected = cof(false, false) | cof(false, true) | cof(true, false) | cof(true, true);
    CHECK(mgr.exists(f, v01) == expected);
  }
  std::vector<Var> bad{9};
  CHECK_THROWS_AS(mgr.exists(x0, bad), UsageError);
}

TEST_CASE("rename") {
  DdManager mgr(8);
  std::vector<std::pair<Var, Var>> m{{0, 3}};
  CHECK(mgr.rename(mgr.var(0), m) == mgr.var(3));
  auto f = mgr.var(1) ^ mgr.var(5);
  CHECK(mgr.rename(f, std::vector<std::pair<Var, Var>>{}) == f);

  std::vector<std::pair<Var, Var>> collide{{0, 3}, {1, 3}};
  CHECK_THROWS_AS(mgr.rename(f, collide), UsageError);
  // image collides with a support variable that stays in place
  std::vector<std::pair<Var, Var>> onto_fixed{{1, 5}};
  CHECK_THROWS_AS(mgr.rename(f, onto_fixed), UsageError);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) {
    std::vector<unsigned> perm(8);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::pair<Var, Var>> fwd, inv;
    for (unsigned v = 0; v < 8; ++v) {
      fwd.emplace_back(v, perm[v]);
      inv.emplace_back(perm[v], v);
    }
    auto tf = oracle::random_table(8, rng);
    auto g = oracle::to_bdd(mgr, tf);
    auto r = mgr.rename(g, fwd);
    CHECK(oracle::from_bdd(mgr, r, 8) == oracle::permute(tf, perm));
    CHECK(mgr.rename(r, inv) == g);
  }
}

TEST_CASE("sat_count") {
  DdManager mgr(10);
  auto three = iota_vars(3);
  CHECK(mgr.sat_count(mgr.bdd_true(), three) == 8);
  std::vector<Var> v01{0, 1};
  CHECK(mgr.sat_count(mgr.var(0) & mgr.var(1), v01) == 1);
  std::vector<Var> v0{0};
  CHECK_THROWS_AS(mgr.sat_count(mgr.var(0) & mgr.var(1), v0), UsageError);

  std::mt19937_64 rng(5);
  auto ten = iota_vars(10);
  for (int i = 0; i < 10; ++i) {
    auto tf = oracle::random_table(10, rng, 0.3);
    auto f = oracle::to_bdd(mgr, tf);
    CHECK(mgr.sat_count(f, ten) == oracle::count(tf));
  }
}

TEST_CASE("sat_count inclusion-exclusion") {
  DdManager mgr(7);
  std::mt19937_64 rng(9);
  auto sup = iota_vars(7);
  for (int i = 0; i < 40; ++i) {
    auto f = oracle::to_bdd(mgr, oracle::random_table(7, rng));
    auto g = oracle::to_bdd(mgr, oracle::random_table(7, rng));
    CHECK(mgr.sat_count(f | g, sup) + mgr.sat_count(f & g, sup) ==
          mgr.sat_count(f, sup) + mgr.sat_count(g, sup));
  }
}

TEST_CASE("for_each_sat enumerates in lexicographic order") {
  DdManager mgr(6);
  std::vector<Var> v01{0, 1};
  int calls = 0;
  mgr.for_each_sat(mgr.bdd_false(), v01, [&](std::span<const bool>) { ++calls; });
  CHECK(calls == 0);

  std::vector<std::vector<bool>> seen;
  mgr.for_each_sat(mgr.var(1), v01, [&](std::span<const bool> a) {
    seen.emplace_back(a.begin(), a.end());
  });
  CHECK(seen == std::vector<std::vector<bool>>{{false, true}, {true, true}});

  std::mt19937_64 rng(21);
  auto sup = iota_vars(6);
  for (int i = 0; i < 20; ++i) {
    auto f = oracle::to_bdd(mgr, oracle::random_table(6, rng));
    std::size_t n = 0;
    std::vector<bool> prev;
    bool ordered = true;
    mgr.for_each_sat(f, sup, [&](std::span<const bool> a) {
      std::vector<bool> cur(a.begin(), a.end());
      if (!prev.empty() && !(prev < cur))
        ordered = false;
      prev = cur;
      ++n;
    });
    CHECK(ordered);
    CHECK(n == static_cast<std::size_t>(mgr.sat_count(f, sup)));
  }
}

TEST_CASE("pick_min returns the lexicographically first assignment") {
  DdManager mgr(3);
  auto f = (mgr.var(0) & mgr.var(2)) | (mgr.var(1) & mgr.var(2));
  std::vector<Var> sup{0, 1, 2};
  CHECK(mgr.pick_min(f, sup) == std::vector<bool>{false, true, true});
  CHECK(mgr.pick_min(mgr.bdd_false(), sup).empty());
}

TEST_CASE("canonicity: equal functions share a root") {
  DdManager mgr(3);
  std::vector<Bdd> all;
  for (std::uint64_t fn = 0; fn < 256; ++fn)
    all.push_back(oracle::to_bdd(mgr, oracle::from_index(3, fn)));
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      CHECK_FALSE(all[i] == all[j]);
  auto a = mgr.var(0), b = mgr.var(1);
  CHECK(((a | b) & !(a & b)) == (a ^ b));
}

TEST_CASE("operation cache is transparent") {
  std::mt19937_64 rng(13);
  std::vector<oracle::TruthTable> tables;
  for (int i = 0; i < 20; ++i)
    tables.push_back(oracle::random_table(7, rng));
  auto run = [&](bool cache) {
    DdManager mgr(7);
    mgr.set_cache_enabled(cache);
    std::vector<oracle::TruthTable> out;
    std::vector<Var> q{1, 4};
    for (std::size_t i = 0; i + 1 < tables.size(); ++i) {
      auto f = oracle::to_bdd(mgr, tables[i]), g = oracle::to_bdd(mgr, tables[i + 1]);
      out.push_back(oracle::from_bdd(mgr, mgr.and_exists(f, g, q), 7));
      out.push_back(oracle::from_bdd(mgr, mgr.ite(f, g, !f), 7));
      out.push_back(oracle::from_bdd(mgr, f ^ g, 7));
    }
    return out;
  };
  CHECK(run(true) == run(false));
}

TEST_CASE("and_exists equals exists of conjunction") {
  DdManager mgr(8);
  std::mt19937_64 rng(17);
  std::vector<Var> q{0, 3, 5, 7};
  for (int i = 0; i < 40; ++i) {
    auto f = oracle::to_bdd(mgr, oracle::random_table(8, rng, 0.3));
    auto g = oracle::to_bdd(mgr, oracle::random_table(8, rng, 0.6));
    CHECK(mgr.and_exists(f, g, q) == mgr.exists(f & g, q));
  }
}

TEST_CASE("garbage collection keeps pinned roots intact") {
  DdManager::Options opt;
  opt.gc_threshold = 64;
  DdManager mgr(8, opt);
  std::mt19937_64 rng(23);
  auto tf = oracle::random_table(8, rng);
  Bdd kept = oracle::to_bdd(mgr, tf);
  for (int i = 0; i < 30; ++i)
    (void)oracle::to_bdd(mgr, oracle::random_table(8, rng));
  mgr.collect_garbage();
  CHECK(mgr.live_nodes() == mgr.node_count(kept));
  CHECK(oracle::from_bdd(mgr, kept, 8) == tf);
  // rebuilding after a sweep hits the same canonical node
  CHECK(oracle::to_bdd(mgr, tf) == kept);

  auto raw = kept.id();
  mgr.pin(raw);
  kept = mgr.bdd_false();
  mgr.collect_garbage();
  CHECK(mgr.live_nodes() > 0);
  mgr.unpin(raw);
  mgr.collect_garbage();
  CHECK(mgr.live_nodes() == 0);
}

TEST_CASE("transfer between managers with a variable map") {
  DdManager src(4), dst(10);
  auto f = (src.var(0) & src.var(1)) | src.var(3);
  std::vector<Var> map{9, 2, 5, 0};
  auto g = dst.transfer(f, map);
  CHECK(g == ((dst.var(9) & dst.var(2)) | dst.var(0)));
}

TEST_CASE("save/load round trip") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "ncsynth_test_dd";
  fs::create_directories(dir);

  dd::MetaBlock meta;
  meta.tau = 0.3;
  dd::VarBlock b;
  b.name = "pre";
  b.role = "pre";
  b.lb = {0.1, -2.0};
  b.ub = {1.7, 3.0};
  b.eta = {0.1, 1.0 / 3.0};
  b.vars = {{0, 1, 2}, {3, 4}};
  meta.blocks.push_back(b);
  meta.extra["kind"] = "test";

  {
    DdManager mgr(5);
    dd::save(mgr.bdd_true(), meta, dir / "true.bdd");
    DdManager other;
    auto [f, m] = dd::load(other, dir / "true.bdd");
    CHECK(f.is_true());
    CHECK(m == meta);
    CHECK(nlohmann::json(m).dump() == nlohmann::json(meta).dump());
  }
  {
    DdManager mgr(14);
    std::mt19937_64 rng(99);
    auto f = oracle::to_bdd(mgr, oracle::random_table(14, rng, 0.5));
    CHECK(mgr.node_count(f) >= 1000);
    dd::save(f, meta, dir / "big.bdd");
    DdManager other;
    auto [g, m] = dd::load(other, dir / "big.bdd");
    CHECK(other.node_count(g) == mgr.node_count(f));
    CHECK(dd::serialize(g, m) == dd::serialize(f, meta));
    auto sup = iota_vars(14);
    CHECK(other.sat_count(g, sup) == mgr.sat_count(f, sup));
  }
}

TEST_CASE("load rejects corrupt files") {
  DdManager mgr(2);
  dd::MetaBlock meta;
  std::string bytes = dd::serialize(mgr.var(0) & mgr.var(1), meta);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(dd::deserialize(mgr, bad_magic), FormatError);

  std::string bad_version = bytes;
  bad_version[4] = 7;
  CHECK_THROWS_WITH_AS(dd::deserialize(mgr, bad_version), doctest::Contains("version"),
                       FormatError);

  CHECK_THROWS_AS(dd::deserialize(mgr, bytes.substr(0, bytes.size() - 3)), FormatError);
}
