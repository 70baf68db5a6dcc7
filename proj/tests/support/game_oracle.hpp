// Explicit-state game solver used as an oracle: the same fixed points as the
// symbolic solvers, evaluated over plain vectors of successor sets.
#pragma once

#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Set = std::vector<bool>;

struct Game {
  unsigned n = 0, m = 0;
  std::vector<std::vector<std::vector<unsigned>>> succ; // succ[x][u]

  // pairs (x, u) with successors, all inside z
  [[nodiscard]] std::vector<Set> pre(const Set &z) const {
    std::vector<Set> p(n, Set(m, false));
    for (unsigned x = 0; x < n; ++x)
      for (unsigned u = 0; u < m; ++u) {
        bool ok = !succ[x][u].empty();
        for (unsigned y : succ[x][u])
          ok = ok && z[y];
        p[x][u] = ok;
      }
    return p;
  }
};

inline Game random_game(std::mt19937_64 &rng, unsigned max_n, unsigned max_m) {
  Game g;
  g.n = std::uniform_int_distribution<unsigned>(1, max_n)(rng);
  g.m = std::uniform_int_distribution<unsigned>(1, max_m)(rng);
  std::uniform_int_distribution<unsigned> pick(0, g.n - 1), fan(0, 3);
  g.succ.assign(g.n, std::vector<std::vector<unsigned>>(g.m));
  for (unsigned x = 0; x < g.n; ++x)
    for (unsigned u = 0; u < g.m; ++u) {
      unsigned k = fan(rng); // 0 = blocking pair
      for (unsigned i = 0; i < k; ++i) {
        unsigned y = pick(rng);
        bool dup = false;
        for (unsigned e : g.succ[x][u])
          dup = dup || e == y;
        if (!dup)
          g.succ[x][u].push_back(y);
      }
    }
  return g;
}

inline Set random_set(std::mt19937_64 &rng, unsigned n, double p) {
  std::bernoulli_distribution coin(p);
  Set s(n);
  for (unsigned i = 0; i < n; ++i)
    s[i] = coin(rng);
  return s;
}

inline Set proj(const std::vector<Set> &pairs) {
  Set s(pairs.size(), false);
  for (std::size_t x = 0; x < pairs.size(); ++x)
    for (bool b : pairs[x])
      s[x] = s[x] || b;
  return s;
}

inline Set safety(const Game &g, const Set &safe) {
  Set z = safe;
  for (;;) {
    auto p = g.pre(z);
    Set next(g.n);
    for (unsigned x = 0; x < g.n; ++x)
      next[x] = safe[x] && proj(p)[x];
    if (next == z)
      return z;
    z = next;
  }
}

/// States from which target pairs are reachable; `stay` limits intermediate
/// states. Also returns the first-entry rank of every winning state.
inline Set reach(const Game &g, const std::vector<Set> &target_pairs, const Set &stay,
                 std::vector<int> *rank = nullptr) {
  Set w = proj(target_pairs);
  if (rank) {
    rank->assign(g.n, -1);
    for (unsigned x = 0; x < g.n; ++x)
      if (w[x])
        (*rank)[x] = 0;
  }
  for (int k = 1;; ++k) {
    auto p = g.pre(w);
    Set next = w;
    for (unsigned x = 0; x < g.n; ++x)
      if (!w[x] && stay[x] && proj(p)[x]) {
        next[x] = true;
        if (rank)
          (*rank)[x] = k;
      }
    if (next == w)
      return w;
    w = next;
  }
}

inline std::vector<Set> all_pairs_of(const Game &g, const Set &states) {
  std::vector<Set> p(g.n, Set(g.m, false));
  for (unsigned x = 0; x < g.n; ++x)
    for (unsigned u = 0; u < g.m; ++u)
      p[x][u] = states[x];
  return p;
}

inline Set reach_states(const Game &g, const Set &target) {
  return reach(g, all_pairs_of(g, target), Set(g.n, true));
}

inline Set persistence(const Game &g, const Set &safe) {
  Set x(g.n, false);
  for (;;) {
    auto px = g.pre(x);
    Set y(g.n, true);
    for (;;) {
      auto py = g.pre(y);
      Set next(g.n, false);
      for (unsigned s = 0; s < g.n; ++s)
        for (unsigned u = 0; u < g.m; ++u)
          next[s] = next[s] || (safe[s] && py[s][u]) || px[s][u];
      if (next == y)
        break;
      y = next;
    }
    if (y == x)
      return x;
    x = y;
  }
}

inline Set recurrence(const Game &g, const Set &target) {
  Set y(g.n, true);
  for (;;) {
    auto py = g.pre(y);
    std::vector<Set> tp(g.n, Set(g.m, false));
    for (unsigned s = 0; s < g.n; ++s)
      for (unsigned u = 0; u < g.m; ++u)
        tp[s][u] = target[s] && py[s][u];
    Set next = reach(g, tp, Set(g.n, true));
    if (next == y)
      return y;
    y = next;
  }
}

inline Set gen_buchi(const Game &g, const std::vector<Set> &targets, const Set &safe) {
  Set y = safe;
  for (;;) {
    auto py = g.pre(y);
    Set next = y;
    for (const auto &t : targets) {
      std::vector<Set> tp(g.n, Set(g.m, false));
      for (unsigned s = 0; s < g.n; ++s)
        for (unsigned u = 0; u < g.m; ++u)
          tp[s][u] = t[s] && safe[s] && py[s][u];
      Set w = reach(g, tp, safe);
      for (unsigned s = 0; s < g.n; ++s)
        next[s] = next[s] && w[s];
    }
    if (next == y)
      return y;
    y = next;
  }
}

/// True when the graph on `nodes` with edges `edge(x, y)` has a cycle.
inline bool has_cycle(unsigned n, const Set &nodes, const std::function<bool(unsigned, unsigned)> &edge) {
  std::vector<int> color(n, 0);
  std::function<bool(unsigned)> dfs = [&](unsigned x) {
    color[x] = 1;
    for (unsigned y = 0; y < n; ++y) {
      if (!nodes[y] || !edge(x, y))
        continue;
      if (color[y] == 1)
        return true;
      if (color[y] == 0 && dfs(y))
        return true;
    }
    color[x] = 2;
    return false;
  };
  for (unsigned x = 0; x < n; ++x)
    if (nodes[x] && color[x] == 0 && dfs(x))
      return true;
  return false;
}

/// True when x can return to itself along edges inside `nodes`.
inline bool on_cycle(unsigned n, const Set &nodes, const std::function<bool(unsigned, unsigned)> &edge,
                     unsigned x) {
  std::vector<bool> seen(n, false);
  std::vector<unsigned> stack{x};
  while (!stack.empty()) {
    unsigned a = stack.back();
    stack.pop_back();
    for (unsigned b = 0; b < n; ++b) {
      if (!nodes[b] || !edge(a, b))
        continue;
      if (b == x)
        return true;
      if (!seen[b]) {
        seen[b] = true;
        stack.push_back(b);
      }
    }
  }
  return false;
}

} // namespace oracle
