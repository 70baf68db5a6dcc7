// Explicit-state construction of the delayed-loop model, written directly
// from the register semantics (no BDDs). States and transitions are packed
// into 64-bit keys so large relations compare as sorted vectors. Delays
// must be at most 3.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

struct Base {
  unsigned nx = 0, nu = 0;
  std::set<std::tuple<unsigned, unsigned, unsigned>> trans; // (x, u, x')
  std::vector<unsigned> init;
};

struct Bounds {
  unsigned sc_min, sc_max, ca_min, ca_max;
};

struct State {
  std::vector<int> x; // -1 = dummy
  std::vector<unsigned> u, nsc, nca;
};

class Packer {
public:
  explicit Packer(const Base &b) {
    xbits_ = width(b.nx + 1);
    ubits_ = width(b.nu);
  }
  std::uint64_t pack(const State &s) const {
    std::uint64_t k = 0;
    unsigned sh = 0;
    auto put = [&](std::uint64_t v, unsigned w) {
      k |= v << sh;
      sh += w;
    };
    for (int x : s.x)
      put(std::uint64_t(x + 1), xbits_);
    for (unsigned u : s.u)
      put(u, ubits_);
    for (unsigned d : s.nsc)
      put(d, 2);
    for (unsigned d : s.nca)
      put(d, 2);
    return k;
  }
  std::uint64_t pack(const State &s, unsigned u, const State &t) const {
    // pre, input and post packed side by side; widths checked by the caller
    std::uint64_t a = pack(s), b = pack(t);
    return (a * 8 + u) * (std::uint64_t{1} << bits(s)) + b;
  }
  unsigned bits(const State &s) const {
    return unsigned(s.x.size()) * xbits_ + unsigned(s.u.size()) * ubits_ +
           2 * unsigned(s.nsc.size() + s.nca.size());
  }

private:
  static unsigned width(unsigned n) {
    unsigned w = 0;
    while ((1u << w) < n)
      ++w;
    return std::max(w, 1u);
  }
  unsigned xbits_, ubits_;
};

inline void for_each_state(const Base &b, const Bounds &d, const std::function<void(const State &)> &f) {
  State s;
  s.x.assign(d.sc_max, -1);
  s.u.assign(d.ca_max, 0);
  s.nsc.assign(d.sc_max, d.sc_min);
  s.nca.assign(d.ca_max, d.ca_min);
  // odometer over all registers
  for (;;) {
    f(s);
    std::size_t i = 0;
    for (; i < s.x.size(); ++i) {
      if (s.x[i] + 1 < int(b.nx)) {
        ++s.x[i];
        break;
      }
      s.x[i] = -1;
    }
    if (i < s.x.size())
      continue;
    for (i = 0; i < s.u.size(); ++i) {
      if (s.u[i] + 1 < b.nu) {
        ++s.u[i];
        break;
      }
      s.u[i] = 0;
    }
    if (i < s.u.size())
      continue;
    for (i = 0; i < s.nsc.size(); ++i) {
      if (s.nsc[i] < d.sc_max) {
        ++s.nsc[i];
        break;
      }
      s.nsc[i] = d.sc_min;
    }
    if (i < s.nsc.size())
      continue;
    for (i = 0; i < s.nca.size(); ++i) {
      if (s.nca[i] < d.ca_max) {
        ++s.nca[i];
        break;
      }
      s.nca[i] = d.ca_min;
    }
    if (i < s.nca.size())
      continue;
    return;
  }
}

/// Index (0-based) of the buffered input that drives the plant: the newest
/// input whose delay has elapsed. Input u_{i+1} has been in flight i+1 steps.
inline unsigned applied_slot(const State &s) {
  for (unsigned i = 0; i < s.nca.size(); ++i)
    if (s.nca[i] <= i + 1)
      return i;
  return unsigned(s.nca.size()) - 1;
}

inline std::uint64_t count_states(const Base &b, const Bounds &d) {
  std::uint64_t n = 1;
  for (unsigned i = 0; i < d.sc_max; ++i)
    n *= (b.nx + 1) * (d.sc_max - d.sc_min + 1);
  for (unsigned i = 0; i < d.ca_max; ++i)
    n *= b.nu * (d.ca_max - d.ca_min + 1);
  return n;
}

inline std::vector<std::uint64_t> transitions(const Base &b, const Bounds &d) {
  Packer p(b);
  std::vector<std::uint64_t> out;
  for_each_state(b, d, [&](const State &s) {
    if (s.x[0] < 0)
      return;
    unsigned slot = applied_slot(s);
    for (unsigned u = 0; u < b.nu; ++u)
      for (const auto &[x, v, xp] : b.trans) {
        if (int(x) != s.x[0] || v != s.u[slot])
          continue;
        State t;
        t.x.push_back(int(xp));
        t.x.insert(t.x.end(), s.x.begin(), s.x.end() - 1);
        t.u.push_back(u);
        t.u.insert(t.u.end(), s.u.begin(), s.u.end() - 1);
        for (unsigned ns = d.sc_min; ns <= d.sc_max; ++ns)
          for (unsigned na = d.ca_min; na <= d.ca_max; ++na) {
            t.nsc.assign(1, ns);
            t.nsc.insert(t.nsc.end(), s.nsc.begin(), s.nsc.end() - 1);
            t.nca.assign(1, na);
            t.nca.insert(t.nca.end(), s.nca.begin(), s.nca.end() - 1);
            out.push_back(p.pack(s, u, t));
          }
      }
  });
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::uint64_t> initial_states(const Base &b, const Bounds &d) {
  Packer p(b);
  std::vector<std::uint64_t> out;
  for (unsigned x0 : b.init)
    for (unsigned u0 = 0; u0 < b.nu; ++u0) {
      State s;
      s.x.assign(d.sc_max, -1);
      s.x[0] = int(x0);
      s.u.assign(d.ca_max, u0);
      s.nsc.assign(d.sc_max, d.sc_max);
      s.nca.assign(d.ca_max, d.ca_max);
      out.push_back(p.pack(s));
    }
  std::sort(out.begin(), out.end());
  return out;
}

inline Base random_base(std::mt19937_64 &rng, unsigned max_x, unsigned max_u, double density) {
  Base b;
  b.nx = std::uniform_int_distribution<unsigned>(1, max_x)(rng);
  b.nu = std::uniform_int_distribution<unsigned>(1, max_u)(rng);
  std::bernoulli_distribution coin(density);
  for (unsigned x = 0; x < b.nx; ++x)
    for (unsigned u = 0; u < b.nu; ++u)
      for (unsigned y = 0; y < b.nx; ++y)
        if (coin(rng))
          b.trans.emplace(x, u, y);
  for (unsigned x = 0; x < b.nx; ++x)
    if (coin(rng))
      b.init.push_back(x);
  return b;
}

} // namespace oracle
