#pragma once

// Test-only reference computations. These deliberately avoid the library's
// enumeration and indexing helpers so they can serve as independent oracles.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "piecewise/graph.hpp"
#include "piecewise/objectives.hpp"

namespace oracle {

using piecewise::Assignment;
using piecewise::FactorGraph;
using piecewise::Vector;

/// Row-major table row computed from scratch.
inline std::size_t row_of(const FactorGraph& g, int f, const Assignment& a) {
  const auto& scope = g.factor(f).scope;
  std::size_t row = 0;
  for (int v : scope) row = row * static_cast<std::size_t>(g.cardinality(v)) + static_cast<std::size_t>(a[static_cast<std::size_t>(v)]);
  return row;
}

inline double score(const FactorGraph& g, const Vector& theta, const Assignment& a) {
  double s = 0.0;
  for (std::size_t f = 0; f < g.num_factors(); ++f)
    s += theta[g.factor(static_cast<int>(f)).stat_offset + row_of(g, static_cast<int>(f), a)];
  return s;
}

/// Calls fn for every full assignment, by recursion over variables.
inline void for_each_assignment(const FactorGraph& g, const std::function<void(const Assignment&)>& fn) {
  Assignment a(g.num_variables(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t v) {
    if (v == a.size()) {
      fn(a);
      return;
    }
    for (int x = 0; x < g.cardinality(static_cast<int>(v)); ++x) {
      a[v] = x;
      rec(v + 1);
    }
  };
  rec(0);
}

/// log Z by naive accumulation of exp(score - shift), with shift the maximum score.
inline double log_partition(const FactorGraph& g, const Vector& theta) {
  double mx = -INFINITY;
  for_each_assignment(g, [&](const Assignment& a) { mx = std::max(mx, score(g, theta, a)); });
  double z = 0.0;
  for_each_assignment(g, [&](const Assignment& a) { z += std::exp(score(g, theta, a) - mx); });
  return mx + std::log(z);
}

struct Marginals {
  std::vector<Vector> variables;
  std::vector<Vector> factors;
};

inline Marginals marginals(const FactorGraph& g, const Vector& theta) {
  const double logz = log_partition(g, theta);
  Marginals m;
  for (std::size_t v = 0; v < g.num_variables(); ++v) m.variables.emplace_back(g.cardinality(static_cast<int>(v)), 0.0);
  for (const auto& f : g.factors()) m.factors.emplace_back(f.stat_count, 0.0);
  for_each_assignment(g, [&](const Assignment& a) {
    const double p = std::exp(score(g, theta, a) - logz);
    for (std::size_t v = 0; v < a.size(); ++v) m.variables[v][static_cast<std::size_t>(a[v])] += p;
    for (std::size_t f = 0; f < g.num_factors(); ++f) m.factors[f][row_of(g, static_cast<int>(f), a)] += p;
  });
  return m;
}

/// Highest-scoring assignment and its score (first in enumeration order on ties).
inline std::pair<Assignment, double> argmax(const FactorGraph& g, const Vector& theta) {
  Assignment best;
  double best_score = -INFINITY;
  for_each_assignment(g, [&](const Assignment& a) {
    const double s = score(g, theta, a);
    if (s > best_score) {
      best_score = s;
      best = a;
    }
  });
  return {best, best_score};
}

/// Central finite-difference gradient.
inline Vector finite_difference(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-5) {
  Vector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + h;
    const double up = f(x);
    x[k] = orig - h;
    const double down = f(x);
    x[k] = orig;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

/// True when every component agrees within rel relative error or abs absolute error.
inline bool gradients_match(const Vector& analytic, const Vector& numeric, double rel = 1e-5, double abs = 1e-7) {
  if (analytic.size() != numeric.size()) return false;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double d = std::abs(analytic[k] - numeric[k]);
    if (d > abs && d > rel * std::max(std::abs(analytic[k]), std::abs(numeric[k]))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Random instances

struct Instance {
  FactorGraph graph;
  Vector theta;
};

inline Vector random_theta(std::size_t d, std::mt19937_64& rng, double range = 2.0) {
  std::uniform_real_distribution<double> u(-range, range);
  Vector t(d);
  for (double& x : t) x = u(rng);
  return t;
}

inline std::vector<int> random_cards(int n, int max_card, std::mt19937_64& rng, int min_card = 1) {
  std::uniform_int_distribution<int> c(min_card, max_card);
  std::vector<int> cards(static_cast<std::size_t>(n));
  for (int& x : cards) x = c(rng);
  return cards;
}

/// Random forest-shaped factor graph: each variable after the first optionally attaches
/// to one earlier variable by a pairwise factor, occasionally through a third variable
/// (a ternary factor), plus random unary factors.
inline FactorGraph random_tree(std::mt19937_64& rng, int max_vars = 8, int max_card = 3, bool forest = true) {
  std::uniform_int_distribution<int> nv(1, max_vars);
  const int n = nv(rng);
  const auto cards = random_cards(n, max_card, rng);
  std::vector<std::vector<int>> scopes;
  std::bernoulli_distribution coin(0.5), rare(0.15), skip(forest ? 0.15 : 0.0);
  int v = 1;
  while (v < n) {
    std::uniform_int_distribution<int> parent(0, v - 1);
    const int p = parent(rng);
    if (skip(rng)) {
      ++v;
      continue;
    }
    if (v + 1 < n && rare(rng)) {
      scopes.push_back({p, v, v + 1});
      v += 2;
    } else {
      scopes.push_back({p, v});
      ++v;
    }
  }
  for (int u = 0; u < n; ++u)
    if (coin(rng)) scopes.push_back({u});
  return FactorGraph(cards, scopes);
}

/// Random factor graph that may contain cycles: random unary, pairwise and
/// occasional ternary factors over up to max_vars variables. With cover set, every
/// variable not reached by a random factor gets a unary factor.
inline FactorGraph random_graph(std::mt19937_64& rng, int max_vars = 8, int max_card = 3, int min_vars = 1,
                                bool cover = true) {
  std::uniform_int_distribution<int> nv(min_vars, max_vars);
  const int n = nv(rng);
  const auto cards = random_cards(n, max_card, rng);
  std::vector<std::vector<int>> scopes;
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_int_distribution<int> nf(1, 2 * n);
  const int factors = nf(rng);
  std::uniform_int_distribution<int> arity(1, 10);
  for (int k = 0; k < factors; ++k) {
    const int a = arity(rng);
    const int want = a <= 3 ? 1 : (a <= 9 ? 2 : 3);
    if (want > n) {
      scopes.push_back({pick(rng)});
      continue;
    }
    std::vector<int> scope;
    while (static_cast<int>(scope.size()) < want) {
      const int x = pick(rng);
      if (std::find(scope.begin(), scope.end(), x) == scope.end()) scope.push_back(x);
    }
    scopes.push_back(scope);
  }
  if (cover) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto& sc : scopes)
      for (int v : sc) seen[static_cast<std::size_t>(v)] = 1;
    for (int v = 0; v < n; ++v)
      if (!seen[static_cast<std::size_t>(v)]) scopes.push_back({v});
  }
  return FactorGraph(cards, scopes);
}

/// Random disjoint partition of all factors into nonempty pieces.
inline piecewise::PiecePartition random_partition(const FactorGraph& g, std::mt19937_64& rng) {
  const int nf = static_cast<int>(g.num_factors());
  std::uniform_int_distribution<int> k(1, std::max(1, nf));
  const int pieces = k(rng);
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(pieces));
  std::uniform_int_distribution<int> b(0, pieces - 1);
  for (int f = 0; f < nf; ++f) buckets[static_cast<std::size_t>(b(rng))].push_back(f);
  piecewise::PiecePartition p;
  for (auto& bucket : buckets)
    if (!bucket.empty()) p.pieces.push_back(std::move(bucket));
  if (p.pieces.empty()) p.pieces.push_back({});
  return p;
}

inline piecewise::Vector random_weights(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vector w(n);
  double total = 0.0;
  for (double& x : w) total += (x = u(rng));
  for (double& x : w) x /= total;
  // Force the sum to exactly 1 within rounding by fixing up the last entry.
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) rest -= w[i];
  w.back() = rest;
  return w;
}

inline Assignment random_assignment(const FactorGraph& g, std::mt19937_64& rng) {
  Assignment a(g.num_variables());
  for (std::size_t v = 0; v < a.size(); ++v) {
    std::uniform_int_distribution<int> x(0, g.cardinality(static_cast<int>(v)) - 1);
    a[v] = x(rng);
  }
  return a;
}

}  // namespace oracle
