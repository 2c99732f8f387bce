// Exact log partition of a small binary grid against the per-edge piecewise bound
// and the reweighted bound, as the coupling strength grows.

#include <cstdio>
#include <random>

#include "piecewise/piecewise.hpp"

using namespace piecewise;

int main() {
  constexpr int side = 3;
  std::vector<std::vector<int>> scopes;
  auto id = [](int r, int c) { return r * side + c; };
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      scopes.push_back({id(r, c)});
      if (c + 1 < side) scopes.push_back({id(r, c), id(r, c + 1)});
      if (r + 1 < side) scopes.push_back({id(r, c), id(r + 1, c)});
    }
  const FactorGraph g(std::vector<int>(side * side, 2), scopes);

  // Each unary factor joins the piece of one incident edge, so every piece is a small tree.
  PiecePartition pieces;
  std::vector<int> home(side * side, -1);
  for (int f = 0; f < static_cast<int>(g.num_factors()); ++f)
    if (g.factor(f).scope.size() == 2) {
      pieces.pieces.push_back({f});
      for (int v : g.factor(f).scope)
        if (home[static_cast<std::size_t>(v)] < 0) home[static_cast<std::size_t>(v)] = static_cast<int>(pieces.pieces.size()) - 1;
    }
  for (int f = 0; f < static_cast<int>(g.num_factors()); ++f)
    if (g.factor(f).scope.size() == 1)
      pieces.pieces[static_cast<std::size_t>(home[static_cast<std::size_t>(g.factor(f).scope[0])])].push_back(f);
  pieces.with_uniform_weights();

  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::printf("%8s %12s %12s %12s\n", "coupling", "exact", "piecewise", "reweighted");
  for (double coupling : {0.0, 0.25, 0.5, 1.0, 2.0}) {
    Vector theta(g.dimension(), 0.0);
    for (const auto& f : g.factors())
      for (std::size_t k = 0; k < f.stat_count; ++k)
        theta[f.stat_offset + k] = noise(rng) + (f.scope.size() == 2 && (k == 0 || k == 3) ? coupling : 0.0);
    std::printf("%8.2f %12.5f %12.5f %12.5f\n", coupling, brute_force_log_partition(g, theta),
                piecewise_bound(g, theta, pieces), reweighted_bound(g, theta, pieces));
  }
}
