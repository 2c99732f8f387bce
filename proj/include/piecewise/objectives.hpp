#pragma once

// Training objectives over fully observed assignments of a single FactorGraph:
// exact log likelihood, the piecewise lower bound, its reweighted variant,
// node and per-factor pseudolikelihood, and a Gaussian prior. Each returns the
// value (higher is better) together with its gradient in parameter space.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "piecewise/core.hpp"
#include "piecewise/graph.hpp"
#include "piecewise/inference.hpp"

namespace piecewise {

/// Disjoint pieces of factor ids covering every factor, optionally weighted.
struct PiecePartition {
  std::vector<std::vector<int>> pieces;
  std::optional<Vector> weights;

  static PiecePartition per_factor(const FactorGraph& graph) {
    PiecePartition p;
    for (std::size_t f = 0; f < graph.num_factors(); ++f) p.pieces.push_back({static_cast<int>(f)});
    return p;
  }

  static PiecePartition single_piece(const FactorGraph& graph) {
    PiecePartition p;
    p.pieces.push_back(all_factors(graph));
    return p;
  }

  PiecePartition& with_uniform_weights() {
    weights = Vector(pieces.size(), 1.0 / static_cast<double>(pieces.size()));
    return *this;
  }

  void validate(const FactorGraph& graph) const {
    std::vector<char> covered(graph.num_factors(), 0);
    for (const auto& piece : pieces)
      for (int f : piece) {
        if (f < 0 || static_cast<std::size_t>(f) >= graph.num_factors())
          throw StructureError("partition references unknown factor " + std::to_string(f));
        if (covered[static_cast<std::size_t>(f)]++)
          throw StructureError("factor " + std::to_string(f) + " appears in more than one piece");
      }
    for (std::size_t f = 0; f < covered.size(); ++f)
      if (!covered[f]) throw StructureError("factor " + std::to_string(f) + " is not in any piece");
    if (weights) {
      if (weights->size() != pieces.size())
        throw StructureError("piece weights must have one entry per piece");
      double total = 0.0;
      for (double mu : *weights) {
        if (!(mu > 0.0) || !std::isfinite(mu)) throw StructureError("piece weights must be strictly positive");
        total += mu;
      }
      if (std::abs(total - 1.0) > 1e-12) throw StructureError("piece weights must sum to 1");
    }
  }
};

struct ObjectiveResult {
  double value = 0.0;
  Vector gradient;

  ObjectiveResult& operator+=(const ObjectiveResult& o) {
    value += o.value;
    if (gradient.empty()) gradient.assign(o.gradient.size(), 0.0);
    add_scaled(gradient, o.gradient);
    return *this;
  }
};

struct PriorSpec {
  double variance = 10.0;
};

using Dataset = std::vector<Assignment>;

namespace detail {

inline ObjectiveResult empirical_statistics(const FactorGraph& graph, std::span<const double> theta,
                                            std::span<const Assignment> data) {
  ObjectiveResult r;
  r.gradient.assign(graph.dimension(), 0.0);
  for (const Assignment& a : data) {
    graph.check_assignment(a);
    for (const Factor& f : graph.factors()) {
      const std::size_t k = f.stat_offset + graph.table_index(f.id, a);
      r.value += theta[k];
      r.gradient[k] += 1.0;
    }
  }
  return r;
}

inline void subtract_expectations(const FactorGraph& graph, int f, const Vector& marginal, double count,
                                  Vector& gradient) {
  const Factor& fac = graph.factor(f);
  for (std::size_t idx = 0; idx < fac.stat_count; ++idx) gradient[fac.stat_offset + idx] -= count * marginal[idx];
}

}  // namespace detail

/// Sum over the data of score(a) - A(theta), with gradient empirical minus expected statistics.
inline ObjectiveResult exact_loglik(const FactorGraph& graph, std::span<const double> theta,
                                    std::span<const Assignment> data, const InferenceOptions& inference = {}) {
  graph.check_parameters(theta);
  ObjectiveResult r = detail::empirical_statistics(graph, theta, data);
  if (data.empty()) return r;
  const double n = static_cast<double>(data.size());
  const InferenceResult inf = infer(graph, theta, inference);
  r.value -= n * inf.log_partition;
  for (const Factor& f : graph.factors())
    detail::subtract_expectations(graph, f.id, inf.marginals.factors[static_cast<std::size_t>(f.id)], n, r.gradient);
  return r;
}

/// Sum over the data of the piece scores minus the local log partition functions of the pieces.
inline ObjectiveResult piecewise_objective(const FactorGraph& graph, std::span<const double> theta,
                                           std::span<const Assignment> data, const PiecePartition& partition,
                                           std::size_t cap = kDefaultStateCap) {
  graph.check_parameters(theta);
  partition.validate(graph);
  ObjectiveResult r = detail::empirical_statistics(graph, theta, data);
  if (data.empty()) return r;
  const double n = static_cast<double>(data.size());
  for (const auto& piece : partition.pieces) {
    const auto vars = variables_of(graph, piece);
    const LocalEnumeration local = enumerate_local(graph, theta, vars, piece, 1.0, cap);
    r.value -= n * local.log_partition;
    for (std::size_t k = 0; k < piece.size(); ++k)
      detail::subtract_expectations(graph, piece[k], local.factor_marginals[k], n, r.gradient);
  }
  return r;
}

/// A(theta|_R / mu_R) over the full graph: the scaled local partition function of the
/// piece plus log|Y_s| for every variable the piece does not touch.
inline double restricted_log_partition(const FactorGraph& graph, std::span<const double> theta,
                                       std::span<const int> piece, double mu, LocalEnumeration* local_out = nullptr,
                                       std::size_t cap = kDefaultStateCap) {
  const auto vars = variables_of(graph, piece);
  LocalEnumeration local = enumerate_local(graph, theta, vars, piece, 1.0 / mu, cap);
  double a = local.log_partition;
  std::vector<char> in_piece(graph.num_variables(), 0);
  for (int v : vars) in_piece[static_cast<std::size_t>(v)] = 1;
  for (int v = 0; v < static_cast<int>(graph.num_variables()); ++v)
    if (!in_piece[static_cast<std::size_t>(v)]) a += std::log(static_cast<double>(graph.cardinality(v)));
  if (local_out) *local_out = std::move(local);
  return a;
}

/// Sum over the data of score(a) - sum_R mu_R A(theta|_R / mu_R).
inline ObjectiveResult reweighted_piecewise_objective(const FactorGraph& graph, std::span<const double> theta,
                                                      std::span<const Assignment> data,
                                                      const PiecePartition& partition,
                                                      std::size_t cap = kDefaultStateCap) {
  graph.check_parameters(theta);
  if (!partition.weights) throw StructureError("reweighted piecewise objective requires piece weights");
  partition.validate(graph);
  ObjectiveResult r = detail::empirical_statistics(graph, theta, data);
  if (data.empty()) return r;
  const double n = static_cast<double>(data.size());
  for (std::size_t p = 0; p < partition.pieces.size(); ++p) {
    const auto& piece = partition.pieces[p];
    const double mu = (*partition.weights)[p];
    LocalEnumeration local;
    r.value -= n * mu * restricted_log_partition(graph, theta, piece, mu, &local, cap);
    // d/dtheta [mu A(theta/mu)] is the expectation under the rescaled piece distribution.
    for (std::size_t k = 0; k < piece.size(); ++k)
      detail::subtract_expectations(graph, piece[k], local.factor_marginals[k], n, r.gradient);
  }
  return r;
}

/// Sum over the data and variables of log p(a_s | a_N(s)).
inline ObjectiveResult node_pseudolikelihood(const FactorGraph& graph, std::span<const double> theta,
                                             std::span<const Assignment> data) {
  graph.check_parameters(theta);
  ObjectiveResult r;
  r.gradient.assign(graph.dimension(), 0.0);
  Vector scores, probs;
  for (const Assignment& observed : data) {
    graph.check_assignment(observed);
    Assignment a = observed;
    for (int s = 0; s < static_cast<int>(graph.num_variables()); ++s) {
      const auto card = static_cast<std::size_t>(graph.cardinality(s));
      const auto& touching = graph.factors_of(s);
      scores.assign(card, 0.0);
      for (std::size_t x = 0; x < card; ++x) {
        a[static_cast<std::size_t>(s)] = static_cast<int>(x);
        for (int f : touching) scores[x] += theta[graph.factor(f).stat_offset + graph.table_index(f, a)];
      }
      probs.resize(card);
      const double lse = normalize_log(scores, probs);
      const auto truth = static_cast<std::size_t>(observed[static_cast<std::size_t>(s)]);
      r.value += scores[truth] - lse;
      for (std::size_t x = 0; x < card; ++x) {
        a[static_cast<std::size_t>(s)] = static_cast<int>(x);
        const double w = (x == truth ? 1.0 : 0.0) - probs[x];
        for (int f : touching) r.gradient[graph.factor(f).stat_offset + graph.table_index(f, a)] += w;
      }
      a[static_cast<std::size_t>(s)] = static_cast<int>(truth);
    }
  }
  return r;
}

/// Factors whose scope is not strictly contained in another factor's scope; among
/// factors with identical scopes only the lowest id is kept.
inline std::vector<int> maximal_factors(const FactorGraph& graph) {
  std::vector<std::vector<int>> sorted;
  for (const Factor& f : graph.factors()) {
    auto s = f.scope;
    std::sort(s.begin(), s.end());
    sorted.push_back(std::move(s));
  }
  std::vector<int> out;
  for (std::size_t f = 0; f < sorted.size(); ++f) {
    bool dominated = false;
    for (std::size_t g = 0; g < sorted.size() && !dominated; ++g) {
      if (g == f || sorted[g].size() < sorted[f].size()) continue;
      if (!std::includes(sorted[g].begin(), sorted[g].end(), sorted[f].begin(), sorted[f].end())) continue;
      dominated = sorted[g].size() > sorted[f].size() || g < f;
    }
    if (!dominated) out.push_back(static_cast<int>(f));
  }
  return out;
}

/// Sum over the data and maximal factors of log p(a_scope | a_neighbors), where the
/// neighbors are every variable sharing a factor with the scope.
inline ObjectiveResult edge_pseudolikelihood(const FactorGraph& graph, std::span<const double> theta,
                                             std::span<const Assignment> data) {
  graph.check_parameters(theta);
  ObjectiveResult r;
  r.gradient.assign(graph.dimension(), 0.0);
  const auto targets = maximal_factors(graph);
  std::vector<std::vector<int>> touching(graph.num_factors());
  for (int f : targets) {
    auto& t = touching[static_cast<std::size_t>(f)];
    for (int v : graph.factor(f).scope)
      for (int g : graph.factors_of(v)) t.push_back(g);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }
  Vector scores, probs;
  for (const Assignment& observed : data) {
    graph.check_assignment(observed);
    Assignment a = observed;
    for (int f : targets) {
      const Factor& fac = graph.factor(f);
      const auto& near = touching[static_cast<std::size_t>(f)];
      const std::size_t truth = graph.table_index(f, observed);
      auto set_scope = [&](const std::vector<int>& digits) {
        for (std::size_t j = 0; j < fac.scope.size(); ++j) a[static_cast<std::size_t>(fac.scope[j])] = digits[j];
      };
      scores.assign(fac.stat_count, 0.0);
      {
        MixedRadix counter(graph.scope_cardinalities(f));
        for (std::size_t c = 0; c < fac.stat_count; ++c, counter.next()) {
          set_scope(counter.digits());
          for (int g : near) scores[c] += theta[graph.factor(g).stat_offset + graph.table_index(g, a)];
        }
      }
      probs.resize(fac.stat_count);
      const double lse = normalize_log(scores, probs);
      r.value += scores[truth] - lse;
      MixedRadix counter(graph.scope_cardinalities(f));
      for (std::size_t c = 0; c < fac.stat_count; ++c, counter.next()) {
        set_scope(counter.digits());
        const double w = (c == truth ? 1.0 : 0.0) - probs[c];
        for (int g : near) r.gradient[graph.factor(g).stat_offset + graph.table_index(g, a)] += w;
      }
      for (int v : fac.scope) a[static_cast<std::size_t>(v)] = observed[static_cast<std::size_t>(v)];
    }
  }
  return r;
}

/// Adds the log density of an isotropic Gaussian prior (up to a constant). Apply once
/// to the total objective.
inline ObjectiveResult apply_gaussian_prior(ObjectiveResult result, std::span<const double> theta,
                                            const PriorSpec& prior) {
  if (!(prior.variance > 0.0)) throw std::invalid_argument("prior variance must be positive");
  if (result.gradient.size() != theta.size())
    throw DimensionError("gradient and parameter lengths differ");
  double sq = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    sq += theta[k] * theta[k];
    result.gradient[k] -= theta[k] / prior.variance;
  }
  result.value -= sq / (2.0 * prior.variance);
  return result;
}

struct BoundCheck {
  double lhs = 0.0;  // exact A(theta)
  double rhs = 0.0;  // the upper bound
  bool holds = false;
  double slack() const { return rhs - lhs; }
};

inline constexpr double kBoundTolerance = 1e-9;

/// Sum over pieces of the local log partition functions.
inline double piecewise_bound(const FactorGraph& graph, std::span<const double> theta,
                              const PiecePartition& partition, std::size_t cap = kDefaultStateCap) {
  double rhs = 0.0;
  for (const auto& piece : partition.pieces) {
    const auto vars = variables_of(graph, piece);
    rhs += enumerate_local(graph, theta, vars, piece, 1.0, cap).log_partition;
  }
  return rhs;
}

/// Sum over pieces of mu_R A(theta|_R / mu_R).
inline double reweighted_bound(const FactorGraph& graph, std::span<const double> theta,
                               const PiecePartition& partition, std::size_t cap = kDefaultStateCap) {
  if (!partition.weights) throw StructureError("reweighted bound requires piece weights");
  double rhs = 0.0;
  for (std::size_t p = 0; p < partition.pieces.size(); ++p) {
    const double mu = (*partition.weights)[p];
    rhs += mu * restricted_log_partition(graph, theta, partition.pieces[p], mu, nullptr, cap);
  }
  return rhs;
}

inline BoundCheck check_piecewise_bound(const FactorGraph& graph, std::span<const double> theta,
                                        const PiecePartition& partition, std::size_t cap = kDefaultStateCap) {
  graph.check_parameters(theta);
  partition.validate(graph);
  BoundCheck c;
  c.lhs = brute_force_log_partition(graph, theta, cap);
  c.rhs = piecewise_bound(graph, theta, partition, cap);
  c.holds = c.lhs <= c.rhs + kBoundTolerance;
  return c;
}

inline BoundCheck check_reweighted_bound(const FactorGraph& graph, std::span<const double> theta,
                                         const PiecePartition& partition, std::size_t cap = kDefaultStateCap) {
  graph.check_parameters(theta);
  partition.validate(graph);
  BoundCheck c;
  c.lhs = brute_force_log_partition(graph, theta, cap);
  c.rhs = reweighted_bound(graph, theta, partition, cap);
  c.holds = c.lhs <= c.rhs + kBoundTolerance;
  return c;
}

enum class ObjectiveKind { exact, piecewise, reweighted, pl_node, pl_edge };

inline std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::exact: return "exact";
    case ObjectiveKind::piecewise: return "piecewise";
    case ObjectiveKind::reweighted: return "pw-reweighted";
    case ObjectiveKind::pl_node: return "pl-node";
    case ObjectiveKind::pl_edge: return "pl-edge";
  }
  return "?";
}

inline ObjectiveKind parse_objective(const std::string& s) {
  for (auto k : {ObjectiveKind::exact, ObjectiveKind::piecewise, ObjectiveKind::reweighted, ObjectiveKind::pl_node,
                 ObjectiveKind::pl_edge})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

/// Evaluates the selected objective with its default pieces: one per factor, uniformly
/// weighted for the reweighted bound.
inline ObjectiveResult evaluate_objective(ObjectiveKind kind, const FactorGraph& graph, std::span<const double> theta,
                                          std::span<const Assignment> data, const InferenceOptions& inference = {}) {
  switch (kind) {
    case ObjectiveKind::exact: return exact_loglik(graph, theta, data, inference);
    case ObjectiveKind::piecewise:
      return piecewise_objective(graph, theta, data, PiecePartition::per_factor(graph), inference.state_cap);
    case ObjectiveKind::reweighted:
      return reweighted_piecewise_objective(graph, theta, data, PiecePartition::per_factor(graph).with_uniform_weights(),
                                            inference.state_cap);
    case ObjectiveKind::pl_node: return node_pseudolikelihood(graph, theta, data);
    case ObjectiveKind::pl_edge: return edge_pseudolikelihood(graph, theta, data);
  }
  throw std::invalid_argument("unknown objective kind");
}

}  // namespace piecewise
