#pragma once

// Discrete factor graphs with tabular (indicator) sufficient statistics.
//
// Every factor owns a contiguous block of the global parameter vector, one
// entry per joint configuration of its scope. Tables are row-major over the
// scope: the last scope variable varies fastest.

#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "piecewise/core.hpp"

namespace piecewise {

using Assignment = std::vector<int>;

struct VariableSpec {
  int id = 0;
  int cardinality = 1;
};

struct Factor {
  int id = 0;
  std::vector<int> scope;
  std::size_t stat_offset = 0;
  std::size_t stat_count = 0;
  std::vector<std::size_t> strides;  // per scope position
};

/// Mixed-radix counter over a list of domain sizes, last digit fastest.
class MixedRadix {
 public:
  explicit MixedRadix(std::vector<int> radices)
      : radices_(std::move(radices)), digits_(radices_.size(), 0) {}

  const std::vector<int>& digits() const { return digits_; }

  /// Advances to the next configuration; returns false after wrapping around.
  bool next() {
    for (std::size_t i = digits_.size(); i-- > 0;) {
      if (++digits_[i] < radices_[i]) return true;
      digits_[i] = 0;
    }
    return false;
  }

 private:
  std::vector<int> radices_;
  std::vector<int> digits_;
};

class FactorGraph {
 public:
  FactorGraph() = default;

  FactorGraph(const std::vector<int>& cardinalities, const std::vector<std::vector<int>>& scopes) {
    if (cardinalities.empty()) throw StructureError("factor graph needs at least one variable");
    variables_.reserve(cardinalities.size());
    for (std::size_t v = 0; v < cardinalities.size(); ++v) {
      if (cardinalities[v] < 1)
        throw StructureError("variable " + std::to_string(v) + " has cardinality < 1");
      variables_.push_back({static_cast<int>(v), cardinalities[v]});
    }
    factors_of_.resize(variables_.size());
    std::size_t offset = 0;
    for (std::size_t f = 0; f < scopes.size(); ++f) {
      const auto& scope = scopes[f];
      if (scope.empty()) throw StructureError("factor " + std::to_string(f) + " has empty scope");
      std::set<int> seen;
      for (int v : scope) {
        if (v < 0 || static_cast<std::size_t>(v) >= variables_.size())
          throw StructureError("factor " + std::to_string(f) + " references missing variable " +
                               std::to_string(v));
        if (!seen.insert(v).second)
          throw StructureError("factor " + std::to_string(f) + " repeats variable " +
                               std::to_string(v));
      }
      Factor fac;
      fac.id = static_cast<int>(f);
      fac.scope = scope;
      fac.stat_offset = offset;
      fac.strides.assign(scope.size(), 1);
      std::size_t count = 1;
      for (std::size_t i = scope.size(); i-- > 0;) {
        fac.strides[i] = count;
        count *= static_cast<std::size_t>(variables_[static_cast<std::size_t>(scope[i])].cardinality);
      }
      fac.stat_count = count;
      offset += count;
      for (int v : scope) factors_of_[static_cast<std::size_t>(v)].push_back(fac.id);
      factors_.push_back(std::move(fac));
    }
    dimension_ = offset;
  }

  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_factors() const { return factors_.size(); }
  std::size_t dimension() const { return dimension_; }

  int cardinality(int v) const { return variables_.at(static_cast<std::size_t>(v)).cardinality; }
  const std::vector<VariableSpec>& variables() const { return variables_; }
  const std::vector<Factor>& factors() const { return factors_; }
  const Factor& factor(int f) const { return factors_.at(static_cast<std::size_t>(f)); }

  /// Ids of the factors whose scope contains variable v.
  const std::vector<int>& factors_of(int v) const {
    return factors_of_.at(static_cast<std::size_t>(v));
  }

  std::vector<int> cardinalities(std::span<const int> vars) const {
    std::vector<int> out;
    out.reserve(vars.size());
    for (int v : vars) out.push_back(cardinality(v));
    return out;
  }

  std::vector<int> scope_cardinalities(int f) const { return cardinalities(factor(f).scope); }

  /// Row of factor f's table selected by a full assignment.
  std::size_t table_index(int f, std::span<const int> assignment) const {
    const Factor& fac = factors_[static_cast<std::size_t>(f)];
    std::size_t idx = 0;
    for (std::size_t i = 0; i < fac.scope.size(); ++i)
      idx += fac.strides[i] * static_cast<std::size_t>(assignment[static_cast<std::size_t>(fac.scope[i])]);
    return idx;
  }

  void check_assignment(std::span<const int> a) const {
    if (a.size() != variables_.size())
      throw DimensionError("assignment has " + std::to_string(a.size()) + " entries, graph has " +
                           std::to_string(variables_.size()) + " variables");
    for (std::size_t v = 0; v < a.size(); ++v)
      if (a[v] < 0 || a[v] >= variables_[v].cardinality)
        throw DimensionError("assignment value out of domain for variable " + std::to_string(v));
  }

  void check_parameters(std::span<const double> theta) const {
    if (theta.size() != dimension_)
      throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                           ", graph dimension is " + std::to_string(dimension_));
  }

 private:
  std::vector<VariableSpec> variables_;
  std::vector<Factor> factors_;
  std::vector<std::vector<int>> factors_of_;
  std::size_t dimension_ = 0;
};

inline FactorGraph build_graph(const std::vector<int>& cardinalities,
                               const std::vector<std::vector<int>>& factor_scopes) {
  return FactorGraph(cardinalities, factor_scopes);
}

/// Unnormalized log probability: the sum of the table entries selected by `a`.
inline double assignment_log_score(const FactorGraph& graph, std::span<const double> theta,
                                   std::span<const int> a) {
  graph.check_parameters(theta);
  graph.check_assignment(a);
  double s = 0.0;
  for (const Factor& f : graph.factors()) s += theta[f.stat_offset + graph.table_index(f.id, a)];
  return s;
}

/// Copy of theta with every statistic outside the given factors zeroed.
inline Vector restrict_parameters(std::span<const double> theta, std::span<const int> piece,
                                  const FactorGraph& graph) {
  graph.check_parameters(theta);
  Vector out(theta.size(), 0.0);
  for (int f : piece) {
    if (f < 0 || static_cast<std::size_t>(f) >= graph.num_factors())
      throw StructureError("unknown factor id " + std::to_string(f));
    const Factor& fac = graph.factor(f);
    std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(fac.stat_offset), fac.stat_count,
                out.begin() + static_cast<std::ptrdiff_t>(fac.stat_offset));
  }
  return out;
}

/// Number of joint states over `vars`; throws CapacityError once it exceeds `cap`.
inline std::size_t state_space_size(const FactorGraph& graph, std::span<const int> vars,
                                    std::size_t cap) {
  std::size_t n = 1;
  for (int v : vars) {
    n *= static_cast<std::size_t>(graph.cardinality(v));
    if (n > cap)
      throw CapacityError("state space over " + std::to_string(vars.size()) +
                          " variables exceeds cap of " + std::to_string(cap));
  }
  return n;
}

/// Sorted union of the scopes of the given factors.
inline std::vector<int> variables_of(const FactorGraph& graph, std::span<const int> factors) {
  std::set<int> vars;
  for (int f : factors)
    for (int v : graph.factor(f).scope) vars.insert(v);
  return {vars.begin(), vars.end()};
}

/// True if the bipartite variable/factor incidence graph has no cycle.
inline bool is_acyclic(const FactorGraph& graph) {
  const std::size_t nv = graph.num_variables();
  std::vector<std::size_t> parent(nv + graph.num_factors());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Factor& f : graph.factors()) {
    const std::size_t fnode = nv + static_cast<std::size_t>(f.id);
    for (int v : f.scope) {
      const std::size_t a = find(fnode);
      const std::size_t b = find(static_cast<std::size_t>(v));
      if (a == b) return false;
      parent[a] = b;
    }
  }
  return true;
}

}  // namespace piecewise
