#pragma once

// Log partition functions, marginals and MAP assignments over FactorGraphs.
//
// All messages live in log space. Exact routines: enumeration (capped) and
// two-pass message passing on forests. Approximate: loopy sum-product with a
// Bethe estimate of the log partition function, and loopy max-product.

#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "piecewise/core.hpp"
#include "piecewise/graph.hpp"

namespace piecewise {

struct MarginalSet {
  std::vector<Vector> variables;  // indexed by variable id
  std::vector<Vector> factors;    // indexed by factor id, table order
};

enum class BpSchedule { synchronous, sequential };

struct BpSettings {
  int max_iterations = 100;
  double convergence_tolerance = 1e-5;  // on the max absolute message change in one sweep
  double damping = 0.0;
  BpSchedule schedule = BpSchedule::sequential;

  void validate() const {
    if (max_iterations < 1) throw std::invalid_argument("BP max_iterations must be >= 1");
    if (!(convergence_tolerance > 0)) throw std::invalid_argument("BP tolerance must be > 0");
    if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("BP damping must be in [0,1)");
  }
};

struct InferenceResult {
  MarginalSet marginals;
  double log_partition = 0.0;
  bool converged = true;
  int iterations = 0;
};

// ---------------------------------------------------------------------------
// Enumeration

/// Exact result of enumerating the joint states of `vars` under the listed factors,
/// with every factor's log-potential multiplied by `scale`.
struct LocalEnumeration {
  double log_partition = 0.0;
  std::vector<Vector> factor_marginals;    // parallel to the factor list
  std::vector<Vector> variable_marginals;  // parallel to the variable list
};

/// `vars` must contain every variable in the scopes of `factors`.
inline LocalEnumeration enumerate_local(const FactorGraph& graph, std::span<const double> theta,
                                        std::span<const int> vars, std::span<const int> factors,
                                        double scale = 1.0, std::size_t cap = kDefaultStateCap) {
  const std::size_t states = state_space_size(graph, vars, cap);
  Assignment full(graph.num_variables(), 0);
  Vector logw(states);

  auto load = [&](const std::vector<int>& digits) {
    for (std::size_t i = 0; i < vars.size(); ++i) full[static_cast<std::size_t>(vars[i])] = digits[i];
  };

  {
    MixedRadix counter(graph.cardinalities(vars));
    for (std::size_t s = 0; s < states; ++s, counter.next()) {
      load(counter.digits());
      double w = 0.0;
      for (int f : factors) w += theta[graph.factor(f).stat_offset + graph.table_index(f, full)];
      logw[s] = scale * w;
    }
  }

  LocalEnumeration out;
  out.log_partition = log_sum_exp(logw);
  out.factor_marginals.reserve(factors.size());
  for (int f : factors) out.factor_marginals.emplace_back(graph.factor(f).stat_count, 0.0);
  out.variable_marginals.reserve(vars.size());
  for (int v : vars) out.variable_marginals.emplace_back(static_cast<std::size_t>(graph.cardinality(v)), 0.0);

  MixedRadix counter(graph.cardinalities(vars));
  for (std::size_t s = 0; s < states; ++s, counter.next()) {
    const double p = std::exp(logw[s] - out.log_partition);
    load(counter.digits());
    for (std::size_t k = 0; k < factors.size(); ++k)
      out.factor_marginals[k][graph.table_index(factors[k], full)] += p;
    for (std::size_t i = 0; i < vars.size(); ++i)
      out.variable_marginals[i][static_cast<std::size_t>(counter.digits()[i])] += p;
  }
  return out;
}

inline std::vector<int> all_variables(const FactorGraph& graph) {
  std::vector<int> v(graph.num_variables());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

inline std::vector<int> all_factors(const FactorGraph& graph) {
  std::vector<int> f(graph.num_factors());
  std::iota(f.begin(), f.end(), 0);
  return f;
}

inline double brute_force_log_partition(const FactorGraph& graph, std::span<const double> theta,
                                        std::size_t cap = kDefaultStateCap) {
  graph.check_parameters(theta);
  const auto vars = all_variables(graph);
  const std::size_t states = state_space_size(graph, vars, cap);
  Vector logw(states);
  // Over all variables in id order the counter digits are themselves a full assignment.
  MixedRadix counter(graph.cardinalities(vars));
  for (std::size_t s = 0; s < states; ++s, counter.next()) {
    double w = 0.0;
    for (const Factor& f : graph.factors())
      w += theta[f.stat_offset + graph.table_index(f.id, counter.digits())];
    logw[s] = w;
  }
  return log_sum_exp(logw);
}

inline InferenceResult brute_force_inference(const FactorGraph& graph, std::span<const double> theta,
                                             std::size_t cap = kDefaultStateCap) {
  graph.check_parameters(theta);
  const auto vars = all_variables(graph);
  const auto facs = all_factors(graph);
  LocalEnumeration e = enumerate_local(graph, theta, vars, facs, 1.0, cap);
  InferenceResult r;
  r.log_partition = e.log_partition;
  r.marginals.variables = std::move(e.variable_marginals);
  r.marginals.factors = std::move(e.factor_marginals);
  return r;
}

inline MarginalSet brute_force_marginals(const FactorGraph& graph, std::span<const double> theta,
                                         std::size_t cap = kDefaultStateCap) {
  return brute_force_inference(graph, theta, cap).marginals;
}

// ---------------------------------------------------------------------------
// Message passing

namespace detail {

struct SumSemiring {
  static double combine(double a, double b) { return log_add(a, b); }
};

struct MaxSemiring {
  static double combine(double a, double b) { return a > b ? a : b; }
};

/// Message storage indexed by (factor, scope position).
class MessageTable {
 public:
  explicit MessageTable(const FactorGraph& graph) {
    base_.reserve(graph.num_factors());
    std::size_t e = 0;
    for (const Factor& f : graph.factors()) {
      base_.push_back(e);
      for (int v : f.scope) {
        f2v_.emplace_back(static_cast<std::size_t>(graph.cardinality(v)), 0.0);
        v2f_.emplace_back(static_cast<std::size_t>(graph.cardinality(v)), 0.0);
      }
      e += f.scope.size();
    }
  }

  std::size_t edge(int f, std::size_t pos) const { return base_[static_cast<std::size_t>(f)] + pos; }
  Vector& f2v(int f, std::size_t pos) { return f2v_[edge(f, pos)]; }
  Vector& v2f(int f, std::size_t pos) { return v2f_[edge(f, pos)]; }
  const Vector& f2v(int f, std::size_t pos) const { return f2v_[edge(f, pos)]; }
  const Vector& v2f(int f, std::size_t pos) const { return v2f_[edge(f, pos)]; }

 private:
  std::vector<std::size_t> base_;
  std::vector<Vector> f2v_;
  std::vector<Vector> v2f_;
};

inline std::size_t scope_position(const Factor& f, int v) {
  for (std::size_t i = 0; i < f.scope.size(); ++i)
    if (f.scope[i] == v) return i;
  throw StructureError("variable not in factor scope");
}

/// Sum of factor-to-variable messages into v, skipping factor `skip` (-1 for none).
inline void incoming_sum(const FactorGraph& graph, const MessageTable& msgs, int v, int skip, Vector& out) {
  out.assign(static_cast<std::size_t>(graph.cardinality(v)), 0.0);
  for (int g : graph.factors_of(v)) {
    if (g == skip) continue;
    const Vector& m = msgs.f2v(g, scope_position(graph.factor(g), v));
    add_scaled(out, m);
  }
}

/// Message from factor f to the variable at scope position `target`, built from the
/// current variable-to-factor messages of f's other positions. If `best` is non-null it
/// receives, per target state, the first table row attaining the maximum.
template <class Semiring>
void factor_message(const FactorGraph& graph, std::span<const double> theta, const MessageTable& msgs,
                    int f, std::size_t target, Vector& out, std::vector<std::size_t>* best = nullptr) {
  const Factor& fac = graph.factor(f);
  out.assign(static_cast<std::size_t>(graph.cardinality(fac.scope[target])), kNegInf);
  if (best) best->assign(out.size(), 0);
  MixedRadix counter(graph.scope_cardinalities(f));
  for (std::size_t idx = 0; idx < fac.stat_count; ++idx, counter.next()) {
    const auto& x = counter.digits();
    double val = theta[fac.stat_offset + idx];
    for (std::size_t j = 0; j < fac.scope.size(); ++j)
      if (j != target) val += msgs.v2f(f, j)[static_cast<std::size_t>(x[j])];
    const auto t = static_cast<std::size_t>(x[target]);
    if (best && val > out[t]) (*best)[t] = idx;
    out[t] = Semiring::combine(out[t], val);
  }
}

inline void shift_max_to_zero(Vector& m) {
  double mx = kNegInf;
  for (double x : m) mx = std::max(mx, x);
  if (mx == kNegInf) return;
  for (double& x : m) x -= mx;
}

/// Breadth-first layout of a forest rooted at the lowest variable id of each component.
struct TreeSchedule {
  struct Step {
    int factor;
    std::size_t parent_pos;  // scope position of the parent variable
  };
  std::vector<Step> order;  // factors in BFS order
  std::vector<int> roots;
};

inline TreeSchedule tree_schedule(const FactorGraph& graph) {
  TreeSchedule sched;
  std::vector<char> var_seen(graph.num_variables(), 0);
  std::vector<char> fac_seen(graph.num_factors(), 0);
  for (int r = 0; r < static_cast<int>(graph.num_variables()); ++r) {
    if (var_seen[static_cast<std::size_t>(r)]) continue;
    sched.roots.push_back(r);
    var_seen[static_cast<std::size_t>(r)] = 1;
    std::deque<int> queue{r};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int f : graph.factors_of(v)) {
        if (fac_seen[static_cast<std::size_t>(f)]) continue;
        fac_seen[static_cast<std::size_t>(f)] = 1;
        const Factor& fac = graph.factor(f);
        sched.order.push_back({f, scope_position(fac, v)});
        for (int u : fac.scope) {
          if (u == v) continue;
          if (var_seen[static_cast<std::size_t>(u)]) throw StructureError("factor graph contains a cycle");
          var_seen[static_cast<std::size_t>(u)] = 1;
          queue.push_back(u);
        }
      }
    }
  }
  return sched;
}

/// Upward (leaves to root) pass; children's outgoing messages are final when a factor is reached.
template <class Semiring>
void upward_pass(const FactorGraph& graph, std::span<const double> theta, const TreeSchedule& sched,
                 MessageTable& msgs, std::vector<std::vector<std::size_t>>* best = nullptr) {
  for (auto it = sched.order.rbegin(); it != sched.order.rend(); ++it) {
    const Factor& fac = graph.factor(it->factor);
    for (std::size_t j = 0; j < fac.scope.size(); ++j)
      if (j != it->parent_pos) incoming_sum(graph, msgs, fac.scope[j], fac.id, msgs.v2f(fac.id, j));
    factor_message<Semiring>(graph, theta, msgs, fac.id, it->parent_pos, msgs.f2v(fac.id, it->parent_pos),
                             best ? &(*best)[static_cast<std::size_t>(fac.id)] : nullptr);
  }
}

inline void fill_beliefs(const FactorGraph& graph, std::span<const double> theta, MessageTable& msgs,
                         MarginalSet& out) {
  out.variables.resize(graph.num_variables());
  Vector logb;
  for (int v = 0; v < static_cast<int>(graph.num_variables()); ++v) {
    incoming_sum(graph, msgs, v, -1, logb);
    auto& b = out.variables[static_cast<std::size_t>(v)];
    b.resize(logb.size());
    normalize_log(logb, b);
  }
  out.factors.resize(graph.num_factors());
  for (const Factor& f : graph.factors()) {
    logb.assign(f.stat_count, 0.0);
    MixedRadix counter(graph.scope_cardinalities(f.id));
    for (std::size_t idx = 0; idx < f.stat_count; ++idx, counter.next()) {
      double val = theta[f.stat_offset + idx];
      for (std::size_t j = 0; j < f.scope.size(); ++j)
        val += msgs.v2f(f.id, j)[static_cast<std::size_t>(counter.digits()[j])];
      logb[idx] = val;
    }
    auto& b = out.factors[static_cast<std::size_t>(f.id)];
    b.resize(f.stat_count);
    normalize_log(logb, b);
  }
}

}  // namespace detail

/// Exact marginals and log partition function on an acyclic factor graph (forests allowed).
inline InferenceResult tree_sum_product(const FactorGraph& graph, std::span<const double> theta) {
  graph.check_parameters(theta);
  const detail::TreeSchedule sched = detail::tree_schedule(graph);
  detail::MessageTable msgs(graph);
  detail::upward_pass<detail::SumSemiring>(graph, theta, sched, msgs);

  InferenceResult r;
  Vector root_belief;
  for (int root : sched.roots) {
    detail::incoming_sum(graph, msgs, root, -1, root_belief);
    r.log_partition += log_sum_exp(root_belief);
  }

  // Downward pass: the parent's outgoing message is final once its own parent factor is done.
  for (const auto& step : sched.order) {
    const Factor& fac = graph.factor(step.factor);
    detail::incoming_sum(graph, msgs, fac.scope[step.parent_pos], fac.id, msgs.v2f(fac.id, step.parent_pos));
    for (std::size_t j = 0; j < fac.scope.size(); ++j)
      if (j != step.parent_pos)
        detail::factor_message<detail::SumSemiring>(graph, theta, msgs, fac.id, j, msgs.f2v(fac.id, j));
  }
  detail::fill_beliefs(graph, theta, msgs, r.marginals);
  r.iterations = 1;
  return r;
}

namespace detail {

/// Runs loopy message passing to convergence or the iteration limit. Messages are
/// renormalized to max 0 after every update.
template <class Semiring>
InferenceResult run_loopy(const FactorGraph& graph, std::span<const double> theta, const BpSettings& settings,
                          MessageTable& msgs) {
  settings.validate();
  InferenceResult r;
  r.converged = false;
  Vector fresh;

  auto update_factor = [&](int f, MessageTable& target) {
    const Factor& fac = graph.factor(f);
    double change = 0.0;
    for (std::size_t j = 0; j < fac.scope.size(); ++j)
      incoming_sum(graph, msgs, fac.scope[j], f, msgs.v2f(f, j));
    for (std::size_t j = 0; j < fac.scope.size(); ++j) {
      factor_message<Semiring>(graph, theta, msgs, f, j, fresh);
      shift_max_to_zero(fresh);
      Vector& old = msgs.f2v(f, j);
      if (settings.damping > 0.0) {
        for (std::size_t k = 0; k < fresh.size(); ++k)
          fresh[k] = (1.0 - settings.damping) * fresh[k] + settings.damping * old[k];
        shift_max_to_zero(fresh);
      }
      for (std::size_t k = 0; k < fresh.size(); ++k) {
        const double d = (std::isinf(fresh[k]) && std::isinf(old[k])) ? 0.0 : std::abs(fresh[k] - old[k]);
        change = std::max(change, std::isnan(d) ? std::numeric_limits<double>::infinity() : d);
      }
      target.f2v(f, j) = fresh;
    }
    return change;
  };

  for (int it = 1; it <= settings.max_iterations; ++it) {
    double change = 0.0;
    if (settings.schedule == BpSchedule::sequential) {
      for (const Factor& f : graph.factors()) change = std::max(change, update_factor(f.id, msgs));
    } else {
      MessageTable next = msgs;
      for (const Factor& f : graph.factors()) change = std::max(change, update_factor(f.id, next));
      msgs = std::move(next);
    }
    r.iterations = it;
    if (change < settings.convergence_tolerance) {
      r.converged = true;
      break;
    }
  }
  for (const Factor& f : graph.factors())
    for (std::size_t j = 0; j < f.scope.size(); ++j) incoming_sum(graph, msgs, f.scope[j], f.id, msgs.v2f(f.id, j));
  return r;
}

}  // namespace detail

/// Loopy sum-product. Returns beliefs, the Bethe approximation to the log partition
/// function and whether the messages converged; the last iterate is returned otherwise.
inline InferenceResult loopy_bp(const FactorGraph& graph, std::span<const double> theta,
                                const BpSettings& settings = {}) {
  graph.check_parameters(theta);
  detail::MessageTable msgs(graph);
  InferenceResult r = detail::run_loopy<detail::SumSemiring>(graph, theta, settings, msgs);
  detail::fill_beliefs(graph, theta, msgs, r.marginals);

  // Bethe: sum_f E_bf[theta_f - log b_f] + sum_v (deg_v - 1) sum_x b_v log b_v.
  double bethe = 0.0;
  Vector logb;
  for (const Factor& f : graph.factors()) {
    const Vector& b = r.marginals.factors[static_cast<std::size_t>(f.id)];
    for (std::size_t idx = 0; idx < f.stat_count; ++idx)
      if (b[idx] > 0.0) bethe += b[idx] * (theta[f.stat_offset + idx] - std::log(b[idx]));
  }
  for (int v = 0; v < static_cast<int>(graph.num_variables()); ++v) {
    const Vector& b = r.marginals.variables[static_cast<std::size_t>(v)];
    const double deg = static_cast<double>(graph.factors_of(v).size());
    double neg_entropy = 0.0;
    for (double p : b)
      if (p > 0.0) neg_entropy += p * std::log(p);
    bethe += (deg - 1.0) * neg_entropy;
  }
  r.log_partition = bethe;
  return r;
}

/// MAP assignment. Exact on acyclic graphs (ties go to the lowest state index);
/// on loopy graphs, the argmax of max-product max-marginals.
inline Assignment max_product_decode(const FactorGraph& graph, std::span<const double> theta,
                                     const BpSettings& settings = {}) {
  graph.check_parameters(theta);
  Assignment a(graph.num_variables(), 0);
  Vector belief;
  if (is_acyclic(graph)) {
    const detail::TreeSchedule sched = detail::tree_schedule(graph);
    detail::MessageTable msgs(graph);
    std::vector<std::vector<std::size_t>> best(graph.num_factors());
    detail::upward_pass<detail::MaxSemiring>(graph, theta, sched, msgs, &best);
    for (int root : sched.roots) {
      detail::incoming_sum(graph, msgs, root, -1, belief);
      a[static_cast<std::size_t>(root)] = argmax_first(belief);
    }
    for (const auto& step : sched.order) {
      const Factor& fac = graph.factor(step.factor);
      const int parent_state = a[static_cast<std::size_t>(fac.scope[step.parent_pos])];
      std::size_t row = best[static_cast<std::size_t>(fac.id)][static_cast<std::size_t>(parent_state)];
      for (std::size_t j = 0; j < fac.scope.size(); ++j) {
        const auto state = static_cast<int>(row / fac.strides[j]);
        row %= fac.strides[j];
        if (j != step.parent_pos) a[static_cast<std::size_t>(fac.scope[j])] = state;
      }
    }
    return a;
  }
  detail::MessageTable msgs(graph);
  detail::run_loopy<detail::MaxSemiring>(graph, theta, settings, msgs);
  for (int v = 0; v < static_cast<int>(graph.num_variables()); ++v) {
    detail::incoming_sum(graph, msgs, v, -1, belief);
    a[static_cast<std::size_t>(v)] = argmax_first(belief);
  }
  return a;
}

enum class InferenceKind { brute, tree, loopy };

struct InferenceOptions {
  InferenceKind kind = InferenceKind::tree;
  BpSettings bp{};
  std::size_t state_cap = kDefaultStateCap;
};

/// Marginals and (exact or approximate) log partition function by the chosen method.
inline InferenceResult infer(const FactorGraph& graph, std::span<const double> theta,
                             const InferenceOptions& options) {
  switch (options.kind) {
    case InferenceKind::brute: return brute_force_inference(graph, theta, options.state_cap);
    case InferenceKind::tree: return tree_sum_product(graph, theta);
    case InferenceKind::loopy: return loopy_bp(graph, theta, options.bp);
  }
  throw std::invalid_argument("unknown inference kind");
}

}  // namespace piecewise
