#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "piecewise/objectives.hpp"

using namespace piecewise;

namespace {

using Eval = std::function<ObjectiveResult(const FactorGraph&, const Vector&, const Dataset&)>;

struct NamedObjective {
  const char* name;
  Eval eval;
};

std::vector<NamedObjective> all_objectives(std::mt19937_64& rng) {
  (void)rng;
  return {
      {"exact", [](const FactorGraph& g, const Vector& t, const Dataset& d) {
         return exact_loglik(g, t, d, {InferenceKind::brute, {}, kDefaultStateCap});
       }},
      {"piecewise", [](const FactorGraph& g, const Vector& t, const Dataset& d) {
         return piecewise_objective(g, t, d, PiecePartition::per_factor(g));
       }},
      {"reweighted", [](const FactorGraph& g, const Vector& t, const Dataset& d) {
         return reweighted_piecewise_objective(g, t, d, PiecePartition::per_factor(g).with_uniform_weights());
       }},
      {"pl-node", [](const FactorGraph& g, const Vector& t, const Dataset& d) { return node_pseudolikelihood(g, t, d); }},
      {"pl-edge", [](const FactorGraph& g, const Vector& t, const Dataset& d) { return edge_pseudolikelihood(g, t, d); }},
  };
}

Dataset sample_data(const FactorGraph& g, std::mt19937_64& rng, int max_n = 4) {
  std::uniform_int_distribution<int> n(1, max_n);
  Dataset d;
  for (int i = n(rng); i > 0; --i) d.push_back(oracle::random_assignment(g, rng));
  return d;
}

const FactorGraph& chain3() {
  static const FactorGraph g = build_graph({2, 2, 2}, {{0, 1}, {1, 2}});
  return g;
}

}  // namespace

TEST(ExactLoglik, SingleEdgeAtZero) {
  const auto g = build_graph({2, 2}, {{0, 1}});
  const auto r = exact_loglik(g, Vector(4, 0.0), Dataset{{0, 0}});
  EXPECT_NEAR(r.value, -std::log(4.0), 1e-15);
  const Vector expect{0.75, -0.25, -0.25, -0.25};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(r.gradient[k], expect[k], 1e-15);
}

TEST(ExactLoglik, EmptyDataGivesZero) {
  const auto r = exact_loglik(chain3(), Vector(8, 1.0), Dataset{});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.gradient, Vector(8, 0.0));
}

TEST(ExactLoglik, InferenceRefusalPropagates) {
  const auto g = build_graph({2, 2, 2}, {{0, 1}, {1, 2}, {2, 0}});
  EXPECT_THROW(exact_loglik(g, Vector(12, 0.0), Dataset{{0, 0, 0}}, {InferenceKind::tree, {}, kDefaultStateCap}),
               StructureError);
}

TEST(PiecewiseObjective, ChainAtZero) {
  const auto r = piecewise_objective(chain3(), Vector(8, 0.0), Dataset{{0, 1, 0}}, PiecePartition::per_factor(chain3()));
  EXPECT_NEAR(r.value, -2.0 * std::log(4.0), 1e-14);
  EXPECT_NEAR(r.value, -2.7725887, 1e-7);
}

TEST(PiecewiseObjective, PerFactorEqualsIndependentEdgeClassifiers) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = oracle::random_graph(rng);
    const auto theta = oracle::random_theta(g.dimension(), rng);
    const auto data = sample_data(g, rng);
    double expect = 0.0;
    for (const auto& a : data)
      for (const auto& f : g.factors()) {
        // Each factor's table is a softmax classifier over its joint states.
        Vector row(theta.begin() + static_cast<std::ptrdiff_t>(f.stat_offset),
                   theta.begin() + static_cast<std::ptrdiff_t>(f.stat_offset + f.stat_count));
        double mx = -INFINITY, z = 0.0;
        for (double x : row) mx = std::max(mx, x);
        for (double x : row) z += std::exp(x - mx);
        expect += row[oracle::row_of(g, f.id, a)] - mx - std::log(z);
      }
    EXPECT_NEAR(piecewise_objective(g, theta, data, PiecePartition::per_factor(g)).value, expect, 1e-10);
  }
}

TEST(PiecewiseObjective, IsLowerBoundOnExact) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_graph(rng);
    const auto theta = oracle::random_theta(g.dimension(), rng);
    const auto data = sample_data(g, rng);
    const auto partition = oracle::random_partition(g, rng);
    const double pw = piecewise_objective(g, theta, data, partition).value;
    double exact = 0.0;
    for (const auto& a : data) exact += oracle::score(g, theta, a) - oracle::log_partition(g, theta);
    EXPECT_LE(pw, exact + 1e-9);
  }
}

TEST(PiecewiseObjective, RefusesOversizedPiece) {
  std::vector<std::vector<int>> scopes;
  for (int v = 0; v + 1 < 22; ++v) scopes.push_back({v, v + 1});
  const auto g = build_graph(std::vector<int>(22, 2), scopes);
  EXPECT_THROW(piecewise_objective(g, Vector(g.dimension(), 0.0), Dataset{Assignment(22, 0)},
                                   PiecePartition::single_piece(g)),
               CapacityError);
}

TEST(ReweightedObjective, TightAtZero) {
  auto partition = PiecePartition::per_factor(chain3()).with_uniform_weights();
  EXPECT_NEAR(reweighted_bound(chain3(), Vector(8, 0.0), partition), std::log(8.0), 1e-12);
  const auto r = reweighted_piecewise_objective(chain3(), Vector(8, 0.0), Dataset{{1, 1, 0}}, partition);
  EXPECT_NEAR(r.value, -std::log(8.0), 1e-12);
}

TEST(ReweightedObjective, RequiresValidWeights) {
  auto p = PiecePartition::per_factor(chain3());
  EXPECT_THROW(reweighted_piecewise_objective(chain3(), Vector(8, 0.0), Dataset{{0, 0, 0}}, p), StructureError);
  p.weights = Vector{1.0, 0.0};
  EXPECT_THROW(reweighted_piecewise_objective(chain3(), Vector(8, 0.0), Dataset{{0, 0, 0}}, p), StructureError);
  p.weights = Vector{0.7, 0.7};
  EXPECT_THROW(reweighted_piecewise_objective(chain3(), Vector(8, 0.0), Dataset{{0, 0, 0}}, p), StructureError);
  p.weights = Vector{-0.5, 1.5};
  EXPECT_THROW(reweighted_piecewise_objective(chain3(), Vector(8, 0.0), Dataset{{0, 0, 0}}, p), StructureError);
}

TEST(SinglePiece, PiecewiseAndReweightedEqualExact) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = oracle::random_graph(rng, 8, 3, 1, trial % 2 == 0);
    const auto theta = oracle::random_theta(g.dimension(), rng);
    const auto data = sample_data(g, rng);
    const auto exact = exact_loglik(g, theta, data, {InferenceKind::brute, {}, kDefaultStateCap});
    auto single = PiecePartition::single_piece(g);
    const auto pw = piecewise_objective(g, theta, data, single);
    // Isolated variables are outside the single piece, so only the reweighted form
    // (which adds their constants back) equals exact in general.
    const auto rw = reweighted_piecewise_objective(g, theta, data, single.with_uniform_weights());
    EXPECT_NEAR(rw.value, exact.value, 1e-12 * std::max(1.0, std::abs(exact.value)));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      EXPECT_NEAR(pw.gradient[k], exact.gradient[k], 1e-12);
      EXPECT_NEAR(rw.gradient[k], exact.gradient[k], 1e-12);
    }
    bool covers_all = variables_of(g, single.pieces[0]).size() == g.num_variables();
    if (covers_all) {
      EXPECT_NEAR(pw.value, exact.value, 1e-12 * std::max(1.0, std::abs(exact.value)));
    }
  }
}

TEST(NodePseudolikelihood, ChainAtZero) {
  const auto r = node_pseudolikelihood(chain3(), Vector(8, 0.0), Dataset{{0, 1, 1}});
  EXPECT_NEAR(r.value, 3.0 * std::log(0.5), 1e-14);
}

TEST(NodePseudolikelihood, IsolatedUnaryEqualsExact) {
  const auto g = build_graph({3}, {{0}});
  const Vector theta{0.3, -1.2, 2.0};
  const Dataset d{{1}, {2}};
  const auto pl = node_pseudolikelihood(g, theta, d);
  const auto ex = exact_loglik(g, theta, d);
  EXPECT_NEAR(pl.value, ex.value, 1e-14);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(pl.gradient[k], ex.gradient[k], 1e-14);
}

TEST(EdgePseudolikelihood, ChainAtZero) {
  const auto r = edge_pseudolikelihood(chain3(), Vector(8, 0.0), Dataset{{1, 0, 1}});
  EXPECT_NEAR(r.value, 2.0 * std::log(0.25), 1e-14);
}

TEST(EdgePseudolikelihood, SingleEdgeEqualsExact) {
  const auto g = build_graph({2, 3}, {{0, 1}});
  std::mt19937_64 rng(3);
  const auto theta = oracle::random_theta(6, rng);
  const Dataset d{{1, 2}, {0, 0}};
  const auto pl = edge_pseudolikelihood(g, theta, d);
  const auto ex = exact_loglik(g, theta, d);
  EXPECT_NEAR(pl.value, ex.value, 1e-13);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(pl.gradient[k], ex.gradient[k], 1e-13);
}

TEST(EdgePseudolikelihood, TargetsMaximalFactors) {
  const auto g = build_graph({2, 2, 2}, {{0}, {0, 1}, {1}, {1, 2}, {2, 1}});
  EXPECT_EQ(maximal_factors(g), (std::vector<int>{1, 3}));
}

TEST(GaussianPrior, ClosedForms) {
  ObjectiveResult r{1.25, Vector{0.5, -0.5, 2.0}};
  const auto zero = apply_gaussian_prior(r, Vector(3, 0.0), PriorSpec{1.0});
  EXPECT_EQ(zero.value, r.value);
  EXPECT_EQ(zero.gradient, r.gradient);
  const auto unit = apply_gaussian_prior(r, Vector{1.0, 0.0, 0.0}, PriorSpec{1.0});
  EXPECT_DOUBLE_EQ(unit.value, 0.75);
  EXPECT_DOUBLE_EQ(unit.gradient[0], -0.5);
  EXPECT_DOUBLE_EQ(unit.gradient[1], -0.5);
  EXPECT_THROW(apply_gaussian_prior(r, Vector(3, 0.0), PriorSpec{0.0}), std::invalid_argument);
  EXPECT_THROW(apply_gaussian_prior(r, Vector(2, 0.0), PriorSpec{1.0}), DimensionError);
}

TEST(GaussianPrior, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(53);
  const auto theta = oracle::random_theta(8, rng);
  const Dataset d{{0, 1, 1}, {1, 1, 0}};
  auto f = [&](const Vector& t) {
    return apply_gaussian_prior(exact_loglik(chain3(), t, d), t, PriorSpec{10.0});
  };
  const auto numeric = oracle::finite_difference([&](const Vector& t) { return f(t).value; }, theta);
  EXPECT_TRUE(oracle::gradients_match(f(theta).gradient, numeric));
}

TEST(AllObjectives, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(59);
  for (const auto& obj : all_objectives(rng)) {
    for (int trial = 0; trial < 60; ++trial) {
      const auto g = oracle::random_graph(rng, 6, 3);
      const auto theta = oracle::random_theta(g.dimension(), rng);
      const auto data = sample_data(g, rng);
      const auto analytic = obj.eval(g, theta, data).gradient;
      const auto numeric =
          oracle::finite_difference([&](const Vector& t) { return obj.eval(g, t, data).value; }, theta);
      EXPECT_TRUE(oracle::gradients_match(analytic, numeric)) << obj.name << " trial " << trial;
    }
  }
}

TEST(AllObjectives, AdditiveOverData) {
  std::mt19937_64 rng(61);
  for (const auto& obj : all_objectives(rng)) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto g = oracle::random_graph(rng, 6, 3);
      const auto theta = oracle::random_theta(g.dimension(), rng);
      const auto data = sample_data(g, rng);
      ObjectiveResult sum;
      for (const auto& a : data) sum += obj.eval(g, theta, Dataset{a});
      const auto whole = obj.eval(g, theta, data);
      EXPECT_NEAR(whole.value, sum.value, 1e-10) << obj.name;
      for (std::size_t k = 0; k < theta.size(); ++k) EXPECT_NEAR(whole.gradient[k], sum.gradient[k], 1e-10) << obj.name;
      const auto twice = obj.eval(g, theta, Dataset{data[0], data[0]});
      const auto once = obj.eval(g, theta, Dataset{data[0]});
      // Equal up to summation order.
      EXPECT_NEAR(twice.value, 2.0 * once.value, 1e-12 * std::max(1.0, std::abs(once.value))) << obj.name;
      for (std::size_t k = 0; k < theta.size(); ++k)
        EXPECT_NEAR(twice.gradient[k], 2.0 * once.gradient[k], 1e-12) << obj.name;
    }
  }
}

TEST(AllObjectives, ConcaveAlongSegments) {
  std::mt19937_64 rng(67);
  for (const auto& obj : all_objectives(rng)) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto g = oracle::random_graph(rng, 6, 3);
      const auto data = sample_data(g, rng);
      const auto a = oracle::random_theta(g.dimension(), rng, 3.0);
      const auto b = oracle::random_theta(g.dimension(), rng, 3.0);
      Vector mid(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) mid[k] = 0.5 * (a[k] + b[k]);
      const double avg = 0.5 * (obj.eval(g, a, data).value + obj.eval(g, b, data).value);
      EXPECT_GE(obj.eval(g, mid, data).value, avg - 1e-10) << obj.name;
    }
  }
}

TEST(AllObjectives, EvaluateDispatchesByKind) {
  std::mt19937_64 rng(71);
  const auto g = oracle::random_graph(rng, 5, 3, 2);
  const auto theta = oracle::random_theta(g.dimension(), rng);
  const auto data = sample_data(g, rng);
  const InferenceOptions brute{InferenceKind::brute, {}, kDefaultStateCap};
  EXPECT_EQ(evaluate_objective(ObjectiveKind::exact, g, theta, data, brute).value,
            exact_loglik(g, theta, data, brute).value);
  EXPECT_EQ(evaluate_objective(ObjectiveKind::pl_edge, g, theta, data).value, edge_pseudolikelihood(g, theta, data).value);
  for (auto k : {ObjectiveKind::exact, ObjectiveKind::piecewise, ObjectiveKind::reweighted, ObjectiveKind::pl_node,
                 ObjectiveKind::pl_edge})
    EXPECT_EQ(parse_objective(to_string(k)), k);
  EXPECT_THROW(parse_objective("bogus"), std::invalid_argument);
}

TEST(BoundCheck, ChainAtZero) {
  const auto c = check_piecewise_bound(chain3(), Vector(8, 0.0), PiecePartition::per_factor(chain3()));
  EXPECT_NEAR(c.lhs, std::log(8.0), 1e-14);
  EXPECT_NEAR(c.rhs, 2.0 * std::log(4.0), 1e-14);
  EXPECT_TRUE(c.holds);
  std::mt19937_64 rng(2);
  const auto theta = oracle::random_theta(8, rng);
  const auto s = check_piecewise_bound(chain3(), theta, PiecePartition::single_piece(chain3()));
  EXPECT_NEAR(s.lhs, s.rhs, 1e-12);
}

TEST(BoundCheck, RandomTrialsNeverViolate) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto g = oracle::random_graph(rng);
    const auto theta = oracle::random_theta(g.dimension(), rng);
    auto partition = oracle::random_partition(g, rng);
    const auto pw = check_piecewise_bound(g, theta, partition);
    EXPECT_TRUE(pw.holds) << "trial " << trial << " slack " << pw.slack();
    EXPECT_NEAR(pw.lhs, oracle::log_partition(g, theta), 1e-10);
    const auto uniform = check_reweighted_bound(g, theta, PiecePartition(partition).with_uniform_weights());
    EXPECT_TRUE(uniform.holds) << "trial " << trial << " slack " << uniform.slack();
    partition.weights = oracle::random_weights(partition.pieces.size(), rng);
    const auto weighted = check_reweighted_bound(g, theta, partition);
    EXPECT_TRUE(weighted.holds) << "trial " << trial << " slack " << weighted.slack();
  }
}

TEST(BoundCheck, IsolatedVariablesNeedTheReweightedConstant) {
  // Variable 1 is in no factor: the plain piece sum misses its log 3, the reweighted
  // form restores it.
  const auto g = build_graph({2, 3}, {{0}});
  const auto pw = check_piecewise_bound(g, Vector(2, 0.0), PiecePartition::per_factor(g));
  EXPECT_NEAR(pw.lhs - pw.rhs, std::log(3.0), 1e-14);
  EXPECT_FALSE(pw.holds);
  const auto rw = check_reweighted_bound(g, Vector(2, 0.0), PiecePartition::per_factor(g).with_uniform_weights());
  EXPECT_NEAR(rw.slack(), 0.0, 1e-14);
  EXPECT_TRUE(rw.holds);
}

TEST(BoundCheck, SlackAtZeroHasClosedForm) {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_graph(rng);
    const auto partition = oracle::random_partition(g, rng);
    double expect = 0.0;
    for (const auto& piece : partition.pieces)
      for (int v : variables_of(g, piece)) expect += std::log(static_cast<double>(g.cardinality(v)));
    for (std::size_t v = 0; v < g.num_variables(); ++v) expect -= std::log(static_cast<double>(g.cardinality(static_cast<int>(v))));
    EXPECT_NEAR(check_piecewise_bound(g, Vector(g.dimension(), 0.0), partition).slack(), expect, 1e-12);
  }
}

TEST(PiecePartition, Validation) {
  const auto& g = chain3();
  PiecePartition p;
  p.pieces = {{0}, {0, 1}};
  EXPECT_THROW(p.validate(g), StructureError);
  p.pieces = {{0}};
  EXPECT_THROW(p.validate(g), StructureError);
  p.pieces = {{0}, {5}};
  EXPECT_THROW(p.validate(g), StructureError);
  p.pieces = {{1}, {0}};
  EXPECT_NO_THROW(p.validate(g));
  p.weights = Vector{0.5};
  EXPECT_THROW(p.validate(g), StructureError);
}
