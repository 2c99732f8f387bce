#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "piecewise/graph.hpp"

using namespace piecewise;

TEST(BuildGraph, DimensionCountsTabularStatistics) {
  EXPECT_EQ(build_graph({2, 2}, {{0, 1}}).dimension(), 4u);
  EXPECT_EQ(build_graph({2, 2, 2}, {{0, 1}, {1, 2}}).dimension(), 8u);
  EXPECT_EQ(build_graph({3}, {{0}}).dimension(), 3u);
}

TEST(BuildGraph, StatBlocksAreContiguousAndDisjoint) {
  const auto g = build_graph({2, 3, 4}, {{0, 1}, {2}, {1, 2, 0}});
  std::size_t expect = 0;
  for (const auto& f : g.factors()) {
    EXPECT_EQ(f.stat_offset, expect);
    expect += f.stat_count;
  }
  EXPECT_EQ(g.dimension(), expect);
  EXPECT_EQ(g.factor(2).stat_count, 24u);
}

TEST(BuildGraph, RejectsBadScopes) {
  EXPECT_THROW(build_graph({2, 2}, {{0, 2}}), StructureError);
  EXPECT_THROW(build_graph({2, 2}, {{1, 1}}), StructureError);
  EXPECT_THROW(build_graph({}, {}), StructureError);
  EXPECT_THROW(build_graph({0}, {}), StructureError);
  EXPECT_THROW(build_graph({2}, {{}}), StructureError);
}

TEST(BuildGraph, IsolatedVariablesAreAllowed) {
  const auto g = build_graph({2, 3, 2}, {{0, 2}});
  EXPECT_TRUE(g.factors_of(1).empty());
  EXPECT_EQ(g.dimension(), 4u);
}

TEST(AssignmentLogScore, ZeroParametersScoreZero) {
  const auto g = build_graph({2, 3}, {{0, 1}, {1}});
  Vector theta(g.dimension(), 0.0);
  EXPECT_EQ(assignment_log_score(g, theta, Assignment{1, 2}), 0.0);
}

TEST(AssignmentLogScore, SingleIndicatorFires) {
  const auto g = build_graph({2, 2}, {{0, 1}});
  Vector theta{1.5, 0.0, 0.0, 0.0};
  EXPECT_EQ(assignment_log_score(g, theta, Assignment{0, 0}), 1.5);
  EXPECT_EQ(assignment_log_score(g, theta, Assignment{0, 1}), 0.0);
}

TEST(AssignmentLogScore, ChainSumsSelectedEntries) {
  const auto g = build_graph({2, 2, 2}, {{0, 1}, {1, 2}});
  std::mt19937_64 rng(3);
  const Vector theta = oracle::random_theta(g.dimension(), rng);
  // a = (1,0,1): first table row 1*2+0 = 2, second table row 0*2+1 = 1.
  EXPECT_DOUBLE_EQ(assignment_log_score(g, theta, Assignment{1, 0, 1}), theta[2] + theta[4 + 1]);
}

TEST(AssignmentLogScore, DimensionErrors) {
  const auto g = build_graph({2, 2}, {{0, 1}});
  EXPECT_THROW(assignment_log_score(g, Vector(3, 0.0), Assignment{0, 0}), DimensionError);
  EXPECT_THROW(assignment_log_score(g, Vector(4, 0.0), Assignment{0}), DimensionError);
  EXPECT_THROW(assignment_log_score(g, Vector(4, 0.0), Assignment{0, 2}), DimensionError);
}

TEST(AssignmentLogScore, LinearInParameters) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = oracle::random_graph(rng);
    const auto t1 = oracle::random_theta(g.dimension(), rng);
    const auto t2 = oracle::random_theta(g.dimension(), rng);
    Vector sum(t1.size());
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = t1[k] + t2[k];
    const auto a = oracle::random_assignment(g, rng);
    EXPECT_NEAR(assignment_log_score(g, sum, a), assignment_log_score(g, t1, a) + assignment_log_score(g, t2, a),
                1e-12);
    EXPECT_DOUBLE_EQ(assignment_log_score(g, t1, a), oracle::score(g, t1, a));
  }
}

TEST(RestrictParameters, FullPieceIsIdentityAndEmptyIsZero) {
  const auto g = build_graph({2, 2, 2}, {{0, 1}, {1, 2}});
  std::mt19937_64 rng(5);
  const auto theta = oracle::random_theta(g.dimension(), rng);
  EXPECT_EQ(restrict_parameters(theta, std::vector<int>{0, 1}, g), theta);
  EXPECT_EQ(restrict_parameters(theta, std::vector<int>{}, g), Vector(g.dimension(), 0.0));
  const auto first = restrict_parameters(theta, std::vector<int>{0}, g);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(first[k], theta[k]);
  for (std::size_t k = 4; k < 8; ++k) EXPECT_EQ(first[k], 0.0);
  EXPECT_THROW(restrict_parameters(theta, std::vector<int>{2}, g), StructureError);
}

TEST(RestrictParameters, DisjointPartitionSumsToOriginal) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = oracle::random_graph(rng);
    const auto theta = oracle::random_theta(g.dimension(), rng);
    const auto partition = oracle::random_partition(g, rng);
    Vector sum(theta.size(), 0.0);
    for (const auto& piece : partition.pieces) add_scaled(sum, restrict_parameters(theta, piece, g));
    EXPECT_EQ(sum, theta);
  }
}

TEST(Acyclicity, DetectsCyclesThroughFactors) {
  EXPECT_TRUE(is_acyclic(build_graph({2, 2, 2}, {{0, 1}, {1, 2}, {0}})));
  EXPECT_FALSE(is_acyclic(build_graph({2, 2, 2}, {{0, 1}, {1, 2}, {2, 0}})));
  // Two factors over the same pair form a cycle in the factor graph.
  EXPECT_FALSE(is_acyclic(build_graph({2, 2}, {{0, 1}, {1, 0}})));
  EXPECT_TRUE(is_acyclic(build_graph({2, 2, 2, 2}, {{0, 1, 2}, {2, 3}})));
}

TEST(StateSpace, CapIsEnforced) {
  const auto g = build_graph(std::vector<int>(30, 2), {});
  EXPECT_THROW(state_space_size(g, std::vector<int>(30, 0), 1'000'000), CapacityError);
  EXPECT_EQ(state_space_size(g, std::vector<int>{0, 1, 2}, 1'000'000), 8u);
}
