#include "heavytouch/projections.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "heavytouch/generators.hpp"
#include "test_util.hpp"

namespace heavytouch {
namespace {

TEST(ProjectDomain, BoxClamp) {
  const Domain box = Domain::cube(2, 1.0);
  const Vector r = project_domain(box, Vector{{2.0, 0.5}});
  EXPECT_DOUBLE_EQ(r[0], 1.0);
  EXPECT_DOUBLE_EQ(r[1], 0.5);
}

TEST(ProjectDomain, BallRescale) {
  const Domain ball = Domain::ball(Vector::Zero(2), 1.0);
  const Vector r = project_domain(ball, Vector{{3.0, 4.0}});
  EXPECT_NEAR(r[0], 0.6, 1e-15);
  EXPECT_NEAR(r[1], 0.8, 1e-15);
}

TEST(ProjectDomain, IdentityInside) {
  const Domain box = Domain::cube(2, 1.0);
  const Vector w{{0.3, -0.4}};
  EXPECT_EQ(project_domain(box, w), w);
  const Domain ball = Domain::ball(Vector::Zero(2), 1.0);
  EXPECT_EQ(project_domain(ball, w), w);
}

TEST(DisjointSetClusters, MaintainsSumsSizesAndSpans) {
  DisjointSetClusters c(Vector{{1.0, 2.0, 4.0, 8.0, 16.0}});
  for (int i = 0; i < 5; ++i) EXPECT_EQ(c.find(i), i);
  int r = c.unite(1, 2);
  EXPECT_EQ(c.find(1), c.find(2));
  EXPECT_DOUBLE_EQ(c.value(r), 3.0);
  EXPECT_EQ(c.left_edge(r), 1);
  EXPECT_EQ(c.right_edge(r), 2);
  r = c.unite(c.find(1), 3);
  EXPECT_DOUBLE_EQ(c.value(r), 14.0 / 3.0);
  EXPECT_EQ(c.left_edge(r), 1);
  EXPECT_EQ(c.right_edge(r), 3);
  EXPECT_EQ(c.find(0), 0);  // untouched clusters stay singletons
  EXPECT_DOUBLE_EQ(c.value(c.find(4)), 16.0);
}

TEST(ViolationQueue, FifoWithNoOpReinsertion) {
  ViolationQueue q(4);
  EXPECT_TRUE(q.empty());
  q.push(2);
  q.push(0);
  q.push(2);  // already present: no-op
  q.push(3);
  EXPECT_EQ(q.pop(), 2);
  q.push(2);  // absent again: reinserts at the back
  EXPECT_EQ(q.pop(), 0);
  EXPECT_EQ(q.pop(), 3);
  EXPECT_EQ(q.pop(), 2);
  EXPECT_TRUE(q.empty());
}

TEST(ProjectOrdering, WorkedExamples) {
  EXPECT_EQ(project_ordering(Vector{{1.0, 2.0, 3.0}}), (Vector{{1.0, 2.0, 3.0}}));
  EXPECT_EQ(project_ordering(Vector{{3.0, 1.0, 2.0}}), (Vector{{2.0, 2.0, 2.0}}));
  EXPECT_EQ(project_ordering(Vector{{2.0, 1.0, 4.0, 3.0}}), (Vector{{1.5, 1.5, 3.5, 3.5}}));
  EXPECT_EQ(project_ordering(Vector{{5.0, 5.0, 5.0}}), (Vector{{5.0, 5.0, 5.0}}));
  EXPECT_EQ(project_ordering(Vector{{7.0}}), (Vector{{7.0}}));
  EXPECT_THROW(project_ordering(Vector(0)), std::invalid_argument);
}

TEST(ProjectOrdering, MatchesOracleOnRandomVectors) {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + rng.uniform_int(12);
    const Vector w = testutil::random_vector(d, rng);
    std::vector<ConstraintKind> kinds;
    for (int i = 0; i + 1 < d; ++i) kinds.push_back(OrderingPair{i, i + 1, 1.0 / std::sqrt(2.0)});
    const ConstraintSet cs(d, std::move(kinds));
    const Domain dom = Domain::cube(d, 1e6);
    const Vector fast = project_ordering(w);
    const Vector ref = oracle_project(cs, dom, w);
    EXPECT_LT((fast - ref).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ProjectOrdering, AgreesWithTextbookPava) {
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + rng.uniform_int(30);
    const Vector w = testutil::random_vector(d, rng);
    const auto pava = testutil::pava_isotonic(
        std::vector<double>(w.data(), w.data() + d), std::vector<double>(static_cast<size_t>(d), 1.0));
    const Vector fast = project_ordering(w);
    for (int i = 0; i < d; ++i) EXPECT_NEAR(fast[i], pava[static_cast<size_t>(i)], 1e-12);
  }
}

TEST(ProjectOrdering, OutputSortedSumPreservedIdempotent) {
  Rng rng(107);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 1 + rng.uniform_int(40);
    const Vector w = testutil::random_vector(d, rng);
    const Vector r = project_ordering(w);
    for (int i = 0; i + 1 < d; ++i) EXPECT_LE(r[i], r[i + 1]);
    EXPECT_NEAR(r.sum(), w.sum(), 1e-12 * std::max(1.0, std::abs(w.sum())));
    EXPECT_EQ(project_ordering(r), r);  // bit-for-bit
  }
}

TEST(ProjectOrdering, AtMostThreeDEvaluations) {
  Rng rng(109);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 1 + rng.uniform_int(60);
    OrderingProjectionStats stats;
    project_ordering(testutil::random_vector(d, rng), &stats);
    EXPECT_LE(stats.constraint_evaluations, 3 * d);
    EXPECT_LE(stats.merges, std::max(0, d - 1));
  }
  // Worst case: strictly decreasing input pools everything.
  OrderingProjectionStats stats;
  Vector desc(50);
  for (int i = 0; i < 50; ++i) desc[i] = 50 - i;
  const Vector r = project_ordering(desc, &stats);
  EXPECT_NEAR(r[0], 25.5, 1e-12);
  EXPECT_LE(stats.constraint_evaluations, 150);
}

TEST(ProjectOrdering, Nonexpansive) {
  Rng rng(113);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + rng.uniform_int(20);
    const Vector u = testutil::random_vector(d, rng);
    const Vector v = testutil::random_vector(d, rng);
    EXPECT_LE((project_ordering(u) - project_ordering(v)).norm(), (u - v).norm() + 1e-12);
  }
}

TEST(ProjectDomainNonexpansive, BothKinds) {
  Rng rng(127);
  const Domain box = Domain::cube(4, 1.5);
  const Domain ball = Domain::ball(Vector::Ones(4), 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector u = testutil::random_vector(4, rng);
    const Vector v = testutil::random_vector(4, rng);
    EXPECT_LE((project_domain(box, u) - project_domain(box, v)).norm(), (u - v).norm() + 1e-12);
    EXPECT_LE((project_domain(ball, u) - project_domain(ball, v)).norm(), (u - v).norm() + 1e-12);
  }
}

TEST(ProjectOrderingGeneral, ChainPairsDelegateExactly) {
  const std::vector<std::pair<int, int>> chain{{0, 1}, {1, 2}};
  const Vector w{{3.0, 1.0, 2.0}};
  EXPECT_EQ(project_ordering_general(chain, w), project_ordering(w));
}

TEST(ProjectOrderingGeneral, NoPairsIsIdentity) {
  const Vector w{{3.0, 1.0, 2.0}};
  EXPECT_EQ(project_ordering_general({}, w), w);
}

TEST(ProjectOrderingGeneral, FanOutMatchesOracle) {
  const std::vector<std::pair<int, int>> pairs{{0, 1}, {0, 2}};
  const Vector w{{2.0, 0.0, 0.0}};
  const Vector r = project_ordering_general(pairs, w);
  for (const auto& [i, j] : pairs) EXPECT_LE(r[i] - r[j], 1e-8);
  std::vector<ConstraintKind> kinds{OrderingPair{0, 1, 1.0}, OrderingPair{0, 2, 1.0}};
  const Vector ref = oracle_project(ConstraintSet(3, std::move(kinds)), Domain::cube(3, 100.0), w);
  EXPECT_LT((r - ref).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(ref[0], 2.0 / 3.0, 1e-9);
}

TEST(ProjectOrderingGeneral, GridPairsMatchOracle) {
  // 2x2 grid monotone in both axes.
  const std::vector<std::pair<int, int>> pairs{{0, 1}, {2, 3}, {0, 2}, {1, 3}};
  std::vector<ConstraintKind> kinds;
  for (const auto& [i, j] : pairs) kinds.push_back(OrderingPair{i, j, 1.0 / std::sqrt(2.0)});
  const ConstraintSet cs(4, std::move(kinds));
  const Domain dom = Domain::cube(4, 100.0);
  Rng rng(131);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector w = testutil::random_vector(4, rng);
    const Vector r = project_ordering_general(pairs, w);
    const Vector ref = oracle_project(cs, dom, w);
    EXPECT_LT((r - ref).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ProjectOrderingGeneral, CyclicGraphThrows) {
  const Vector w{{1.0, 0.0}};
  EXPECT_THROW(project_ordering_general({{0, 1}, {1, 0}}, w), std::invalid_argument);
  EXPECT_THROW(project_ordering_general({{0, 0}}, w), std::invalid_argument);
}

TEST(ProjectOrderingGeneral, SweepCapSurfacesResidual) {
  DykstraOptions opts;
  opts.max_sweeps = 1;
  opts.violation_tol = 1e-16;
  opts.movement_tol = 0.0;
  const std::vector<std::pair<int, int>> pairs{{0, 1}, {0, 2}};
  try {
    project_ordering_general(pairs, Vector{{5.0, -1.0, 0.0}}, opts);
    FAIL() << "expected the sweep cap to throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(OracleProject, ChainAndTrivialCases) {
  std::vector<ConstraintKind> kinds;
  for (int i = 0; i < 2; ++i) kinds.push_back(OrderingPair{i, i + 1, 1.0 / std::sqrt(2.0)});
  const ConstraintSet chain(3, std::move(kinds));
  const Domain dom = Domain::cube(3, 100.0);
  EXPECT_LT((oracle_project(chain, dom, Vector{{3.0, 1.0, 2.0}}) - Vector{{2.0, 2.0, 2.0}})
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  const Vector feasible{{-1.0, 0.0, 2.0}};
  EXPECT_EQ(oracle_project(chain, dom, feasible), feasible);

  const ConstraintSet halfspace(1, {BoxFace{0, 1, 0.0}});
  const Vector one = Vector::Constant(1, 1.0);
  EXPECT_DOUBLE_EQ(oracle_project(halfspace, Domain::cube(1, 10.0), one)[0], 0.0);
}

TEST(OracleProject, ExhaustiveAndIterativeModesAgree) {
  Rng rng(137);
  std::vector<ConstraintKind> kinds{OrderingPair{0, 2, 1.0}, BoxFace{1, 1, 0.5},
                                    LinearRow{Vector{{0.6, 0.8, 0.0}}, 0.25},
                                    BoxFace{2, -1, 2.0}};
  const ConstraintSet cs(3, std::move(kinds));
  const Domain dom = Domain::cube(3, 50.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Vector w = testutil::random_vector(3, rng);
    const Vector a = oracle_project(cs, dom, w, OracleMode::Exhaustive);
    const Vector b = oracle_project(cs, dom, w, OracleMode::Iterative);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(ProjectFeasible, ChainBranchMatchesExactProjection) {
  GeneratorSpec spec;
  spec.kind = OrderingRegressionSpec{6, 60, 0.1};
  spec.seed = 2;
  const Problem p = generate(spec);
  Rng rng(139);
  CheckCounter scratch;
  for (int trial = 0; trial < 50; ++trial) {
    const Vector w =
        testutil::random_vector(6, rng, p.domain.lower()[0], p.domain.upper()[0]);
    const Vector r = project_feasible(p, w);
    EXPECT_LE(eval_max_constraint(p.constraints, r, scratch).value, 1e-8);
    EXPECT_TRUE(p.domain.contains(r, 1e-12));
    EXPECT_LT((r - project_domain(p.domain, project_ordering(w))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ProjectFeasible, GridBranchReachesTolerance) {
  GeneratorSpec spec;
  spec.kind = MonotonicRankingSpec{16, 50, 3, MonotonicRankingSpec::Pairs::Grid};
  spec.seed = 4;
  const Problem p = generate(spec);
  Rng rng(149);
  CheckCounter scratch;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector w = testutil::random_vector(16, rng, -12.0, 12.0);
    const Vector r = project_feasible(p, w);
    EXPECT_LE(eval_max_constraint(p.constraints, r, scratch).value, 1e-8);
    EXPECT_TRUE(p.domain.contains(r, 1e-12));
  }
}

TEST(ProjectFeasible, HalfspaceBranchReachesTolerance) {
  GeneratorSpec spec;
  spec.kind = BoxQpSpec{5, 40, 8.0};
  spec.seed = 6;
  const Problem p = generate(spec);
  Rng rng(151);
  CheckCounter scratch;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector w = testutil::random_vector(5, rng, -3.0, 3.0);
    const Vector r = project_feasible(p, w);
    EXPECT_LE(eval_max_constraint(p.constraints, r, scratch).value, 1e-8);
    EXPECT_TRUE(p.domain.contains(r, 1e-12));
  }
}

TEST(ProjectFeasible, NonexpansiveAcrossBranches) {
  GeneratorSpec spec;
  spec.kind = MonotonicRankingSpec{9, 30, 3, MonotonicRankingSpec::Pairs::Grid};
  spec.seed = 8;
  const Problem p = generate(spec);
  Rng rng(157);
  for (int trial = 0; trial < 30; ++trial) {
    const Vector u = testutil::random_vector(9, rng);
    const Vector v = testutil::random_vector(9, rng);
    EXPECT_LE((project_feasible(p, u) - project_feasible(p, v)).norm(),
              (u - v).norm() + 1e-6);
  }
}

}  // namespace
}  // namespace heavytouch
