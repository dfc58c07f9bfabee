#include "heavytouch/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "heavytouch/generators.hpp"
#include "test_util.hpp"

namespace heavytouch {
namespace {

TEST(Formulas, RecommendedK) {
  EXPECT_EQ(recommended_k(100, 1000000, 0.1), 81);
  EXPECT_LT(recommended_k(100, 1000000000000L, 0.1), recommended_k(100, 1000000, 0.1));
  EXPECT_EQ(recommended_k(5, 2, 0.1), 5);  // tiny T: capped at m
  EXPECT_EQ(recommended_k(1, 100000, 0.1), 1);
  EXPECT_THROW(recommended_k(0, 10, 0.1), std::invalid_argument);
}

TEST(Formulas, RecommendedEtaLight) {
  const ProblemMetadata md{1.0, 1.0, 1.0, 1.0, 0.0};
  const Domain dom = Domain::cube(1, 1.0);  // D_w = 2
  const double eta = recommended_eta_light(md, dom, 4, 10000, 2.0);
  EXPECT_NEAR(eta, 0.00441361008340402, 1e-15);
  EXPECT_NEAR(recommended_eta_light(md, dom, 4, 40000, 2.0), eta / 2.0, 1e-15);
  const ProblemMetadata zeros{};
  EXPECT_THROW(recommended_eta_light(zeros, dom, 4, 100, 0.0), std::invalid_argument);
}

TEST(Formulas, RecommendedEtaLightOnGeneratedMetadata) {
  std::vector<GeneratorSpec> specs(3);
  specs[0].kind = OrderingRegressionSpec{6, 100, 0.1};
  specs[1].kind = MonotonicRankingSpec{16, 100, 4, MonotonicRankingSpec::Pairs::Grid};
  specs[2].kind = BoxQpSpec{5, 50, 4.0};
  for (auto& spec : specs) {
    spec.seed = 13;
    const Problem p = generate(spec);
    const int m = p.constraints.count();
    const long T = 50000;
    const double gamma = p.gamma_hint;
    const double dw = p.domain.diameter_bound();
    const double expected =
        std::sqrt(1.0 + std::log(static_cast<double>(m))) * dw /
        ((p.metadata.grad_bound_f + gamma * p.metadata.grad_bound_g +
          gamma * p.metadata.lipschitz_g * dw) *
         std::sqrt(static_cast<double>(T)));
    EXPECT_DOUBLE_EQ(recommended_eta_light(p.metadata, p.domain, m, T, gamma), expected);
  }
}

TEST(Formulas, InvTScheduleRequiresStrongConvexity) {
  const Problem p = testutil::one_dim_linear_problem();  // lambda = 0
  SolverConfig cfg;
  cfg.iterations = 10;
  cfg.gamma = 2.0;
  cfg.step_schedule = StepSchedule::InvT;
  EXPECT_THROW(solve_full(p, cfg), std::invalid_argument);
  EXPECT_THROW(solve_projected_sgd(p, cfg), std::invalid_argument);
}

TEST(Formulas, ScheduleFromTau) {
  const auto [t1, t2] = schedule_from_tau(10.0, 50);
  EXPECT_EQ(t1, 5000);
  EXPECT_EQ(t2, 1000);
}

TEST(Formulas, MidEtaP) {
  const ProblemMetadata md{1.0, 2.0, 1.0, 1.0, 3.0};
  EXPECT_DOUBLE_EQ(recommended_eta_p_mid(md, 2.0), 3.0 / (2.0 * 4.0 * 4.0));
}

// ---------------------------------------------------------------- FullTouch

TEST(SolveFull, ReachesTheAnalyticOptimum) {
  const Problem p = testutil::one_dim_linear_problem();
  SolverConfig cfg;
  cfg.iterations = 100000;
  cfg.gamma = 2.0;
  cfg.seed = 3;
  const SolverResult r = solve_full(p, cfg);
  EXPECT_LE(std::abs(r.average_iterate[0]), 0.05);
  EXPECT_LE(std::abs(r.projected_iterate[0]), 0.05);
  EXPECT_EQ(r.total_constraint_checks, 100000);  // m = 1 per iteration
  EXPECT_TRUE(r.warnings.empty());
}

TEST(SolveFull, ZeroGradientFeasibleStartNeverMoves) {
  const Problem p = testutil::zero_objective_problem();
  SolverConfig cfg;
  cfg.iterations = 500;
  cfg.gamma = 2.0;
  cfg.eta_w = 0.1;
  const SolverResult r = solve_full(p, cfg);
  EXPECT_EQ(r.average_iterate[0], 0.5);
  EXPECT_EQ(r.projected_iterate[0], 0.5);
}

TEST(SolveFull, WeakGammaLeavesTheAverageInfeasible) {
  // gamma below L_f / rho: h(w) = w + 0.5 max(0, -w) decreases toward w = -1,
  // so the unprojected average settles infeasible and the run is flagged.
  const Problem p = testutil::one_dim_linear_problem();
  SolverConfig cfg;
  cfg.iterations = 20000;
  cfg.gamma = 0.5;
  cfg.final_projection = false;
  const SolverResult r = solve_full(p, cfg);
  EXPECT_LT(r.average_iterate[0], -0.5);
  EXPECT_GT(r.final_violation, 0.25);
  ASSERT_FALSE(r.warnings.empty());
}

// --------------------------------------------------------------- LightTouch

TEST(SolveLight, ReachesTheAnalyticOptimum) {
  const Problem p = testutil::one_dim_linear_problem();
  SolverConfig cfg;
  cfg.iterations = 100000;
  cfg.gamma = 2.0;
  cfg.seed = 5;
  const SolverResult r = solve_light(p, cfg);
  EXPECT_LE(std::abs(r.average_iterate[0]), 0.05);
  EXPECT_LE(std::abs(r.projected_iterate[0]), 0.05);
  EXPECT_EQ(r.total_constraint_checks, 2 * 100000);  // (1 + k) with k = 1
}

TEST(SolveLight, SingleConstraintMatchesFullBitForBit) {
  const Problem p = testutil::one_dim_linear_problem();
  SolverConfig cfg;
  cfg.iterations = 5000;
  cfg.gamma = 2.0;
  cfg.eta_w = 0.002;
  cfg.seed = 11;
  cfg.k = 1;
  const SolverResult full = solve_full(p, cfg);
  const SolverResult light = solve_light(p, cfg);
  EXPECT_EQ(light.average_iterate[0], full.average_iterate[0]);
  EXPECT_EQ(light.projected_iterate[0], full.projected_iterate[0]);
  EXPECT_EQ(light.final_objective, full.final_objective);
}

TEST(SolveLight, ChecksPerIterationAreOnePlusK) {
  GeneratorSpec spec;
  spec.kind = OrderingRegressionSpec{6, 100, 0.1};
  spec.seed = 21;
  const Problem p = generate(spec);  // m = 5, feasible start
  SolverConfig cfg;
  cfg.iterations = 60;
  cfg.k = 3;
  cfg.trace_every = 1;
  const SolverResult r = solve_light(p, cfg);
  EXPECT_EQ(r.total_constraint_checks, (1 + 3) * 60);
  ASSERT_EQ(r.trace.size(), 60u);
  for (size_t i = 0; i < r.trace.size(); ++i)
    EXPECT_EQ(r.trace[i].cumulative_constraint_checks, 4 * static_cast<long>(i));
}

TEST(SolveLight, OversizedKDelegatesToFull) {
  const Problem p = testutil::one_dim_linear_problem();
  SolverConfig cfg;
  cfg.iterations = 200;
  cfg.gamma = 2.0;
  cfg.k = 5;  // > m = 1
  const SolverResult r = solve_light(p, cfg);
  EXPECT_EQ(r.total_constraint_checks, 200);  // the full-information body ran
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.back().find("solve_full"), std::string::npos);
}

// ----------------------------------------------------------------- MidTouch

TEST(SolveMid, RequiresStrongConvexity) {
  const Problem p = testutil::one_dim_linear_problem();  // lambda = 0
  SolverConfig cfg;
  cfg.phase1_iterations = 10;
  cfg.phase2_iterations = 10;
  cfg.gamma = 2.0;
  EXPECT_THROW(solve_mid(p, cfg), std::invalid_argument);
}

TEST(SolveMid, QuickConvergenceSanity) {
  const Problem p = testutil::one_dim_quadratic_problem();
  SolverConfig cfg;
  const auto [t1, t2] = schedule_from_tau(15.0, p.constraints.count());
  cfg.phase1_iterations = t1;
  cfg.phase2_iterations = t2;
  cfg.gamma = 2.02 * p.metadata.lipschitz_f;
  cfg.seed = 31;
  const SolverResult r = solve_mid(p, cfg);
  EXPECT_LE(std::abs(r.projected_iterate[0]), 0.2);
}

TEST(SolveMid, AccountingIsMPerPhaseOneThenTwo) {
  GeneratorSpec spec;
  spec.kind = OrderingRegressionSpec{5, 80, 0.1};
  spec.seed = 33;
  const Problem p = generate(spec);  // m = 4
  const int m = p.constraints.count();
  SolverConfig cfg;
  cfg.phase1_iterations = 7;
  cfg.phase2_iterations = 25;
  cfg.trace_every = 1;
  const SolverResult r = solve_mid(p, cfg);
  // Phase one: m per iteration. Phase transition: m to remember the
  // constraint values at the restart point. Phase two: 2 per iteration.
  EXPECT_EQ(r.total_constraint_checks, 7 * m + m + 2 * 25);
  ASSERT_EQ(r.trace.size(), 32u);
  // A row holds the cumulative count before its iteration's work.
  for (size_t i = 1; i < r.trace.size(); ++i) {
    const auto delta =
        r.trace[i].cumulative_constraint_checks - r.trace[i - 1].cumulative_constraint_checks;
    if (r.trace[i].iteration <= 7)
      EXPECT_EQ(delta, m);
    else if (r.trace[i].iteration == 8)
      EXPECT_EQ(delta, 2 * m);  // last phase-1 iteration plus the mu re-initialization
    else
      EXPECT_EQ(delta, 2);
  }
}

// ----------------------------------------------------- Practical LightTouch

TEST(SolvePractical, PinsKfAtTwo) {
  GeneratorSpec spec;
  spec.kind = MonotonicRankingSpec{16, 200, 3, MonotonicRankingSpec::Pairs::Chain};
  spec.seed = 41;
  const Problem p = generate(spec);
  SolverConfig cfg;
  cfg.iterations = 400;
  cfg.trace_every = 10;
  cfg.seed = 43;
  const SolverResult r = solve_practical(p, cfg);
  ASSERT_FALSE(r.trace.empty());
  for (const TraceRecord& row : r.trace) {
    EXPECT_EQ(row.k_f, 2);
    EXPECT_GE(row.k_g, 2);
    EXPECT_GE(row.k_p, 1);
    EXPECT_LE(row.k_p, p.constraints.count());
  }
}

TEST(SolvePractical, AggregatedChecksCountGroupSizes) {
  GeneratorSpec spec;
  spec.kind = MonotonicRankingSpec{17, 150, 3, MonotonicRankingSpec::Pairs::Chain};
  spec.seed = 47;
  const Problem p = generate(spec);  // m = 16
  ASSERT_EQ(p.constraints.count(), 16);
  SolverConfig cfg;
  cfg.iterations = 40;
  cfg.aggregate_groups = 4;  // uniform groups of 4 raw constraints
  cfg.trace_every = 1;
  cfg.seed = 49;
  const SolverResult r = solve_practical(p, cfg);
  ASSERT_EQ(r.trace.size(), 40u);
  for (size_t i = 1; i < r.trace.size(); ++i) {
    const auto delta =
        r.trace[i].cumulative_constraint_checks - r.trace[i - 1].cumulative_constraint_checks;
    // Every aggregated draw touches its whole group.
    EXPECT_EQ(delta, 4 * (r.trace[i - 1].k_g + r.trace[i - 1].k_p));
  }
}

TEST(SolvePractical, UsesFewerChecksThanFullAtMatchedIterations) {
  GeneratorSpec spec;
  spec.kind = MonotonicRankingSpec{16, 300, 3, MonotonicRankingSpec::Pairs::Chain};
  spec.seed = 53;
  const Problem p = generate(spec);
  SolverConfig cfg;
  cfg.iterations = 3000;
  cfg.gamma = 1.0;
  cfg.seed = 55;
  const SolverResult practical = solve_practical(p, cfg);
  const SolverResult full = solve_full(p, cfg);
  EXPECT_LT(practical.total_constraint_checks, full.total_constraint_checks);
  EXPECT_LE(practical.final_violation, 1e-8);
}

// -------------------------------------------------------------- ProjectedSGD

TEST(SolveProjectedSgd, ReachesTheAnalyticOptimumAndStaysFeasible) {
  const Problem p = testutil::one_dim_linear_problem();
  SolverConfig cfg;
  cfg.iterations = 100000;
  cfg.seed = 61;
  cfg.trace_every = 5000;
  const SolverResult r = solve_projected_sgd(p, cfg);
  EXPECT_LE(std::abs(r.average_iterate[0]), 0.05);
  EXPECT_EQ(r.total_constraint_checks, 0);
  EXPECT_EQ(r.total_projections, 100000 + 2);  // start + per step + final
  for (const TraceRecord& row : r.trace) EXPECT_EQ(row.max_violation_of_average, 0.0);
}

TEST(SolveProjectedSgd, MatchesTheIsotonicOptimumWithinOnePercent) {
  GeneratorSpec spec;
  spec.kind = OrderingRegressionSpec{5, 200, 0.3};
  spec.seed = 63;
  const Problem p = generate(spec);
  SolverConfig cfg;
  cfg.iterations = 100000;
  cfg.seed = 65;
  const SolverResult r = solve_projected_sgd(p, cfg);

  // Constrained optimum: weighted isotonic regression of the per-coordinate
  // means (an independent textbook oracle).
  const int d = 5;
  std::vector<double> y_mean(d, 0.0), weight(d, 0.0);
  // Reconstruct sufficient statistics through the full objective: probe the
  // quadratic f(w) = (1/2n) sum c_i (w_i - ybar_i)^2 + const.
  // f'(e_i t) recovers c_i and ybar_i from two evaluations per coordinate.
  for (int i = 0; i < d; ++i) {
    Vector a = Vector::Zero(d), b = Vector::Zero(d);
    a[i] = 1.0;
    b[i] = -1.0;
    const double f0 = p.objective.full_value(Vector::Zero(d));
    const double fa = p.objective.full_value(a);
    const double fb = p.objective.full_value(b);
    const double c_over_n = fa + fb - 2 * f0;            // c_i / n
    const double lin = (fa - fb) / 2.0;                  // -c_i ybar_i / n
    weight[static_cast<size_t>(i)] = c_over_n;
    y_mean[static_cast<size_t>(i)] = -lin / c_over_n;
  }
  const auto iso = testutil::pava_isotonic(y_mean, weight);
  Vector opt(d);
  for (int i = 0; i < d; ++i) opt[i] = iso[static_cast<size_t>(i)];
  const double f_opt = p.objective.full_value(opt);
  EXPECT_LE(r.final_objective, f_opt * 1.01 + 1e-12);
  EXPECT_GE(r.final_objective, f_opt - 1e-9);
}

// ------------------------------------------------------------------ shared

TEST(Solvers, DeterministicGivenConfigAndSeed) {
  GeneratorSpec spec;
  spec.kind = OrderingRegressionSpec{6, 120, 0.1};
  spec.seed = 71;
  const Problem p = generate(spec);
  for (Algorithm alg : {Algorithm::FullTouch, Algorithm::LightTouch, Algorithm::MidTouch,
                        Algorithm::PracticalLightTouch, Algorithm::ProjectedSgd}) {
    SolverConfig cfg;
    cfg.algorithm = alg;
    cfg.iterations = 300;
    cfg.phase1_iterations = 40;
    cfg.phase2_iterations = 260;
    cfg.seed = 73;
    cfg.trace_every = 25;
    const SolverResult a = solve(p, cfg);
    const SolverResult b = solve(p, cfg);
    EXPECT_EQ(a.average_iterate, b.average_iterate);
    EXPECT_EQ(a.projected_iterate, b.projected_iterate);
    EXPECT_EQ(a.final_objective, b.final_objective);
    EXPECT_EQ(a.total_constraint_checks, b.total_constraint_checks);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (size_t i = 0; i < a.trace.size(); ++i) {
      EXPECT_EQ(a.trace[i].objective_of_projected_average,
                b.trace[i].objective_of_projected_average);
      EXPECT_EQ(a.trace[i].elapsed_ns, b.trace[i].elapsed_ns);
      EXPECT_EQ(a.trace[i].k_p, b.trace[i].k_p);
    }
  }
}

TEST(Solvers, IncrementalAverageMatchesStoredIterates) {
  // The oracle sees w^(t) exactly once per iteration in the full/light
  // bodies, so capturing its argument reconstructs the iterate sequence.
  Problem p = testutil::one_dim_linear_problem();
  auto seen = std::make_shared<std::vector<double>>();
  auto base = p.objective.sample_subgradient;
  p.objective.sample_subgradient = [seen, base](const Vector& w, Rng& rng, Vector& out) {
    seen->push_back(w[0]);
    base(w, rng, out);
  };
  for (Algorithm alg : {Algorithm::FullTouch, Algorithm::LightTouch}) {
    seen->clear();
    SolverConfig cfg;
    cfg.algorithm = alg;
    cfg.iterations = 100;
    cfg.gamma = 2.0;
    cfg.seed = 77;
    const SolverResult r = solve(p, cfg);
    ASSERT_EQ(seen->size(), 100u);
    double mean = 0.0;
    for (double w : *seen) mean += w;
    mean /= 100.0;
    EXPECT_NEAR(r.average_iterate[0], mean, 1e-12);
  }
}

TEST(Solvers, IteratesStayInTheDomain) {
  GeneratorSpec spec;
  spec.kind = BoxQpSpec{6, 60, 5.0};
  spec.seed = 81;
  const Problem p = generate(spec);
  for (Algorithm alg : {Algorithm::FullTouch, Algorithm::LightTouch, Algorithm::MidTouch,
                        Algorithm::PracticalLightTouch, Algorithm::ProjectedSgd}) {
    SolverConfig cfg;
    cfg.algorithm = alg;
    cfg.iterations = 200;
    cfg.phase1_iterations = 30;
    cfg.phase2_iterations = 170;
    cfg.seed = 83;
    const SolverResult r = solve(p, cfg);
    EXPECT_TRUE(p.domain.contains(r.average_iterate, 1e-12));
    EXPECT_TRUE(p.domain.contains(r.projected_iterate, 1e-12));
  }
}

TEST(Solvers, LongerRunsReachLowerObjectives) {
  const long T = 20000;
  std::vector<GeneratorSpec> specs(3);
  specs[0].kind = OrderingRegressionSpec{6, 150, 0.2};
  specs[0].seed = 91;
  specs[1].kind = MonotonicRankingSpec{16, 400, 3, MonotonicRankingSpec::Pairs::Grid};
  specs[1].seed = 93;
  specs[2].kind = BoxQpSpec{6, 80, 6.0};
  specs[2].seed = 95;
  for (const auto& spec : specs) {
    const Problem p = generate(spec);
    std::vector<Algorithm> algs{Algorithm::FullTouch, Algorithm::LightTouch,
                                Algorithm::PracticalLightTouch, Algorithm::ProjectedSgd};
    if (p.metadata.lambda > 0) algs.push_back(Algorithm::MidTouch);
    for (Algorithm alg : algs) {
      const auto run = [&](long iters) {
        SolverConfig cfg;
        cfg.algorithm = alg;
        cfg.iterations = iters;
        if (alg == Algorithm::MidTouch) {
          cfg.phase1_iterations = std::max<long>(1, iters / 10);
          cfg.phase2_iterations = iters - cfg.phase1_iterations;
        }
        cfg.seed = 97;
        return solve(p, cfg).final_objective;
      };
      EXPECT_LT(run(T), run(T / 10) + 1e-12)
          << "algorithm " << static_cast<int>(alg) << " on spec index " << (&spec - specs.data());
    }
  }
}

}  // namespace
}  // namespace heavytouch
