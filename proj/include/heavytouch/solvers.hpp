#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "heavytouch/autotune.hpp"
#include "heavytouch/core.hpp"
#include "heavytouch/distribution.hpp"
#include "heavytouch/projections.hpp"
#include "heavytouch/rng.hpp"

namespace heavytouch {

enum class Algorithm { FullTouch, LightTouch, MidTouch, PracticalLightTouch, ProjectedSgd };

/// w-step schedules. Auto resolves per algorithm: constant for the
/// full/light theory variants and projected SGD, 1/sqrt(t) (or 1/t under
/// strong convexity) for the practical variant. MidTouch always steps with
/// 1/(lambda t) regardless.
enum class StepSchedule { Auto, Constant, InvSqrt, InvT };

struct SolverConfig {
  Algorithm algorithm = Algorithm::FullTouch;
  long iterations = 0;         // T
  long phase1_iterations = 0;  // MidTouch T1
  long phase2_iterations = 0;  // MidTouch T2
  double eta_w = 0.0;          // 0 = recommended formula
  double eta_p = 0.0;          // 0 = algorithm default
  double gamma = 0.0;          // 0 = problem hint, then the Lemma-gamma fallback
  int k = 0;                   // LightTouch p-minibatch; 0 = recommended_k
  double delta = 0.1;          // confidence used by the k / staleness formulas
  StepSchedule step_schedule = StepSchedule::Auto;
  bool final_projection = true;
  std::uint64_t seed = 1;
  long trace_every = 0;        // 0 = total/100
  int aggregate_groups = 0;    // PracticalLightTouch: m~ (0 = no aggregation)
  /// Measure minibatch costs with the monotonic clock instead of the
  /// deterministic cost model. Makes practical runs non-reproducible.
  bool wall_clock_costs = false;
};

struct TraceRecord {
  long iteration = 0;
  std::int64_t cumulative_constraint_checks = 0;
  double objective_of_projected_average = 0.0;
  double max_violation_of_average = 0.0;
  int k_f = 0;
  int k_g = 0;
  int k_p = 0;
  double p_entropy = 0.0;
  std::int64_t elapsed_ns = 0;
};

struct SolverResult {
  Vector average_iterate;
  Vector projected_iterate;
  double final_objective = 0.0;
  double final_violation = 0.0;
  std::int64_t total_constraint_checks = 0;
  std::int64_t total_objective_samples = 0;
  std::int64_t total_projections = 0;
  std::chrono::nanoseconds wall_time{0};
  std::vector<TraceRecord> trace;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Hyperparameter formulas
// ---------------------------------------------------------------------------

/// p-minibatch size k = ceil(m (1+ln m)^{3/4} sqrt(1+ln(1/delta))
/// sqrt(1+ln T) / T^{1/4}), capped at m.
inline int recommended_k(int m, long T, double delta) {
  if (m < 1 || T < 1 || !(delta > 0 && delta < 1))
    throw std::invalid_argument("recommended_k: need m,T >= 1 and delta in (0,1)");
  const double raw = static_cast<double>(m) *
                     std::pow(1.0 + std::log(static_cast<double>(m)), 0.75) *
                     std::sqrt(1.0 + std::log(1.0 / delta)) *
                     std::sqrt(1.0 + std::log(static_cast<double>(T))) /
                     std::pow(static_cast<double>(T), 0.25);
  return static_cast<int>(std::min(static_cast<double>(m), std::ceil(raw)));
}

/// eta = sqrt(1+ln m) D_w / ((G_f + gamma G_g + gamma L_g D_w) sqrt(T)).
inline double recommended_eta_light(const ProblemMetadata& md, const Domain& domain, int m,
                                    long T, double gamma) {
  const double dw = domain.diameter_bound();
  const double denom =
      (md.grad_bound_f + gamma * md.grad_bound_g + gamma * md.lipschitz_g * dw) *
      std::sqrt(static_cast<double>(T));
  if (!(denom > 0)) throw std::invalid_argument("recommended_eta_light: zero denominator");
  return std::sqrt(1.0 + std::log(static_cast<double>(m))) * dw / denom;
}

/// eta = D_w / ((G_f + gamma G_g) sqrt(T)).
inline double recommended_eta_full(const ProblemMetadata& md, const Domain& domain, long T,
                                   double gamma) {
  const double denom =
      (md.grad_bound_f + gamma * md.grad_bound_g) * std::sqrt(static_cast<double>(T));
  if (!(denom > 0)) throw std::invalid_argument("recommended_eta_full: zero denominator");
  return domain.diameter_bound() / denom;
}

/// MidTouch p-update step size eta = lambda / (2 gamma^2 L_g^2).
inline double recommended_eta_p_mid(const ProblemMetadata& md, double gamma) {
  const double denom = 2.0 * gamma * gamma * md.lipschitz_g * md.lipschitz_g;
  if (!(denom > 0)) throw std::invalid_argument("recommended_eta_p_mid: zero denominator");
  return md.lambda / denom;
}

/// MidTouch phase lengths (T1, T2) = (ceil(m tau^2), ceil(tau^3)).
inline std::pair<long, long> schedule_from_tau(double tau, int m) {
  if (!(tau >= 1) || m < 1)
    throw std::invalid_argument("schedule_from_tau: need tau >= 1 and m >= 1");
  return {static_cast<long>(std::ceil(static_cast<double>(m) * tau * tau)),
          static_cast<long>(std::ceil(tau * tau * tau))};
}

// ---------------------------------------------------------------------------
// Shared run machinery
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int kWarmupIterations = 10;
inline constexpr double kPArithCostNsPerEntry = 2.0;   // O(m) p-update arithmetic
inline constexpr double kProjectionCostNsPerDim = 8.0; // modeled Pi_g cost (projected SGD)

struct RunningAverage {
  Vector value;
  long n = 0;
  void add(const Vector& w) {
    ++n;
    if (value.size() == 0)
      value = w;
    else
      value += (w - value) / static_cast<double>(n);
  }
};

inline StepSchedule resolve_schedule(Algorithm alg, StepSchedule s, double lambda) {
  if (s != StepSchedule::Auto) {
    if (s == StepSchedule::InvT && !(lambda > 0))
      throw std::invalid_argument("SolverConfig: the 1/t schedule requires lambda > 0");
    return s;
  }
  if (alg == Algorithm::PracticalLightTouch)
    return lambda > 0 ? StepSchedule::InvT : StepSchedule::InvSqrt;
  return StepSchedule::Constant;
}

inline double step_size(StepSchedule s, double base, long t) {
  switch (s) {
    case StepSchedule::InvSqrt:
      return base / std::sqrt(static_cast<double>(t));
    case StepSchedule::InvT:
      return base / static_cast<double>(t);
    default:
      return base;
  }
}

/// gamma from (in order): explicit config, problem hint, the known rho bound,
/// the Lemma-gamma interior-point fallback. Flags runs whose gamma sits at or
/// below L_f / rho. The flag only consults an explicitly supplied rho: the
/// interior-point fallback is a lower bound loose enough to produce false
/// alarms on problems that converge fine.
inline double resolve_gamma(const Problem& problem, const SolverConfig& cfg,
                            std::vector<std::string>& warnings) {
  double gamma = 0.0;
  if (cfg.gamma > 0) {
    gamma = cfg.gamma;
  } else if (problem.gamma_hint > 0) {
    gamma = problem.gamma_hint;
  } else {
    double rho = problem.rho_hint;
    if (rho <= 0 && problem.interior_point.size() > 0)
      rho = rho_from_interior_point(problem.constraints, problem.domain, problem.interior_point);
    if (rho <= 0)
      throw std::invalid_argument(
          "resolve_gamma: no gamma given and no rho or interior point available");
    gamma = kGammaSafety * problem.metadata.lipschitz_f / rho;
    if (gamma <= 0) gamma = 1.0;  // L_f == 0: any positive penalty scale is valid
  }
  if (problem.rho_hint > 0 && gamma * problem.rho_hint <= problem.metadata.lipschitz_f)
    warnings.push_back(
        "gamma <= L_f / rho: the averaged iterate may be infeasible before the final projection");
  return gamma;
}

/// Collects trace rows and tracks both clocks. The wall clock excludes time
/// spent computing trace rows; the model clock advances only when a solver
/// charges work to it, so default-mode traces are reproducible bit for bit.
class TraceRecorder {
 public:
  TraceRecorder(const Problem& problem, const SolverConfig& cfg, long total_iterations)
      : problem_(problem),
        wall_clock_(cfg.wall_clock_costs),
        total_(total_iterations),
        every_(cfg.trace_every > 0 ? cfg.trace_every : std::max<long>(1, total_iterations / 100)),
        start_(std::chrono::steady_clock::now()) {}

  void charge(double ns) { model_ns_ += ns; }
  double model_ns() const { return model_ns_; }

  void maybe_record(long t, const Vector& average, int k_f, int k_g, int k_p, double entropy,
                    const CheckCounter& checks) {
    if (t % every_ != 0 && t != total_) return;
    const auto pause = std::chrono::steady_clock::now();
    TraceRecord r;
    r.iteration = t;
    r.cumulative_constraint_checks = checks.count();
    const Vector projected = project_feasible(problem_, average);
    r.objective_of_projected_average = problem_.objective.full_value(projected);
    CheckCounter scratch;
    r.max_violation_of_average =
        problem_.constraints.count() == 0
            ? 0.0
            : std::max(0.0, eval_max_constraint(problem_.constraints, average, scratch).value);
    r.k_f = k_f;
    r.k_g = k_g;
    r.k_p = k_p;
    r.p_entropy = entropy;
    r.elapsed_ns = wall_clock_ ? std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     pause - start_ - paused_)
                                     .count()
                               : static_cast<std::int64_t>(model_ns_);
    trace_.push_back(r);
    paused_ += std::chrono::steady_clock::now() - pause;
  }

  std::vector<TraceRecord> take_trace() { return std::move(trace_); }

  std::chrono::nanoseconds wall_time() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                                start_ - paused_);
  }

 private:
  const Problem& problem_;
  bool wall_clock_;
  long total_;
  long every_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::duration paused_{0};
  double model_ns_ = 0.0;
  std::vector<TraceRecord> trace_;
};

inline void require_finite(const Vector& w, const char* solver, long t) {
  if (!w.allFinite())
    throw std::runtime_error(std::string(solver) + ": non-finite iterate at iteration " +
                             std::to_string(t));
}

inline SolverResult finish(const Problem& problem, const SolverConfig& cfg,
                           const RunningAverage& avg, const CheckCounter& checks,
                           std::int64_t objective_samples, std::int64_t projections,
                           TraceRecorder& rec, std::vector<std::string> warnings) {
  SolverResult r;
  r.average_iterate = avg.value;
  if (cfg.final_projection) {
    r.projected_iterate = project_feasible(problem, avg.value);
    ++projections;
  } else {
    r.projected_iterate = avg.value;
  }
  r.final_objective = problem.objective.full_value(r.projected_iterate);
  if (problem.constraints.count() > 0) {
    CheckCounter scratch;
    r.final_violation =
        std::max(0.0, eval_max_constraint(problem.constraints, r.projected_iterate, scratch).value);
  }
  r.total_constraint_checks = checks.count();
  r.total_objective_samples = objective_samples;
  r.total_projections = projections;
  r.trace = rec.take_trace();
  r.wall_time = rec.wall_time();
  r.warnings = std::move(warnings);
  return r;
}

template <ConstraintFamily F>
double total_check_cost_hint(const F& cs) {
  double total = 0.0;
  for (int i = 0; i < cs.count(); ++i) total += cs.check_cost_hint_ns(i);
  return total;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// FullTouch
// ---------------------------------------------------------------------------

/// SGD on h(w) = f(w) + gamma max(0, g(w)): every iteration evaluates all m
/// constraints (m counted checks) and differentiates only the most violated.
/// One projection onto the feasible set at the very end.
inline SolverResult solve_full(const Problem& problem, SolverConfig cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("solve_full: iterations must be >= 1");
  std::vector<std::string> warnings;
  const double gamma = detail::resolve_gamma(problem, cfg, warnings);
  const long T = cfg.iterations;
  const ConstraintSet& cs = problem.constraints;
  const int m = cs.count();
  const StepSchedule sched =
      detail::resolve_schedule(Algorithm::FullTouch, cfg.step_schedule, problem.metadata.lambda);
  const double eta_base = cfg.eta_w > 0
                              ? cfg.eta_w
                              : recommended_eta_full(problem.metadata, problem.domain, T, gamma);

  Rng rng(cfg.seed);
  Vector w = project_domain(problem.domain, problem.start_point());
  Vector ghat(w.size()), dir(w.size());
  detail::RunningAverage avg;
  CheckCounter checks;
  std::int64_t samples = 0;
  detail::TraceRecorder rec(problem, cfg, T);
  const double iter_cost = problem.objective.sample_cost_hint_ns + detail::total_check_cost_hint(cs);

  for (long t = 1; t <= T; ++t) {
    avg.add(w);
    rec.maybe_record(t, avg.value, 1, m, 0, 0.0, checks);
    problem.objective.sample_subgradient(w, rng, ghat);
    ++samples;
    dir = ghat;
    const MaxConstraintEval me = eval_max_constraint(cs, w, checks);
    if (me.value > 0) cs.add_subgradient(me.base_index, w, gamma, dir);
    w = project_domain(problem.domain, w - detail::step_size(sched, eta_base, t) * dir);
    detail::require_finite(w, "solve_full", t);
    rec.charge(iter_cost);
  }
  return detail::finish(problem, cfg, avg, checks, samples, 0, rec, std::move(warnings));
}

// ---------------------------------------------------------------------------
// LightTouch
// ---------------------------------------------------------------------------

/// Saddle-point variant: the w-step differentiates one constraint sampled
/// from the learned distribution p (1 check), the p-step takes a
/// variance-reduced supergradient over a uniform k-subset (k checks) and a
/// multiplicative update. 1 + k checks per iteration.
inline SolverResult solve_light(const Problem& problem, SolverConfig cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("solve_light: iterations must be >= 1");
  const ConstraintSet& cs = problem.constraints;
  const int m = cs.count();
  if (m == 0) throw std::invalid_argument("solve_light: needs at least one constraint");
  const long T = cfg.iterations;
  const int k = cfg.k > 0 ? cfg.k : recommended_k(m, T, cfg.delta);
  if (k > m) {
    // Checking more than m constraints per iteration defeats the point;
    // the full-information solver is the better tool.
    SolverConfig full_cfg = cfg;
    full_cfg.algorithm = Algorithm::FullTouch;
    full_cfg.k = 0;
    SolverResult r = solve_full(problem, full_cfg);
    r.warnings.push_back("k > m: delegated to solve_full");
    return r;
  }

  std::vector<std::string> warnings;
  const double gamma = detail::resolve_gamma(problem, cfg, warnings);
  const StepSchedule sched =
      detail::resolve_schedule(Algorithm::LightTouch, cfg.step_schedule, problem.metadata.lambda);
  const double eta_base =
      cfg.eta_w > 0 ? cfg.eta_w
                    : recommended_eta_light(problem.metadata, problem.domain, m, T, gamma);
  const double eta_p = cfg.eta_p > 0 ? cfg.eta_p : eta_base;  // single step size in the listing

  Rng rng(cfg.seed);
  Vector w = project_domain(problem.domain, problem.start_point());
  Vector ghat(w.size()), dir(w.size());
  detail::RunningAverage avg;
  CheckCounter checks;
  std::int64_t samples = 0;
  detail::TraceRecorder rec(problem, cfg, T);
  SamplingState state = problem.initial_point_feasible ? SamplingState::feasible_start(m)
                                                       : SamplingState::at(cs, w, checks);
  const double p_arith_cost = detail::kPArithCostNsPerEntry * m;

  for (long t = 1; t <= T; ++t) {
    avg.add(w);
    rec.maybe_record(t, avg.value, 1, 1, k, state.entropy(), checks);
    problem.objective.sample_subgradient(w, rng, ghat);
    ++samples;
    dir = ghat;
    const int i = sample_constraint(state, rng);
    const double gi = cs.evaluate(i, w, checks);
    if (gi > 0) cs.add_subgradient(i, w, gamma, dir);
    double iter_cost = problem.objective.sample_cost_hint_ns + cs.check_cost_hint_ns(i);
    // p-step at the pre-step iterate, before w moves.
    const std::vector<int> subset = sample_without_replacement(m, k, rng);
    for (int j : subset) iter_cost += cs.check_cost_hint_ns(j);
    const SupergradientDescriptor desc =
        centered_supergradient(state, cs, w, subset, gamma, static_cast<int>(t), checks);
    multiplicative_update(state, desc, eta_p);
    w = project_domain(problem.domain, w - detail::step_size(sched, eta_base, t) * dir);
    detail::require_finite(w, "solve_light", t);
    rec.charge(iter_cost + p_arith_cost);
  }
  return detail::finish(problem, cfg, avg, checks, samples, 0, rec, std::move(warnings));
}

// ---------------------------------------------------------------------------
// MidTouch
// ---------------------------------------------------------------------------

/// Two phases for lambda-strongly convex objectives, both stepping with
/// 1/(lambda t): phase one runs the full-information body for T1 iterations;
/// phase two restarts from the phase-one average and runs the light body
/// with a single uniformly-sampled p-refresh per iteration (2 checks). Only
/// phase-two iterates are averaged into the result.
inline SolverResult solve_mid(const Problem& problem, SolverConfig cfg) {
  if (!(problem.metadata.lambda > 0))
    throw std::invalid_argument("solve_mid: requires a strongly convex objective (lambda > 0)");
  if (cfg.phase1_iterations < 1 || cfg.phase2_iterations < 1)
    throw std::invalid_argument("solve_mid: phase1/phase2 iteration counts must be >= 1");
  const ConstraintSet& cs = problem.constraints;
  const int m = cs.count();
  if (m == 0) throw std::invalid_argument("solve_mid: needs at least one constraint");

  std::vector<std::string> warnings;
  const double gamma = detail::resolve_gamma(problem, cfg, warnings);
  const double lambda = problem.metadata.lambda;
  const double eta_p = cfg.eta_p > 0 ? cfg.eta_p : recommended_eta_p_mid(problem.metadata, gamma);
  const long T1 = cfg.phase1_iterations;
  const long T2 = cfg.phase2_iterations;

  Rng rng(cfg.seed);
  Vector w = project_domain(problem.domain, problem.start_point());
  Vector ghat(w.size()), dir(w.size());
  CheckCounter checks;
  std::int64_t samples = 0;
  detail::TraceRecorder rec(problem, cfg, T1 + T2);
  const double full_cost = problem.objective.sample_cost_hint_ns + detail::total_check_cost_hint(cs);

  detail::RunningAverage phase1;
  for (long t = 1; t <= T1; ++t) {
    phase1.add(w);
    rec.maybe_record(t, phase1.value, 1, m, 0, 0.0, checks);
    problem.objective.sample_subgradient(w, rng, ghat);
    ++samples;
    dir = ghat;
    const MaxConstraintEval me = eval_max_constraint(cs, w, checks);
    if (me.value > 0) cs.add_subgradient(me.base_index, w, gamma, dir);
    w = project_domain(problem.domain, w - (1.0 / (lambda * static_cast<double>(t))) * dir);
    detail::require_finite(w, "solve_mid", t);
    rec.charge(full_cost);
  }

  // Phase two starts from the phase-one average; remembering the constraint
  // values there costs m checks once.
  w = phase1.value;
  SamplingState state = SamplingState::at(cs, w, checks);
  const double p_arith_cost = detail::kPArithCostNsPerEntry * m;
  detail::RunningAverage avg;
  for (long t = T1 + 1; t <= T1 + T2; ++t) {
    avg.add(w);
    rec.maybe_record(t, avg.value, 1, 1, 1, state.entropy(), checks);
    problem.objective.sample_subgradient(w, rng, ghat);
    ++samples;
    dir = ghat;
    const int i = sample_constraint(state, rng);
    const double gi = cs.evaluate(i, w, checks);
    if (gi > 0) cs.add_subgradient(i, w, gamma, dir);
    double iter_cost = problem.objective.sample_cost_hint_ns + cs.check_cost_hint_ns(i);
    const std::vector<int> subset = sample_without_replacement(m, 1, rng);  // uniform j
    iter_cost += cs.check_cost_hint_ns(subset.front());
    const SupergradientDescriptor desc =
        centered_supergradient(state, cs, w, subset, gamma, static_cast<int>(t), checks);
    multiplicative_update(state, desc, eta_p);
    w = project_domain(problem.domain, w - (1.0 / (lambda * static_cast<double>(t))) * dir);
    detail::require_finite(w, "solve_mid", t);
    rec.charge(iter_cost + p_arith_cost);
  }
  return detail::finish(problem, cfg, avg, checks, samples, 0, rec, std::move(warnings));
}

// ---------------------------------------------------------------------------
// Practical LightTouch
// ---------------------------------------------------------------------------

namespace detail {

template <ConstraintFamily F>
SolverResult run_practical(const Problem& problem, const F& cs, const SolverConfig& cfg,
                           double gamma, std::vector<std::string> warnings) {
  const long T = cfg.iterations;
  const int m = cs.count();
  const StepSchedule sched = resolve_schedule(Algorithm::PracticalLightTouch, cfg.step_schedule,
                                              problem.metadata.lambda);
  // Default base step: the light formula without its 1/sqrt(T) factor, which
  // the decreasing schedule supplies per iteration.
  const double dw = problem.domain.diameter_bound();
  const double denom = problem.metadata.grad_bound_f + gamma * problem.metadata.grad_bound_g +
                       gamma * problem.metadata.lipschitz_g * dw;
  if (!(denom > 0) && !(cfg.eta_w > 0))
    throw std::invalid_argument("solve_practical: zero denominator in the default step size");
  const double eta_base =
      cfg.eta_w > 0 ? cfg.eta_w : std::sqrt(1.0 + std::log(static_cast<double>(m))) * dw / denom;
  const double eta_p =
      cfg.eta_p > 0 ? cfg.eta_p
                    : recommended_eta_light(problem.metadata, problem.domain, m, T, gamma);

  Rng rng(cfg.seed);
  Vector w = project_domain(problem.domain, problem.start_point());
  const int d = static_cast<int>(w.size());
  Vector dir(d);
  RunningAverage avg;
  CheckCounter checks;
  std::int64_t samples = 0;
  TraceRecorder rec(problem, cfg, T);
  SamplingState state = problem.initial_point_feasible ? SamplingState::feasible_start(m)
                                                       : SamplingState::at(cs, w, checks);
  EstimatorState est;
  MinibatchSizes k{2, 2, std::min(m, 8)};
  std::vector<Vector> fbuf, gbuf;
  std::vector<double> mu_diffs;
  const double p_arith_cost = kPArithCostNsPerEntry * m;
  const bool wall = cfg.wall_clock_costs;
  using clock = std::chrono::steady_clock;
  const auto section_ns = [](clock::time_point a, clock::time_point b) {
    return std::max(1.0, std::chrono::duration<double, std::nano>(b - a).count());
  };

  for (long t = 1; t <= T; ++t) {
    avg.add(w);
    const double eta_t = step_size(sched, eta_base, t);
    if (t > kWarmupIterations && est.seeded()) k = allocate(est, eta_t, eta_p, m);
    rec.maybe_record(t, avg.value, k.k_f, k.k_g, k.k_p, state.entropy(), checks);

    // Objective component: k_f i.i.d. samples, averaged.
    fbuf.resize(static_cast<size_t>(k.k_f), Vector(d));
    auto t0 = clock::now();
    for (int j = 0; j < k.k_f; ++j) {
      problem.objective.sample_subgradient(w, rng, fbuf[static_cast<size_t>(j)]);
      ++samples;
    }
    double f_cost = wall ? section_ns(t0, clock::now())
                         : problem.objective.sample_cost_hint_ns * k.k_f;
    est.observe_f(std::span<const Vector>(fbuf.data(), static_cast<size_t>(k.k_f)), f_cost);
    dir.setZero();
    for (int j = 0; j < k.k_f; ++j) dir += fbuf[static_cast<size_t>(j)];
    dir /= static_cast<double>(k.k_f);

    // Constraint component: k_g i.i.d. draws from p.
    gbuf.resize(static_cast<size_t>(k.k_g), Vector(d));
    double g_cost_model = 0.0;
    t0 = clock::now();
    for (int j = 0; j < k.k_g; ++j) {
      const int i = sample_constraint(state, rng);
      const ConstraintEval e = cs.evaluate_detail(i, w, checks);
      gbuf[static_cast<size_t>(j)].setZero();
      if (e.value > 0) cs.add_subgradient(e.base_index, w, gamma, gbuf[static_cast<size_t>(j)]);
      g_cost_model += cs.check_cost_hint_ns(i);
    }
    double g_cost = wall ? section_ns(t0, clock::now()) : g_cost_model;
    est.observe_g(std::span<const Vector>(gbuf.data(), static_cast<size_t>(k.k_g)), g_cost);
    for (int j = 0; j < k.k_g; ++j) dir += gbuf[static_cast<size_t>(j)] / static_cast<double>(k.k_g);

    // Distribution component at the pre-step iterate.
    t0 = clock::now();
    const std::vector<int> subset = sample_without_replacement(m, k.k_p, rng);
    double p_cost_model = p_arith_cost;
    for (int j : subset) p_cost_model += cs.check_cost_hint_ns(j);
    const SupergradientDescriptor desc =
        centered_supergradient(state, cs, w, subset, gamma, static_cast<int>(t), checks);
    mu_diffs.clear();
    for (const auto& [j, corr] : desc.corrections)
      mu_diffs.push_back(-corr * static_cast<double>(k.k_p) / (gamma * static_cast<double>(m)));
    multiplicative_update(state, desc, eta_p);
    double p_cost = wall ? section_ns(t0, clock::now()) : p_cost_model;
    est.observe_p(mu_diffs, gamma, m, k.k_p, p_cost);

    w = project_domain(problem.domain, w - eta_t * dir);
    require_finite(w, "solve_practical", t);
    rec.charge(f_cost + g_cost + p_cost);
  }
  return finish(problem, cfg, avg, checks, samples, 0, rec, std::move(warnings));
}

}  // namespace detail

/// LightTouch with the practical tweaks: per-iteration decreasing w-step,
/// constant eta_p, automatically sized minibatches (k_f pinned at 2), and
/// optional constraint aggregation.
inline SolverResult solve_practical(const Problem& problem, SolverConfig cfg) {
  if (cfg.iterations < 1)
    throw std::invalid_argument("solve_practical: iterations must be >= 1");
  if (problem.constraints.count() == 0)
    throw std::invalid_argument("solve_practical: needs at least one constraint");
  std::vector<std::string> warnings;
  const double gamma = detail::resolve_gamma(problem, cfg, warnings);
  if (cfg.aggregate_groups > 0) {
    const AggregatedConstraintSet agg = aggregate(problem.constraints, cfg.aggregate_groups);
    return detail::run_practical(problem, agg, cfg, gamma, std::move(warnings));
  }
  return detail::run_practical(problem, problem.constraints, cfg, gamma, std::move(warnings));
}

// ---------------------------------------------------------------------------
// Projected SGD baseline
// ---------------------------------------------------------------------------

/// Projects back onto the feasible set after every stochastic step, so the
/// iterates stay feasible throughout. Projection work is reported separately
/// (total_projections), not as constraint checks.
inline SolverResult solve_projected_sgd(const Problem& problem, SolverConfig cfg) {
  if (cfg.iterations < 1)
    throw std::invalid_argument("solve_projected_sgd: iterations must be >= 1");
  std::vector<std::string> warnings;
  const long T = cfg.iterations;
  const StepSchedule sched =
      detail::resolve_schedule(Algorithm::ProjectedSgd, cfg.step_schedule, problem.metadata.lambda);
  double eta_base = cfg.eta_w;
  if (!(eta_base > 0)) {
    const double denom = problem.metadata.grad_bound_f * std::sqrt(static_cast<double>(T));
    if (!(denom > 0))
      throw std::invalid_argument("solve_projected_sgd: zero denominator in the default step");
    eta_base = problem.domain.diameter_bound() / denom;
  }

  Rng rng(cfg.seed);
  Vector w = project_feasible(problem, project_domain(problem.domain, problem.start_point()));
  Vector ghat(w.size());
  detail::RunningAverage avg;
  CheckCounter checks;
  std::int64_t samples = 0;
  std::int64_t projections = 1;  // the start point projection
  detail::TraceRecorder rec(problem, cfg, T);
  const double iter_cost = problem.objective.sample_cost_hint_ns +
                           detail::kProjectionCostNsPerDim * static_cast<double>(w.size());

  for (long t = 1; t <= T; ++t) {
    avg.add(w);
    rec.maybe_record(t, avg.value, 1, 0, 0, 0.0, checks);
    problem.objective.sample_subgradient(w, rng, ghat);
    ++samples;
    w = project_feasible(
        problem,
        project_domain(problem.domain, w - detail::step_size(sched, eta_base, t) * ghat));
    ++projections;
    detail::require_finite(w, "solve_projected_sgd", t);
    rec.charge(iter_cost);
  }
  return detail::finish(problem, cfg, avg, checks, samples, projections, rec,
                        std::move(warnings));
}

inline SolverResult solve(const Problem& problem, const SolverConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::FullTouch:
      return solve_full(problem, cfg);
    case Algorithm::LightTouch:
      return solve_light(problem, cfg);
    case Algorithm::MidTouch:
      return solve_mid(problem, cfg);
    case Algorithm::PracticalLightTouch:
      return solve_practical(problem, cfg);
    case Algorithm::ProjectedSgd:
      return solve_projected_sgd(problem, cfg);
  }
  throw std::invalid_argument("solve: unknown algorithm");
}

}  // namespace heavytouch
