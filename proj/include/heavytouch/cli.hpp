#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heavytouch/experiment.hpp"
#include "heavytouch/generators.hpp"
#include "heavytouch/projections.hpp"
#include "heavytouch/solvers.hpp"

namespace heavytouch {
namespace cli_detail {

struct ProblemFlags {
  std::string kind = "monotonic-ranking";
  int d = 0;  // 0 = generator default
  int n = 0;
  double noise = -1.0;
  int sparsity = 0;
  std::string pairs = "grid";
  double condition = 0.0;
  std::uint64_t problem_seed = 1;

  void attach(CLI::App& cmd) {
    cmd.add_option("--problem", kind, "Problem generator")
        ->check(CLI::IsMember({"ordering-regression", "monotonic-ranking", "box-qp"}));
    cmd.add_option("--d", d, "Problem dimension");
    cmd.add_option("--n", n, "Training examples");
    cmd.add_option("--noise", noise, "Observation noise sd (ordering-regression)");
    cmd.add_option("--sparsity", sparsity, "Nonzeros per example (monotonic-ranking)");
    cmd.add_option("--pairs", pairs, "Pair structure (monotonic-ranking)")
        ->check(CLI::IsMember({"chain", "grid"}));
    cmd.add_option("--condition", condition, "Curvature spread (box-qp)");
    cmd.add_option("--problem-seed", problem_seed, "Generator seed");
  }

  GeneratorSpec to_spec() const {
    GeneratorSpec spec;
    spec.seed = problem_seed;
    if (kind == "ordering-regression") {
      OrderingRegressionSpec s;
      if (d > 0) s.dim = d;
      if (n > 0) s.samples = n;
      if (noise >= 0) s.noise_sd = noise;
      spec.kind = s;
    } else if (kind == "monotonic-ranking") {
      MonotonicRankingSpec s;
      if (d > 0) s.dim = d;
      if (n > 0) s.samples = n;
      if (sparsity > 0) s.sparsity = sparsity;
      s.pair_structure = pairs == "chain" ? MonotonicRankingSpec::Pairs::Chain
                                          : MonotonicRankingSpec::Pairs::Grid;
      spec.kind = s;
    } else {
      BoxQpSpec s;
      if (d > 0) s.dim = d;
      if (n > 0) s.samples = n;
      if (condition > 0) s.condition = condition;
      spec.kind = s;
    }
    return spec;
  }
};

struct SolverFlags {
  std::string solver = "full";
  long T = 100000;
  long T1 = 0, T2 = 0;
  double tau = 0.0;
  double eta_w = 0.0, eta_p = 0.0, gamma = 0.0, delta = 0.1;
  int k = 0;
  int aggregate = 0;
  long trace_every = 0;
  std::string schedule = "auto";
  bool no_final_projection = false;
  bool wall_clock_costs = false;
  std::uint64_t seed = 1;

  void attach(CLI::App& cmd, bool with_solver_choice) {
    if (with_solver_choice)
      cmd.add_option("--solver", solver, "Algorithm")
          ->check(CLI::IsMember({"full", "light", "mid", "practical", "psgd"}));
    cmd.add_option("--T", T, "Iterations");
    cmd.add_option("--T1", T1, "Phase-1 iterations (mid)");
    cmd.add_option("--T2", T2, "Phase-2 iterations (mid)");
    cmd.add_option("--tau", tau, "Derive T1/T2 from tau (mid)");
    cmd.add_option("--eta-w", eta_w, "w-step size (0 = recommended)");
    cmd.add_option("--eta-p", eta_p, "p-step size (0 = recommended)");
    cmd.add_option("--gamma", gamma, "Penalty scale (0 = problem recommendation)");
    cmd.add_option("--k", k, "p-minibatch size (0 = recommended)");
    cmd.add_option("--delta", delta, "Confidence for the k/staleness formulas");
    cmd.add_option("--aggregate", aggregate, "Aggregated constraint groups (practical)");
    cmd.add_option("--trace-every", trace_every, "Trace stride (0 = T/100)");
    cmd.add_option("--schedule", schedule, "w-step schedule")
        ->check(CLI::IsMember({"auto", "constant", "invsqrt", "invt"}));
    cmd.add_flag("--no-final-projection", no_final_projection,
                 "Skip the final projection onto the feasible set");
    cmd.add_flag("--wall-clock-costs", wall_clock_costs,
                 "Measure minibatch costs with the monotonic clock (non-reproducible)");
    cmd.add_option("--seed", seed, "Run seed")->envname("HEAVYTOUCH_SEED");
  }

  static Algorithm algorithm_of(const std::string& name) {
    if (name == "full") return Algorithm::FullTouch;
    if (name == "light") return Algorithm::LightTouch;
    if (name == "mid") return Algorithm::MidTouch;
    if (name == "practical") return Algorithm::PracticalLightTouch;
    if (name == "psgd") return Algorithm::ProjectedSgd;
    throw CLI::ValidationError("--solver", "unknown solver '" + name + "'");
  }

  static StepSchedule schedule_of(const std::string& name) {
    if (name == "constant") return StepSchedule::Constant;
    if (name == "invsqrt") return StepSchedule::InvSqrt;
    if (name == "invt") return StepSchedule::InvT;
    return StepSchedule::Auto;
  }

  /// Config with tau resolved against the generated problem's m.
  SolverConfig to_config(const Problem& problem) const {
    SolverConfig cfg;
    cfg.algorithm = algorithm_of(solver);
    cfg.iterations = T;
    cfg.phase1_iterations = T1;
    cfg.phase2_iterations = T2;
    if (cfg.algorithm == Algorithm::MidTouch && tau > 0)
      std::tie(cfg.phase1_iterations, cfg.phase2_iterations) =
          schedule_from_tau(tau, problem.constraints.count());
    cfg.eta_w = eta_w;
    cfg.eta_p = eta_p;
    cfg.gamma = gamma;
    cfg.k = k;
    cfg.delta = delta;
    cfg.step_schedule = schedule_of(schedule);
    cfg.final_projection = !no_final_projection;
    cfg.seed = seed;
    cfg.trace_every = trace_every;
    cfg.aggregate_groups = aggregate;
    cfg.wall_clock_costs = wall_clock_costs;
    return cfg;
  }
};

inline void print_result(std::ostream& out, const SolverResult& r) {
  out << "final objective    = " << format_g17(r.final_objective) << '\n'
      << "final violation    = " << format_g17(r.final_violation) << '\n'
      << "constraint checks  = " << r.total_constraint_checks << '\n'
      << "objective samples  = " << r.total_objective_samples << '\n'
      << "projections        = " << r.total_projections << '\n'
      << "wall time          = " << static_cast<double>(r.wall_time.count()) * 1e-6 << " ms\n";
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
}

// --------------------------------------------------------------------- solve

inline int run_solve(const ProblemFlags& pf, const SolverFlags& sf, const std::string& out_path,
                     std::ostream& out) {
  const Problem problem = generate(pf.to_spec());
  const SolverResult result = solve(problem, sf.to_config(problem));
  print_result(out, result);
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("solve: cannot open '" + out_path + "' for writing");
    write_trace_csv(os, result.trace);
    out << "trace written to " << out_path << '\n';
  }
  return 0;
}

// ------------------------------------------------------------------- compare

struct RunDraft {
  std::string label;
  SolverFlags flags;
};

inline void apply_json_flags(const nlohmann::json& j, SolverFlags& f) {
  if (j.contains("solver")) f.solver = j.at("solver").get<std::string>();
  if (j.contains("T")) f.T = j.at("T").get<long>();
  if (j.contains("T1")) f.T1 = j.at("T1").get<long>();
  if (j.contains("T2")) f.T2 = j.at("T2").get<long>();
  if (j.contains("tau")) f.tau = j.at("tau").get<double>();
  if (j.contains("eta_w")) f.eta_w = j.at("eta_w").get<double>();
  if (j.contains("eta_p")) f.eta_p = j.at("eta_p").get<double>();
  if (j.contains("gamma")) f.gamma = j.at("gamma").get<double>();
  if (j.contains("k")) f.k = j.at("k").get<int>();
  if (j.contains("delta")) f.delta = j.at("delta").get<double>();
  if (j.contains("aggregate")) f.aggregate = j.at("aggregate").get<int>();
  if (j.contains("trace_every")) f.trace_every = j.at("trace_every").get<long>();
  if (j.contains("schedule")) f.schedule = j.at("schedule").get<std::string>();
  if (j.contains("final_projection")) f.no_final_projection = !j.at("final_projection").get<bool>();
  if (j.contains("wall_clock_costs")) f.wall_clock_costs = j.at("wall_clock_costs").get<bool>();
  if (j.contains("seed")) f.seed = j.at("seed").get<std::uint64_t>();
}

inline void apply_json_problem(const nlohmann::json& j, ProblemFlags& pf) {
  if (j.contains("kind")) pf.kind = j.at("kind").get<std::string>();
  if (j.contains("d")) pf.d = j.at("d").get<int>();
  if (j.contains("n")) pf.n = j.at("n").get<int>();
  if (j.contains("noise")) pf.noise = j.at("noise").get<double>();
  if (j.contains("sparsity")) pf.sparsity = j.at("sparsity").get<int>();
  if (j.contains("pairs")) pf.pairs = j.at("pairs").get<std::string>();
  if (j.contains("condition")) pf.condition = j.at("condition").get<double>();
  if (j.contains("seed")) pf.problem_seed = j.at("seed").get<std::uint64_t>();
}

inline int run_compare(const CLI::App& cmd, ProblemFlags pf, const SolverFlags& base_flags,
                       const std::vector<std::string>& solvers, const std::string& config_path,
                       int reps, const std::string& out_dir, int jobs, std::ostream& out) {
  std::vector<RunDraft> drafts;
  ExperimentPlan plan;
  plan.repetitions = reps;
  plan.output_dir = out_dir.empty() ? "." : out_dir;
  plan.jobs = jobs;

  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw std::runtime_error("compare: cannot open config '" + config_path + "'");
    nlohmann::json j = nlohmann::json::parse(is);
    if (j.contains("problem")) apply_json_problem(j.at("problem"), pf);
    if (j.contains("repetitions") && !cmd.count("--reps"))
      plan.repetitions = j.at("repetitions").get<int>();
    if (j.contains("output") && !cmd.count("--out"))
      plan.output_dir = j.at("output").get<std::string>();
    if (j.contains("jobs") && !cmd.count("--jobs")) plan.jobs = j.at("jobs").get<int>();
    for (const auto& rj : j.at("runs")) {
      RunDraft d;
      d.flags = base_flags;  // command-line flags override file values
      apply_json_flags(rj, d.flags);
      d.label = rj.contains("label") ? rj.at("label").get<std::string>() : d.flags.solver;
      drafts.push_back(std::move(d));
    }
  }
  if (!solvers.empty()) {
    // Explicit --solver flags define the run list themselves.
    drafts.clear();
    for (const std::string& s : solvers) {
      RunDraft d;
      d.flags = base_flags;
      d.flags.solver = s;
      d.label = s;
      drafts.push_back(std::move(d));
    }
  }
  if (drafts.empty())
    throw CLI::ValidationError("compare", "needs --config or at least one --solver");

  // Command-line overrides for run-level fields apply to every draft.
  if (!config_path.empty()) {
    for (auto& d : drafts) {
      if (cmd.count("--T")) d.flags.T = base_flags.T;
      if (cmd.count("--T1")) d.flags.T1 = base_flags.T1;
      if (cmd.count("--T2")) d.flags.T2 = base_flags.T2;
      if (cmd.count("--tau")) d.flags.tau = base_flags.tau;
      if (cmd.count("--eta-w")) d.flags.eta_w = base_flags.eta_w;
      if (cmd.count("--eta-p")) d.flags.eta_p = base_flags.eta_p;
      if (cmd.count("--gamma")) d.flags.gamma = base_flags.gamma;
      if (cmd.count("--k")) d.flags.k = base_flags.k;
      if (cmd.count("--delta")) d.flags.delta = base_flags.delta;
      if (cmd.count("--aggregate")) d.flags.aggregate = base_flags.aggregate;
      if (cmd.count("--trace-every")) d.flags.trace_every = base_flags.trace_every;
      if (cmd.count("--schedule")) d.flags.schedule = base_flags.schedule;
      if (cmd.count("--seed")) d.flags.seed = base_flags.seed;
    }
  }

  plan.problem = pf.to_spec();
  const Problem probe = generate(plan.problem);  // resolves tau -> (T1, T2)
  for (const auto& d : drafts) plan.runs.push_back({d.label, d.flags.to_config(probe)});

  const ExperimentSummary summary = run_experiment(plan);
  for (const auto& ls : summary.labels)
    out << ls.label << ": objective = " << format_g17(ls.mean_final_objective)
        << ", violation = " << format_g17(ls.mean_final_violation)
        << ", checks = " << format_g17(ls.mean_constraint_checks) << '\n';
  out << summary.files.size() << " files written to " << plan.output_dir.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------- project

inline int run_project(const std::string& input, const std::string& out_path, std::ostream& out) {
  std::ifstream is(input);
  if (!is) throw std::runtime_error("project: cannot open '" + input + "'");
  std::vector<double> values;
  double x;
  while (is >> x) values.push_back(x);
  if (values.empty()) throw std::runtime_error("project: empty input '" + input + "'");
  Vector w = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  const Vector projected = project_ordering(w);
  std::ostringstream line;
  for (Eigen::Index i = 0; i < projected.size(); ++i) {
    if (i) line << ' ';
    line << format_g17(projected[i]);
  }
  line << '\n';
  if (out_path.empty() || out_path == "-") {
    out << line.str();
  } else {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("project: cannot open '" + out_path + "' for writing");
    os << line.str();
  }
  return 0;
}

// ------------------------------------------------------------------ formulas

struct FormulaFlags {
  int m = 0;
  long T = 0;
  double delta = 0.1;
  int k = 0;
  double lf = 1.0, gf = 1.0, gg = 1.0, lg = 1.0, dw = 1.0;
  double gamma = 0.0;
  std::string family = "ordering";
  int d = 0;
  double radius = 1.0, b_min = 1.0;
};

inline int run_formulas(const FormulaFlags& f, std::ostream& out) {
  const int d = f.d > 0 ? f.d : f.m + 1;
  KnownConstraintFamily family = OrderingChainFamily{d};
  if (f.family == "box") family = BoxFamily{d};
  if (f.family == "linear") family = LinearRowsFamily{f.radius, f.b_min};
  const GammaEstimate ge = gamma_for_known_family(family, f.lf);
  const double gamma = f.gamma > 0 ? f.gamma : ge.gamma;

  const int k = f.k > 0 ? f.k : recommended_k(f.m, f.T, f.delta);
  const double denom_light = (f.gf + gamma * f.gg + gamma * f.lg * f.dw) *
                             std::sqrt(static_cast<double>(f.T));
  const double denom_full = (f.gf + gamma * f.gg) * std::sqrt(static_cast<double>(f.T));
  out << "k = " << k << '\n';
  out << "gamma = " << format_g17(gamma) << " (rho = " << format_g17(ge.rho) << ", family = "
      << f.family << ")\n";
  if (denom_light > 0)
    out << "eta_w (light) = "
        << format_g17(std::sqrt(1.0 + std::log(static_cast<double>(f.m))) * f.dw / denom_light)
        << '\n';
  if (denom_full > 0)
    out << "eta_w (full) = " << format_g17(f.dw / denom_full) << '\n';
  out << "staleness_bound = " << format_g17(staleness_bound(f.m, k, static_cast<double>(f.T), f.delta))
      << '\n';
  return 0;
}

}  // namespace cli_detail

/// Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
/// error.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Constrained stochastic optimization with probabilistic constraint checks"};
  app.require_subcommand(1);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Run one solver on a generated problem");
  cli_detail::ProblemFlags solve_pf;
  cli_detail::SolverFlags solve_sf;
  std::string solve_out;
  solve_pf.attach(*solve_cmd);
  solve_sf.attach(*solve_cmd, true);
  solve_cmd->add_option("--out", solve_out, "Write the trace CSV here");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Run an experiment plan and write CSVs");
  cli_detail::ProblemFlags compare_pf;
  cli_detail::SolverFlags compare_sf;
  std::vector<std::string> compare_solvers;
  std::string compare_config, compare_out = ".";
  int compare_reps = 1, compare_jobs = 1;
  compare_pf.attach(*compare_cmd);
  compare_sf.attach(*compare_cmd, false);
  compare_cmd->add_option("--solver", compare_solvers, "Solver(s) to run (repeatable)")
      ->check(CLI::IsMember({"full", "light", "mid", "practical", "psgd"}));
  compare_cmd->add_option("--config", compare_config, "JSON plan (flags override its values)");
  compare_cmd->add_option("--reps", compare_reps, "Repetitions per run");
  compare_cmd->add_option("--out", compare_out, "Output directory");
  compare_cmd->add_option("--jobs", compare_jobs, "Parallel runs");

  // project
  auto* project_cmd = app.add_subcommand("project", "Project a vector onto the ordering chain");
  std::string project_in, project_out;
  project_cmd->add_option("input", project_in, "Whitespace-separated decimal text file")
      ->required();
  project_cmd->add_option("--out", project_out, "Output file (default: stdout)");

  // formulas
  auto* formulas_cmd = app.add_subcommand("formulas", "Print recommended hyperparameters");
  cli_detail::FormulaFlags ff;
  formulas_cmd->add_option("--m", ff.m, "Number of constraints")->required();
  formulas_cmd->add_option("--T", ff.T, "Iterations")->required();
  formulas_cmd->add_option("--delta", ff.delta, "Confidence");
  formulas_cmd->add_option("--k", ff.k, "p-minibatch (default: recommended)");
  formulas_cmd->add_option("--L-f", ff.lf, "Objective Lipschitz bound");
  formulas_cmd->add_option("--G-f", ff.gf, "Objective subgradient bound");
  formulas_cmd->add_option("--G-g", ff.gg, "Constraint subgradient bound");
  formulas_cmd->add_option("--L-g", ff.lg, "Constraint Lipschitz bound");
  formulas_cmd->add_option("--D-w", ff.dw, "Domain diameter bound");
  formulas_cmd->add_option("--gamma", ff.gamma, "Penalty scale (default: from family)");
  formulas_cmd->add_option("--family", ff.family, "Constraint family for gamma")
      ->check(CLI::IsMember({"box", "ordering", "linear"}));
  formulas_cmd->add_option("--d", ff.d, "Dimension for the family formulas");
  formulas_cmd->add_option("--radius", ff.radius, "Ball radius (linear family)");
  formulas_cmd->add_option("--b-min", ff.b_min, "Smallest right-hand side (linear family)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(solve_cmd))
      return cli_detail::run_solve(solve_pf, solve_sf, solve_out, out);
    if (app.got_subcommand(compare_cmd))
      return cli_detail::run_compare(*compare_cmd, compare_pf, compare_sf, compare_solvers,
                                     compare_config, compare_reps, compare_out, compare_jobs, out);
    if (app.got_subcommand(project_cmd))
      return cli_detail::run_project(project_in, project_out, out);
    if (app.got_subcommand(formulas_cmd)) return cli_detail::run_formulas(ff, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << "error: no subcommand\n";
  return 1;
}

}  // namespace heavytouch
