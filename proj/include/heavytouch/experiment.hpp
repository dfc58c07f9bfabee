#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "heavytouch/generators.hpp"
#include "heavytouch/solvers.hpp"

namespace heavytouch {

struct RunSpec {
  std::string label;
  SolverConfig config;
};

struct ExperimentPlan {
  GeneratorSpec problem;
  std::vector<RunSpec> runs;
  int repetitions = 1;
  std::filesystem::path output_dir = ".";
  int jobs = 1;
};

struct LabelSummary {
  std::string label;
  double mean_final_objective = 0.0;
  double mean_final_violation = 0.0;
  double mean_constraint_checks = 0.0;
};

struct ExperimentSummary {
  std::vector<LabelSummary> labels;
  std::vector<std::filesystem::path> files;
};

/// 17 significant digits: round-trip exact for 64-bit floats.
inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const char* trace_csv_header() {
  return "iteration,checks,objective,violation,k_f,k_g,k_p,p_entropy,elapsed_ns";
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << trace_csv_header() << '\n';
  for (const TraceRecord& r : trace) {
    os << r.iteration << ',' << r.cumulative_constraint_checks << ','
       << format_g17(r.objective_of_projected_average) << ','
       << format_g17(r.max_violation_of_average) << ',' << r.k_f << ',' << r.k_g << ',' << r.k_p
       << ',' << format_g17(r.p_entropy) << ',' << r.elapsed_ns << '\n';
  }
}

namespace detail {

inline void validate_label(const std::string& label) {
  if (label.empty()) throw std::invalid_argument("experiment: empty run label");
  for (char c : label)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
      throw std::invalid_argument("experiment: label '" + label +
                                  "' may only contain [A-Za-z0-9._-]");
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("experiment: cannot open '" + path.string() + "' for writing");
  return os;
}

}  // namespace detail

/// Runs every (config x repetition) of the plan against one shared problem
/// instance, with per-repetition seeds derived from each run's seed. Writes
/// one CSV per run plus an aggregate of per-label mean curves keyed on
/// iteration. Independent runs may execute in parallel (plan.jobs).
inline ExperimentSummary run_experiment(const ExperimentPlan& plan) {
  if (plan.runs.empty()) throw std::invalid_argument("experiment: no runs in plan");
  if (plan.repetitions < 1) throw std::invalid_argument("experiment: repetitions must be >= 1");
  for (size_t a = 0; a < plan.runs.size(); ++a) {
    detail::validate_label(plan.runs[a].label);
    for (size_t b = a + 1; b < plan.runs.size(); ++b)
      if (plan.runs[a].label == plan.runs[b].label)
        throw std::invalid_argument("experiment: duplicate label '" + plan.runs[a].label + "'");
  }

  const Problem problem = generate(plan.problem);
  std::filesystem::create_directories(plan.output_dir);

  struct Task {
    size_t run_index;
    int rep;
  };
  std::vector<Task> tasks;
  for (size_t i = 0; i < plan.runs.size(); ++i)
    for (int rep = 0; rep < plan.repetitions; ++rep) tasks.push_back({i, rep});

  std::vector<SolverResult> results(tasks.size());
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  const auto worker = [&] {
    for (;;) {
      const size_t id = next.fetch_add(1);
      if (id >= tasks.size()) return;
      try {
        const Task& task = tasks[id];
        SolverConfig cfg = plan.runs[task.run_index].config;
        cfg.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(task.rep));
        results[id] = solve(problem, cfg);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int jobs = std::max(1, std::min<int>(plan.jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(jobs));
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentSummary summary;
  for (size_t id = 0; id < tasks.size(); ++id) {
    const Task& task = tasks[id];
    const auto path = plan.output_dir / (plan.runs[task.run_index].label + "_rep" +
                                         std::to_string(task.rep) + ".csv");
    auto os = detail::open_output(path);
    write_trace_csv(os, results[id].trace);
    summary.files.push_back(path);
  }

  // Aggregate: per-label means across repetitions, row-aligned on iteration.
  const auto agg_path = plan.output_dir / "aggregate.csv";
  auto agg = detail::open_output(agg_path);
  agg << "label," << trace_csv_header() << '\n';
  for (size_t i = 0; i < plan.runs.size(); ++i) {
    size_t rows = 0;
    for (size_t id = 0; id < tasks.size(); ++id)
      if (tasks[id].run_index == i && tasks[id].rep == 0) rows = results[id].trace.size();
    for (size_t row = 0; row < rows; ++row) {
      double checks = 0, obj = 0, viol = 0, kf = 0, kg = 0, kp = 0, ent = 0, ns = 0;
      long iteration = 0;
      int reps = 0;
      for (size_t id = 0; id < tasks.size(); ++id) {
        if (tasks[id].run_index != i) continue;
        const auto& tr = results[id].trace;
        if (tr.size() != rows)
          throw std::runtime_error("experiment: repetition trace shapes differ for label '" +
                                   plan.runs[i].label + "'");
        const TraceRecord& r = tr[row];
        iteration = r.iteration;
        checks += static_cast<double>(r.cumulative_constraint_checks);
        obj += r.objective_of_projected_average;
        viol += r.max_violation_of_average;
        kf += r.k_f;
        kg += r.k_g;
        kp += r.k_p;
        ent += r.p_entropy;
        ns += static_cast<double>(r.elapsed_ns);
        ++reps;
      }
      const double inv = 1.0 / reps;
      agg << plan.runs[i].label << ',' << iteration << ',' << format_g17(checks * inv) << ','
          << format_g17(obj * inv) << ',' << format_g17(viol * inv) << ','
          << format_g17(kf * inv) << ',' << format_g17(kg * inv) << ',' << format_g17(kp * inv)
          << ',' << format_g17(ent * inv) << ',' << format_g17(ns * inv) << '\n';
    }

    LabelSummary ls;
    ls.label = plan.runs[i].label;
    int reps = 0;
    for (size_t id = 0; id < tasks.size(); ++id) {
      if (tasks[id].run_index != i) continue;
      ls.mean_final_objective += results[id].final_objective;
      ls.mean_final_violation += results[id].final_violation;
      ls.mean_constraint_checks += static_cast<double>(results[id].total_constraint_checks);
      ++reps;
    }
    ls.mean_final_objective /= reps;
    ls.mean_final_violation /= reps;
    ls.mean_constraint_checks /= reps;
    summary.labels.push_back(std::move(ls));
  }
  summary.files.push_back(agg_path);
  return summary;
}

}  // namespace heavytouch
