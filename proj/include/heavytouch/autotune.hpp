#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "heavytouch/core.hpp"

namespace heavytouch {

struct MinibatchSizes {
  int k_f = 2;
  int k_g = 2;
  int k_p = 1;
};

/// Online variance and cost estimates for the three stochastic-gradient
/// components (objective, sampled-constraint, distribution). Variances are
/// decayed averages v_bar' ~ v + nu * v_bar normalized by the geometric
/// weight sum; costs are running means of per-sample nanoseconds. Each
/// measured total is floored at 1ns so trivially cheap constraints cannot
/// blow up the allocation ratios. Owned by one solver run.
class EstimatorState {
 public:
  explicit EstimatorState(double nu = 0.999) : nu_(nu) {
    if (!(nu > 0.0) || nu > 1.0)
      throw std::invalid_argument("EstimatorState: nu must be in (0, 1]");
  }

  void observe_f(std::span<const Vector> samples, double cost_ns) {
    observe_vector_component(f_, samples, cost_ns);
  }

  void observe_g(std::span<const Vector> samples, double cost_ns) {
    observe_vector_component(g_, samples, cost_ns);
  }

  /// Folds the crude l-infinity variance proxy of the centered p-gradient:
  /// v_p = gamma^2 m^2 (1/k_p) sum_i (mu_i - max(0, g_i(w)))^2.
  void observe_p(std::span<const double> mu_diffs, double gamma, int m, int k_p,
                 double cost_ns) {
    if (k_p < 1) throw std::invalid_argument("observe_p: k_p must be >= 1");
    double sum_sq = 0.0;
    for (double diff : mu_diffs) sum_sq += diff * diff;
    const double v = gamma * gamma * static_cast<double>(m) * static_cast<double>(m) *
                     sum_sq / static_cast<double>(k_p);
    p_.fold(v, std::max(1.0, cost_ns) / static_cast<double>(k_p), nu_);
  }

  double variance_f() const { return f_.variance(); }
  double variance_g() const { return g_.variance(); }
  double variance_p() const { return p_.variance(); }
  double cost_f() const { return f_.cost(); }
  double cost_g() const { return g_.cost(); }
  double cost_p() const { return p_.cost(); }
  long samples_seen_f() const { return f_.observations; }
  long samples_seen_g() const { return g_.observations; }
  long samples_seen_p() const { return p_.observations; }
  bool seeded() const {
    return f_.observations > 0 && g_.observations > 0 && p_.observations > 0;
  }

 private:
  struct Component {
    double var_num = 0.0;
    double var_weight = 0.0;
    double cost_sum = 0.0;
    long observations = 0;

    void fold(double v, double per_sample_cost_ns, double nu) {
      if (!std::isfinite(v) || !std::isfinite(per_sample_cost_ns))
        throw std::invalid_argument("EstimatorState: non-finite observation");
      var_num = v + nu * var_num;
      var_weight = 1.0 + nu * var_weight;
      cost_sum += per_sample_cost_ns;
      ++observations;
    }
    double variance() const { return observations > 0 ? var_num / var_weight : 0.0; }
    double cost() const {
      return observations > 0 ? cost_sum / static_cast<double>(observations) : 0.0;
    }
  };

  void observe_vector_component(Component& c, std::span<const Vector> samples, double cost_ns) {
    const auto k = samples.size();
    if (k < 2)
      throw std::invalid_argument("EstimatorState: sample variance needs at least 2 samples");
    Vector mean = samples[0];
    for (size_t i = 1; i < k; ++i) mean += samples[i];
    mean /= static_cast<double>(k);
    double v = 0.0;  // covariance-matrix trace estimate
    for (const Vector& s : samples) v += (s - mean).squaredNorm();
    v /= static_cast<double>(k - 1);
    c.fold(v, std::max(1.0, cost_ns) / static_cast<double>(k), nu_);
  }

  double nu_;
  Component f_, g_, p_;
};

/// Closed-form minibatch allocation: sizes proportional to
/// sqrt(eta * v_bar / c_bar) per component, scaled so k_f = 2, rounded, and
/// clamped to k_g >= 2, 1 <= k_p <= m. Minimizes the bound impact
/// b = sum eta v_bar / k for the implied cost budget.
inline MinibatchSizes allocate(const EstimatorState& est, double eta_w_t, double eta_p, int m) {
  const double cf = est.cost_f(), cg = est.cost_g(), cp = est.cost_p();
  if (!(cf > 0.0) || !(cg > 0.0) || !(cp > 0.0) || !std::isfinite(cf) || !std::isfinite(cg) ||
      !std::isfinite(cp))
    throw std::invalid_argument("allocate: cost estimates must be positive and finite");
  const double raw_f = std::sqrt(eta_w_t * std::max(0.0, est.variance_f()) / cf);
  const double raw_g = std::sqrt(eta_w_t * std::max(0.0, est.variance_g()) / cg);
  const double raw_p = std::sqrt(eta_p * std::max(0.0, est.variance_p()) / cp);
  if (!(raw_f > 0.0)) return {2, 2, 1};  // no objective noise observed: minimal batches
  const double scale = 2.0 / raw_f;
  MinibatchSizes k;
  k.k_f = 2;
  k.k_g = std::max(2, static_cast<int>(std::llround(scale * raw_g)));
  k.k_p = std::clamp(static_cast<int>(std::llround(scale * raw_p)), 1, m);
  return k;
}

}  // namespace heavytouch
