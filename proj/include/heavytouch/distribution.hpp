#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "heavytouch/core.hpp"
#include "heavytouch/rng.hpp"

namespace heavytouch {

/// One stochastic supergradient of the relaxed objective w.r.t. p:
/// gamma * mu + (gamma m / k) * sum_{j in S} e_j (max(0, g_j(w)) - mu_j).
/// The dense term is carried implicitly (a scale over the state's remembered
/// values), so no m-vector is materialized per iteration. Because the state
/// refreshes mu on S right after building the descriptor, the mu values the
/// formula referenced are captured in `frozen_mu`.
struct SupergradientDescriptor {
  double dense_scale = 0.0;
  std::vector<std::pair<int, double>> corrections;  // (j, (gamma m / k)(g_j^+ - mu_j))
  std::vector<std::pair<int, double>> frozen_mu;    // (j, mu_j before the refresh)
};

/// Learned distribution p over constraint indices plus the remembered
/// constraint values mu of the variance-reduced p-gradient, with staleness
/// bookkeeping. Exclusively owned by one solver run.
class SamplingState {
 public:
  /// Uniform p; mu_j = max(0, g_j(w)), which costs m counted checks.
  template <ConstraintFamily F>
  static SamplingState at(const F& cs, const Vector& w, CheckCounter& checks) {
    SamplingState s(cs.count());
    for (int j = 0; j < cs.count(); ++j) s.mu_[j] = std::max(0.0, cs.evaluate(j, w, checks));
    return s;
  }

  /// Uniform p; mu = 0. Valid when the current iterate is known feasible
  /// (all g_j <= 0), in which case no checks are spent.
  static SamplingState feasible_start(int m) { return SamplingState(m); }

  int size() const { return static_cast<int>(p_.size()); }
  const Vector& probabilities() const { return p_; }
  const Vector& remembered_values() const { return mu_; }
  double p_floor() const { return p_floor_; }
  int last_update(int j) const { return last_update_[static_cast<size_t>(j)]; }
  int max_staleness_seen() const { return max_staleness_seen_; }

  double entropy() const {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p_.size(); ++i)
      if (p_[i] > 0.0) h -= p_[i] * std::log(p_[i]);
    return h;
  }

  int argmax_probability() const {
    Eigen::Index best = 0;
    p_.maxCoeff(&best);
    return static_cast<int>(best);
  }

  template <ConstraintFamily F>
  friend SupergradientDescriptor centered_supergradient(SamplingState&, const F&, const Vector&,
                                                        const std::vector<int>&, double, int,
                                                        CheckCounter&);
  friend void multiplicative_update(SamplingState&, const SupergradientDescriptor&, double);

 private:
  explicit SamplingState(int m)
      : p_(Vector::Constant(m, 1.0 / m)),
        log_weights_(Vector::Zero(m)),
        mu_(Vector::Zero(m)),
        last_update_(static_cast<size_t>(m), 0),
        p_floor_(1e-12 / m) {
    if (m <= 0) throw std::invalid_argument("SamplingState: m must be positive");
  }

  /// exp-normalize the log weights, then floor at p_floor so no index ever
  /// dies under finite precision. The closing floor pass keeps min p at
  /// exactly the floor after renormalization (the sum stays 1 within 1e-12).
  void materialize() {
    log_weights_.array() -= log_weights_.maxCoeff();
    p_ = log_weights_.array().exp();
    p_ /= p_.sum();
    p_ = p_.cwiseMax(p_floor_);
    p_ /= p_.sum();
    p_ = p_.cwiseMax(p_floor_);
  }

  Vector p_;
  Vector log_weights_;
  Vector mu_;
  std::vector<int> last_update_;
  double p_floor_;
  int max_staleness_seen_ = 0;
};

/// Index i ~ p by inverse CDF over the stored vector; O(m) per draw. A
/// single-constraint state consumes no randomness, so degenerate problems
/// reproduce the full-information trajectory draw-for-draw.
inline int sample_constraint(const SamplingState& state, Rng& rng) {
  const Vector& p = state.probabilities();
  const int m = static_cast<int>(p.size());
  if (m == 1) return 0;
  const double u = rng.uniform01();
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return m - 1;
}

/// Uniform k-subset of {0..m-1} by partial Fisher-Yates. k == m returns the
/// identity subset without consuming randomness.
inline std::vector<int> sample_without_replacement(int m, int k, Rng& rng) {
  if (k < 1 || k > m)
    throw std::invalid_argument("sample_without_replacement: need 1 <= k <= m, got k=" +
                                std::to_string(k) + " m=" + std::to_string(m));
  std::vector<int> idx(static_cast<size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  if (k == m) return idx;
  for (int i = 0; i < k; ++i)
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(i + rng.uniform_int(m - i))]);
  idx.resize(static_cast<size_t>(k));
  return idx;
}

/// Variance-reduced supergradient over the subset S evaluated at w, reporting
/// |S| checks; afterwards refreshes mu_j <- max(0, g_j(w)) and the staleness
/// clock for j in S.
template <ConstraintFamily F>
SupergradientDescriptor centered_supergradient(SamplingState& state, const F& cs, const Vector& w,
                                               const std::vector<int>& subset, double gamma,
                                               int iteration, CheckCounter& checks) {
  if (subset.empty()) throw std::invalid_argument("centered_supergradient: empty subset");
  const double m_over_k =
      static_cast<double>(state.size()) / static_cast<double>(subset.size());
  SupergradientDescriptor d;
  d.dense_scale = gamma;
  d.corrections.reserve(subset.size());
  d.frozen_mu.reserve(subset.size());
  for (int j : subset) {
    const double fresh = std::max(0.0, cs.evaluate(j, w, checks));
    const double old = state.mu_[j];
    d.corrections.emplace_back(j, gamma * m_over_k * (fresh - old));
    d.frozen_mu.emplace_back(j, old);
    state.max_staleness_seen_ =
        std::max(state.max_staleness_seen_, iteration - state.last_update_[static_cast<size_t>(j)]);
    state.mu_[j] = fresh;
    state.last_update_[static_cast<size_t>(j)] = iteration;
  }
  return d;
}

/// Full m-vector of a descriptor against the state that produced it
/// (diagnostics and tests).
inline Vector materialize_supergradient(const SupergradientDescriptor& d,
                                        const SamplingState& state) {
  Vector v = d.dense_scale * state.remembered_values();
  for (const auto& [j, old] : d.frozen_mu) v[j] = d.dense_scale * old;
  for (const auto& [j, c] : d.corrections) v[j] += c;
  return v;
}

/// Multiplicative step p_i <- p_i * exp(eta_p * d_i), renormalized. Performed
/// on log weights with max subtraction, which is mathematically identical to
/// the literal exp-of-sum update but cannot overflow.
inline void multiplicative_update(SamplingState& state, const SupergradientDescriptor& d,
                                  double eta_p) {
  if (!(eta_p > 0)) throw std::invalid_argument("multiplicative_update: eta_p must be > 0");
  const auto check_finite = [](double x) {
    if (!std::isfinite(x))
      throw std::invalid_argument("multiplicative_update: non-finite descriptor entry");
  };
  check_finite(d.dense_scale);
  state.log_weights_ += (eta_p * d.dense_scale) * state.mu_;
  for (const auto& [j, old] : d.frozen_mu) {
    check_finite(old);
    state.log_weights_[j] += eta_p * d.dense_scale * (old - state.mu_[j]);
  }
  for (const auto& [j, c] : d.corrections) {
    check_finite(c);
    state.log_weights_[j] += eta_p * c;
  }
  state.materialize();
}

/// High-probability staleness bound of the remembered values:
/// 1 + (2m/k) ln(2mT/delta).
inline double staleness_bound(double m, double k, double T, double delta) {
  if (!(m > 0) || !(k > 0) || !(T > 0) || !(delta > 0 && delta < 1))
    throw std::invalid_argument("staleness_bound: need m,k,T > 0 and delta in (0,1)");
  return 1.0 + (2.0 * m / k) * std::log(2.0 * m * T / delta);
}

}  // namespace heavytouch
