#pragma once

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "heavytouch/check_counter.hpp"
#include "heavytouch/rng.hpp"

namespace heavytouch {

using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

/// Simple closed convex domain with a cheap Euclidean projection: an
/// axis-aligned box or an l2 ball. Carries a diameter bound D_w >= 1.
class Domain {
 public:
  enum class Kind { Box, Ball };

  static Domain box(Vector lower, Vector upper) {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw std::invalid_argument("Domain::box: empty or mismatched bounds");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw std::invalid_argument("Domain::box: requires lower_i < upper_i");
    Domain d;
    d.kind_ = Kind::Box;
    d.lower_ = std::move(lower);
    d.upper_ = std::move(upper);
    d.diameter_ = std::max(1.0, (d.upper_ - d.lower_).norm());
    return d;
  }

  /// Uniform box [-b, b]^dim.
  static Domain cube(int dim, double b) {
    return box(Vector::Constant(dim, -b), Vector::Constant(dim, b));
  }

  static Domain ball(Vector center, double radius) {
    if (center.size() == 0) throw std::invalid_argument("Domain::ball: empty center");
    if (!(radius > 0)) throw std::invalid_argument("Domain::ball: radius must be > 0");
    Domain d;
    d.kind_ = Kind::Ball;
    d.center_ = std::move(center);
    d.radius_ = radius;
    d.diameter_ = std::max(1.0, 2.0 * radius);
    return d;
  }

  Kind kind() const { return kind_; }
  int dim() const {
    return static_cast<int>(kind_ == Kind::Box ? lower_.size() : center_.size());
  }
  double diameter_bound() const { return diameter_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }

  bool contains(const Vector& w, double tol = 0.0) const {
    if (kind_ == Kind::Box) {
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] < lower_[i] - tol || w[i] > upper_[i] + tol) return false;
      return true;
    }
    return (w - center_).norm() <= radius_ + tol;
  }

  /// Midpoint of a box, center of a ball. Default starting iterate.
  Vector center_point() const {
    return kind_ == Kind::Box ? Vector(0.5 * (lower_ + upper_)) : center_;
  }

 private:
  Kind kind_ = Kind::Box;
  Vector lower_, upper_;   // Box
  Vector center_;          // Ball
  double radius_ = 0.0;
  double diameter_ = 1.0;
};

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

/// scale * (w_i - w_j) <= 0, i.e. w_i <= w_j for positive scale.
struct OrderingPair {
  int i = 0;
  int j = 0;
  double scale = 1.0;
};

/// <a, w> - b <= 0.
struct LinearRow {
  Vector a;
  double b = 0.0;
};

/// sign * w_i - bound <= 0 (one face of a box).
struct BoxFace {
  int i = 0;
  int sign = 1;  // +1 or -1
  double bound = 0.0;
};

using ConstraintKind = std::variant<OrderingPair, LinearRow, BoxFace>;

/// Result of one counted constraint check. `base_index` identifies the base
/// constraint backing the value (for plain sets it equals the queried index;
/// aggregated sets report the maximizing member), so a subgradient can be
/// applied afterwards without a second counted check.
struct ConstraintEval {
  double value = 0.0;
  int base_index = 0;
};

/// Indexed family g_1..g_m of convex constraints over R^d. Immutable after
/// construction; every evaluation is counted against the caller's counter.
class ConstraintSet {
 public:
  ConstraintSet(int dim, std::vector<ConstraintKind> kinds)
      : dim_(dim), kinds_(std::move(kinds)) {
    if (dim_ <= 0) throw std::invalid_argument("ConstraintSet: dim must be positive");
    for (const auto& k : kinds_) validate(k);
  }

  int count() const { return static_cast<int>(kinds_.size()); }
  int dim() const { return dim_; }
  const ConstraintKind& kind(int i) const { return kinds_.at(static_cast<size_t>(i)); }

  double evaluate(int i, const Vector& w, CheckCounter& checks) const {
    check_args(i, w);
    checks.add(1);
    return evaluate_raw(i, w);
  }

  ConstraintEval evaluate_detail(int i, const Vector& w, CheckCounter& checks) const {
    return {evaluate(i, w, checks), i};
  }

  /// Adds scale * (a subgradient of g_base at w) into out. Uncounted: pair it
  /// with a preceding counted evaluate of the same constraint at the same
  /// point (the paper counts evaluate+differentiate of one g_i as one check).
  void add_subgradient(int base, const Vector& w, double scale, Vector& out) const {
    check_args(base, w);
    const ConstraintKind& k = kinds_[static_cast<size_t>(base)];
    if (const auto* o = std::get_if<OrderingPair>(&k)) {
      out[o->i] += scale * o->scale;
      out[o->j] -= scale * o->scale;
    } else if (const auto* r = std::get_if<LinearRow>(&k)) {
      out += scale * r->a;
    } else {
      const auto& f = std::get<BoxFace>(k);
      out[f.i] += scale * static_cast<double>(f.sign);
    }
  }

  /// Deterministic per-check cost estimate used by the default (reproducible)
  /// cost model of the automatic minibatcher.
  double check_cost_hint_ns(int i) const {
    const ConstraintKind& k = kinds_.at(static_cast<size_t>(i));
    if (std::holds_alternative<LinearRow>(k))
      return 2.0 * static_cast<double>(std::get<LinearRow>(k).a.size());
    return 4.0;
  }

  bool all_ordering() const {
    for (const auto& k : kinds_)
      if (!std::holds_alternative<OrderingPair>(k)) return false;
    return !kinds_.empty();
  }

  /// Ordering pairs normalized to (smaller-first) direction: scale*(w_i - w_j)
  /// <= 0 becomes i <= j when scale > 0 and j <= i when scale < 0.
  std::vector<std::pair<int, int>> ordering_pairs() const {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(kinds_.size());
    for (const auto& k : kinds_) {
      const auto& o = std::get<OrderingPair>(k);
      if (o.scale > 0)
        pairs.emplace_back(o.i, o.j);
      else if (o.scale < 0)
        pairs.emplace_back(o.j, o.i);
    }
    return pairs;
  }

  /// True when the ordering pairs are exactly the adjacent chain
  /// w_1 <= w_2 <= ... <= w_d (in any listing order).
  bool is_adjacent_chain() const {
    if (!all_ordering() || count() != dim_ - 1) return false;
    std::vector<bool> seen(static_cast<size_t>(dim_ - 1), false);
    for (const auto& [i, j] : ordering_pairs()) {
      if (j != i + 1 || seen[static_cast<size_t>(i)]) return false;
      seen[static_cast<size_t>(i)] = true;
    }
    return true;
  }

 private:
  void validate(const ConstraintKind& k) const {
    if (const auto* o = std::get_if<OrderingPair>(&k)) {
      if (o->i < 0 || o->i >= dim_ || o->j < 0 || o->j >= dim_ || o->i == o->j)
        throw std::invalid_argument("ConstraintSet: ordering pair indices out of range");
    } else if (const auto* r = std::get_if<LinearRow>(&k)) {
      if (r->a.size() != dim_)
        throw std::invalid_argument("ConstraintSet: linear row dimension mismatch");
    } else {
      const auto& f = std::get<BoxFace>(k);
      if (f.i < 0 || f.i >= dim_ || (f.sign != 1 && f.sign != -1))
        throw std::invalid_argument("ConstraintSet: bad box face");
    }
  }

  void check_args(int i, const Vector& w) const {
    if (i < 0 || i >= count())
      throw std::out_of_range("ConstraintSet: index " + std::to_string(i) +
                              " out of range [0," + std::to_string(count()) + ")");
    if (w.size() != dim_)
      throw std::invalid_argument("ConstraintSet: vector has dimension " +
                                  std::to_string(w.size()) + ", expected " +
                                  std::to_string(dim_));
  }

  double evaluate_raw(int i, const Vector& w) const {
    const ConstraintKind& k = kinds_[static_cast<size_t>(i)];
    if (const auto* o = std::get_if<OrderingPair>(&k)) return o->scale * (w[o->i] - w[o->j]);
    if (const auto* r = std::get_if<LinearRow>(&k)) return r->a.dot(w) - r->b;
    const auto& f = std::get<BoxFace>(k);
    return static_cast<double>(f.sign) * w[f.i] - f.bound;
  }

  int dim_;
  std::vector<ConstraintKind> kinds_;
};

/// Anything the solvers can treat as an indexed constraint family.
template <typename F>
concept ConstraintFamily = requires(const F& f, const Vector& w, CheckCounter& c,
                                    Vector& out) {
  { f.count() } -> std::convertible_to<int>;
  { f.dim() } -> std::convertible_to<int>;
  { f.evaluate(0, w, c) } -> std::convertible_to<double>;
  { f.evaluate_detail(0, w, c) } -> std::same_as<ConstraintEval>;
  f.add_subgradient(0, w, 0.0, out);
  { f.check_cost_hint_ns(0) } -> std::convertible_to<double>;
};

/// Group-max view over a base set: g~_i(w) = max_{j in M_i} g_j(w) for a
/// contiguous partition {M_i}. Each evaluation counts |M_i| raw checks.
class AggregatedConstraintSet {
 public:
  AggregatedConstraintSet(ConstraintSet base, int requested_groups)
      : base_(std::move(base)) {
    const int m = base_.count();
    if (requested_groups < 1 || requested_groups > m)
      throw std::invalid_argument("aggregate: group count must be in [1, m]");
    const int width = (m + requested_groups - 1) / requested_groups;  // ceil(m/m~)
    for (int begin = 0; begin < m; begin += width)
      groups_.emplace_back(begin, std::min(begin + width, m));
  }

  int count() const { return static_cast<int>(groups_.size()); }
  int dim() const { return base_.dim(); }
  const ConstraintSet& base() const { return base_; }
  std::pair<int, int> group(int i) const { return groups_.at(static_cast<size_t>(i)); }
  int group_size(int i) const {
    auto [b, e] = group(i);
    return e - b;
  }

  double evaluate(int i, const Vector& w, CheckCounter& checks) const {
    return evaluate_detail(i, w, checks).value;
  }

  ConstraintEval evaluate_detail(int i, const Vector& w, CheckCounter& checks) const {
    auto [begin, end] = group(i);
    ConstraintEval best{-std::numeric_limits<double>::infinity(), begin};
    for (int j = begin; j < end; ++j) {
      const double v = base_.evaluate(j, w, checks);
      if (v > best.value) best = {v, j};
    }
    return best;
  }

  /// `base` here is a base-set index, as reported by evaluate_detail.
  void add_subgradient(int base, const Vector& w, double scale, Vector& out) const {
    base_.add_subgradient(base, w, scale, out);
  }

  double check_cost_hint_ns(int i) const {
    auto [begin, end] = group(i);
    double total = 0.0;
    for (int j = begin; j < end; ++j) total += base_.check_cost_hint_ns(j);
    return total;
  }

 private:
  ConstraintSet base_;
  std::vector<std::pair<int, int>> groups_;
};

static_assert(ConstraintFamily<ConstraintSet>);
static_assert(ConstraintFamily<AggregatedConstraintSet>);

inline AggregatedConstraintSet aggregate(ConstraintSet cs, int groups) {
  return AggregatedConstraintSet(std::move(cs), groups);
}

// ---------------------------------------------------------------------------
// Problem bundle
// ---------------------------------------------------------------------------

/// Stochastic first-order oracle for the objective f.
struct ObjectiveOracle {
  /// Writes one stochastic subgradient of f at w into `out` (E[out] is a
  /// subgradient of f at w).
  std::function<void(const Vector& w, Rng& rng, Vector& out)> sample_subgradient;
  /// Deterministic full objective, used for traces and final reporting only.
  std::function<double(const Vector& w)> full_value;
  double strong_convexity = 0.0;
  /// Deterministic per-sample cost estimate for the reproducible cost model.
  double sample_cost_hint_ns = 100.0;
};

struct ProblemMetadata {
  double lipschitz_f = 0.0;     // L_f
  double lipschitz_g = 0.0;     // L_g
  double grad_bound_f = 0.0;    // G_f, bound on ||sampled subgradient of f||
  double grad_bound_g = 0.0;    // G_g, bound on ||subgradient of max(0, g_i)||
  double lambda = 0.0;          // strong convexity of f (0 if merely convex)
};

struct Problem {
  Domain domain;
  ConstraintSet constraints;
  ObjectiveOracle objective;
  ProblemMetadata metadata;
  /// Strictly feasible point v with g(v) < 0, when one is known.
  Vector interior_point;
  /// Starting iterate; empty means the domain's center point.
  Vector initial_point;
  /// Set by generators that construct a feasible start: lets solvers
  /// initialize the remembered constraint values to zero at no check cost.
  bool initial_point_feasible = false;
  /// Known lower bound on boundary subgradient norms of g (0 = unknown).
  double rho_hint = 0.0;
  /// Problem-recommended penalty scale (0 = derive from rho / the interior
  /// point at solve time).
  double gamma_hint = 0.0;

  Vector start_point() const {
    return initial_point.size() > 0 ? initial_point : domain.center_point();
  }
};

// ---------------------------------------------------------------------------
// Penalization machinery
// ---------------------------------------------------------------------------

struct MaxConstraintEval {
  double value = 0.0;
  int index = 0;       // maximizing family index (lowest on ties)
  int base_index = 0;  // maximizing base constraint
};

/// g(w) = max_i g_i(w), reporting one counted check per family member
/// touched. Ties resolve to the lowest index.
template <ConstraintFamily F>
MaxConstraintEval eval_max_constraint(const F& cs, const Vector& w, CheckCounter& checks) {
  if (cs.count() == 0) throw std::invalid_argument("eval_max_constraint: empty constraint set");
  if (w.size() != cs.dim())
    throw std::invalid_argument("eval_max_constraint: vector has dimension " +
                                std::to_string(w.size()) + ", expected " +
                                std::to_string(cs.dim()));
  MaxConstraintEval best{-std::numeric_limits<double>::infinity(), 0, 0};
  for (int i = 0; i < cs.count(); ++i) {
    const ConstraintEval e = cs.evaluate_detail(i, w, checks);
    if (e.value > best.value) best = {e.value, i, e.base_index};
  }
  return best;
}

/// h(w) = f(w) + gamma * max(0, g(w)). Trace/test helper; uses the full
/// (deterministic) objective and a scratch counter.
inline double penalized_objective(const Problem& problem, double gamma, const Vector& w) {
  if (!(gamma > 0)) throw std::invalid_argument("penalized_objective: gamma must be > 0");
  CheckCounter scratch;
  const double g = eval_max_constraint(problem.constraints, w, scratch).value;
  return problem.objective.full_value(w) + gamma * std::max(0.0, g);
}

struct GammaEstimate {
  enum class Provenance { LemmaGamma, KnownFamily, UserSupplied };
  double rho = 0.0;
  double gamma = 0.0;
  Provenance provenance = Provenance::UserSupplied;
};

/// Margin over the strict bound gamma > L_f / rho. Kept close to 1: small
/// penalties behave better and the bound only needs strict inequality.
inline constexpr double kGammaSafety = 1.01;

/// rho = -g(v) / D_w for a strictly feasible v (a valid boundary-subgradient
/// lower bound by convexity of g).
template <ConstraintFamily F>
double rho_from_interior_point(const F& cs, const Domain& domain, const Vector& v) {
  CheckCounter scratch;
  const double gv = eval_max_constraint(cs, v, scratch).value;
  if (!(gv < 0))
    throw std::invalid_argument("rho_from_interior_point: point is not strictly feasible (g(v) = " +
                                std::to_string(gv) + ")");
  return -gv / domain.diameter_bound();
}

struct BoxFamily {
  int dim = 0;
};
struct OrderingChainFamily {
  int dim = 0;
};
struct LinearRowsFamily {
  double radius = 0.0;  // l2-ball domain radius
  double b_min = 0.0;   // smallest right-hand side, > 0
};
using KnownConstraintFamily = std::variant<BoxFamily, OrderingChainFamily, LinearRowsFamily>;

/// Closed-form rho for the standard constraint families (unit-norm box faces,
/// the adjacent ordering chain, unit-norm linear rows on a ball), with
/// gamma = kGammaSafety * L_f / rho.
inline GammaEstimate gamma_for_known_family(const KnownConstraintFamily& family,
                                            double lipschitz_f) {
  double rho = 0.0;
  if (const auto* b = std::get_if<BoxFamily>(&family)) {
    if (b->dim <= 0) throw std::invalid_argument("gamma_for_known_family: dim must be positive");
    rho = 1.0 / std::sqrt(static_cast<double>(b->dim));
  } else if (const auto* o = std::get_if<OrderingChainFamily>(&family)) {
    if (o->dim <= 1) throw std::invalid_argument("gamma_for_known_family: chain needs dim >= 2");
    rho = 1.0 / static_cast<double>(o->dim - 1);
  } else {
    const auto& l = std::get<LinearRowsFamily>(family);
    if (!(l.radius > 0) || !(l.b_min > 0))
      throw std::invalid_argument("gamma_for_known_family: radius and b_min must be positive");
    rho = l.b_min / (2.0 * l.radius);
  }
  return {rho, kGammaSafety * lipschitz_f / rho, GammaEstimate::Provenance::KnownFamily};
}

}  // namespace heavytouch
