#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "heavytouch/core.hpp"

namespace heavytouch {

// ---------------------------------------------------------------------------
// Domain projection
// ---------------------------------------------------------------------------

/// Euclidean projection onto the domain: coordinatewise clamp for a box,
/// radial rescale for a ball.
inline Vector project_domain(const Domain& domain, const Vector& w) {
  if (w.size() != domain.dim())
    throw std::invalid_argument("project_domain: vector has dimension " +
                                std::to_string(w.size()) + ", expected " +
                                std::to_string(domain.dim()));
  if (domain.kind() == Domain::Kind::Box)
    return w.cwiseMax(domain.lower()).cwiseMin(domain.upper());
  const Vector delta = w - domain.center();
  const double n = delta.norm();
  if (n <= domain.radius()) return w;
  return domain.center() + (domain.radius() / n) * delta;
}

// ---------------------------------------------------------------------------
// Exact projection onto the ordering chain w_1 <= w_2 <= ... <= w_d
// ---------------------------------------------------------------------------

/// Union-find over coordinate clusters. Each root carries the cluster's value
/// as (sum, size) -- not the mean, so merges do not accumulate rounding --
/// plus the contiguous span [left_edge, right_edge] it covers.
class DisjointSetClusters {
 public:
  explicit DisjointSetClusters(const Vector& w)
      : parent_(static_cast<size_t>(w.size())),
        rank_(static_cast<size_t>(w.size()), 0),
        cluster_sum_(static_cast<size_t>(w.size())),
        cluster_size_(static_cast<size_t>(w.size()), 1),
        left_edge_(static_cast<size_t>(w.size())),
        right_edge_(static_cast<size_t>(w.size())) {
    std::iota(parent_.begin(), parent_.end(), 0);
    std::iota(left_edge_.begin(), left_edge_.end(), 0);
    std::iota(right_edge_.begin(), right_edge_.end(), 0);
    for (Eigen::Index i = 0; i < w.size(); ++i) cluster_sum_[static_cast<size_t>(i)] = w[i];
  }

  int find(int x) {
    int root = x;
    while (parent_[static_cast<size_t>(root)] != root) root = parent_[static_cast<size_t>(root)];
    while (parent_[static_cast<size_t>(x)] != root) {
      const int next = parent_[static_cast<size_t>(x)];
      parent_[static_cast<size_t>(x)] = root;
      x = next;
    }
    return root;
  }

  /// Union by rank; returns the new root, whose (sum, size) and span cover
  /// both clusters.
  int unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (rank_[static_cast<size_t>(a)] < rank_[static_cast<size_t>(b)]) std::swap(a, b);
    if (rank_[static_cast<size_t>(a)] == rank_[static_cast<size_t>(b)]) ++rank_[static_cast<size_t>(a)];
    parent_[static_cast<size_t>(b)] = a;
    cluster_sum_[static_cast<size_t>(a)] += cluster_sum_[static_cast<size_t>(b)];
    cluster_size_[static_cast<size_t>(a)] += cluster_size_[static_cast<size_t>(b)];
    left_edge_[static_cast<size_t>(a)] =
        std::min(left_edge_[static_cast<size_t>(a)], left_edge_[static_cast<size_t>(b)]);
    right_edge_[static_cast<size_t>(a)] =
        std::max(right_edge_[static_cast<size_t>(a)], right_edge_[static_cast<size_t>(b)]);
    return a;
  }

  double value(int root) const {
    return cluster_sum_[static_cast<size_t>(root)] /
           static_cast<double>(cluster_size_[static_cast<size_t>(root)]);
  }
  int left_edge(int root) const { return left_edge_[static_cast<size_t>(root)]; }
  int right_edge(int root) const { return right_edge_[static_cast<size_t>(root)]; }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<double> cluster_sum_;
  std::vector<int> cluster_size_;
  std::vector<int> left_edge_;
  std::vector<int> right_edge_;
};

/// FIFO set of violated constraint indices: a doubly linked list threaded
/// through fixed slots plus a membership array, so push/pop/contains are O(1)
/// and pushing a present index is a no-op.
class ViolationQueue {
 public:
  explicit ViolationQueue(int slots)
      : prev_(static_cast<size_t>(slots), kNull), next_(static_cast<size_t>(slots), kNull),
        present_(static_cast<size_t>(slots), false) {}

  bool empty() const { return head_ == kNull; }

  void push(int c) {
    if (present_[static_cast<size_t>(c)]) return;
    present_[static_cast<size_t>(c)] = true;
    prev_[static_cast<size_t>(c)] = tail_;
    next_[static_cast<size_t>(c)] = kNull;
    if (tail_ != kNull)
      next_[static_cast<size_t>(tail_)] = c;
    else
      head_ = c;
    tail_ = c;
  }

  int pop() {
    const int c = head_;
    head_ = next_[static_cast<size_t>(c)];
    if (head_ != kNull)
      prev_[static_cast<size_t>(head_)] = kNull;
    else
      tail_ = kNull;
    present_[static_cast<size_t>(c)] = false;
    return c;
  }

 private:
  static constexpr int kNull = -1;
  std::vector<int> prev_, next_;
  std::vector<bool> present_;
  int head_ = kNull;
  int tail_ = kNull;
};

struct OrderingProjectionStats {
  int constraint_evaluations = 0;
  int merges = 0;
};

/// Exact Euclidean projection onto {w : w_1 <= w_2 <= ... <= w_d}. Merges
/// clusters linked by violated adjacent constraints and sets each cluster to
/// the average of its inputs; after a merge only the two boundary constraints
/// of the merged cluster need re-checking, so at most 3d constraint
/// evaluations happen in total and the runtime is O(d alpha(d)).
inline Vector project_ordering(const Vector& w, OrderingProjectionStats* stats = nullptr) {
  const int d = static_cast<int>(w.size());
  if (d == 0) throw std::invalid_argument("project_ordering: empty input");
  OrderingProjectionStats local;
  OrderingProjectionStats& st = stats ? *stats : local;
  st = {};
  if (d == 1) return w;

  DisjointSetClusters clusters(w);
  ViolationQueue violated(d - 1);

  // Constraint c compares the cluster holding coordinate c with the cluster
  // holding coordinate c+1. Violation means left value strictly above right.
  const auto is_violated = [&](int c) {
    ++st.constraint_evaluations;
    return clusters.value(clusters.find(c)) > clusters.value(clusters.find(c + 1));
  };

  for (int c = 0; c < d - 1; ++c)
    if (is_violated(c)) violated.push(c);

  while (!violated.empty()) {
    const int c = violated.pop();
    // A queued violation stays violated: merges only lower left clusters and
    // raise right ones. The two sides are distinct clusters by construction.
    const int root = clusters.unite(clusters.find(c), clusters.find(c + 1));
    ++st.merges;
    const int left = clusters.left_edge(root);
    const int right = clusters.right_edge(root);
    if (left > 0 && is_violated(left - 1)) violated.push(left - 1);
    if (right < d - 1 && is_violated(right)) violated.push(right);
  }

  Vector out(d);
  for (int i = 0; i < d; ++i) out[i] = clusters.value(clusters.find(i));
  return out;
}

// ---------------------------------------------------------------------------
// Dykstra machinery
// ---------------------------------------------------------------------------

struct DykstraOptions {
  double violation_tol = 1e-8;
  double movement_tol = 1e-12;
  long max_sweeps = 1'000'000;
};

namespace detail {

struct Halfspace {
  Vector a;
  double b = 0.0;
  double a_norm2 = 0.0;
};

inline Halfspace halfspace_of(const ConstraintSet& cs, int i) {
  const ConstraintKind& k = cs.kind(i);
  Halfspace h;
  h.a = Vector::Zero(cs.dim());
  if (const auto* o = std::get_if<OrderingPair>(&k)) {
    h.a[o->i] = o->scale;
    h.a[o->j] = -o->scale;
    h.b = 0.0;
  } else if (const auto* r = std::get_if<LinearRow>(&k)) {
    h.a = r->a;
    h.b = r->b;
  } else {
    const auto& f = std::get<BoxFace>(k);
    h.a[f.i] = static_cast<double>(f.sign);
    h.b = f.bound;
  }
  h.a_norm2 = h.a.squaredNorm();
  return h;
}

/// Dykstra's alternating projection onto the intersection of halfspaces
/// (and optionally the domain). Each halfspace correction is a multiple of
/// its normal, so it is carried as one scalar. Stops when the worst halfspace
/// violation and the last sweep's movement both fall under tolerance.
inline Vector dykstra_halfspaces(const std::vector<Halfspace>& sets, const Domain* domain,
                                 const Vector& w0, const DykstraOptions& opts) {
  Vector x = w0;
  std::vector<double> corr(sets.size(), 0.0);
  Vector domain_corr;
  if (domain) domain_corr = Vector::Zero(w0.size());

  for (long sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double moved = 0.0;
    for (size_t k = 0; k < sets.size(); ++k) {
      const Halfspace& h = sets[k];
      if (h.a_norm2 == 0.0) continue;
      // y = x + correction, then project y onto the halfspace.
      const double y_slack = h.a.dot(x) - h.b + corr[k] * h.a_norm2;
      const double step = std::max(0.0, y_slack) / h.a_norm2;
      const double delta = corr[k] - step;  // applied along a
      if (delta != 0.0) {
        x += delta * h.a;
        moved = std::max(moved, std::abs(delta) * std::sqrt(h.a_norm2));
      }
      corr[k] = step;
    }
    if (domain) {
      const Vector y = x + domain_corr;
      Vector xn = project_domain(*domain, y);
      moved = std::max(moved, (xn - x).cwiseAbs().maxCoeff());
      domain_corr = y - xn;
      x = std::move(xn);
    }
    double viol = 0.0;
    for (const Halfspace& h : sets) viol = std::max(viol, h.a.dot(x) - h.b);
    if (viol <= opts.violation_tol && moved <= opts.movement_tol) return x;
  }
  double viol = 0.0;
  for (const Halfspace& h : sets) viol = std::max(viol, h.a.dot(x) - h.b);
  throw std::runtime_error("dykstra: sweep cap " + std::to_string(opts.max_sweeps) +
                           " exceeded, residual violation " + std::to_string(viol));
}

/// Kahn's algorithm; throws if the pair graph has a cycle.
inline void require_dag(const std::vector<std::pair<int, int>>& pairs, int d) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(d));
  std::vector<int> indeg(static_cast<size_t>(d), 0);
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= d || j >= d)
      throw std::invalid_argument("ordering pairs: index out of range");
    if (i == j) throw std::invalid_argument("ordering pairs: cyclic pair graph (self-loop)");
    adj[static_cast<size_t>(i)].push_back(j);
    ++indeg[static_cast<size_t>(j)];
  }
  std::vector<int> queue;
  for (int v = 0; v < d; ++v)
    if (indeg[static_cast<size_t>(v)] == 0) queue.push_back(v);
  size_t processed = 0;
  while (processed < queue.size()) {
    const int v = queue[processed++];
    for (int u : adj[static_cast<size_t>(v)])
      if (--indeg[static_cast<size_t>(u)] == 0) queue.push_back(u);
  }
  if (processed != static_cast<size_t>(d))
    throw std::invalid_argument("ordering pairs: cyclic pair graph");
}

inline bool pairs_are_adjacent_chain(const std::vector<std::pair<int, int>>& pairs, int d) {
  if (static_cast<int>(pairs.size()) != d - 1) return false;
  std::vector<bool> seen(static_cast<size_t>(std::max(0, d - 1)), false);
  for (const auto& [i, j] : pairs) {
    if (j != i + 1 || i < 0 || i >= d - 1 || seen[static_cast<size_t>(i)]) return false;
    seen[static_cast<size_t>(i)] = true;
  }
  return true;
}

}  // namespace detail

/// Euclidean projection onto {w : w_i <= w_j for each pair (i, j)}. Exact for
/// a single adjacent chain (delegates to project_ordering); otherwise runs
/// Dykstra's cyclic pairwise averaging, which converges to the projection for
/// this polyhedron, stopping at the configured tolerance.
inline Vector project_ordering_general(const std::vector<std::pair<int, int>>& pairs,
                                       const Vector& w, const DykstraOptions& opts = {}) {
  const int d = static_cast<int>(w.size());
  if (d == 0) throw std::invalid_argument("project_ordering_general: empty input");
  detail::require_dag(pairs, d);
  if (pairs.empty()) return w;
  if (detail::pairs_are_adjacent_chain(pairs, d)) return project_ordering(w);

  Vector x = w;
  std::vector<double> corr(pairs.size(), 0.0);  // correction along (e_i - e_j)
  for (long sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double moved = 0.0;
    for (size_t k = 0; k < pairs.size(); ++k) {
      const auto& [i, j] = pairs[k];
      const double yi = x[i] + corr[k];
      const double yj = x[j] - corr[k];
      const double step = std::max(0.0, 0.5 * (yi - yj));  // violated pairs meet at their mean
      const double mid = 0.5 * (yi + yj);
      const double xi = step > 0.0 ? mid : yi;
      const double xj = step > 0.0 ? mid : yj;
      moved = std::max({moved, std::abs(xi - x[i]), std::abs(xj - x[j])});
      x[i] = xi;
      x[j] = xj;
      corr[k] = step;
    }
    double viol = 0.0;
    for (const auto& [i, j] : pairs) viol = std::max(viol, x[i] - x[j]);
    if (viol <= opts.violation_tol && moved <= opts.movement_tol) return x;
  }
  double viol = 0.0;
  for (const auto& [i, j] : pairs) viol = std::max(viol, x[i] - x[j]);
  throw std::runtime_error("project_ordering_general: sweep cap exceeded, residual violation " +
                           std::to_string(viol));
}

// ---------------------------------------------------------------------------
// Reference projection (test oracle)
// ---------------------------------------------------------------------------

enum class OracleMode { Auto, Exhaustive, Iterative };

namespace detail {

/// Candidate for one active subset of the adjacent chain: pool the runs
/// linked by active constraints, then verify feasibility and the KKT
/// multiplier signs recovered by telescoping.
inline std::optional<Vector> chain_active_set_candidate(const Vector& w, std::uint32_t mask,
                                                        double tol) {
  const int d = static_cast<int>(w.size());
  Vector out(d);
  int begin = 0;
  for (int i = 0; i < d; ++i) {
    const bool linked = i < d - 1 && (mask >> i & 1u);
    if (!linked) {
      const double mean = w.segment(begin, i - begin + 1).mean();
      out.segment(begin, i - begin + 1).setConstant(mean);
      begin = i + 1;
    }
  }
  for (int i = 0; i + 1 < d; ++i)
    if (out[i] > out[i + 1] + tol) return std::nullopt;
  double lambda = 0.0;  // multiplier of constraint i in unit form w_i - w_{i+1} <= 0
  for (int i = 0; i + 1 < d; ++i) {
    lambda += w[i] - out[i];
    if (mask >> i & 1u) {
      if (lambda < -tol) return std::nullopt;
    } else {
      if (std::abs(lambda) > tol) return std::nullopt;
      lambda = 0.0;
    }
  }
  return out;
}

inline std::optional<Vector> general_active_set_candidate(
    const std::vector<Halfspace>& rows, const Vector& w, std::uint32_t mask, double tol) {
  std::vector<int> active;
  for (size_t i = 0; i < rows.size(); ++i)
    if (mask >> i & 1u) active.push_back(static_cast<int>(i));
  Vector out = w;
  if (!active.empty()) {
    const int na = static_cast<int>(active.size());
    Eigen::MatrixXd A(na, w.size());
    Vector b(na);
    for (int r = 0; r < na; ++r) {
      A.row(r) = rows[static_cast<size_t>(active[static_cast<size_t>(r)])].a;
      b[r] = rows[static_cast<size_t>(active[static_cast<size_t>(r)])].b;
    }
    // KKT system of min ||w' - w||^2 s.t. A w' = b: w' = w - A^T lambda with
    // (A A^T) lambda = A w - b. Rank-deficient subsets go through the
    // pseudo-inverse and simply duplicate candidates of smaller subsets.
    const Vector lambda =
        (A * A.transpose()).completeOrthogonalDecomposition().solve(A * w - b);
    for (int r = 0; r < na; ++r)
      if (lambda[r] < -tol) return std::nullopt;
    out = w - A.transpose() * lambda;
    if ((A * out - b).cwiseAbs().maxCoeff() > 10 * tol) return std::nullopt;
  }
  for (const Halfspace& h : rows)
    if (h.a.dot(out) - h.b > tol) return std::nullopt;
  return out;
}

}  // namespace detail

/// Reference Euclidean projection onto {w in domain : g(w) <= 0}, independent
/// of the fast paths it is used to check. Exhaustive mode enumerates active
/// subsets and keeps the feasible KKT-consistent candidate nearest w (only
/// for d <= 12, m <= 24, and only when the winner already lies in the
/// domain); otherwise Dykstra runs to tolerance 1e-10 with a 10^6 sweep cap.
inline Vector oracle_project(const ConstraintSet& cs, const Domain& domain, const Vector& w,
                             OracleMode mode = OracleMode::Auto) {
  constexpr double kTol = 1e-9;
  const int d = static_cast<int>(w.size());
  const int m = cs.count();
  if (w.size() != cs.dim())
    throw std::invalid_argument("oracle_project: dimension mismatch");

  const bool exhaustive_ok = d <= 12 && m <= 24;
  if (mode == OracleMode::Exhaustive && !exhaustive_ok)
    throw std::invalid_argument("oracle_project: exhaustive mode requires d <= 12 and m <= 24");
  const bool try_exhaustive = mode != OracleMode::Iterative && exhaustive_ok;

  if (try_exhaustive) {
    std::optional<Vector> best;
    double best_dist = std::numeric_limits<double>::infinity();
    if (cs.is_adjacent_chain()) {
      for (std::uint32_t mask = 0; mask < (1u << (d - 1)); ++mask) {
        auto cand = detail::chain_active_set_candidate(w, mask, kTol);
        if (!cand) continue;
        const double dist = (*cand - w).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = std::move(cand);
        }
      }
    } else {
      std::vector<detail::Halfspace> rows;
      rows.reserve(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) rows.push_back(detail::halfspace_of(cs, i));
      for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
        auto cand = detail::general_active_set_candidate(rows, w, mask, kTol);
        if (!cand) continue;
        const double dist = (*cand - w).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = std::move(cand);
        }
      }
    }
    // The enumeration ignores the domain; certify only results inside it.
    if (best && domain.contains(*best, kTol)) return *best;
    if (mode == OracleMode::Exhaustive)
      throw std::runtime_error(
          "oracle_project: exhaustive candidate violates the domain; use iterative mode");
  }

  std::vector<detail::Halfspace> rows;
  rows.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) rows.push_back(detail::halfspace_of(cs, i));
  DykstraOptions opts;
  opts.violation_tol = 1e-10;
  opts.movement_tol = 1e-13;
  return detail::dykstra_halfspaces(rows, &domain, w, opts);
}

// ---------------------------------------------------------------------------
// Projection onto the feasible set (Pi_g)
// ---------------------------------------------------------------------------

/// Projects onto {w in domain : g_i(w) <= 0 for all i}: the exact chain
/// routine for adjacent-chain orderings, pairwise Dykstra for general
/// ordering pairs, halfspace Dykstra (with the domain in the cycle) for
/// everything else. Ends with a domain clamp and guarantees max violation at
/// most opts.violation_tol.
inline Vector project_feasible(const Problem& problem, const Vector& w,
                               const DykstraOptions& opts = {}) {
  const ConstraintSet& cs = problem.constraints;
  if (cs.count() == 0) return project_domain(problem.domain, w);

  const auto violation_of = [&](const Vector& x) {
    CheckCounter scratch;
    return std::max(0.0, eval_max_constraint(cs, x, scratch).value);
  };

  if (cs.all_ordering()) {
    const auto pairs = cs.ordering_pairs();
    Vector r = detail::pairs_are_adjacent_chain(pairs, cs.dim())
                   ? project_ordering(w)
                   : project_ordering_general(pairs, w, opts);
    r = project_domain(problem.domain, r);
    // A uniform box clamp preserves orderings; a skewed one may not, in
    // which case the halfspace route below handles the intersection.
    if (violation_of(r) <= opts.violation_tol) return r;
  }

  std::vector<detail::Halfspace> rows;
  rows.reserve(static_cast<size_t>(cs.count()));
  for (int i = 0; i < cs.count(); ++i) rows.push_back(detail::halfspace_of(cs, i));
  DykstraOptions inner = opts;
  inner.violation_tol = 0.5 * opts.violation_tol;
  Vector r = detail::dykstra_halfspaces(rows, &problem.domain, w, inner);
  r = project_domain(problem.domain, r);
  if (violation_of(r) > opts.violation_tol)
    throw std::runtime_error("project_feasible: residual violation " +
                             std::to_string(violation_of(r)) + " above tolerance");
  return r;
}

}  // namespace heavytouch
