#pragma once

// Model manifolds and Bregman projections onto them.
//
// Reverse direction (project):      argmin_{P in M} B_F(P, target)
// Forward direction (project_forward_kl): argmin_{P in M} KL(target || P)

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "erbp/errors.hpp"
#include "erbp/generators.hpp"
#include "erbp/simplex.hpp"

namespace erbp {

struct FullSimplex {};

struct SupportMask {
  std::vector<bool> mask;
};

/// Linear family {p : features * p = targets}; features is k x n.
struct MomentConstraint {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
};

/// Exponential family P_theta = softmax(features * theta); features is n x d.
struct ParametricSoftmax {
  Eigen::MatrixXd features;
};

namespace detail {

/// Phase-1 simplex (Bland's rule) for {x >= 0 : M x = r}. Returns the
/// minimal total artificial infeasibility; 0 means feasible.
inline double phase_one_infeasibility(const Eigen::MatrixXd& m_in, const Eigen::VectorXd& r_in) {
  const Eigen::Index rows = m_in.rows();
  const Eigen::Index cols = m_in.cols();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows + 1, cols + rows + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double sign = r_in(i) < 0.0 ? -1.0 : 1.0;
    t.row(i).head(cols) = sign * m_in.row(i);
    t(i, cols + i) = 1.0;
    t(i, cols + rows) = sign * r_in(i);
    basis[static_cast<std::size_t>(i)] = cols + i;
  }
  // cost row: reduced costs of the phase-1 objective sum(artificials)
  for (Eigen::Index i = 0; i < rows; ++i) {
    t.row(rows).head(cols) -= t.row(i).head(cols);
    t(rows, cols + rows) -= t(i, cols + rows);
  }
  const double tol = 1e-12 * std::max(1.0, t.cwiseAbs().maxCoeff());
  const Eigen::Index max_pivots = 50 * (cols + rows) + 1000;
  for (Eigen::Index it = 0; it < max_pivots; ++it) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < cols + rows; ++j) {
      if (t(rows, j) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return std::max(0.0, -t(rows, cols + rows));
    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (t(i, enter) > tol) {
        const double ratio = t(i, cols + rows) / t(i, enter);
        if (ratio < best - 1e-15 ||
            (ratio <= best + 1e-15 && leave >= 0 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return std::max(0.0, -t(rows, cols + rows));  // unbounded direction cannot occur in phase 1
    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i <= rows; ++i) {
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  throw Error(Errc::Infeasible, "feasibility LP did not terminate");
}

}  // namespace detail

class Manifold {
 public:
  using Kind = std::variant<FullSimplex, SupportMask, MomentConstraint, ParametricSoftmax>;

  static Manifold full() { return Manifold(FullSimplex{}); }

  static Manifold mask(std::vector<bool> mask) {
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
      throw Error(Errc::InvalidArgument, "support mask needs at least one true entry");
    }
    return Manifold(SupportMask{std::move(mask)});
  }

  static Manifold mask_indices(std::size_t n, std::span<const std::size_t> indices) {
    std::vector<bool> m(n, false);
    for (auto i : indices) {
      if (i >= n) throw Error(Errc::InvalidArgument, "mask index " + std::to_string(i) + " >= n " + std::to_string(n));
      m[i] = true;
    }
    return mask(std::move(m));
  }

  /// Rejects target moments outside the convex hull of the feature columns.
  static Manifold moments(Eigen::MatrixXd features, Eigen::VectorXd targets) {
    if (features.rows() != targets.size() || features.rows() < 1 || features.cols() < 2) {
      throw Error(Errc::InvalidArgument, "moment features must be k x n with k = len(targets) >= 1, n >= 2");
    }
    if (!features.allFinite() || !targets.allFinite()) throw Error(Errc::NonFinite, "moment constraint data");
    const Eigen::Index k = features.rows();
    const Eigen::Index n = features.cols();
    Eigen::MatrixXd m(k + 1, n);
    m.topRows(k) = features;
    m.row(k).setOnes();
    Eigen::VectorXd r(k + 1);
    r.head(k) = targets;
    r(k) = 1.0;
    const double infeas = detail::phase_one_infeasibility(m, r);
    if (infeas > 1e-9 * std::max(1.0, r.cwiseAbs().sum())) {
      throw Error(Errc::Infeasible, "moment targets outside the convex hull of feature columns (residual " +
                                        std::to_string(infeas) + ")");
    }
    return Manifold(MomentConstraint{std::move(features), std::move(targets)});
  }

  static Manifold softmax(Eigen::MatrixXd features) {
    if (features.cols() < 1 || features.rows() <= features.cols()) {
      throw Error(Errc::InvalidArgument, "softmax features must be n x d with d < n");
    }
    if (!features.allFinite()) throw Error(Errc::NonFinite, "softmax features");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(features);
    if (lu.rank() != features.cols()) {
      throw Error(Errc::InvalidArgument, "softmax features must have full column rank");
    }
    return Manifold(ParametricSoftmax{std::move(features)});
  }

  const Kind& kind() const noexcept { return kind_; }

  /// Dimension fixed by the manifold data; nullopt for the full simplex.
  std::optional<std::size_t> dim() const {
    return std::visit(
        [](const auto& k) -> std::optional<std::size_t> {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, SupportMask>) return k.mask.size();
          else if constexpr (std::is_same_v<T, MomentConstraint>) return static_cast<std::size_t>(k.features.cols());
          else if constexpr (std::is_same_v<T, ParametricSoftmax>) return static_cast<std::size_t>(k.features.rows());
          else return std::nullopt;
        },
        kind_);
  }

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, FullSimplex>) return "full";
          else if constexpr (std::is_same_v<T, SupportMask>) {
            std::string s = "mask(indices=[";
            bool first = true;
            for (std::size_t i = 0; i < k.mask.size(); ++i) {
              if (!k.mask[i]) continue;
              if (!first) s += ",";
              s += std::to_string(i);
              first = false;
            }
            return s + "])";
          } else if constexpr (std::is_same_v<T, MomentConstraint>) {
            return "moments(k=" + std::to_string(k.features.rows()) + ")";
          } else {
            return "softmax(d=" + std::to_string(k.features.cols()) + ")";
          }
        },
        kind_);
  }

 private:
  explicit Manifold(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

enum class StepRule { ArmijoBacktracking };

struct ProjectionOptions {
  double eps_max = 1e-6;
  int max_iters = 20000;
  StepRule step_rule = StepRule::ArmijoBacktracking;
  double armijo = 1e-4;
  double initial_step = 1.0;
  double grad_tol = 1e-11;
};

struct ProjectionResult {
  Distribution point;
  double eps = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<double> eps_history;  // per-iteration objective, iterative solvers only
};

/// Sort-threshold Euclidean projection of an arbitrary vector onto the simplex.
inline Distribution euclidean_simplex_projection(std::span<const double> v) {
  if (v.size() < 2) throw Error(Errc::InvalidArgument, "euclidean projection needs dim >= 2");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw Error(Errc::NonFinite, detail::fmt_index(i, v[i]));
  }
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> p(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    p[i] = std::max(v[i] - theta, 0.0);
    s += p[i];
  }
  for (auto& x : p) x /= s;
  return Distribution(std::move(p));
}

namespace detail {

inline void check_dim(const Manifold& m, const Distribution& target) {
  if (auto d = m.dim(); d && *d != target.dim()) {
    throw Error(Errc::DimMismatch, "manifold dim " + std::to_string(*d) + " vs target " + std::to_string(target.dim()));
  }
}

/// Bregman divergence allowing boundary targets where the point is zero.
inline double divergence_allowing_zeros(const Generator& g, const Distribution& p, const Distribution& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (q[i] == 0.0) {
      if (p[i] == 0.0) continue;
      return std::numeric_limits<double>::infinity();
    }
    s += bregman_term(g, p[i], q[i]);
  }
  return std::max(s, 0.0);
}

inline ProjectionResult finish(Distribution point, double eps, int iters, bool solver_ok, const ProjectionOptions& o,
                               std::vector<double> history = {}) {
  const bool conv = solver_ok && eps <= o.eps_max;
  return ProjectionResult{std::move(point), eps, iters, conv, std::move(history)};
}

inline std::vector<double> on_mask(const SupportMask& m, const Distribution& target, double& mass) {
  std::vector<double> v(target.dim(), 0.0);
  mass = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (m.mask[i]) {
      v[i] = target[i];
      mass += v[i];
    }
  }
  if (mass < 1e-12) throw Error(Errc::Infeasible, "target has no mass on the support mask");
  return v;
}

/// Separable Bregman projection onto the masked simplex: p_i = (f')^{-1}(f'(q_i) + nu)
/// on the mask, clipped at 0, with nu found by bisection so the entries sum to 1.
inline Distribution separable_mask_projection(const Generator& g, const SupportMask& m, const Distribution& target) {
  if (g.potential_diverges_at_zero()) {
    throw Error(Errc::GeneratorUnsupported, g.name() + " potential is infinite off the mask");
  }
  std::vector<double> grad(target.dim());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = m.mask[i] ? g.fp(target[i]) : 0.0;
  auto total = [&](double nu) {
    double s = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (m.mask[i]) s += std::min(g.fp_inverse(grad[i] + nu), 2.0);
    }
    return s;
  };
  double lo = -1.0;
  double hi = 1.0;
  for (int k = 0; k < 200 && total(lo) > 1.0; ++k) lo *= 2.0;
  for (int k = 0; k < 200 && total(hi) < 1.0; ++k) hi *= 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (total(mid) < 1.0 ? lo : hi) = mid;
  }
  const double nu = 0.5 * (lo + hi);
  std::vector<double> p(target.dim(), 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (m.mask[i]) {
      p[i] = std::min(g.fp_inverse(grad[i] + nu), 1.0);
      s += p[i];
    }
  }
  for (auto& x : p) x /= s;
  return Distribution(std::move(p));
}

inline ProjectionResult project_mask(const Generator& g, const SupportMask& m, const Distribution& target,
                                     const ProjectionOptions& o) {
  double mass = 0.0;
  auto v = on_mask(m, target, mass);
  if (g.kind() == GeneratorKind::Shannon) {
    // argmin KL(P || target) over supp(P) in S is target restricted to S, renormalized
    for (auto& x : v) x /= mass;
    Distribution point(std::move(v));
    return finish(point, divergence_allowing_zeros(g, point, target), 0, true, o);
  }
  if (g.kind() == GeneratorKind::SquaredEuclidean) {
    std::vector<double> sub;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (m.mask[i]) {
        sub.push_back(target[i]);
        idx.push_back(i);
      }
    }
    std::vector<double> p(target.dim(), 0.0);
    if (sub.size() == 1) {
      p[idx[0]] = 1.0;
    } else {
      auto proj = euclidean_simplex_projection(sub);
      for (std::size_t j = 0; j < idx.size(); ++j) p[idx[j]] = proj[j];
    }
    Distribution point(std::move(p));
    return finish(point, divergence_allowing_zeros(g, point, target), 0, true, o);
  }
  require_interior(g, target, "project(mask)");
  auto point = separable_mask_projection(g, m, target);
  return finish(point, bregman_div(g, point, target), 0, true, o);
}

struct TiltState {
  Eigen::VectorXd p;
  double value = 0.0;  // log-partition minus theta . b
};

/// Exponential tilt p ∝ q exp(A^T theta) and its dual objective.
inline TiltState tilt(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& theta) {
  const Eigen::Index n = q.size();
  Eigen::VectorXd logits(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    logits(i) = q(i) > 0.0 ? std::log(q(i)) + a.col(i).dot(theta) : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, logits(i));
  }
  Eigen::VectorXd p(n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = q(i) > 0.0 ? std::exp(logits(i) - mx) : 0.0;
    z += p(i);
  }
  p /= z;
  return {p, mx + std::log(z) - theta.dot(b)};
}

/// Generalized iterative scaling on shifted non-negative features with a
/// slack feature so that every column sums to the same constant.
inline Eigen::VectorXd iterative_scaling(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& q,
                                         int iters) {
  const Eigen::Index k = a.rows();
  const Eigen::Index n = a.cols();
  Eigen::VectorXd shift = a.rowwise().minCoeff();
  Eigen::MatrixXd as(k + 1, n);
  as.topRows(k) = a.colwise() - shift;
  Eigen::VectorXd bs(k + 1);
  bs.head(k) = b - shift;
  const double c = std::max(as.topRows(k).colwise().sum().maxCoeff(), 1e-300);
  as.row(k) = (Eigen::RowVectorXd::Constant(n, c) - as.topRows(k).colwise().sum());
  bs(k) = c - bs.head(k).sum();
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(k + 1);
  for (int it = 0; it < iters; ++it) {
    const auto st = tilt(as, bs, q, lam);
    const Eigen::VectorXd expect = as * st.p;
    for (Eigen::Index j = 0; j <= k; ++j) {
      if (bs(j) > 0.0 && expect(j) > 0.0) lam(j) += std::log(bs(j) / expect(j)) / c;
    }
  }
  // map back: the slack and shift terms are constant across outcomes up to the
  // normalizer, so the tilt on the original features uses lam_j - lam_slack.
  return lam.head(k) - Eigen::VectorXd::Constant(k, lam(k));
}

inline ProjectionResult project_moments_shannon(const Generator& g, const MomentConstraint& mc,
                                                const Distribution& target, const ProjectionOptions& o) {
  const Eigen::MatrixXd& a = mc.features;
  const Eigen::VectorXd& b = mc.targets;
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(target.vec().data(), static_cast<Eigen::Index>(target.dim()));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(a.rows());
  auto st = tilt(a, b, q, theta);
  int it = 0;
  bool ok = false;
  constexpr double kGradTol = 1e-10;
  for (; it < 200; ++it) {
    const Eigen::VectorXd grad = a * st.p - b;
    if (grad.norm() < kGradTol) {
      ok = true;
      break;
    }
    const Eigen::VectorXd ap = a * st.p;
    Eigen::MatrixXd h = a * st.p.asDiagonal() * a.transpose() - ap * ap.transpose();
    h.diagonal().array() += 1e-14 * std::max(1.0, h.diagonal().maxCoeff());
    Eigen::VectorXd dir = -h.ldlt().solve(grad);
    if (!dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad;
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      const Eigen::VectorXd cand = theta + step * dir;
      auto cs = tilt(a, b, q, cand);
      if (std::isfinite(cs.value) && (cs.value <= st.value + 1e-4 * step * grad.dot(dir) ||
                                      (a * cs.p - b).norm() < 0.5 * grad.norm())) {
        theta = cand;
        st = std::move(cs);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  if (!ok) {
    theta = iterative_scaling(a, b, q, 2000);
    st = tilt(a, b, q, theta);
    it += 2000;
  }
  const double residual = (a * st.p - b).norm();
  std::vector<double> pv(st.p.data(), st.p.data() + st.p.size());
  Distribution point(std::move(pv));
  return finish(point, divergence_allowing_zeros(g, point, target), it, residual < 1e-8, o);
}

/// Dual Newton ascent for a separable Bregman projection onto
/// {p >= 0, sum p = 1, A p = b}: p_i = clip((f')^{-1}(f'(q_i) + nu + theta . a_i)).
inline ProjectionResult project_moments_generic(const Generator& g, const MomentConstraint& mc,
                                                const Distribution& target, const ProjectionOptions& o) {
  require_interior(g, target, "project(moments)");
  const Eigen::Index k = mc.features.rows();
  const Eigen::Index n = mc.features.cols();
  Eigen::MatrixXd at(k + 1, n);
  at.row(0).setOnes();
  at.bottomRows(k) = mc.features;
  Eigen::VectorXd rhs(k + 1);
  rhs(0) = 1.0;
  rhs.tail(k) = mc.targets;
  Eigen::VectorXd base(n);
  for (Eigen::Index i = 0; i < n; ++i) base(i) = g.fp(target[static_cast<std::size_t>(i)]);

  auto primal = [&](const Eigen::VectorXd& w, Eigen::VectorXd& p) {
    const Eigen::VectorXd y = base + at.transpose() * w;
    p.resize(n);
    double dual = w.dot(rhs);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = g.fp_inverse(y(i));
      if (!std::isfinite(p(i)) || p(i) > 1e6) return -std::numeric_limits<double>::infinity();
      dual += (p(i) > 0.0 || !g.potential_diverges_at_zero() ? g.f(p(i)) : 0.0) - y(i) * p(i);
    }
    return dual;
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd p;
  double val = primal(w, p);
  int it = 0;
  bool ok = false;
  for (; it < 200; ++it) {
    const Eigen::VectorXd grad = rhs - at * p;
    if (grad.norm() < 1e-10) {
      ok = true;
      break;
    }
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p(i) > 0.0) h += (1.0 / g.fpp(p(i))) * at.col(i) * at.col(i).transpose();
    }
    h.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().maxCoeff());
    Eigen::VectorXd dir = h.ldlt().solve(grad);
    if (!dir.allFinite() || dir.dot(grad) <= 0.0) dir = grad;
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      Eigen::VectorXd cp;
      const Eigen::VectorXd cand = w + step * dir;
      const double cv = primal(cand, cp);
      if (std::isfinite(cv) && (cv >= val + 1e-4 * step * grad.dot(dir) || (rhs - at * cp).norm() < 0.5 * grad.norm())) {
        w = cand;
        p = cp;
        val = cv;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  std::vector<double> pv(p.data(), p.data() + n);
  const double s = std::accumulate(pv.begin(), pv.end(), 0.0);
  for (auto& x : pv) x /= s;
  Distribution point(std::move(pv));
  const double residual = (mc.features * Eigen::Map<const Eigen::VectorXd>(point.vec().data(), n) - mc.targets).norm();
  return finish(point, bregman_div(g, point, target), it, ok || residual < 1e-8, o);
}

inline Eigen::VectorXd softmax_of(const Eigen::VectorXd& z, Eigen::VectorXd* log_p = nullptr) {
  const double mx = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - mx).exp();
  const double s = e.sum();
  if (log_p) *log_p = z.array() - mx - std::log(s);
  return e / s;
}

inline ProjectionResult project_softmax(const Generator& g, const ParametricSoftmax& sm, const Distribution& target,
                                        const ProjectionOptions& o) {
  require_interior(g, target, "project(softmax)");
  const Eigen::MatrixXd& phi = sm.features;
  const Eigen::Index n = phi.rows();
  Eigen::VectorXd grad_q(n), log_q(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double qi = target[static_cast<std::size_t>(i)];
    grad_q(i) = g.fp(qi);
    log_q(i) = std::log(qi);
  }
  const bool shannon = g.kind() == GeneratorKind::Shannon;

  // objective and gradient of theta -> B_F(P_theta, target)
  auto evaluate = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::VectorXd* p_out) {
    Eigen::VectorXd log_p;
    const Eigen::VectorXd p = softmax_of(phi * theta, &log_p);
    Eigen::VectorXd diff(n);
    double obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (shannon) {
        diff(i) = log_p(i) - log_q(i);
        obj += p(i) * diff(i);
      } else {
        if (g.gradient_diverges_at_zero() && p(i) <= 0.0) return std::numeric_limits<double>::infinity();
        diff(i) = g.fp(p(i)) - grad_q(i);
        obj += bregman_term(g, p(i), target[static_cast<std::size_t>(i)]);
      }
    }
    if (grad) {
      const double mean = p.dot(diff);
      *grad = phi.transpose() * (p.array() * (diff.array() - mean)).matrix();
    }
    if (p_out) *p_out = p;
    return std::max(obj, 0.0);
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(phi.cols());
  Eigen::VectorXd grad;
  double obj = evaluate(theta, &grad, nullptr);
  std::vector<double> history{obj};
  double step = o.initial_step;
  int it = 0;
  for (; it < o.max_iters; ++it) {
    const double gn2 = grad.squaredNorm();
    if (std::sqrt(gn2) <= o.grad_tol) break;
    bool moved = false;
    for (int half = 0; half < 80; ++half) {
      const Eigen::VectorXd cand = theta - step * grad;
      Eigen::VectorXd cg;
      const double cobj = evaluate(cand, &cg, nullptr);
      if (cobj <= obj - o.armijo * step * gn2) {
        theta = cand;
        obj = cobj;
        grad = cg;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    history.push_back(obj);
    step = std::min(step * 2.0, 1e6);
  }
  Eigen::VectorXd p;
  evaluate(theta, nullptr, &p);
  std::vector<double> pv(p.data(), p.data() + n);
  Distribution point(std::move(pv));
  const double eps = shannon ? kl_divergence(point, target) : bregman_div(g, point, target);
  return finish(point, eps, it, true, o, std::move(history));
}

}  // namespace detail

/// Bregman projection of `target` onto M under generator `g`.
///   full           identity, eps = 0
///   mask           shannon: restrict and renormalize; euclidean: sort-threshold on
///                  the masked coordinates; other kinds: separable dual bisection
///   moments        shannon: exponential tilt, damped Newton on the dual with an
///                  iterative-scaling fallback; other kinds: dual Newton
///   softmax        gradient descent with Armijo backtracking from theta = 0
/// The result is always returned; `converged` is false when eps > eps_max or the
/// solver stopped short.
inline ProjectionResult project(const Generator& g, const Manifold& m, const Distribution& target,
                                const ProjectionOptions& opts = {}) {
  detail::check_dim(m, target);
  return std::visit(
      [&](const auto& k) -> ProjectionResult {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, FullSimplex>) {
          return detail::finish(target, 0.0, 0, true, opts);
        } else if constexpr (std::is_same_v<T, SupportMask>) {
          return detail::project_mask(g, k, target, opts);
        } else if constexpr (std::is_same_v<T, MomentConstraint>) {
          if (g.kind() == GeneratorKind::Shannon) return detail::project_moments_shannon(g, k, target, opts);
          return detail::project_moments_generic(g, k, target, opts);
        } else {
          return detail::project_softmax(g, k, target, opts);
        }
      },
      m.kind());
}

namespace detail {

/// argmin KL(q || p) over {p : sum p = 1, A p = b}: p_i = q_i / (nu + theta . a_i),
/// with (nu, theta) from damped Newton ascent on the concave dual.
inline ProjectionResult forward_moments(const MomentConstraint& mc, const Distribution& target,
                                        const ProjectionOptions& o) {
  const Eigen::Index k = mc.features.rows();
  const Eigen::Index n = mc.features.cols();
  Eigen::MatrixXd at(k + 1, n);
  at.row(0).setOnes();
  at.bottomRows(k) = mc.features;
  Eigen::VectorXd rhs(k + 1);
  rhs(0) = 1.0;
  rhs.tail(k) = mc.targets;
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(target.vec().data(), n);

  auto dual = [&](const Eigen::VectorXd& w, Eigen::VectorXd& c) {
    c = at.transpose() * w;
    double v = -w.dot(rhs);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q(i) == 0.0) continue;
      if (!(c(i) > 0.0)) return -std::numeric_limits<double>::infinity();
      v += q(i) * std::log(c(i));
    }
    return v;
  };
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k + 1);
  w(0) = 1.0;
  Eigen::VectorXd c;
  double val = dual(w, c);
  int it = 0;
  bool ok = false;
  auto point_of = [&](const Eigen::VectorXd& cc) {
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = q(i) == 0.0 ? 0.0 : q(i) / cc(i);
    return p;
  };
  for (; it < 200; ++it) {
    const Eigen::VectorXd p = point_of(c);
    const Eigen::VectorXd grad = at * p - rhs;
    if (grad.norm() < 1e-12) {
      ok = true;
      break;
    }
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q(i) > 0.0) h += (q(i) / (c(i) * c(i))) * at.col(i) * at.col(i).transpose();
    }
    h.diagonal().array() += 1e-14 * std::max(1.0, h.diagonal().maxCoeff());
    Eigen::VectorXd dir = h.ldlt().solve(grad);
    if (!dir.allFinite() || dir.dot(grad) <= 0.0) dir = grad;
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      Eigen::VectorXd cc;
      const Eigen::VectorXd cand = w + step * dir;
      const double cv = dual(cand, cc);
      if (std::isfinite(cv) &&
          (cv >= val + 1e-4 * step * grad.dot(dir) || (at * point_of(cc) - rhs).norm() < 0.5 * grad.norm())) {
        w = cand;
        c = cc;
        val = cv;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  const Eigen::VectorXd p = point_of(c);
  std::vector<double> pv(p.data(), p.data() + n);
  const double s = std::accumulate(pv.begin(), pv.end(), 0.0);
  for (auto& x : pv) x /= s;
  Distribution point(std::move(pv));
  const double residual = (mc.features * Eigen::Map<const Eigen::VectorXd>(point.vec().data(), n) - mc.targets).norm();
  return finish(point, forward_kl(point, target), it, ok || residual < 1e-8, o);
}

/// argmin_theta KL(q || softmax(Phi theta)): convex, damped Newton with Armijo.
inline ProjectionResult forward_softmax(const ParametricSoftmax& sm, const Distribution& target,
                                        const ProjectionOptions& o) {
  const Eigen::MatrixXd& phi = sm.features;
  const Eigen::Index n = phi.rows();
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(target.vec().data(), n);
  const Eigen::RowVectorXd qphi = q.transpose() * phi;
  auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& p) {
    const Eigen::VectorXd z = phi * theta;
    const double mx = z.maxCoeff();
    const double lse = mx + std::log((z.array() - mx).exp().sum());
    p = softmax_of(z);
    return lse - qphi.dot(theta);
  };
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(phi.cols());
  Eigen::VectorXd p;
  double obj = objective(theta, p);
  std::vector<double> history;
  int it = 0;
  for (; it < o.max_iters; ++it) {
    const Eigen::VectorXd grad = phi.transpose() * (p - q);
    if (grad.norm() <= o.grad_tol) break;
    const Eigen::VectorXd pphi = phi.transpose() * p;
    Eigen::MatrixXd h = phi.transpose() * p.asDiagonal() * phi - pphi * pphi.transpose();
    h.diagonal().array() += 1e-14 * std::max(1.0, h.diagonal().maxCoeff());
    Eigen::VectorXd dir = -h.ldlt().solve(grad);
    if (!dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad;
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 80; ++half) {
      Eigen::VectorXd cp;
      const Eigen::VectorXd cand = theta + step * dir;
      const double cobj = objective(cand, cp);
      if (cobj <= obj + o.armijo * step * grad.dot(dir)) {
        theta = cand;
        p = cp;
        obj = cobj;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    history.push_back(obj);
  }
  std::vector<double> pv(p.data(), p.data() + n);
  Distribution point(std::move(pv));
  return finish(point, forward_kl(point, target), it, true, o, std::move(history));
}

}  // namespace detail

/// Forward-KL (maximum-likelihood) projection argmin_{P in M} KL(target || P).
/// For masks the minimizer is the on-mask conditional of the target and eps is
/// measured against that conditional.
inline ProjectionResult project_forward_kl(const Manifold& m, const Distribution& target,
                                           const ProjectionOptions& opts = {}) {
  detail::check_dim(m, target);
  return std::visit(
      [&](const auto& k) -> ProjectionResult {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, FullSimplex>) {
          return detail::finish(target, 0.0, 0, true, opts);
        } else if constexpr (std::is_same_v<T, SupportMask>) {
          double mass = 0.0;
          auto v = detail::on_mask(k, target, mass);
          for (auto& x : v) x /= mass;
          Distribution point(std::move(v));
          return detail::finish(point, forward_kl(point, point), 0, true, opts);
        } else if constexpr (std::is_same_v<T, MomentConstraint>) {
          return detail::forward_moments(k, target, opts);
        } else {
          return detail::forward_softmax(k, target, opts);
        }
      },
      m.kind());
}

}  // namespace erbp
