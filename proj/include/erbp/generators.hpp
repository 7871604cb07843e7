#pragma once

// Separable Legendre potentials F(p) = sum_i f(p_i), their Bregman
// divergences, F-entropies S_F(p) = -<grad F(p), p>, support capacity C_F(m)
// and curvature constants over a delta-interior.
//
//   kind          f(x)                              f'(x)                             f''(x)
//   shannon       x log x                           1 + log x                         1/x
//   burg          -log x                            -1/x                              1/x^2
//   euclidean     x^2 / 2                           x                                 1
//   tsallis(a)    x^a / (a(a-1))                    x^(a-1) / (a-1)                   x^(a-2)
//   beta(b)       (x^(b+1) - x) / (b(b+1))          ((b+1) x^b - 1) / (b(b+1))        x^(b-1)

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "erbp/errors.hpp"
#include "erbp/simplex.hpp"

namespace erbp {

enum class GeneratorKind { Shannon, Burg, SquaredEuclidean, TsallisAlpha, BetaDiv };

inline constexpr double kDefaultGeneratorDelta = 1e-9;

class Generator {
 public:
  static Generator shannon(double delta = kDefaultGeneratorDelta) { return {GeneratorKind::Shannon, 0.0, delta}; }
  static Generator burg(double delta = kDefaultGeneratorDelta) { return {GeneratorKind::Burg, 0.0, delta}; }
  static Generator euclidean(double delta = kDefaultGeneratorDelta) {
    return {GeneratorKind::SquaredEuclidean, 0.0, delta};
  }
  static Generator tsallis(double alpha, double delta = kDefaultGeneratorDelta) {
    if (!std::isfinite(alpha) || alpha == 0.0 || alpha == 1.0) {
      throw Error(Errc::InvalidArgument, "tsallis alpha must be finite and not in {0,1}");
    }
    return {GeneratorKind::TsallisAlpha, alpha, delta};
  }
  static Generator beta(double beta, double delta = kDefaultGeneratorDelta) {
    if (!std::isfinite(beta) || beta == 0.0 || beta == -1.0) {
      throw Error(Errc::InvalidArgument, "beta must be finite and not in {-1,0}");
    }
    return {GeneratorKind::BetaDiv, beta, delta};
  }

  GeneratorKind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return param_; }
  double delta() const noexcept { return delta_; }
  Generator with_delta(double delta) const { return {kind_, param_, delta}; }

  std::string name() const {
    switch (kind_) {
      case GeneratorKind::Shannon: return "shannon";
      case GeneratorKind::Burg: return "burg";
      case GeneratorKind::SquaredEuclidean: return "euclidean";
      case GeneratorKind::TsallisAlpha: return "tsallis(alpha=" + fmt_param() + ")";
      case GeneratorKind::BetaDiv: return "beta(beta=" + fmt_param() + ")";
    }
    return "?";
  }

  double f(double x) const {
    switch (kind_) {
      case GeneratorKind::Shannon: return x > 0.0 ? x * std::log(x) : 0.0;
      case GeneratorKind::Burg: return -std::log(x);
      case GeneratorKind::SquaredEuclidean: return 0.5 * x * x;
      case GeneratorKind::TsallisAlpha: return std::pow(x, param_) / (param_ * (param_ - 1.0));
      case GeneratorKind::BetaDiv: return (std::pow(x, param_ + 1.0) - x) / (param_ * (param_ + 1.0));
    }
    return 0.0;
  }

  double fp(double x) const {
    switch (kind_) {
      case GeneratorKind::Shannon: return 1.0 + std::log(x);
      case GeneratorKind::Burg: return -1.0 / x;
      case GeneratorKind::SquaredEuclidean: return x;
      case GeneratorKind::TsallisAlpha: return std::pow(x, param_ - 1.0) / (param_ - 1.0);
      case GeneratorKind::BetaDiv:
        return ((param_ + 1.0) * std::pow(x, param_) - 1.0) / (param_ * (param_ + 1.0));
    }
    return 0.0;
  }

  double fpp(double x) const {
    switch (kind_) {
      case GeneratorKind::Shannon: return 1.0 / x;
      case GeneratorKind::Burg: return 1.0 / (x * x);
      case GeneratorKind::SquaredEuclidean: return 1.0;
      case GeneratorKind::TsallisAlpha: return std::pow(x, param_ - 2.0);
      case GeneratorKind::BetaDiv: return std::pow(x, param_ - 1.0);
    }
    return 0.0;
  }

  /// Inverse of f' on [0, inf): the x >= 0 with f'(x) = y, 0 when y is below
  /// f'(0+), +inf when y is above sup f'.
  double fp_inverse(double y) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case GeneratorKind::Shannon: return std::exp(y - 1.0);
      case GeneratorKind::Burg: return y < 0.0 ? -1.0 / y : inf;
      case GeneratorKind::SquaredEuclidean: return std::max(y, 0.0);
      case GeneratorKind::TsallisAlpha: {
        const double z = (param_ - 1.0) * y;
        if (z > 0.0) return std::pow(z, 1.0 / (param_ - 1.0));
        return param_ > 1.0 ? 0.0 : inf;
      }
      case GeneratorKind::BetaDiv: {
        const double z = (param_ * (param_ + 1.0) * y + 1.0) / (param_ + 1.0);
        if (z > 0.0) return std::pow(z, 1.0 / param_);
        return param_ > 0.0 ? 0.0 : inf;
      }
    }
    return 0.0;
  }

  /// f(0+) is infinite.
  bool potential_diverges_at_zero() const noexcept {
    switch (kind_) {
      case GeneratorKind::Burg: return true;
      case GeneratorKind::TsallisAlpha: return param_ < 0.0;
      case GeneratorKind::BetaDiv: return param_ < -1.0;
      default: return false;
    }
  }

  /// f'(0+) is infinite.
  bool gradient_diverges_at_zero() const noexcept {
    switch (kind_) {
      case GeneratorKind::Shannon:
      case GeneratorKind::Burg: return true;
      case GeneratorKind::SquaredEuclidean: return false;
      case GeneratorKind::TsallisAlpha: return param_ < 1.0;
      case GeneratorKind::BetaDiv: return param_ < 0.0;
    }
    return true;
  }

  /// lim_{x->0+} x f'(x); may be infinite.
  double x_fp_at_zero() const noexcept {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case GeneratorKind::Burg: return -1.0;
      case GeneratorKind::TsallisAlpha: return param_ > 0.0 ? 0.0 : -inf;
      case GeneratorKind::BetaDiv: return param_ > -1.0 ? 0.0 : -inf;
      default: return 0.0;
    }
  }

  /// S_F is concave on the simplex. False for tsallis(alpha < 0) and
  /// beta(beta < -1), whose entropies are convex.
  bool entropy_concave() const noexcept {
    switch (kind_) {
      case GeneratorKind::TsallisAlpha: return param_ > 0.0;
      case GeneratorKind::BetaDiv: return param_ > -1.0;
      default: return true;
    }
  }

  /// Kinds with a vertex-normalized entropy (zero at point masses,
  /// non-negative on the simplex): shannon, tsallis(alpha > 0),
  /// beta(beta > -1). Euclidean and Burg are reported raw only.
  bool has_normalized_entropy() const noexcept {
    switch (kind_) {
      case GeneratorKind::Shannon: return true;
      case GeneratorKind::TsallisAlpha: return param_ > 0.0;
      case GeneratorKind::BetaDiv: return param_ > -1.0;
      default: return false;
    }
  }

  /// Constant added to raw S_F to get the normalized entropy: -S_F(vertex) = f'(1).
  /// Shannon: 1 (so raw + 1 = H). Zero for kinds reported raw.
  double entropy_offset() const noexcept { return has_normalized_entropy() ? fp(1.0) : 0.0; }

  /// Entropy-floor statements need a concave, non-negative entropy.
  bool supports_floor() const noexcept { return has_normalized_entropy() && entropy_concave(); }

  /// The potential needs strictly interior arguments near 0.
  bool boundary_sensitive() const noexcept { return potential_diverges_at_zero() || gradient_diverges_at_zero(); }

 private:
  Generator(GeneratorKind k, double param, double delta) : kind_(k), param_(param), delta_(delta) {
    if (!(delta > 0.0 && delta < 0.5)) throw Error(Errc::DeltaOutOfRange, "generator delta " + std::to_string(delta));
  }

  std::string fmt_param() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", param_);
    return buf;
  }

  GeneratorKind kind_;
  double param_;
  double delta_;
};

namespace detail {

inline double boundary_cut(const Generator& g) { return g.delta() * (1.0 - 1e-9); }

inline void require_interior(const Generator& g, const Distribution& p, const char* what) {
  if (!g.boundary_sensitive()) return;
  const double cut = boundary_cut(g);
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (p[i] < cut) {
      throw Error(Errc::BoundaryEvaluation, std::string(what) + ": " + g.name() + " at " + fmt_index(i, p[i]) +
                                                " below delta " + std::to_string(g.delta()));
    }
  }
}

/// Per-coordinate Bregman term f(p) - f(q) - f'(q)(p - q); p may be 0.
inline double bregman_term(const Generator& g, double p, double q) {
  switch (g.kind()) {
    case GeneratorKind::Shannon: return (p > 0.0 ? p * std::log(p / q) : 0.0) - p + q;
    case GeneratorKind::SquaredEuclidean: return 0.5 * (p - q) * (p - q);
    default: return g.f(p) - g.f(q) - g.fp(q) * (p - q);
  }
}

inline double raw_entropy_term(const Generator& g, double x) {
  if (x == 0.0) return g.x_fp_at_zero();
  return x * g.fp(x);
}

}  // namespace detail

inline double potential_value(const Generator& g, const Distribution& p) {
  detail::require_interior(g, p, "potential_value");
  double s = 0.0;
  for (double x : p.vec()) s += g.f(x);
  return s;
}

inline std::vector<double> potential_grad(const Generator& g, const Distribution& p) {
  detail::require_interior(g, p, "potential_grad");
  std::vector<double> out(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) out[i] = g.fp(p[i]);
  return out;
}

/// B_F(p, q) = F(p) - F(q) - <grad F(q), p - q>. `q` must be delta-interior
/// for boundary-sensitive kinds; `p` may touch the boundary unless f(0) diverges.
inline double bregman_div(const Generator& g, const Distribution& p, const Distribution& q) {
  if (p.dim() != q.dim()) throw Error(Errc::DimMismatch, std::to_string(p.dim()) + " vs " + std::to_string(q.dim()));
  detail::require_interior(g, q, "bregman_div(q)");
  if (g.potential_diverges_at_zero()) detail::require_interior(g, p, "bregman_div(p)");
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) s += detail::bregman_term(g, p[i], q[i]);
  if (s < 0.0 && s >= -1e-12) s = 0.0;
  return s;
}

/// Raw F-entropy S_F(p) = -sum_i p_i f'(p_i). Exact zeros contribute their
/// continuity limit. Other entries below delta are rejected for kinds whose
/// gradient diverges at 0, except Shannon where x(1 + log x) is well defined.
inline double f_entropy(const Generator& g, const Distribution& p) {
  const double cut = detail::boundary_cut(g);
  const bool strict = g.gradient_diverges_at_zero() && g.kind() != GeneratorKind::Shannon;
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double x = p[i];
    if (x == 0.0 && !std::isfinite(g.x_fp_at_zero())) {
      throw Error(Errc::BoundaryEvaluation, "f_entropy: " + g.name() + " diverges at zero, " + detail::fmt_index(i, x));
    }
    if (strict && x > 0.0 && x < cut) {
      throw Error(Errc::BoundaryEvaluation, "f_entropy: " + g.name() + " at " + detail::fmt_index(i, x));
    }
    s -= detail::raw_entropy_term(g, x);
  }
  return s;
}

/// Vertex-normalized entropy: raw S_F + offset. For Shannon this is H(p).
inline double normalized_entropy(const Generator& g, const Distribution& p) {
  if (!g.has_normalized_entropy()) {
    throw Error(Errc::GeneratorUnsupported, g.name() + " has no normalized entropy convention");
  }
  return f_entropy(g, p) + g.entropy_offset();
}

/// Entropy used by all bound checks: normalized where the kind has one, raw otherwise.
inline double theorem_entropy(const Generator& g, const Distribution& p) {
  return f_entropy(g, p) + g.entropy_offset();
}

struct SupportCapacity {
  double value = 0.0;  // in the theorem-entropy convention
  bool heuristic = false;  // maximizer not established (non-concave S_F)
};

/// C_F(m): the largest S_F over distributions with at most m atoms, taken at
/// the uniform distribution on min(m, n) atoms. Reported in the
/// theorem-entropy convention, so Shannon gives log m.
inline SupportCapacity c_f(const Generator& g, std::size_t m, std::size_t n) {
  if (m < 1 || n < 1) throw Error(Errc::InvalidArgument, "c_f needs m, n >= 1");
  const std::size_t k = std::min(m, n);
  const double kk = static_cast<double>(k);
  double raw = -g.fp(1.0 / kk);
  if (k < n) {
    const double zero_term = g.x_fp_at_zero();
    if (!std::isfinite(zero_term)) {
      throw Error(Errc::GeneratorUnsupported, "c_f: " + g.name() + " entropy diverges on sparse supports");
    }
    raw -= static_cast<double>(n - k) * zero_term;
  }
  if (g.kind() == GeneratorKind::Shannon) raw = std::log(kk) - 1.0;
  return {raw + g.entropy_offset(), !g.entropy_concave()};
}

struct GeometryConstants {
  double sigma_f = 1.0;
  double l_f = 1.0;
  double delta = 0.0;
  std::string norm_note;
};

/// Curvature bounds by grid scan of f'' over [delta, 1] (geometric spacing).
inline GeometryConstants scan_constants(const Generator& g, double delta, std::size_t points = 10000) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  const double log_lo = std::log(delta);
  for (std::size_t k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(points - 1);
    const double x = std::exp(log_lo * (1.0 - t));
    const double c = g.fpp(x);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return {lo, hi, delta, "squared-L2, diagonal Hessian grid scan over [delta,1]"};
}

/// sigma_F = min f'' and L_F = max f'' over [delta, 1]: eigenvalue bounds of
/// the diagonal Hessian in the squared-L2 convention. Every kind here has a
/// monotone f'' (a power of x), so the endpoints are exact.
inline GeometryConstants estimate_constants(const Generator& g, double delta, std::size_t n) {
  if (!(delta > 0.0 && delta < 1.0 / static_cast<double>(n))) {
    throw Error(Errc::DeltaOutOfRange, "delta " + std::to_string(delta) + " not in (0, 1/" + std::to_string(n) + ")");
  }
  const double a = g.fpp(delta);
  const double b = g.fpp(1.0);
  return {std::min(a, b), std::max(a, b), delta, "squared-L2, diagonal Hessian endpoints over [delta,1]"};
}

/// sigma_F = L_F = 1, the convention quoted for the Shannon potential (and
/// for the squared-Euclidean one, where it is exact).
inline GeometryConstants paper_constants(const Generator& g) {
  if (g.kind() != GeneratorKind::Shannon && g.kind() != GeneratorKind::SquaredEuclidean) {
    throw Error(Errc::GeneratorUnsupported, "paper-convention constants only defined for shannon and euclidean");
  }
  return {1.0, 1.0, 0.0, "paper convention sigma_F = L_F = 1 (norm pairing unspecified)"};
}

/// alpha = sigma / (sigma + m L).
inline double alpha_coeff(const GeometryConstants& c, std::size_t m) {
  if (m < 1) throw Error(Errc::InvalidArgument, "alpha_coeff needs m >= 1");
  return c.sigma_f / (c.sigma_f + static_cast<double>(m) * c.l_f);
}

/// Reverse KL(p || q); terms with p_i = 0 vanish, q_i = 0 < p_i is a violation.
inline double kl_divergence(const Distribution& p, const Distribution& q) {
  if (p.dim() != q.dim()) throw Error(Errc::DimMismatch, "kl_divergence");
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw Error(Errc::SupportViolation, "kl: mass at " + detail::fmt_index(i, p[i]) + " outside support");
    s += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(s, 0.0);
}

/// KL(q || p): the Bregman divergence of the dual (log-partition) potential,
/// i.e. the maximum-likelihood direction.
inline double forward_kl(const Distribution& p, const Distribution& q) { return kl_divergence(q, p); }

}  // namespace erbp
