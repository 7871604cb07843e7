#pragma once

// Checks of the collapse, rate, floor and lemma inequalities against recorded
// trajectories. Every row is recomputed from trajectory fields and the
// context below, nothing else.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "erbp/dynamics.hpp"
#include "erbp/errors.hpp"
#include "erbp/generators.hpp"
#include "erbp/manifolds.hpp"
#include "erbp/simplex.hpp"

namespace erbp {

enum class ConstantsPreset { DeltaInterior, Paper };

inline const char* to_string(ConstantsPreset p) noexcept {
  return p == ConstantsPreset::Paper ? "paper" : "delta-interior";
}

struct BoundRow {
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // signed slack in the direction of the inequality
  double stderr_ = 0.0;
  bool ok = true;
  std::string relation = "<=";
  bool descriptive = false;  // reported only, excluded from pass
  std::size_t violations = 0;
  std::size_t samples = 0;
};

struct BoundReport {
  std::string bound_id;
  std::string preset;
  GeometryConstants constants;
  std::vector<BoundRow> rows;
  bool pass = true;
  std::string notes;

  void add(BoundRow row) {
    if (!row.descriptive && !row.ok) pass = false;
    rows.push_back(std::move(row));
  }
  void note(const std::string& s) {
    if (!notes.empty()) notes += "; ";
    notes += s;
  }
};

inline constexpr double kDeterministicSlack = 1e-9;
inline constexpr double kSigmaSlack = 3.0;

/// Everything a check needs besides the trajectory itself.
struct BoundContext {
  Generator generator = Generator::shannon();
  GeometryConstants constants;
  ConstantsPreset preset = ConstantsPreset::DeltaInterior;
  std::size_t m = 1;
  std::size_t n = 2;
  std::size_t steps = 0;
  double s_min = 0.0;
  LambdaSchedule schedule = LambdaSchedule::constant(0.0);
  bool deterministic_echo = false;

  static BoundContext from(const LoopConfig& cfg, ConstantsPreset preset) {
    BoundContext c;
    c.generator = cfg.generator;
    c.preset = preset;
    c.constants = preset == ConstantsPreset::Paper ? paper_constants(cfg.generator)
                                                   : estimate_constants(cfg.generator, cfg.delta, cfg.n);
    c.m = cfg.m;
    c.n = cfg.n;
    c.steps = cfg.steps;
    c.s_min = cfg.s_min();
    c.schedule = cfg.schedule;
    c.deterministic_echo = cfg.deterministic_echo;
    return c;
  }

  double offset() const { return generator.entropy_offset(); }
  double alpha() const { return alpha_coeff(constants, m); }
  double capacity() const { return c_f(generator, m, n).value; }

  BoundReport report(const std::string& id) const {
    BoundReport r;
    r.bound_id = id;
    r.preset = to_string(preset);
    r.constants = constants;
    return r;
  }
};

namespace detail {

inline BoundRow upper_row(std::string label, double lhs, double rhs, double slack, double se = 0.0) {
  BoundRow r;
  r.label = std::move(label);
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = rhs - lhs;
  r.stderr_ = se;
  r.ok = lhs <= rhs + slack;
  r.relation = "<=";
  return r;
}

inline BoundRow lower_row(std::string label, double lhs, double rhs, double slack, double se = 0.0) {
  BoundRow r;
  r.label = std::move(label);
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = lhs - rhs;
  r.stderr_ = se;
  r.ok = lhs >= rhs - slack;
  r.relation = ">=";
  return r;
}

inline BoundRow strict_upper_row(std::string label, double lhs, double rhs) {
  auto r = upper_row(std::move(label), lhs, rhs, 0.0);
  r.relation = "<";
  r.ok = lhs < rhs;
  return r;
}

inline BoundRow describe(BoundRow r) {
  r.descriptive = true;
  return r;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct WindowMean {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean theorem entropy over the final 10% of steps: average per trial, then
/// across trials.
inline WindowMean final_window(const Trajectory& traj, std::size_t steps, double offset) {
  const std::size_t w = std::max<std::size_t>(1, (steps + 9) / 10);
  std::vector<double> per_trial;
  for (const auto& tr : traj.trials) {
    if (tr.error || tr.steps.size() < steps) continue;
    double s = 0.0;
    for (std::size_t t = steps - w; t < steps; ++t) s += tr.steps[t].entropy_raw + offset;
    per_trial.push_back(s / static_cast<double>(w));
  }
  if (per_trial.empty()) return {};
  double s = 0.0;
  for (double v : per_trial) s += v;
  const double mean = s / static_cast<double>(per_trial.size());
  double ss = 0.0;
  for (double v : per_trial) ss += (v - mean) * (v - mean);
  const double se = per_trial.size() > 1
                        ? std::sqrt(ss / static_cast<double>(per_trial.size() - 1) / static_cast<double>(per_trial.size()))
                        : 0.0;
  return {mean, se};
}

}  // namespace detail

/// Realized projection slack: sqrt(2 * max eps_t) over every recorded step.
inline double realized_kappa(const Trajectory& traj) {
  double mx = 0.0;
  for (const auto& tr : traj.trials) {
    for (const auto& s : tr.steps) mx = std::max(mx, s.eps);
  }
  return std::sqrt(2.0 * mx);
}

namespace detail {

inline void collapse_rows(const Trajectory& traj, const BoundContext& ctx, BoundReport& rep, bool with_decay_form) {
  const double kappa = realized_kappa(traj);
  const double a = ctx.alpha();
  const double cap = ctx.capacity();
  const double l = ctx.constants.l_f;
  const double off = ctx.offset();
  std::size_t count = 0;
  for (const auto& tr : traj.trials) {
    for (const auto& cp : tr.checkpoints) {
      ++count;
      const double s = cp.state_entropy_raw + off;
      const double lhs = cp.mean_raw + off;
      const double rhs = (1.0 - a) * s + a * cap + l * kappa;
      const double slack = kSigmaSlack * cp.stderr_ + kDeterministicSlack;
      rep.add(upper_row("trial " + std::to_string(tr.trial) + " t=" + std::to_string(cp.step), lhs, rhs, slack,
                        cp.stderr_));
      if (with_decay_form) {
        rep.add(describe(upper_row("decay form without C, trial " + std::to_string(tr.trial) + " t=" +
                                       std::to_string(cp.step),
                                   lhs, (1.0 - a) * s + l * kappa, slack, cp.stderr_)));
      }
    }
  }
  if (count == 0) throw Error(Errc::MissingCheckpoints, "trajectory has no conditional-expectation checkpoints");
  const auto win = final_window(traj, ctx.steps, off);
  rep.add(upper_row("limsup: final-window mean", win.mean, cap + l * kappa / a,
                    kSigmaSlack * win.stderr_ + kDeterministicSlack, win.stderr_));
  rep.note("kappa=" + fmt(kappa) + " alpha=" + fmt(a) + " C_F(m)=" + fmt(cap));
}

}  // namespace detail

/// Per-checkpoint contraction inequality and the asymptotic (limsup) clause
/// for a run without coupling.
inline BoundReport check_collapse_step(const Trajectory& traj, const BoundContext& ctx) {
  if (!ctx.schedule.identically_zero(ctx.steps)) {
    throw Error(Errc::InvalidArgument, "collapse_step needs a lambda == 0 run");
  }
  auto rep = ctx.report("collapse_step");
  detail::collapse_rows(traj, ctx, rep, false);
  double support = 0.0;
  std::size_t k = 0;
  for (const auto& tr : traj.trials) {
    if (!tr.steps.empty()) {
      support += static_cast<double>(tr.steps.back().support_size);
      ++k;
    }
  }
  if (k > 0) {
    rep.add(detail::describe(detail::upper_row("final state support (mean, descriptive)", support / static_cast<double>(k),
                                               static_cast<double>(ctx.m), 0.0)));
  }
  return rep;
}

/// Envelope |M_{t+1} - c| <= (1 - alpha)|M_t - c| on trial means at each
/// checkpoint, with c = C_F(m) + L kappa / alpha.
inline BoundReport check_geometric_rate(const Trajectory& traj, const BoundContext& ctx, std::size_t every = 10) {
  if (traj.completed_trials() < 30) {
    throw Error(Errc::InsufficientTrials, "geometric_rate needs >= 30 completed trials, got " +
                                              std::to_string(traj.completed_trials()));
  }
  if (!ctx.schedule.identically_zero(ctx.steps)) {
    throw Error(Errc::InvalidArgument, "geometric_rate needs a lambda == 0 run");
  }
  auto rep = ctx.report("geometric_rate");
  const double kappa = realized_kappa(traj);
  const double a = ctx.alpha();
  const double c = ctx.capacity() + ctx.constants.l_f * kappa / a;
  const double off = ctx.offset();
  const auto series = raw_entropy_series(traj, ctx.steps);
  for (std::size_t t = 0; t < ctx.steps; t += std::max<std::size_t>(1, every)) {
    const double prev = series[t].mean + off;
    const double next = series[t + 1].mean + off;
    const double se = std::sqrt(series[t].stderr_ * series[t].stderr_ + series[t + 1].stderr_ * series[t + 1].stderr_);
    const double slack = kSigmaSlack * se + kDeterministicSlack;
    rep.add(detail::upper_row("t=" + std::to_string(t), std::abs(next - c), (1.0 - a) * std::abs(prev - c), slack, se));
    rep.add(detail::describe(
        detail::upper_row("one-sided t=" + std::to_string(t), next - c, (1.0 - a) * (prev - c), slack, se)));
  }
  rep.note("fixed point c=" + detail::fmt(c) + " alpha=" + detail::fmt(a) + " kappa=" + detail::fmt(kappa));
  return rep;
}

/// Per-iterate floor S(P_{t+1}) >= lambda_t s_min - L kappa, plus the uniform
/// floor and the never-collapse condition lambda_min s_min > L kappa.
inline BoundReport check_floor(const Trajectory& traj, const BoundContext& ctx) {
  if (!ctx.generator.supports_floor()) {
    throw Error(Errc::GeneratorUnsupported,
                ctx.generator.name() + " has no concave non-negative entropy; the floor statement does not apply");
  }
  auto rep = ctx.report("floor");
  const double kappa = realized_kappa(traj);
  const double l = ctx.constants.l_f;
  const double off = ctx.offset();
  double global_min = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < ctx.steps; ++t) {
    double worst = std::numeric_limits<double>::infinity();
    std::size_t worst_trial = 0;
    std::size_t count = 0;
    std::size_t bad = 0;
    const double lam = ctx.schedule.at(t);
    const double rhs = lam * ctx.s_min - l * kappa;
    for (const auto& tr : traj.trials) {
      if (t >= tr.steps.size()) continue;
      const double s = tr.steps[t].entropy_raw + off;
      ++count;
      if (s < rhs - kDeterministicSlack) ++bad;
      if (s < worst) {
        worst = s;
        worst_trial = tr.trial;
      }
    }
    if (count == 0) continue;
    global_min = std::min(global_min, worst);
    auto row = detail::lower_row("step " + std::to_string(t + 1) + " (worst trial " + std::to_string(worst_trial) + ")",
                                 worst, rhs, kDeterministicSlack);
    row.violations = bad;
    row.samples = count;
    rep.add(row);
  }
  const double lam_min = ctx.schedule.infimum(ctx.steps);
  rep.add(detail::describe(
      detail::lower_row("uniform floor lambda_min*s_min - L*kappa", global_min, lam_min * ctx.s_min - l * kappa, 0.0)));
  auto nc = detail::describe(detail::lower_row("never-collapse lambda_min*s_min > L*kappa", lam_min * ctx.s_min, l * kappa, 0.0));
  nc.relation = ">";
  nc.ok = lam_min * ctx.s_min > l * kappa;
  rep.add(nc);
  rep.note("lambda_min(T)=" + detail::fmt(lam_min) + " lambda_min(inf)=" + detail::fmt(ctx.schedule.limit_infimum()) +
           " s_min=" + detail::fmt(ctx.s_min) + " kappa=" + detail::fmt(kappa) +
           (nc.ok ? " never-collapse condition holds" : " never-collapse condition does not hold"));
  if (ctx.schedule.identically_zero(ctx.steps)) rep.note("vacuous: lambda == 0 gives floor -L*kappa <= 0");
  return rep;
}

/// Every recorded empirical has entropy at most C_F(m) and at most m atoms.
inline BoundReport check_sampling_lemma(const Trajectory& traj, const BoundContext& ctx) {
  auto rep = ctx.report("sampling_lemma");
  const double cap = ctx.capacity();
  const double off = ctx.offset();
  for (std::size_t t = 0; t < ctx.steps; ++t) {
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t worst_support = 0;
    std::size_t count = 0;
    std::size_t bad = 0;
    std::size_t bad_support = 0;
    for (const auto& tr : traj.trials) {
      if (t >= tr.steps.size()) continue;
      ++count;
      const double s = tr.steps[t].empirical_entropy_raw + off;
      worst = std::max(worst, s);
      worst_support = std::max(worst_support, tr.steps[t].empirical_support);
      if (s > cap + kDeterministicSlack) ++bad;
      if (tr.steps[t].empirical_support > ctx.m) ++bad_support;
    }
    if (count == 0) continue;
    auto row = detail::upper_row("step " + std::to_string(t + 1) + " entropy", worst, cap, kDeterministicSlack);
    row.violations = bad;
    row.samples = count;
    rep.add(row);
    if (!ctx.deterministic_echo) {
      auto srow = detail::upper_row("step " + std::to_string(t + 1) + " support", static_cast<double>(worst_support),
                                    static_cast<double>(ctx.m), 0.0);
      srow.violations = bad_support;
      srow.samples = count;
      rep.add(srow);
    }
  }
  if (ctx.deterministic_echo) rep.note("deterministic echo: empirical support is not bounded by m");
  return rep;
}

struct DistributionPair {
  Distribution p;
  Distribution q;
};

/// Random pairs with n in [2, 10], flat Dirichlet draws clamped to the delta-interior.
inline std::vector<DistributionPair> random_interior_pairs(std::size_t count, double delta, RandomSource& rng) {
  std::vector<DistributionPair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n = 2 + rng.below(9);
    auto p = clamp_interior(random_flat_dirichlet(n, rng), delta);
    auto q = clamp_interior(random_flat_dirichlet(n, rng), delta);
    out.push_back({std::move(p), std::move(q)});
  }
  return out;
}

/// Entropy-divergence continuity: the component chain (strong convexity,
/// gradient Lipschitz, inner-product bound) and the composed bounds, with
/// constants estimated per pair dimension on the generator's delta-interior.
inline BoundReport check_continuity_lemma(const Generator& g, const std::vector<DistributionPair>& pairs) {
  BoundReport rep;
  rep.bound_id = "continuity_lemma";
  rep.preset = to_string(ConstantsPreset::DeltaInterior);
  if (pairs.empty()) throw Error(Errc::InvalidArgument, "continuity_lemma needs at least one pair");
  struct Link {
    std::string label;
    std::string relation;
    bool descriptive;
    double worst_margin = std::numeric_limits<double>::infinity();
    double lhs = 0.0;
    double rhs = 0.0;
    std::size_t bad = 0;
  };
  std::vector<Link> links{
      {"strong convexity B >= sigma/2 |p-q|^2", ">=", false},
      {"gradient Lipschitz |gradF(p)-gradF(q)| <= L |p-q|", "<=", false},
      {"inner product |<gradF(q)-gradF(p), p-q>| <= L |p-q|^2", "<=", false},
      {"composed |dS| <= (2L/sigma) B", "<=", false},
      {"composed |dS| <= L sqrt(2B/sigma) sqrt(2)", "<=", false},
      {"literal |dS| <= L sqrt(2B), estimated constants", "<=", true},
      {"literal |dS| <= sqrt(2B), sigma = L = 1", "<=", true},
      {"identity |dS| = |<gradF(q)-gradF(p), p-q>| (gap)", "<=", true},
  };
  auto record = [](Link& k, double lhs, double rhs, bool upper) {
    const double margin = upper ? rhs - lhs : lhs - rhs;
    const double tol = 1e-9 * std::max(1.0, std::abs(rhs)) + 1e-15;
    if (margin < -tol) ++k.bad;
    if (margin < k.worst_margin) {
      k.worst_margin = margin;
      k.lhs = lhs;
      k.rhs = rhs;
    }
  };
  GeometryConstants shown;
  for (const auto& pr : pairs) {
    const auto& p = pr.p;
    const auto& q = pr.q;
    const auto c = estimate_constants(g, g.delta(), p.dim());
    shown = c;
    const double d2 = l2_distance_squared(p.probs(), q.probs());
    const double b = bregman_div(g, p, q);
    const auto gp = potential_grad(g, p);
    const auto gq = potential_grad(g, q);
    double inner = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i) inner += (gq[i] - gp[i]) * (p[i] - q[i]);
    const double ds = std::abs(f_entropy(g, p) - f_entropy(g, q));
    record(links[0], b, 0.5 * c.sigma_f * d2, false);
    record(links[1], std::sqrt(l2_distance_squared(gp, gq)), c.l_f * std::sqrt(d2), true);
    record(links[2], std::abs(inner), c.l_f * d2, true);
    record(links[3], ds, 2.0 * c.l_f / c.sigma_f * b, true);
    record(links[4], ds, c.l_f * std::sqrt(2.0 * b / c.sigma_f) * std::sqrt(2.0), true);
    record(links[5], ds, c.l_f * std::sqrt(2.0 * b), true);
    record(links[6], ds, std::sqrt(2.0 * b), true);
    record(links[7], std::abs(ds - std::abs(inner)), 0.0, true);
  }
  for (const auto& k : links) {
    BoundRow r;
    r.label = k.label;
    r.lhs = k.lhs;
    r.rhs = k.rhs;
    r.margin = k.worst_margin;
    r.relation = k.relation;
    r.ok = k.bad == 0;
    r.descriptive = k.descriptive;
    r.violations = k.bad;
    r.samples = pairs.size();
    rep.add(r);
  }
  shown.delta = g.delta();
  shown.norm_note = "squared-L2, constants per pair dimension over [delta,1]";
  rep.constants = shown;
  rep.note(g.name() + ", " + std::to_string(pairs.size()) + " pairs, delta=" + detail::fmt(g.delta()));
  return rep;
}

/// Non-Shannon forms of the contraction and stability statements.
///   lambda == 0 run: contraction rows and limsup clause as in check_collapse_step,
///                    plus the decay form without C (descriptive)
///   lambda > 0 run:  S(P_{t+1}) >= lambda_t S(P_res,t) - L sqrt(2 eps_t) per step, and
///                    the floor form lambda_t s_min - L kappa
/// Kinds without a concave normalized entropy are run and reported descriptively.
inline BoundReport check_generalized_bounds(const Trajectory& traj, const BoundContext& ctx) {
  auto rep = ctx.report("generalized");
  const bool assertable = ctx.generator.supports_floor();
  if (ctx.schedule.identically_zero(ctx.steps)) {
    BoundReport inner = ctx.report("generalized");
    detail::collapse_rows(traj, ctx, inner, true);
    for (auto& r : inner.rows) {
      if (!assertable) r.descriptive = true;
      rep.add(r);
    }
    rep.note(inner.notes);
  } else {
    const double l = ctx.constants.l_f;
    const double off = ctx.offset();
    const double kappa = realized_kappa(traj);
    for (std::size_t t = 0; t < ctx.steps; ++t) {
      double worst_margin = std::numeric_limits<double>::infinity();
      double wl = 0.0;
      double wr = 0.0;
      std::size_t count = 0;
      std::size_t bad = 0;
      double floor_worst = std::numeric_limits<double>::infinity();
      for (const auto& tr : traj.trials) {
        if (t >= tr.steps.size()) continue;
        const auto& s = tr.steps[t];
        ++count;
        const double lhs = s.entropy_raw + off;
        const double rhs = s.lambda * (s.reservoir_entropy_raw + off) - l * std::sqrt(2.0 * s.eps);
        if (lhs < rhs - kDeterministicSlack) ++bad;
        if (lhs - rhs < worst_margin) {
          worst_margin = lhs - rhs;
          wl = lhs;
          wr = rhs;
        }
        floor_worst = std::min(floor_worst, lhs);
      }
      if (count == 0) continue;
      auto row = detail::lower_row("stability step " + std::to_string(t + 1), wl, wr, kDeterministicSlack);
      row.violations = bad;
      row.samples = count;
      row.descriptive = !assertable;
      rep.add(row);
      auto frow = detail::lower_row("floor step " + std::to_string(t + 1), floor_worst,
                                    ctx.schedule.at(t) * ctx.s_min - l * kappa, kDeterministicSlack);
      frow.descriptive = !assertable;
      rep.add(frow);
    }
  }
  if (!assertable) {
    rep.note(std::string(to_string(Errc::GeneratorUnsupported)) + ": " + ctx.generator.name() +
             " entropy is raw and not concave-normalized; rows are descriptive");
  }
  return rep;
}

/// Shannon reverse projection and forward-KL projection coincide on
/// realizable targets; on perturbed targets the divergence ratio is reported.
inline BoundReport check_fwd_rev_coincidence(const Manifold& m, const std::vector<Distribution>& realizable,
                                             const std::vector<Distribution>& perturbed,
                                             const ProjectionOptions& opts = {}) {
  BoundReport rep;
  rep.bound_id = "fwd_rev";
  rep.preset = to_string(ConstantsPreset::DeltaInterior);
  const auto g = Generator::shannon();
  for (std::size_t k = 0; k < realizable.size(); ++k) {
    const auto rev = project(g, m, realizable[k], opts);
    const auto fwd = project_forward_kl(m, realizable[k], opts);
    const std::string tag = "target " + std::to_string(k);
    rep.add(detail::upper_row(tag + " TV(reverse, forward)", total_variation(rev.point, fwd.point), 1e-6, 0.0));
    rep.add(detail::strict_upper_row(tag + " reverse KL", rev.eps, 1e-10));
    rep.add(detail::strict_upper_row(tag + " forward KL", fwd.eps, 1e-10));
  }
  for (std::size_t k = 0; k < perturbed.size(); ++k) {
    const auto rev = project(g, m, perturbed[k], opts);
    const double a = kl_divergence(rev.point, perturbed[k]);
    const double b = forward_kl(rev.point, perturbed[k]);
    BoundRow r;
    r.label = "perturbed " + std::to_string(k) + " KL(P||Y)/KL(Y||P)";
    r.lhs = a;
    r.rhs = b;
    r.margin = b > 0.0 ? a / b : std::numeric_limits<double>::infinity();
    r.relation = "ratio";
    r.descriptive = true;
    rep.add(r);
  }
  rep.note("manifold " + m.name());
  return rep;
}

/// A distribution in M: a random softmax parameter, a feasible point for
/// moments (the KL projection of a random draw), a random on-mask law.
inline Distribution sample_realizable(const Manifold& m, std::size_t n, RandomSource& rng) {
  return std::visit(
      [&](const auto& k) -> Distribution {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, FullSimplex>) {
          return clamp_interior(random_flat_dirichlet(n, rng), 1e-4 / static_cast<double>(n));
        } else if constexpr (std::is_same_v<T, SupportMask>) {
          std::vector<double> w(k.mask.size(), 0.0);
          for (std::size_t i = 0; i < w.size(); ++i) {
            if (k.mask[i]) w[i] = rng.exponential() + 1e-3;
          }
          return new_distribution(w);
        } else if constexpr (std::is_same_v<T, MomentConstraint>) {
          auto draw = clamp_interior(random_flat_dirichlet(static_cast<std::size_t>(k.features.cols()), rng), 1e-4);
          return project(Generator::shannon(), m, draw).point;
        } else {
          Eigen::VectorXd theta(k.features.cols());
          for (Eigen::Index j = 0; j < theta.size(); ++j) theta(j) = rng.normal();
          const Eigen::VectorXd p = detail::softmax_of(k.features * theta);
          return Distribution(std::vector<double>(p.data(), p.data() + p.size()));
        }
      },
      m.kind());
}

/// Moves `target` toward a random draw until the total-variation distance is `tv`.
inline Distribution perturb(const Distribution& target, double tv, RandomSource& rng) {
  auto r = random_flat_dirichlet(target.dim(), rng);
  const double d = total_variation(target, r);
  const double s = d > 0.0 ? std::min(1.0, tv / d) : 0.0;
  return mix(target, r, s);
}

/// Trend test on ensemble means: M_{t+1} <= M_t + sigmas * combined stderr for t >= from.
inline BoundReport check_monotone_trend(const std::vector<EnsemblePoint>& series, std::size_t from,
                                        const std::string& id, double sigmas = kSigmaSlack) {
  BoundReport rep;
  rep.bound_id = id;
  for (std::size_t t = from; t + 1 < series.size(); ++t) {
    const double se = std::sqrt(series[t].stderr_ * series[t].stderr_ + series[t + 1].stderr_ * series[t + 1].stderr_);
    rep.add(detail::upper_row("t=" + std::to_string(t + 1), series[t + 1].mean, series[t].mean,
                              sigmas * se + kDeterministicSlack, se));
  }
  return rep;
}

}  // namespace erbp
