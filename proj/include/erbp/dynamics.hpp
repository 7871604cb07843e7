#pragma once

// The closed loop: sample (echo), mix with a reservoir, project. Runs
// independent Monte Carlo trials and records per-step statistics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "erbp/errors.hpp"
#include "erbp/generators.hpp"
#include "erbp/manifolds.hpp"
#include "erbp/simplex.hpp"

namespace erbp {

struct UniformReservoir {};
struct FixedDataReservoir {
  Distribution dist;
};
struct SnapshotReservoir {
  std::size_t k = 5;
};
struct TemperedReservoir {
  double tau = 2.0;
};

struct ReservoirSpec {
  std::variant<UniformReservoir, FixedDataReservoir, SnapshotReservoir, TemperedReservoir> kind = UniformReservoir{};
  /// Entropy lower bound claimed for the reservoir, theorem convention.
  /// Unset: the exact entropy for uniform/fixed reservoirs, 0 (or -inf for
  /// kinds without a normalized entropy) otherwise.
  std::optional<double> s_min_declared;

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, UniformReservoir>) return "uniform";
          else if constexpr (std::is_same_v<T, FixedDataReservoir>) return "fixed";
          else if constexpr (std::is_same_v<T, SnapshotReservoir>) return "snapshot(k=" + std::to_string(k.k) + ")";
          else {
            char buf[48];
            std::snprintf(buf, sizeof buf, "tempered(tau=%g)", k.tau);
            return buf;
          }
        },
        kind);
  }
};

class LambdaSchedule {
 public:
  enum class Kind { Constant, Harmonic, Explicit };

  static LambdaSchedule constant(double lambda) {
    check(lambda);
    return LambdaSchedule(Kind::Constant, lambda, {});
  }
  /// lambda_t = min(1, base + 1/(t+1)) for 0-based step t.
  static LambdaSchedule harmonic(double base) {
    check(base);
    return LambdaSchedule(Kind::Harmonic, base, {});
  }
  static LambdaSchedule explicit_values(std::vector<double> values) {
    if (values.empty()) throw Error(Errc::InvalidArgument, "explicit lambda schedule is empty");
    for (double v : values) check(v);
    return LambdaSchedule(Kind::Explicit, 0.0, std::move(values));
  }

  Kind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double at(std::size_t t) const {
    switch (kind_) {
      case Kind::Constant: return value_;
      case Kind::Harmonic: return std::min(1.0, value_ + 1.0 / static_cast<double>(t + 1));
      case Kind::Explicit:
        if (t >= values_.size()) {
          throw Error(Errc::InvalidArgument, "explicit lambda schedule has no value for step " + std::to_string(t));
        }
        return values_[t];
    }
    return 0.0;
  }

  /// Infimum of lambda_t over steps 0..T-1.
  double infimum(std::size_t steps) const {
    double lo = 1.0;
    for (std::size_t t = 0; t < steps; ++t) lo = std::min(lo, at(t));
    return lo;
  }

  /// Infimum over an unbounded horizon.
  double limit_infimum() const {
    switch (kind_) {
      case Kind::Constant:
      case Kind::Harmonic: return value_;
      case Kind::Explicit: return *std::min_element(values_.begin(), values_.end());
    }
    return 0.0;
  }

  bool identically_zero(std::size_t steps) const {
    for (std::size_t t = 0; t < steps; ++t) {
      if (at(t) != 0.0) return false;
    }
    return true;
  }

  std::string name() const {
    char buf[48];
    switch (kind_) {
      case Kind::Constant: std::snprintf(buf, sizeof buf, "constant(lambda=%.17g)", value_); return buf;
      case Kind::Harmonic: std::snprintf(buf, sizeof buf, "harmonic(base=%.17g)", value_); return buf;
      case Kind::Explicit: return "explicit(n=" + std::to_string(values_.size()) + ")";
    }
    return "?";
  }

 private:
  LambdaSchedule(Kind k, double v, std::vector<double> vals) : kind_(k), value_(v), values_(std::move(vals)) {}
  static void check(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::LambdaOutOfRange, std::to_string(v));
  }
  Kind kind_;
  double value_;
  std::vector<double> values_;
};

struct LoopConfig {
  std::size_t n = 100;
  std::size_t m = 10;
  std::size_t steps = 50;  // T
  std::size_t trials = 10;
  Generator generator = Generator::shannon();
  Manifold manifold = Manifold::full();
  ReservoirSpec reservoir;
  LambdaSchedule schedule = LambdaSchedule::constant(0.0);
  std::optional<Distribution> p0;  // unset: uniform over n
  std::optional<Distribution> truth;  // reference for kl_to_truth
  double delta = 1e-9;
  double eps_max = 1e-6;
  int max_iters = 20000;
  std::size_t inner_resamples = 0;  // R; 0 disables checkpoints
  std::size_t checkpoint_every = 10;
  std::uint64_t master_seed = 0;
  bool deterministic_echo = false;
  std::size_t threads = 1;
  std::optional<double> support_threshold;  // unset: 2 * delta

  Distribution initial() const { return p0 ? *p0 : Distribution::uniform(n); }
  double threshold() const { return support_threshold ? *support_threshold : 2.0 * delta; }
  ProjectionOptions projection_options() const {
    ProjectionOptions o;
    o.eps_max = eps_max;
    o.max_iters = max_iters;
    return o;
  }

  void validate() const {
    if (n < 2) throw Error(Errc::InvalidArgument, "n must be >= 2");
    if (m < 1) throw Error(Errc::InvalidArgument, "m must be >= 1");
    if (trials < 1) throw Error(Errc::InvalidArgument, "trials must be >= 1");
    if (threads < 1) throw Error(Errc::InvalidArgument, "threads must be >= 1");
    if (!(delta > 0.0 && delta < 1.0 / static_cast<double>(n))) {
      throw Error(Errc::DeltaOutOfRange, "delta " + std::to_string(delta) + " not in (0, 1/n)");
    }
    if (!(eps_max > 0.0)) throw Error(Errc::InvalidArgument, "eps_max must be > 0");
    if (inner_resamples != 0 && inner_resamples < 30) {
      throw Error(Errc::InvalidArgument, "inner_resamples must be 0 or >= 30");
    }
    if (checkpoint_every < 1) throw Error(Errc::InvalidArgument, "checkpoint_every must be >= 1");
    if (p0 && p0->dim() != n) throw Error(Errc::DimMismatch, "p0 dim " + std::to_string(p0->dim()));
    if (truth && truth->dim() != n) throw Error(Errc::DimMismatch, "truth dim " + std::to_string(truth->dim()));
    if (auto d = manifold.dim(); d && *d != n) throw Error(Errc::DimMismatch, "manifold dim " + std::to_string(*d));
    if (const auto* f = std::get_if<FixedDataReservoir>(&reservoir.kind); f && f->dist.dim() != n) {
      throw Error(Errc::DimMismatch, "fixed reservoir dim " + std::to_string(f->dist.dim()));
    }
    if (const auto* s = std::get_if<SnapshotReservoir>(&reservoir.kind); s && s->k < 1) {
      throw Error(Errc::InvalidArgument, "snapshot k must be >= 1");
    }
    if (const auto* tr = std::get_if<TemperedReservoir>(&reservoir.kind); tr && !(tr->tau > 1.0)) {
      throw Error(Errc::InvalidArgument, "tempered tau must be > 1");
    }
    if (schedule.kind() == LambdaSchedule::Kind::Explicit && schedule.values().size() < steps) {
      throw Error(Errc::InvalidArgument, "explicit lambda schedule shorter than T");
    }
  }

  /// Resolved entropy lower bound for the reservoir, theorem convention.
  double s_min() const {
    if (reservoir.s_min_declared) return *reservoir.s_min_declared;
    if (std::holds_alternative<UniformReservoir>(reservoir.kind)) {
      return theorem_entropy(generator, Distribution::uniform(n));
    }
    if (const auto* f = std::get_if<FixedDataReservoir>(&reservoir.kind)) return theorem_entropy(generator, f->dist);
    return generator.has_normalized_entropy() ? 0.0 : -std::numeric_limits<double>::infinity();
  }

  std::optional<Distribution> reference() const {
    if (truth) return truth;
    if (const auto* f = std::get_if<FixedDataReservoir>(&reservoir.kind)) return f->dist;
    return std::nullopt;
  }
};

/// Builds the reservoir for this step and re-checks both validity clauses:
/// supp(p_hat) within supp(reservoir), and entropy >= s_min (theorem convention).
/// `history` holds recent states, most recent last.
inline Distribution reservoir_dist(const ReservoirSpec& spec, const Distribution& p_hat,
                                   const std::deque<Distribution>& history, const Generator& g, double s_min) {
  const std::size_t n = p_hat.dim();
  Distribution res = std::visit(
      [&](const auto& k) -> Distribution {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, UniformReservoir>) {
          return Distribution::uniform(n);
        } else if constexpr (std::is_same_v<T, FixedDataReservoir>) {
          return k.dist;
        } else if constexpr (std::is_same_v<T, SnapshotReservoir>) {
          if (history.empty()) throw Error(Errc::ReservoirInvalid, "snapshot ensemble needs a non-empty history");
          const std::size_t take = std::min(k.k, history.size());
          std::vector<double> acc(n, 0.0);
          for (std::size_t j = history.size() - take; j < history.size(); ++j) {
            for (std::size_t i = 0; i < n; ++i) acc[i] += history[j][i];
          }
          return new_distribution(acc);
        } else {
          if (history.empty()) throw Error(Errc::ReservoirInvalid, "tempered reservoir needs the current state");
          const Distribution& cur = history.back();
          double mx = -std::numeric_limits<double>::infinity();
          for (double x : cur.vec()) {
            if (x > 0.0) mx = std::max(mx, std::log(x));
          }
          std::vector<double> w(n, 0.0);
          for (std::size_t i = 0; i < n; ++i) {
            if (cur[i] > 0.0) w[i] = std::exp((std::log(cur[i]) - mx) / k.tau);
          }
          return new_distribution(w);
        }
      },
      spec.kind);
  if (res.dim() != n) throw Error(Errc::DimMismatch, "reservoir dim " + std::to_string(res.dim()));
  for (std::size_t i = 0; i < n; ++i) {
    if (p_hat[i] > 0.0 && !(res[i] > 0.0)) {
      throw Error(Errc::ReservoirInvalid, "support coverage fails at " + detail::fmt_index(i, p_hat[i]));
    }
  }
  if (std::isfinite(s_min)) {
    const double s = theorem_entropy(g, res);
    if (s < s_min - 1e-9) {
      throw Error(Errc::ReservoirInvalid,
                  "entropy lower bound fails: measured " + std::to_string(s) + " < s_min " + std::to_string(s_min));
    }
  }
  return res;
}

struct StepRecord {
  std::size_t step = 0;  // index of the produced state, 1..T
  double lambda = 0.0;
  double empirical_entropy_raw = 0.0;
  std::size_t empirical_support = 0;
  double reservoir_entropy_raw = 0.0;
  double eps = 0.0;
  int iterations = 0;
  bool converged = true;
  double entropy_raw = 0.0;
  double entropy_shannon = 0.0;
  std::size_t support_size = 0;
  std::optional<double> kl_to_truth;
};

struct Checkpoint {
  std::size_t step = 0;  // conditioning state index t; the estimate is for t + 1
  double state_entropy_raw = 0.0;
  double mean_raw = 0.0;
  double stderr_ = 0.0;
  std::size_t resamples = 0;
};

struct TrialRecord {
  std::size_t trial = 0;
  double initial_entropy_raw = 0.0;
  double initial_entropy_shannon = 0.0;
  std::size_t initial_support = 0;
  std::vector<StepRecord> steps;
  std::vector<Checkpoint> checkpoints;
  std::optional<std::string> error;
  std::optional<Distribution> final_state;
};

struct Trajectory {
  std::vector<TrialRecord> trials;

  std::size_t completed_trials() const {
    return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const auto& t) { return !t.error; }));
  }
};

struct StepOutput {
  Distribution next;
  StepRecord record;
};

/// One echo-mix-project transition from state P_t at 0-based step t.
inline StepOutput run_step(const Distribution& p_t, const LoopConfig& cfg, std::size_t t, RandomSource& rng,
                           const std::deque<Distribution>& history) {
  const Generator& g = cfg.generator;
  StepRecord rec;
  rec.step = t + 1;
  rec.lambda = cfg.schedule.at(t);
  std::optional<Distribution> sampled;
  if (!cfg.deterministic_echo) sampled = sample_empirical(p_t, cfg.m, rng).distribution();
  const Distribution& p_hat = cfg.deterministic_echo ? p_t : *sampled;
  rec.empirical_entropy_raw = f_entropy(g, p_hat);
  rec.empirical_support = support_size(p_hat);
  auto p_res = reservoir_dist(cfg.reservoir, p_hat, history, g, cfg.s_min());
  rec.reservoir_entropy_raw = f_entropy(g, p_res);
  auto y = mix(p_hat, p_res, rec.lambda);
  if (g.boundary_sensitive()) y = clamp_interior(y, cfg.delta);
  auto proj = project(g, cfg.manifold, y, cfg.projection_options());
  rec.eps = proj.eps;
  rec.iterations = proj.iterations;
  rec.converged = proj.converged;
  rec.entropy_raw = f_entropy(g, proj.point);
  rec.entropy_shannon = shannon_entropy(proj.point);
  rec.support_size = support_size(proj.point, cfg.threshold());
  if (auto ref = cfg.reference()) {
    bool finite = true;
    for (std::size_t i = 0; i < ref->dim(); ++i) {
      if ((*ref)[i] > 0.0 && proj.point[i] == 0.0) finite = false;
    }
    rec.kl_to_truth = finite ? kl_divergence(*ref, proj.point) : std::numeric_limits<double>::infinity();
  }
  return {std::move(proj.point), rec};
}

struct ConditionalEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error of the raw F-entropy after one transition from
/// P_t, over R independent draws.
inline ConditionalEstimate conditional_entropy_estimate(const Distribution& p_t, const LoopConfig& cfg, std::size_t r,
                                                        RandomSource& rng, std::size_t t = 0,
                                                        const std::deque<Distribution>* history = nullptr) {
  if (r < 30) throw Error(Errc::InvalidArgument, "conditional estimate needs R >= 30, got " + std::to_string(r));
  std::deque<Distribution> local;
  if (!history) local.push_back(p_t);
  const auto& hist = history ? *history : local;
  double sum = 0.0;
  double sumsq = 0.0;
  std::vector<double> values(r);
  for (std::size_t k = 0; k < r; ++k) {
    values[k] = run_step(p_t, cfg, t, rng, hist).record.entropy_raw;
    sum += values[k];
  }
  // deviations from the first draw keep a constant sample at exactly zero spread
  double dsum = 0.0;
  for (double v : values) dsum += v - values[0];
  const double dmean = dsum / static_cast<double>(r);
  for (double v : values) sumsq += (v - values[0] - dmean) * (v - values[0] - dmean);
  const double var = sumsq / static_cast<double>(r - 1);
  return {sum / static_cast<double>(r), std::sqrt(var / static_cast<double>(r))};
}

inline std::size_t snapshot_window(const LoopConfig& cfg) {
  if (const auto* s = std::get_if<SnapshotReservoir>(&cfg.reservoir.kind)) return s->k;
  return 1;
}

inline TrialRecord run_trial(const LoopConfig& cfg, std::size_t trial) {
  TrialRecord out;
  out.trial = trial;
  RandomSource rng(cfg.master_seed, trial);
  Distribution state = cfg.initial();
  out.initial_entropy_raw = f_entropy(cfg.generator, state);
  out.initial_entropy_shannon = shannon_entropy(state);
  out.initial_support = support_size(state, cfg.threshold());
  const std::size_t window = snapshot_window(cfg);
  std::deque<Distribution> history(window, state);
  try {
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      if (cfg.inner_resamples > 0 && t % cfg.checkpoint_every == 0) {
        RandomSource inner = rng.child(t + 1);
        auto est = conditional_entropy_estimate(state, cfg, cfg.inner_resamples, inner, t, &history);
        out.checkpoints.push_back({t, f_entropy(cfg.generator, state), est.mean, est.stderr_, cfg.inner_resamples});
      }
      auto step = run_step(state, cfg, t, rng, history);
      state = std::move(step.next);
      out.steps.push_back(step.record);
      history.push_back(state);
      if (history.size() > window) history.pop_front();
    }
  } catch (const Error& e) {
    out.error = e.what();
  }
  out.final_state = state;
  return out;
}

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Callers write
/// results into slot i, so the schedule never affects the output.
template <class Fn>
void parallel_trials(std::size_t count, std::size_t threads, Fn fn) {
  const std::size_t workers = std::min(threads, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Runs all trials. Trial i draws from stream (master_seed, i).
inline Trajectory run_loop(const LoopConfig& cfg) {
  cfg.validate();
  Trajectory traj;
  traj.trials.resize(cfg.trials);
  parallel_trials(cfg.trials, cfg.threads, [&](std::size_t i) { traj.trials[i] = run_trial(cfg, i); });
  return traj;
}

struct EnsemblePoint {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

/// Per-step ensemble mean and standard error of `field`, over trials that
/// reached the step. Index 0 is the initial state.
template <class Field, class Initial>
std::vector<EnsemblePoint> ensemble_series(const Trajectory& traj, std::size_t steps, Field field, Initial initial) {
  std::vector<EnsemblePoint> out(steps + 1);
  for (std::size_t t = 0; t <= steps; ++t) {
    std::vector<double> v;
    for (const auto& tr : traj.trials) {
      if (t == 0) v.push_back(initial(tr));
      else if (t <= tr.steps.size()) v.push_back(field(tr.steps[t - 1]));
    }
    if (v.empty()) continue;
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
    out[t] = {mean, se, v.size()};
  }
  return out;
}

inline std::vector<EnsemblePoint> shannon_series(const Trajectory& traj, std::size_t steps) {
  return ensemble_series(
      traj, steps, [](const StepRecord& r) { return r.entropy_shannon; },
      [](const TrialRecord& t) { return t.initial_entropy_shannon; });
}

inline std::vector<EnsemblePoint> raw_entropy_series(const Trajectory& traj, std::size_t steps) {
  return ensemble_series(
      traj, steps, [](const StepRecord& r) { return r.entropy_raw; },
      [](const TrialRecord& t) { return t.initial_entropy_raw; });
}

}  // namespace erbp
