#pragma once

// Desk-scale experiments: bigram language collapse, the double-well bandit
// and one-shot label smoothing.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "erbp/dynamics.hpp"
#include "erbp/errors.hpp"
#include "erbp/generators.hpp"
#include "erbp/manifolds.hpp"
#include "erbp/simplex.hpp"

namespace erbp {

// ---------------------------------------------------------------- bigram

struct BigramWorld {
  std::size_t k = 128;
  std::vector<Distribution> truth;  // row-stochastic K x K
  std::size_t seq_len = 50;
  std::vector<std::size_t> prompts;

  /// Truth rows are softmax(sharpness * z) with standard normal z; prompts are
  /// distinct start symbols.
  static BigramWorld make(std::size_t k = 128, std::size_t seq_len = 50, std::size_t num_prompts = 7,
                          std::uint64_t seed = 2024, double sharpness = 1.0) {
    if (k < 2) throw Error(Errc::InvalidArgument, "bigram alphabet needs K >= 2");
    if (seq_len < 2) throw Error(Errc::InvalidArgument, "bigram seq_len must be >= 2");
    if (num_prompts < 1 || num_prompts > k) throw Error(Errc::InvalidArgument, "prompts must be in [1, K]");
    BigramWorld w;
    w.k = k;
    w.seq_len = seq_len;
    RandomSource rng(seed, 0xB16A);
    for (std::size_t r = 0; r < k; ++r) {
      std::vector<double> z(k);
      for (auto& x : z) x = sharpness * rng.normal();
      const double mx = *std::max_element(z.begin(), z.end());
      for (auto& x : z) x = std::exp(x - mx);
      w.truth.push_back(new_distribution(z));
    }
    std::vector<std::size_t> symbols(k);
    std::iota(symbols.begin(), symbols.end(), 0);
    for (std::size_t i = 0; i < num_prompts; ++i) {
      const std::size_t j = i + rng.below(k - i);
      std::swap(symbols[i], symbols[j]);
      w.prompts.push_back(symbols[i]);
    }
    return w;
  }
};

struct Decode {
  enum class Kind { Greedy, Temperature };
  Kind kind = Kind::Greedy;
  double tau = 0.7;
  std::size_t top_k = 0;  // 0 keeps every symbol

  static Decode greedy() { return {}; }
  static Decode temperature(double tau, std::size_t top_k = 0) {
    if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "decode temperature must be > 0");
    return {Kind::Temperature, tau, top_k};
  }
  std::string name() const {
    if (kind == Kind::Greedy) return "greedy";
    char buf[64];
    std::snprintf(buf, sizeof buf, "temperature(tau=%g,top_k=%zu)", tau, top_k);
    return buf;
  }

  /// Next symbol from one model row. Greedy ties go to the lowest index.
  std::size_t next(const Distribution& row, RandomSource& rng) const {
    const auto& p = row.vec();
    if (kind == Kind::Greedy) return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    const std::size_t keep = top_k == 0 ? p.size() : std::min(top_k, p.size());
    const double top = std::log(p[order[0]]);
    std::vector<double> w(p.size(), 0.0);
    for (std::size_t j = 0; j < keep; ++j) {
      const std::size_t i = order[j];
      if (p[i] > 0.0) w[i] = std::exp((std::log(p[i]) - top) / tau);
    }
    return CategoricalSampler(new_distribution(w)).draw(rng);
  }
};

struct BigramConfig {
  double lambda = 0.0;
  std::size_t rounds = 9;
  std::size_t trials = 20;
  std::uint64_t seed = 2024;
  double delta = 1e-6;
  std::size_t sequences_per_prompt = 1;
  std::size_t threads = 1;
};

struct BigramRow {
  std::size_t trial = 0;
  std::size_t round = 0;
  double kl_to_truth = 0.0;  // mean over rows of KL(truth row || model row)
  double unique_bigram_ratio = 0.0;
  double mean_row_entropy = 0.0;
};

/// Each round decodes a corpus from the current model, then refits every
/// visited row as one loop step: empirical row counts mixed with the truth row
/// (fixed-data reservoir) at weight lambda, clamped to the delta-interior and
/// projected onto the full simplex. Unvisited rows keep their previous value.
/// The model starts at the truth.
inline std::vector<BigramRow> run_bigram_collapse(const BigramWorld& world, const Decode& decode,
                                                  const BigramConfig& cfg) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw Error(Errc::LambdaOutOfRange, std::to_string(cfg.lambda));
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0 / static_cast<double>(world.k))) {
    throw Error(Errc::DeltaOutOfRange, "bigram delta must be in (0, 1/K)");
  }
  if (cfg.trials < 1 || cfg.sequences_per_prompt < 1) throw Error(Errc::InvalidArgument, "trials and sequences >= 1");
  const auto g = Generator::shannon(cfg.delta);
  const auto full = Manifold::full();
  std::vector<std::vector<BigramRow>> per_trial(cfg.trials);
  parallel_trials(cfg.trials, cfg.threads, [&](std::size_t trial) {
    RandomSource rng(cfg.seed, trial);
    std::vector<Distribution> model = world.truth;
    const std::size_t k = world.k;
    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
      std::vector<std::vector<double>> counts(k, std::vector<double>(k, 0.0));
      std::set<std::pair<std::size_t, std::size_t>> seen;
      for (std::size_t prompt : world.prompts) {
        for (std::size_t s = 0; s < cfg.sequences_per_prompt; ++s) {
          std::size_t cur = prompt;
          for (std::size_t pos = 1; pos < world.seq_len; ++pos) {
            const std::size_t nxt = decode.next(model[cur], rng);
            counts[cur][nxt] += 1.0;
            seen.insert({cur, nxt});
            cur = nxt;
          }
        }
      }
      for (std::size_t r = 0; r < k; ++r) {
        const double total = std::accumulate(counts[r].begin(), counts[r].end(), 0.0);
        if (total == 0.0) continue;
        auto emp = new_distribution(counts[r]);
        auto y = clamp_interior(mix(emp, world.truth[r], cfg.lambda), cfg.delta);
        model[r] = project(g, full, y).point;
      }
      BigramRow row;
      row.trial = trial;
      row.round = round;
      for (std::size_t r = 0; r < k; ++r) {
        row.kl_to_truth += kl_divergence(world.truth[r], model[r]);
        row.mean_row_entropy += shannon_entropy(model[r]);
      }
      row.kl_to_truth /= static_cast<double>(k);
      row.mean_row_entropy /= static_cast<double>(k);
      row.unique_bigram_ratio = static_cast<double>(seen.size()) / static_cast<double>(k * k);
      per_trial[trial].push_back(row);
    }
  });
  std::vector<BigramRow> out;
  for (auto& v : per_trial) out.insert(out.end(), v.begin(), v.end());
  return out;
}

// ----------------------------------------------------------- double well

struct DoubleWellWorld {
  std::vector<double> grid;
  std::vector<double> reward;
  double tau = 0.3;
  double basin_boundary = 1.0;
  Distribution p0 = Distribution::uniform(2);

  std::size_t n() const { return grid.size(); }

  /// Grid over [-10, 10]; reward is a Gaussian bump of height 1 at x = -2 plus
  /// one of height 10 at x = 4 (unit width); p0 is a discretized Gaussian.
  static DoubleWellWorld make(std::size_t n = 201, double tau = 0.3, double p0_center = -5.0, double p0_width = 1.0,
                              double basin_boundary = 1.0) {
    if (n < 3) throw Error(Errc::InvalidArgument, "double-well grid needs n >= 3");
    if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "double-well tau must be > 0");
    if (!(p0_width > 0.0)) throw Error(Errc::InvalidArgument, "double-well p0 width must be > 0");
    DoubleWellWorld w;
    w.tau = tau;
    w.basin_boundary = basin_boundary;
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = -10.0 + 20.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      w.grid.push_back(x);
      w.reward.push_back(1.0 * std::exp(-0.5 * (x + 2.0) * (x + 2.0)) + 10.0 * std::exp(-0.5 * (x - 4.0) * (x - 4.0)));
      const double z = (x - p0_center) / p0_width;
      p[i] = std::exp(-0.5 * z * z);
    }
    w.p0 = new_distribution(p);
    return w;
  }

  double global_mass(const Distribution& p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n(); ++i) {
      if (grid[i] > basin_boundary) s += p[i];
    }
    return s;
  }
  double local_mass(const Distribution& p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n(); ++i) {
      if (grid[i] < basin_boundary) s += p[i];
    }
    return s;
  }
};

// Defaults frozen from a (tau, m, rounds) calibration grid: tau = 0.3, m = 8,
// rounds = 7 gave the widest joint margin between the trapped (lambda = 0.01)
// and escaped (lambda = 0.2) regimes.
struct DoubleWellConfig {
  double lambda = 0.0;
  std::size_t m = 8;
  std::size_t rounds = 7;
  std::size_t trials = 20;
  std::uint64_t seed = 2024;
  double delta = 1e-9;
  std::size_t threads = 1;
};

struct DoubleWellRow {
  std::size_t trial = 0;
  std::size_t round = 0;
  double entropy = 0.0;  // Shannon
  double global_basin_mass = 0.0;
  double local_basin_mass = 0.0;
  double argmax_position = 0.0;
};

struct DoubleWellResult {
  std::vector<DoubleWellRow> rows;
  Trajectory trajectory;  // same run in loop-record form, for floor checks
  LoopConfig loop;        // matching loop description (uniform reservoir, constant lambda)

  std::vector<double> final_global_mass() const {
    std::vector<double> out(trajectory.trials.size(), 0.0);
    for (const auto& r : rows) {
      if (r.round == loop.steps) out[r.trial] = r.global_basin_mass;
    }
    return out;
  }
};

/// Each round draws m positions from the policy, weights the drawn multiset by
/// exp(reward / tau) to form the exploitation target, mixes it with the uniform
/// reservoir at lambda and projects onto the full simplex.
inline DoubleWellResult run_double_well(const DoubleWellWorld& world, const DoubleWellConfig& cfg) {
  const std::size_t n = world.n();
  DoubleWellResult res;
  res.loop.n = n;
  res.loop.m = cfg.m;
  res.loop.steps = cfg.rounds;
  res.loop.trials = cfg.trials;
  res.loop.schedule = LambdaSchedule::constant(cfg.lambda);
  res.loop.delta = cfg.delta;
  res.loop.p0 = world.p0;
  res.loop.master_seed = cfg.seed;
  res.loop.threads = cfg.threads;
  res.loop.validate();
  const auto g = Generator::shannon(cfg.delta);
  const auto full = Manifold::full();
  const auto uniform = Distribution::uniform(n);
  res.trajectory.trials.resize(cfg.trials);
  std::vector<std::vector<DoubleWellRow>> per_trial(cfg.trials);
  parallel_trials(cfg.trials, cfg.threads, [&](std::size_t trial) {
    RandomSource rng(cfg.seed, trial);
    TrialRecord rec;
    rec.trial = trial;
    Distribution state = world.p0;
    rec.initial_entropy_raw = f_entropy(g, state);
    rec.initial_entropy_shannon = shannon_entropy(state);
    rec.initial_support = support_size(state, 2.0 * cfg.delta);
    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
      const auto sample = sample_empirical(state, cfg.m, rng);
      double rmax = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (sample.counts[i] > 0) rmax = std::max(rmax, world.reward[i]);
      }
      std::vector<double> w(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (sample.counts[i] > 0) {
          w[i] = static_cast<double>(sample.counts[i]) * std::exp((world.reward[i] - rmax) / world.tau);
        }
      }
      auto target = new_distribution(w);
      auto y = clamp_interior(mix(target, uniform, cfg.lambda), cfg.delta);
      auto proj = project(g, full, y);
      StepRecord s;
      s.step = round;
      s.lambda = cfg.lambda;
      s.empirical_entropy_raw = f_entropy(g, sample.distribution());
      s.empirical_support = sample.support_size();
      s.reservoir_entropy_raw = f_entropy(g, uniform);
      s.eps = proj.eps;
      s.iterations = proj.iterations;
      s.converged = proj.converged;
      state = std::move(proj.point);
      s.entropy_raw = f_entropy(g, state);
      s.entropy_shannon = shannon_entropy(state);
      s.support_size = support_size(state, 2.0 * cfg.delta);
      rec.steps.push_back(s);
      DoubleWellRow row;
      row.trial = trial;
      row.round = round;
      row.entropy = s.entropy_shannon;
      row.global_basin_mass = world.global_mass(state);
      row.local_basin_mass = world.local_mass(state);
      const auto& v = state.vec();
      row.argmax_position = world.grid[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())];
      per_trial[trial].push_back(row);
    }
    rec.final_state = state;
    res.trajectory.trials[trial] = std::move(rec);
  });
  for (auto& v : per_trial) res.rows.insert(res.rows.end(), v.begin(), v.end());
  return res;
}

struct CalibrationCell {
  double tau = 0.0;
  std::size_t m = 0;
  std::size_t trapped_zero = 0;  // lambda = 0 seeds with final global mass < 0.2
  std::size_t trapped_low = 0;   // lambda = 0.01 seeds with final global mass < 0.2
  std::size_t escaped = 0;       // lambda = 0.2 seeds with final global mass > 0.8
  double score = 0.0;            // worst of the three regime fractions
};

/// Grid search over (tau, m) at fixed rounds; the score of a cell is the
/// smallest of its three regime fractions, so the best cell separates all
/// three regimes.
inline std::vector<CalibrationCell> calibrate_double_well(const std::vector<double>& taus,
                                                          const std::vector<std::size_t>& ms, std::size_t rounds,
                                                          std::size_t seeds, std::uint64_t seed,
                                                          std::size_t threads = 1) {
  std::vector<CalibrationCell> out;
  for (double tau : taus) {
    const auto world = DoubleWellWorld::make(201, tau);
    for (std::size_t m : ms) {
      CalibrationCell c;
      c.tau = tau;
      c.m = m;
      auto count = [&](double lambda, bool above, double level) {
        DoubleWellConfig dc;
        dc.lambda = lambda;
        dc.m = m;
        dc.rounds = rounds;
        dc.trials = seeds;
        dc.seed = seed;
        dc.threads = threads;
        std::size_t k = 0;
        for (double g : run_double_well(world, dc).final_global_mass()) {
          if (above ? g > level : g < level) ++k;
        }
        return k;
      };
      c.trapped_zero = count(0.0, false, 0.2);
      c.trapped_low = count(0.01, false, 0.2);
      c.escaped = count(0.2, true, 0.8);
      c.score = static_cast<double>(std::min({c.trapped_zero, c.trapped_low, c.escaped})) / static_cast<double>(seeds);
      out.push_back(c);
    }
  }
  return out;
}

// --------------------------------------------------------- label smoothing

struct LabelSmoothingReport {
  double eta = 0.0;
  std::size_t k = 0;
  double entropy = 0.0;
  double bound = 0.0;
  bool ok = true;
};

/// H((1 - eta) e_y + eta U_K) against eta log K.
inline LabelSmoothingReport label_smoothing_demo(double eta, std::size_t k, std::size_t label = 0) {
  if (k < 2) throw Error(Errc::InvalidArgument, "label smoothing needs K >= 2");
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(Errc::LambdaOutOfRange, "eta " + std::to_string(eta));
  if (label >= k) throw Error(Errc::InvalidArgument, "label index out of range");
  auto y = mix(Distribution::point_mass(k, label), Distribution::uniform(k), eta);
  auto p = project(Generator::shannon(), Manifold::full(), y).point;
  LabelSmoothingReport r;
  r.eta = eta;
  r.k = k;
  r.entropy = shannon_entropy(p);
  r.bound = eta * std::log(static_cast<double>(k));
  r.ok = r.entropy >= r.bound - 1e-12 * std::max(1.0, r.bound);
  return r;
}

struct LabelSmoothingGrid {
  std::size_t cases = 0;
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_eta = 0.0;
  std::size_t worst_k = 0;
};

/// eta in {0.01, ..., 0.99} x K in {2, ..., 64}.
inline LabelSmoothingGrid label_smoothing_grid() {
  LabelSmoothingGrid g;
  for (int e = 1; e <= 99; ++e) {
    const double eta = e / 100.0;
    for (std::size_t k = 2; k <= 64; ++k) {
      const auto r = label_smoothing_demo(eta, k);
      ++g.cases;
      if (!r.ok) ++g.violations;
      if (r.entropy - r.bound < g.worst_margin) {
        g.worst_margin = r.entropy - r.bound;
        g.worst_eta = eta;
        g.worst_k = k;
      }
    }
  }
  return g;
}

}  // namespace erbp
