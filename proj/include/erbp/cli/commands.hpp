#pragma once

// Subcommands. Each returns the process exit status: 0 success, 1 configuration
// or input error, 2 bound-verification failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "erbp/cli/config.hpp"
#include "erbp/cli/csv.hpp"
#include "erbp/cli/report.hpp"
#include "erbp/cli/svg.hpp"
#include "erbp/experiments.hpp"
#include "erbp/theory.hpp"

namespace erbp::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr std::size_t kMaxGridCells = 10000;

enum Exit : int { kOk = 0, kConfigError = 1, kBoundFailure = 2 };

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> threads;
  std::vector<std::string> bounds;  // verify: overrides [verify] bounds
  std::vector<std::string> grid;    // sweep: KEY=V1,V2,...
  std::string target;               // verify: run directory or config; experiment: name
  std::vector<std::string> inputs;  // plot
  std::string x = "step";
  std::string y = "entropy_shannon";
};

inline ConfigDoc load_doc(const Options& o, const std::string& config_path) {
  ConfigDoc doc = config_path.empty() ? ConfigDoc{} : ConfigDoc::load(config_path);
  for (const auto& s : o.sets) doc.set(s);
  if (o.seed) doc.set("loop.seed=" + std::to_string(*o.seed), "--seed");
  if (o.trials) doc.set("loop.trials=" + std::to_string(*o.trials), "--trials");
  if (o.threads) doc.set("loop.threads=" + std::to_string(*o.threads), "--threads");
  return doc;
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError(dir + ": cannot create directory: " + ec.message());
}

/// Written before any computation; a manifest plus its outputs suffices to
/// re-run (pass it back as --config).
inline void write_manifest(const ConfigDoc& doc, const std::string& command, const std::string& dir,
                           const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["tool"] = "erbp";
  j["version"] = kVersion;
  j["command"] = command;
  j["master_seed"] = get_u64(doc, "loop", "seed");
  j["started_at"] = utc_now();
  j["config"] = doc.values_json();
  j["provenance"] = doc.provenance_json();
  j["overrides"] = nlohmann::json::array();
  for (const auto& ov : doc.overrides()) {
    j["overrides"].push_back({{"key", ov.key}, {"value", ov.value}, {"source", ov.source}});
  }
  j["outputs"] = outputs;
  write_json(j, dir + "/manifest.json");
}

inline Generator with_delta(const Generator& g, double delta) {
  switch (g.kind()) {
    case GeneratorKind::Shannon: return Generator::shannon(delta);
    case GeneratorKind::Burg: return Generator::burg(delta);
    case GeneratorKind::SquaredEuclidean: return Generator::euclidean(delta);
    case GeneratorKind::TsallisAlpha: return Generator::tsallis(g.parameter(), delta);
    case GeneratorKind::BetaDiv: return Generator::beta(g.parameter(), delta);
  }
  return g;
}

/// Runs the requested bound checks. Trajectory-free checks (continuity_lemma,
/// fwd_rev) use the configured generator and manifold.
inline std::vector<BoundReport> run_bounds(const Settings& s, const std::vector<std::string>& ids,
                                           const Trajectory* traj) {
  std::vector<BoundReport> out;
  const auto ctx = BoundContext::from(s.loop, s.verify.preset);
  for (const auto& id : ids) {
    auto need = [&]() -> const Trajectory& {
      if (!traj) throw ConfigError(id + ": needs a trajectory");
      return *traj;
    };
    try {
      if (id == "collapse_step") out.push_back(check_collapse_step(need(), ctx));
      else if (id == "geometric_rate") out.push_back(check_geometric_rate(need(), ctx, s.verify.geometric_every));
      else if (id == "floor") out.push_back(check_floor(need(), ctx));
      else if (id == "sampling_lemma") out.push_back(check_sampling_lemma(need(), ctx));
      else if (id == "generalized") out.push_back(check_generalized_bounds(need(), ctx));
      else if (id == "continuity_lemma") {
        RandomSource rng(s.loop.master_seed, 0xC0171);
        const auto pairs = random_interior_pairs(s.verify.pairs, s.verify.pair_delta, rng);
        out.push_back(check_continuity_lemma(with_delta(s.loop.generator, s.verify.pair_delta), pairs));
      } else if (id == "fwd_rev") {
        RandomSource rng(s.loop.master_seed, 0xF0D);
        std::vector<Distribution> real, pert;
        for (std::size_t k = 0; k < s.verify.fwd_rev_instances; ++k) {
          real.push_back(sample_realizable(s.loop.manifold, s.loop.n, rng));
          pert.push_back(perturb(real.back(), s.verify.perturb_tv, rng));
        }
        out.push_back(check_fwd_rev_coincidence(s.loop.manifold, real, pert, s.loop.projection_options()));
      } else {
        throw ConfigError("unknown bound '" + id + "'");
      }
    } catch (const Error& e) {
      throw ConfigError(id + ": " + e.what());
    }
  }
  return out;
}

inline void print_reports(const std::vector<BoundReport>& reports) {
  for (const auto& r : reports) {
    std::size_t failed = 0, asserted = 0;
    for (const auto& row : r.rows) {
      if (row.descriptive) continue;
      ++asserted;
      if (!row.ok) ++failed;
    }
    std::cout << r.bound_id << ": " << (r.pass ? "pass" : "FAIL") << " (" << failed << "/" << asserted
              << " asserted rows failed)\n";
  }
}

inline int finish_reports(const std::vector<BoundReport>& reports, const std::string& path) {
  write_json(to_json(reports), path);
  print_reports(reports);
  for (const auto& r : reports) {
    if (!r.pass) return kBoundFailure;
  }
  return kOk;
}

inline int cmd_run(const Options& o) {
  const auto doc = load_doc(o, o.config);
  const auto s = resolve(doc);
  ensure_dir(o.out);
  std::vector<std::string> outputs{"trajectory.csv", "trajectory_aux.csv", "trials.csv", "checkpoints.csv"};
  if (!s.verify.bounds.empty()) outputs.push_back("report.json");
  write_manifest(doc, "run", o.out, outputs);
  const auto traj = run_loop(s.loop);
  write_trajectory(traj, o.out);
  std::cout << "wrote " << o.out << "/trajectory.csv (" << traj.completed_trials() << "/" << traj.trials.size()
            << " trials completed)\n";
  if (s.verify.bounds.empty()) return kOk;
  return finish_reports(run_bounds(s, s.verify.bounds, &traj), o.out + "/report.json");
}

/// Target is a run directory (manifest.json plus CSVs) or a config to run.
inline int cmd_verify(const Options& o) {
  const bool is_dir = !o.target.empty() && std::filesystem::is_directory(o.target);
  const std::string cfg = is_dir ? o.target + "/manifest.json" : (o.target.empty() ? o.config : o.target);
  const auto doc = load_doc(o, cfg);
  const auto s = resolve(doc);
  const auto ids = o.bounds.empty() ? s.verify.bounds : o.bounds;
  if (ids.empty()) throw ConfigError("verify: no bounds requested (use --bound or [verify] bounds)");
  for (const auto& id : ids) {
    if (std::find(known_bounds().begin(), known_bounds().end(), id) == known_bounds().end()) {
      throw ConfigError("verify: unknown bound '" + id + "'");
    }
  }
  ensure_dir(o.out);
  const Trajectory traj = is_dir ? read_trajectory(o.target) : run_loop(s.loop);
  return finish_reports(run_bounds(s, ids, &traj), o.out + "/report.json");
}

// ------------------------------------------------------------ experiments

inline double constant_lambda(const Settings& s) {
  if (s.loop.schedule.kind() != LambdaSchedule::Kind::Constant) {
    throw ConfigError("experiments need schedule.kind = constant");
  }
  return s.loop.schedule.at(0);
}

struct MetricTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<double>> finals;  // per trial, final-round metric values
  std::vector<std::string> final_names;
  std::vector<BoundReport> reports;
};

inline MetricTable run_experiment(const std::string& name, const Settings& s) {
  MetricTable t;
  const double lambda = constant_lambda(s);
  const auto& x = s.experiment;
  try {
    if (name == "bigram") {
      const auto world = BigramWorld::make(x.alphabet, x.seq_len, x.prompts, x.world_seed, x.sharpness);
      BigramConfig c;
      c.lambda = lambda;
      c.rounds = s.loop.steps;
      c.trials = s.loop.trials;
      c.seed = s.loop.master_seed;
      c.delta = s.loop.delta;
      c.sequences_per_prompt = x.sequences_per_prompt;
      c.threads = s.loop.threads;
      const auto rows = run_bigram_collapse(world, x.decode, c);
      t.header = {"trial", "step", "lambda", "decode", "kl_to_truth", "unique_bigram_ratio", "mean_row_entropy"};
      t.final_names = {"kl_to_truth", "unique_bigram_ratio", "mean_row_entropy"};
      t.finals.resize(c.trials);
      for (const auto& r : rows) {
        t.rows.push_back({std::to_string(r.trial), std::to_string(r.round), fmt17(lambda), x.decode.name(),
                          fmt17(r.kl_to_truth), fmt17(r.unique_bigram_ratio), fmt17(r.mean_row_entropy)});
        if (r.round == c.rounds) t.finals[r.trial] = {r.kl_to_truth, r.unique_bigram_ratio, r.mean_row_entropy};
      }
    } else if (name == "double-well") {
      const auto world = DoubleWellWorld::make(x.grid_points, x.tau, x.p0_center, x.p0_width, x.basin_boundary);
      DoubleWellConfig c;
      c.lambda = lambda;
      c.m = s.loop.m;
      c.rounds = s.loop.steps;
      c.trials = s.loop.trials;
      c.seed = s.loop.master_seed;
      c.delta = s.loop.delta;
      c.threads = s.loop.threads;
      const auto res = run_double_well(world, c);
      t.header = trajectory_columns();
      for (const char* extra : {"global_basin_mass", "local_basin_mass", "argmax_position"}) t.header.push_back(extra);
      t.final_names = {"entropy_shannon", "global_basin_mass"};
      t.finals.resize(c.trials);
      std::size_t k = 0;
      for (const auto& tr : res.trajectory.trials) {
        for (const auto& st : tr.steps) {
          const auto& r = res.rows[k++];
          t.rows.push_back({std::to_string(tr.trial), std::to_string(st.step), fmt17(st.lambda), fmt17(st.entropy_raw),
                            fmt17(st.entropy_shannon), std::to_string(st.support_size), fmt17(st.eps),
                            fmt17(st.reservoir_entropy_raw), "", fmt17(r.global_basin_mass),
                            fmt17(r.local_basin_mass), fmt17(r.argmax_position)});
          if (st.step == c.rounds) t.finals[tr.trial] = {st.entropy_shannon, r.global_basin_mass};
        }
      }
      t.reports.push_back(check_floor(res.trajectory, BoundContext::from(res.loop, s.verify.preset)));
    } else if (name == "label-smoothing") {
      const auto r = label_smoothing_demo(x.eta, x.classes, x.label);
      t.header = {"eta", "classes", "entropy", "bound", "ok"};
      t.rows.push_back({fmt17(r.eta), std::to_string(r.k), fmt17(r.entropy), fmt17(r.bound), r.ok ? "1" : "0"});
      t.final_names = {"entropy", "bound"};
      t.finals.push_back({r.entropy, r.bound});
      auto rep = BoundReport{};
      rep.bound_id = "label_smoothing";
      rep.preset = to_string(s.verify.preset);
      BoundRow row;
      row.label = "H(smoothed) >= eta log K";
      row.lhs = r.entropy;
      row.rhs = r.bound;
      row.relation = ">=";
      row.margin = r.entropy - r.bound;
      row.ok = r.ok;
      rep.add(row);
      t.reports.push_back(rep);
    } else {
      throw ConfigError("unknown experiment '" + name + "' (expected bigram, double-well or label-smoothing)");
    }
  } catch (const Error& e) {
    throw ConfigError(name + ": " + e.what());
  }
  return t;
}

inline std::string experiment_name(const Options& o, const ConfigDoc& doc) {
  const std::string name = o.target.empty() ? doc.get("experiment", "name") : o.target;
  if (name.empty()) throw ConfigError("experiment: no name given");
  return name;
}

inline int cmd_experiment(const Options& o) {
  auto doc = load_doc(o, o.config);
  const std::string name = experiment_name(o, doc);
  doc.set("experiment.name=" + name, "experiment");
  const auto s = resolve(doc);
  if (name != "bigram" && name != "double-well" && name != "label-smoothing") {
    throw ConfigError("unknown experiment '" + name + "' (expected bigram, double-well or label-smoothing)");
  }
  ensure_dir(o.out);
  const bool has_report = name != "bigram";
  std::vector<std::string> outputs{"metrics.csv"};
  if (has_report) outputs.push_back("report.json");
  write_manifest(doc, "experiment", o.out, outputs);
  const auto t = run_experiment(name, s);
  CsvWriter w(o.out + "/metrics.csv", t.header);
  for (const auto& r : t.rows) w.row(r);
  std::cout << "wrote " << o.out << "/metrics.csv (" << t.rows.size() << " rows)\n";
  if (!has_report) return kOk;
  return finish_reports(t.reports, o.out + "/report.json");
}

// ------------------------------------------------------------------ sweep

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

inline std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs, const ConfigDoc& doc) {
  if (specs.empty()) throw ConfigError("sweep: empty grid (give at least one --grid KEY=V1,V2,...)");
  std::vector<GridAxis> axes;
  double cells = 1.0;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep: --grid expects KEY=V1,V2,..., got '" + spec + "'");
    GridAxis a;
    a.key = doc.resolve_key(trim(spec.substr(0, eq)));
    for (const auto& v : split(spec.substr(eq + 1), ',')) {
      if (!v.empty()) a.values.push_back(v);
    }
    if (a.values.empty()) throw ConfigError("sweep: empty grid axis '" + a.key + "'");
    cells *= static_cast<double>(a.values.size());
    axes.push_back(std::move(a));
  }
  if (cells > static_cast<double>(kMaxGridCells)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.0f", cells);
    throw ConfigError(std::string("GridTooLarge: ") + buf + " cells exceeds " + std::to_string(kMaxGridCells));
  }
  return axes;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

/// One summary row per cell. Loop runs: per-trial means over the final 10% of
/// steps, then mean and standard deviation across trials. Experiments: the
/// final round per trial.
inline int cmd_sweep(const Options& o) {
  const auto base = load_doc(o, o.config);
  resolve(base);
  const auto axes = parse_grid(o.grid, base);
  const std::string exp = o.target.empty() ? base.get("experiment", "name") : o.target;
  ensure_dir(o.out);
  write_manifest(base, "sweep", o.out, {"summary.csv"});
  std::vector<std::size_t> idx(axes.size(), 0);
  std::optional<CsvWriter> w;
  std::size_t cell = 0;
  while (true) {
    ConfigDoc doc = base;
    for (std::size_t a = 0; a < axes.size(); ++a) doc.set(axes[a].key + "=" + axes[a].values[idx[a]], "--grid");
    const auto s = resolve(doc);
    std::vector<std::string> names;
    std::vector<std::vector<double>> per_trial;
    if (exp.empty()) {
      names = {"entropy_raw", "entropy_shannon", "support_size", "eps"};
      const auto traj = run_loop(s.loop);
      const std::size_t steps = s.loop.steps;
      const std::size_t win = std::max<std::size_t>(1, (steps + 9) / 10);
      for (const auto& tr : traj.trials) {
        if (tr.error || tr.steps.size() < steps || steps == 0) continue;
        std::vector<double> acc(4, 0.0);
        for (std::size_t t = steps - win; t < steps; ++t) {
          const auto& st = tr.steps[t];
          acc[0] += st.entropy_raw;
          acc[1] += st.entropy_shannon;
          acc[2] += static_cast<double>(st.support_size);
          acc[3] += st.eps;
        }
        for (auto& v : acc) v /= static_cast<double>(win);
        per_trial.push_back(acc);
      }
    } else {
      const auto t = run_experiment(exp, s);
      names = t.final_names;
      per_trial = t.finals;
    }
    if (!w) {
      std::vector<std::string> header{"cell"};
      for (const auto& a : axes) header.push_back(a.key);
      header.push_back("trials");
      for (const auto& n : names) {
        header.push_back(n + "_mean");
        header.push_back(n + "_std");
      }
      w.emplace(o.out + "/summary.csv", header);
    }
    std::vector<std::string> row{std::to_string(cell)};
    for (std::size_t a = 0; a < axes.size(); ++a) row.push_back(sanitize(axes[a].values[idx[a]]));
    row.push_back(std::to_string(per_trial.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<double> col;
      for (const auto& p : per_trial) col.push_back(p[k]);
      const auto ms = mean_std(col);
      row.push_back(fmt17(ms.mean));
      row.push_back(fmt17(ms.std));
    }
    w->row(row);
    ++cell;
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
      if (a == 0) {
        std::cout << "wrote " << o.out << "/summary.csv (" << cell << " cells)\n";
        return kOk;
      }
    }
  }
}

inline int cmd_plot(const Options& o) {
  const std::string out = o.out.size() > 4 && o.out.substr(o.out.size() - 4) == ".svg" ? o.out : o.out + "/plot.svg";
  if (out != o.out) ensure_dir(o.out);
  plot(o.inputs, o.x, o.y, out);
  std::cout << "wrote " << out << "\n";
  return kOk;
}

/// Wraps a subcommand: configuration and library errors print a diagnostic and
/// map to exit 1.
template <class Fn>
int guarded(Fn fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kConfigError;
}

}  // namespace erbp::cli
