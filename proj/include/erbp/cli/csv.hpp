#pragma once

// CSV emission with round-trip float formatting, and the matching reader used
// to load trajectories back for verification and plotting.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "erbp/cli/config.hpp"
#include "erbp/dynamics.hpp"

namespace erbp::cli {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError(path + ": cannot open for writing");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // source line of each row

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
  int require(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw ConfigError("MissingColumn: " + source + " has no column '" + name + "'");
    return c;
  }
  std::string at_loc(std::size_t r) const { return source + ":" + std::to_string(lines[r]); }
  double number(std::size_t r, int c) const {
    return detail::parse_double(rows[r][c], at_loc(r) + " column '" + header[c] + "'");
  }
  std::size_t count(std::size_t r, int c) const {
    return static_cast<std::size_t>(detail::parse_u64(rows[r][c], at_loc(r) + " column '" + header[c] + "'"));
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  CsvTable t;
  t.source = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw ConfigError("NoData: " + path + " is empty");
  return t;
}

// ----------------------------------------------------------- trajectory

inline const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> c{"trial",        "step", "lambda", "entropy_raw", "entropy_shannon",
                                          "support_size", "eps",  "reservoir_entropy", "kl_to_truth"};
  return c;
}
inline const std::vector<std::string>& aux_columns() {
  static const std::vector<std::string> c{"trial",      "step",      "empirical_entropy_raw", "empirical_support",
                                          "iterations", "converged"};
  return c;
}
inline const std::vector<std::string>& trial_columns() {
  static const std::vector<std::string> c{"trial", "initial_entropy_raw", "initial_entropy_shannon",
                                          "initial_support", "error"};
  return c;
}
inline const std::vector<std::string>& checkpoint_columns() {
  static const std::vector<std::string> c{"trial", "step", "state_entropy_raw", "mean_raw", "stderr", "resamples"};
  return c;
}

inline std::string sanitize(std::string s) {
  for (auto& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

/// trajectory.csv, trajectory_aux.csv, trials.csv, checkpoints.csv under `dir`.
inline std::vector<std::string> write_trajectory(const Trajectory& traj, const std::string& dir) {
  CsvWriter main(dir + "/trajectory.csv", trajectory_columns());
  CsvWriter aux(dir + "/trajectory_aux.csv", aux_columns());
  CsvWriter trials(dir + "/trials.csv", trial_columns());
  CsvWriter cps(dir + "/checkpoints.csv", checkpoint_columns());
  for (const auto& tr : traj.trials) {
    const std::string id = std::to_string(tr.trial);
    trials.row({id, fmt17(tr.initial_entropy_raw), fmt17(tr.initial_entropy_shannon), std::to_string(tr.initial_support),
                tr.error ? sanitize(*tr.error) : ""});
    for (const auto& s : tr.steps) {
      main.row({id, std::to_string(s.step), fmt17(s.lambda), fmt17(s.entropy_raw), fmt17(s.entropy_shannon),
                std::to_string(s.support_size), fmt17(s.eps), fmt17(s.reservoir_entropy_raw),
                s.kl_to_truth ? fmt17(*s.kl_to_truth) : ""});
      aux.row({id, std::to_string(s.step), fmt17(s.empirical_entropy_raw), std::to_string(s.empirical_support),
               std::to_string(s.iterations), s.converged ? "1" : "0"});
    }
    for (const auto& c : tr.checkpoints) {
      cps.row({id, std::to_string(c.step), fmt17(c.state_entropy_raw), fmt17(c.mean_raw), fmt17(c.stderr_),
               std::to_string(c.resamples)});
    }
  }
  return {"trajectory.csv", "trajectory_aux.csv", "trials.csv", "checkpoints.csv"};
}

namespace detail {

inline void check_header(const CsvTable& t, const std::vector<std::string>& want) {
  if (t.header != want) {
    std::string w;
    for (const auto& c : want) w += (w.empty() ? "" : ",") + c;
    throw ConfigError(t.source + ":1: header must be exactly " + w);
  }
}

}  // namespace detail

/// Inverse of write_trajectory. Final states are not stored, so they are absent.
inline Trajectory read_trajectory(const std::string& dir) {
  const auto trials = read_csv(dir + "/trials.csv");
  const auto main = read_csv(dir + "/trajectory.csv");
  const auto aux = read_csv(dir + "/trajectory_aux.csv");
  const auto cps = read_csv(dir + "/checkpoints.csv");
  detail::check_header(trials, trial_columns());
  detail::check_header(main, trajectory_columns());
  detail::check_header(aux, aux_columns());
  detail::check_header(cps, checkpoint_columns());
  if (main.rows.size() != aux.rows.size()) {
    throw ConfigError(aux.source + ": " + std::to_string(aux.rows.size()) + " rows, trajectory.csv has " +
                      std::to_string(main.rows.size()));
  }
  Trajectory traj;
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t r = 0; r < trials.rows.size(); ++r) {
    TrialRecord rec;
    rec.trial = trials.count(r, 0);
    rec.initial_entropy_raw = trials.number(r, 1);
    rec.initial_entropy_shannon = trials.number(r, 2);
    rec.initial_support = trials.count(r, 3);
    if (!trials.rows[r][4].empty()) rec.error = trials.rows[r][4];
    if (slot.count(rec.trial)) throw ConfigError(trials.at_loc(r) + ": duplicate trial " + std::to_string(rec.trial));
    slot[rec.trial] = traj.trials.size();
    traj.trials.push_back(std::move(rec));
  }
  auto trial_of = [&](const CsvTable& t, std::size_t r) -> TrialRecord& {
    const auto id = t.count(r, 0);
    auto it = slot.find(id);
    if (it == slot.end()) throw ConfigError(t.at_loc(r) + ": trial " + std::to_string(id) + " not in trials.csv");
    return traj.trials[it->second];
  };
  for (std::size_t r = 0; r < main.rows.size(); ++r) {
    StepRecord s;
    s.step = main.count(r, 1);
    s.lambda = main.number(r, 2);
    s.entropy_raw = main.number(r, 3);
    s.entropy_shannon = main.number(r, 4);
    s.support_size = main.count(r, 5);
    s.eps = main.number(r, 6);
    s.reservoir_entropy_raw = main.number(r, 7);
    if (!main.rows[r][8].empty()) s.kl_to_truth = main.number(r, 8);
    if (aux.rows[r][0] != main.rows[r][0] || aux.rows[r][1] != main.rows[r][1]) {
      throw ConfigError(aux.at_loc(r) + ": (trial, step) does not match trajectory.csv");
    }
    s.empirical_entropy_raw = aux.number(r, 2);
    s.empirical_support = aux.count(r, 3);
    s.iterations = static_cast<int>(aux.count(r, 4));
    s.converged = aux.rows[r][5] == "1";
    auto& tr = trial_of(main, r);
    if (s.step != tr.steps.size() + 1) {
      throw ConfigError(main.at_loc(r) + ": step " + std::to_string(s.step) + " out of order");
    }
    tr.steps.push_back(s);
  }
  for (std::size_t r = 0; r < cps.rows.size(); ++r) {
    Checkpoint c;
    c.step = cps.count(r, 1);
    c.state_entropy_raw = cps.number(r, 2);
    c.mean_raw = cps.number(r, 3);
    c.stderr_ = cps.number(r, 4);
    c.resamples = cps.count(r, 5);
    trial_of(cps, r).checkpoints.push_back(c);
  }
  return traj;
}

}  // namespace erbp::cli
