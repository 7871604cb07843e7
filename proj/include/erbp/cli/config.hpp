#pragma once

// Sectioned key-value configuration: INI text or the "config" object of a run
// manifest, overlaid with --set overrides, resolved into typed settings.

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "erbp/dynamics.hpp"
#include "erbp/experiments.hpp"
#include "erbp/theory.hpp"

namespace erbp::cli {

/// Configuration or input problem; the CLI maps it to exit status 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Entry {
  std::string value;
  std::string origin = "default";  // "default", "<file>:<line>", "--set", "manifest"
};

using Section = std::map<std::string, Entry>;

inline const std::vector<std::string>& section_order() {
  static const std::vector<std::string> order{"loop",     "generator", "manifold", "reservoir",
                                              "schedule", "experiment", "verify"};
  return order;
}

/// Every accepted key with its default value.
inline const std::map<std::string, std::map<std::string, std::string>>& schema() {
  static const std::map<std::string, std::map<std::string, std::string>> s{
      {"loop",
       {{"n", "100"},
        {"m", "10"},
        {"steps", "50"},
        {"trials", "10"},
        {"seed", "0"},
        {"delta", "1e-9"},
        {"eps_max", "1e-6"},
        {"max_iters", "20000"},
        {"inner_resamples", "0"},
        {"checkpoint_every", "10"},
        {"deterministic_echo", "false"},
        {"threads", "1"},
        {"p0", "uniform"},
        {"truth", "none"},
        {"support_threshold", "auto"}}},
      {"generator", {{"kind", "shannon"}, {"alpha", "2"}, {"beta", "1"}}},
      {"manifold", {{"kind", "full"}, {"indices", ""}, {"features", ""}, {"targets", ""}}},
      {"reservoir", {{"kind", "uniform"}, {"dist", ""}, {"k", "5"}, {"tau", "2"}, {"s_min", "auto"}}},
      {"schedule", {{"kind", "constant"}, {"lambda", "0"}, {"base", "0.1"}, {"values", ""}}},
      {"experiment",
       {{"name", ""},
        {"decode", "greedy"},
        {"decode_tau", "0.7"},
        {"top_k", "20"},
        {"alphabet", "128"},
        {"seq_len", "50"},
        {"prompts", "7"},
        {"sharpness", "1"},
        {"world_seed", "2024"},
        {"sequences_per_prompt", "1"},
        {"tau", "0.3"},
        {"grid_points", "201"},
        {"p0_center", "-5"},
        {"p0_width", "1"},
        {"basin_boundary", "1"},
        {"eta", "0.1"},
        {"classes", "10"},
        {"label", "0"}}},
      {"verify",
       {{"bounds", ""},
        {"preset", "delta-interior"},
        {"pairs", "10000"},
        {"pair_delta", "1e-3"},
        {"geometric_every", "10"},
        {"fwd_rev_instances", "20"},
        {"perturb_tv", "0.05"}}},
  };
  return s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

struct Override {
  std::string key;  // section.key
  std::string value;
  std::string source;  // flag text as given
};

class ConfigDoc {
 public:
  ConfigDoc() {
    for (const auto& [sec, keys] : schema()) {
      for (const auto& [k, v] : keys) sections_[sec][k] = Entry{v, "default"};
    }
  }

  static ConfigDoc from_ini(std::istream& in, const std::string& source) {
    ConfigDoc doc;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = source + ":" + std::to_string(lineno);
      const auto hash = line.find_first_of("#;");
      const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(where + ": malformed section header '" + t + "'");
        section = trim(t.substr(1, t.size() - 2));
        if (!schema().count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value, got '" + t + "'");
      const std::string key = trim(t.substr(0, eq));
      if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
      if (!schema().at(section).count(key)) {
        throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
      }
      doc.sections_[section][key] = Entry{trim(t.substr(eq + 1)), where};
    }
    return doc;
  }

  static ConfigDoc from_json(const nlohmann::json& j, const std::string& source) {
    ConfigDoc doc;
    if (!j.is_object()) throw ConfigError(source + ": config must be an object");
    for (const auto& [sec, keys] : j.items()) {
      if (!schema().count(sec)) throw ConfigError(source + ": unknown section [" + sec + "]");
      for (const auto& [k, v] : keys.items()) {
        if (!schema().at(sec).count(k)) throw ConfigError(source + ": unknown key '" + k + "' in [" + sec + "]");
        if (!v.is_string()) throw ConfigError(source + ": value of " + sec + "." + k + " must be a string");
        doc.sections_[sec][k] = Entry{v.get<std::string>(), "manifest"};
      }
    }
    return doc;
  }

  /// INI file, or a run manifest (JSON with a "config" object).
  static ConfigDoc load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
      }
      if (!j.contains("config")) throw ConfigError(path + ": manifest has no \"config\" object");
      return from_json(j["config"], path);
    }
    std::istringstream s(text);
    return from_ini(s, path);
  }

  /// `key` is "section.key" or a bare key, resolved to the first section (in
  /// loop, generator, ... order) that accepts it.
  std::string resolve_key(const std::string& key) const {
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      const std::string sec = key.substr(0, dot), k = key.substr(dot + 1);
      if (!schema().count(sec) || !schema().at(sec).count(k)) throw ConfigError("unknown key '" + key + "'");
      return key;
    }
    if (key == "generator") return "generator.kind";
    for (const auto& sec : section_order()) {
      if (schema().at(sec).count(key)) return sec + "." + key;
    }
    throw ConfigError("unknown key '" + key + "'");
  }

  void set(const std::string& assignment, const std::string& flag = "--set") {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError(flag + " expects KEY=VALUE, got '" + assignment + "'");
    const std::string full = resolve_key(trim(assignment.substr(0, eq)));
    const std::string value = trim(assignment.substr(eq + 1));
    const auto dot = full.find('.');
    sections_[full.substr(0, dot)][full.substr(dot + 1)] = Entry{value, "--set"};
    overrides_.push_back({full, value, flag + " " + assignment});
  }

  const Entry& entry(const std::string& sec, const std::string& key) const { return sections_.at(sec).at(key); }
  const std::string& get(const std::string& sec, const std::string& key) const { return entry(sec, key).value; }
  const std::vector<Override>& overrides() const { return overrides_; }

  nlohmann::json values_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [sec, keys] : sections_) {
      for (const auto& [k, e] : keys) j[sec][k] = e.value;
    }
    return j;
  }
  nlohmann::json provenance_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [sec, keys] : sections_) {
      for (const auto& [k, e] : keys) j[sec + "." + k] = e.origin;
    }
    return j;
  }

 private:
  std::map<std::string, Section> sections_;
  std::vector<Override> overrides_;
};

// ----------------------------------------------------------- typed access

namespace detail {

inline std::string where(const ConfigDoc& d, const std::string& sec, const std::string& key) {
  return sec + "." + key + " (" + d.entry(sec, key).origin + ")";
}

inline double parse_double(const std::string& s, const std::string& ctx) {
  const std::string t = trim(s);
  if (t.empty()) throw ConfigError(ctx + ": expected a number, got empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError(ctx + ": expected a finite number, got '" + t + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& ctx) {
  const std::string t = trim(s);
  if (t.empty() || t.front() == '-') throw ConfigError(ctx + ": expected a non-negative integer, got '" + t + "'");
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError(ctx + ": expected a non-negative integer, got '" + t + "'");
  }
  return v;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& ctx) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(part, ctx));
  return out;
}

}  // namespace detail

inline double get_double(const ConfigDoc& d, const std::string& sec, const std::string& key) {
  return detail::parse_double(d.get(sec, key), detail::where(d, sec, key));
}
inline std::uint64_t get_u64(const ConfigDoc& d, const std::string& sec, const std::string& key) {
  return detail::parse_u64(d.get(sec, key), detail::where(d, sec, key));
}
inline std::size_t get_size(const ConfigDoc& d, const std::string& sec, const std::string& key) {
  return static_cast<std::size_t>(get_u64(d, sec, key));
}
inline bool get_bool(const ConfigDoc& d, const std::string& sec, const std::string& key) {
  const auto& v = d.get(sec, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(detail::where(d, sec, key) + ": expected true/false, got '" + v + "'");
}
inline std::vector<double> get_list(const ConfigDoc& d, const std::string& sec, const std::string& key) {
  return detail::parse_list(d.get(sec, key), detail::where(d, sec, key));
}

// ------------------------------------------------------------- settings

struct ExperimentSettings {
  std::string name;
  Decode decode;
  std::size_t alphabet = 128;
  std::size_t seq_len = 50;
  std::size_t prompts = 7;
  double sharpness = 1.0;
  std::uint64_t world_seed = 2024;
  std::size_t sequences_per_prompt = 1;
  double tau = 0.3;
  std::size_t grid_points = 201;
  double p0_center = -5.0;
  double p0_width = 1.0;
  double basin_boundary = 1.0;
  double eta = 0.1;
  std::size_t classes = 10;
  std::size_t label = 0;
};

struct VerifySettings {
  std::vector<std::string> bounds;
  ConstantsPreset preset = ConstantsPreset::DeltaInterior;
  std::size_t pairs = 10000;
  double pair_delta = 1e-3;
  std::size_t geometric_every = 10;
  std::size_t fwd_rev_instances = 20;
  double perturb_tv = 0.05;
};

struct Settings {
  LoopConfig loop;
  ExperimentSettings experiment;
  VerifySettings verify;
};

inline const std::vector<std::string>& known_bounds() {
  static const std::vector<std::string> b{"collapse_step",    "geometric_rate", "floor",  "sampling_lemma",
                                          "continuity_lemma", "generalized",    "fwd_rev"};
  return b;
}

namespace detail {

inline Distribution parse_distribution(const ConfigDoc& d, const std::string& sec, const std::string& key,
                                       std::size_t n) {
  const std::string& v = d.get(sec, key);
  const std::string ctx = where(d, sec, key);
  try {
    if (v == "uniform") return Distribution::uniform(n);
    if (v.rfind("point:", 0) == 0) {
      const auto i = parse_u64(v.substr(6), ctx);
      if (i >= n) throw ConfigError(ctx + ": point index " + std::to_string(i) + " >= n");
      return Distribution::point_mass(n, i);
    }
    return new_distribution(parse_list(v, ctx));
  } catch (const Error& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

inline Eigen::MatrixXd parse_matrix(const ConfigDoc& d, const std::string& sec, const std::string& key) {
  const std::string ctx = where(d, sec, key);
  const auto rows = split(d.get(sec, key), ';');
  std::vector<std::vector<double>> vals;
  for (const auto& r : rows) {
    if (r.empty()) continue;
    vals.push_back(parse_list(r, ctx));
  }
  if (vals.empty()) throw ConfigError(ctx + ": matrix is empty");
  for (const auto& r : vals) {
    if (r.size() != vals[0].size()) throw ConfigError(ctx + ": ragged matrix rows");
  }
  Eigen::MatrixXd m(vals.size(), vals[0].size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    for (std::size_t j = 0; j < vals[i].size(); ++j) m(i, j) = vals[i][j];
  }
  return m;
}

}  // namespace detail

/// Typed, validated settings. Library validation errors surface as ConfigError
/// naming the offending value.
inline Settings resolve(const ConfigDoc& d) {
  Settings s;
  auto& c = s.loop;
  c.n = get_size(d, "loop", "n");
  c.m = get_size(d, "loop", "m");
  c.steps = get_size(d, "loop", "steps");
  c.trials = get_size(d, "loop", "trials");
  c.master_seed = get_u64(d, "loop", "seed");
  c.delta = get_double(d, "loop", "delta");
  c.eps_max = get_double(d, "loop", "eps_max");
  c.max_iters = static_cast<int>(get_size(d, "loop", "max_iters"));
  c.inner_resamples = get_size(d, "loop", "inner_resamples");
  c.checkpoint_every = get_size(d, "loop", "checkpoint_every");
  c.deterministic_echo = get_bool(d, "loop", "deterministic_echo");
  c.threads = get_size(d, "loop", "threads");
  if (c.n < 2) throw ConfigError(detail::where(d, "loop", "n") + ": n must be >= 2");
  if (d.get("loop", "p0") != "uniform") c.p0 = detail::parse_distribution(d, "loop", "p0", c.n);
  if (d.get("loop", "truth") != "none") c.truth = detail::parse_distribution(d, "loop", "truth", c.n);
  if (d.get("loop", "support_threshold") != "auto") c.support_threshold = get_double(d, "loop", "support_threshold");

  try {
    const auto& kind = d.get("generator", "kind");
    if (kind == "shannon") c.generator = Generator::shannon(c.delta);
    else if (kind == "burg") c.generator = Generator::burg(c.delta);
    else if (kind == "euclidean") c.generator = Generator::euclidean(c.delta);
    else if (kind == "tsallis") c.generator = Generator::tsallis(get_double(d, "generator", "alpha"), c.delta);
    else if (kind == "beta") c.generator = Generator::beta(get_double(d, "generator", "beta"), c.delta);
    else throw ConfigError(detail::where(d, "generator", "kind") + ": unknown generator '" + kind + "'");
  } catch (const Error& e) {
    throw ConfigError("[generator]: " + std::string(e.what()));
  }

  try {
    const auto& kind = d.get("manifold", "kind");
    if (kind == "full") {
      c.manifold = Manifold::full();
    } else if (kind == "mask") {
      std::vector<std::size_t> idx;
      for (double v : get_list(d, "manifold", "indices")) {
        if (v < 0 || v != std::floor(v)) {
          throw ConfigError(detail::where(d, "manifold", "indices") + ": indices must be non-negative integers");
        }
        idx.push_back(static_cast<std::size_t>(v));
      }
      c.manifold = Manifold::mask_indices(c.n, idx);
    } else if (kind == "moments") {
      const auto a = detail::parse_matrix(d, "manifold", "features");
      const auto t = get_list(d, "manifold", "targets");
      c.manifold = Manifold::moments(a, Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())));
    } else if (kind == "softmax") {
      c.manifold = Manifold::softmax(detail::parse_matrix(d, "manifold", "features"));
    } else {
      throw ConfigError(detail::where(d, "manifold", "kind") + ": unknown manifold '" + kind + "'");
    }
  } catch (const Error& e) {
    throw ConfigError("[manifold]: " + std::string(e.what()));
  }

  {
    const auto& kind = d.get("reservoir", "kind");
    if (kind == "uniform") c.reservoir.kind = UniformReservoir{};
    else if (kind == "fixed") c.reservoir.kind = FixedDataReservoir{detail::parse_distribution(d, "reservoir", "dist", c.n)};
    else if (kind == "snapshot") c.reservoir.kind = SnapshotReservoir{get_size(d, "reservoir", "k")};
    else if (kind == "tempered") c.reservoir.kind = TemperedReservoir{get_double(d, "reservoir", "tau")};
    else throw ConfigError(detail::where(d, "reservoir", "kind") + ": unknown reservoir '" + kind + "'");
    if (d.get("reservoir", "s_min") != "auto") c.reservoir.s_min_declared = get_double(d, "reservoir", "s_min");
  }

  try {
    const auto& kind = d.get("schedule", "kind");
    if (kind == "constant") c.schedule = LambdaSchedule::constant(get_double(d, "schedule", "lambda"));
    else if (kind == "harmonic") c.schedule = LambdaSchedule::harmonic(get_double(d, "schedule", "base"));
    else if (kind == "explicit") c.schedule = LambdaSchedule::explicit_values(get_list(d, "schedule", "values"));
    else throw ConfigError(detail::where(d, "schedule", "kind") + ": unknown schedule '" + kind + "'");
  } catch (const Error& e) {
    throw ConfigError("[schedule]: " + std::string(e.what()));
  }

  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError("[loop]: " + std::string(e.what()));
  }

  auto& x = s.experiment;
  x.name = d.get("experiment", "name");
  const auto& decode = d.get("experiment", "decode");
  try {
    if (decode == "greedy") x.decode = Decode::greedy();
    else if (decode == "temperature")
      x.decode = Decode::temperature(get_double(d, "experiment", "decode_tau"), get_size(d, "experiment", "top_k"));
    else throw ConfigError(detail::where(d, "experiment", "decode") + ": unknown decode '" + decode + "'");
  } catch (const Error& e) {
    throw ConfigError("[experiment]: " + std::string(e.what()));
  }
  x.alphabet = get_size(d, "experiment", "alphabet");
  x.seq_len = get_size(d, "experiment", "seq_len");
  x.prompts = get_size(d, "experiment", "prompts");
  x.sharpness = get_double(d, "experiment", "sharpness");
  x.world_seed = get_u64(d, "experiment", "world_seed");
  x.sequences_per_prompt = get_size(d, "experiment", "sequences_per_prompt");
  x.tau = get_double(d, "experiment", "tau");
  x.grid_points = get_size(d, "experiment", "grid_points");
  x.p0_center = get_double(d, "experiment", "p0_center");
  x.p0_width = get_double(d, "experiment", "p0_width");
  x.basin_boundary = get_double(d, "experiment", "basin_boundary");
  x.eta = get_double(d, "experiment", "eta");
  x.classes = get_size(d, "experiment", "classes");
  x.label = get_size(d, "experiment", "label");

  auto& v = s.verify;
  for (const auto& b : split(d.get("verify", "bounds"), ',')) {
    if (b.empty()) continue;
    if (std::find(known_bounds().begin(), known_bounds().end(), b) == known_bounds().end()) {
      throw ConfigError(detail::where(d, "verify", "bounds") + ": unknown bound '" + b + "'");
    }
    v.bounds.push_back(b);
  }
  const auto& preset = d.get("verify", "preset");
  if (preset == "delta-interior") v.preset = ConstantsPreset::DeltaInterior;
  else if (preset == "paper") v.preset = ConstantsPreset::Paper;
  else throw ConfigError(detail::where(d, "verify", "preset") + ": expected delta-interior or paper, got '" + preset + "'");
  v.pairs = get_size(d, "verify", "pairs");
  v.pair_delta = get_double(d, "verify", "pair_delta");
  v.geometric_every = get_size(d, "verify", "geometric_every");
  v.fwd_rev_instances = get_size(d, "verify", "fwd_rev_instances");
  v.perturb_tv = get_double(d, "verify", "perturb_tv");
  return s;
}

}  // namespace erbp::cli
