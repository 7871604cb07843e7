#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "erbp/cli/config.hpp"
#include "erbp/theory.hpp"

namespace erbp::cli {

/// Non-finite values become strings so the document stays valid JSON.
inline nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["bound_id"] = r.bound_id;
  j["preset"] = r.preset;
  j["pass"] = r.pass;
  j["notes"] = r.notes;
  j["constants"] = {{"sigma_f", number(r.constants.sigma_f)},
                    {"l_f", number(r.constants.l_f)},
                    {"delta", number(r.constants.delta)},
                    {"norm_note", r.constants.norm_note}};
  std::size_t asserted = 0, failed = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    if (!row.descriptive) {
      ++asserted;
      if (!row.ok) ++failed;
    }
    rows.push_back({{"label", row.label},
                    {"lhs", number(row.lhs)},
                    {"rhs", number(row.rhs)},
                    {"relation", row.relation},
                    {"margin", number(row.margin)},
                    {"stderr", number(row.stderr_)},
                    {"ok", row.ok},
                    {"descriptive", row.descriptive},
                    {"violations", row.violations},
                    {"samples", row.samples}});
  }
  j["asserted_rows"] = asserted;
  j["failed_rows"] = failed;
  j["rows"] = std::move(rows);
  return j;
}

inline nlohmann::json to_json(const std::vector<BoundReport>& reports) {
  nlohmann::json j;
  bool pass = true;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    pass = pass && r.pass;
    j["reports"].push_back(to_json(r));
  }
  j["pass"] = pass;
  return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

}  // namespace erbp::cli
