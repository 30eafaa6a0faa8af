#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "brlab/errors.hpp"

namespace brlab {

// One tested instance of a two-sided estimate: lhs/rhs with the ratio, or a skip.
struct RatioRow {
  std::uint64_t instance_id = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool skipped = false; // 0/0 instances are skipped, never reported as NaN
};

struct RatioSummary {
  double min = std::numeric_limits<double>::infinity();
  double max = 0.0;
  double spread = 0.0; // max/min
  std::size_t used = 0;
  std::size_t skipped = 0;
};

struct RatioReport {
  std::string experiment;
  double p = 0.0;
  double q = 0.0;
  std::string regime;
  std::uint64_t seed = 0;
  std::vector<RatioRow> rows;

  void add(std::uint64_t id, double lhs, double rhs) {
    RatioRow row;
    row.instance_id = id;
    row.lhs = lhs;
    row.rhs = rhs;
    if (rhs == 0.0 && lhs == 0.0) {
      row.skipped = true;
    } else {
      row.ratio = lhs / rhs;
    }
    rows.push_back(row);
  }

  RatioSummary summary() const {
    RatioSummary s;
    for (const RatioRow& r : rows) {
      if (r.skipped) {
        ++s.skipped;
        continue;
      }
      ++s.used;
      s.min = std::min(s.min, r.ratio);
      s.max = std::max(s.max, r.ratio);
    }
    if (s.used == 0) {
      s.min = 0.0;
      s.max = 0.0;
      s.spread = 0.0;
    } else {
      s.spread = s.min > 0.0 ? s.max / s.min : std::numeric_limits<double>::infinity();
    }
    return s;
  }
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// CSV body is byte-identical for identical (config, seed); the timestamp lives in a
// leading comment so it never perturbs comparisons.
inline std::string to_csv(const RatioReport& rep, const std::string& timestamp_comment = "") {
  std::string out;
  if (!timestamp_comment.empty()) out += "# " + timestamp_comment + "\n";
  out += "instance_id,lhs,rhs,ratio\n";
  for (const RatioRow& r : rep.rows) {
    if (r.skipped) continue;
    out += std::to_string(r.instance_id) + "," + format_double(r.lhs) + "," +
           format_double(r.rhs) + "," + format_double(r.ratio) + "\n";
  }
  return out;
}

inline nlohmann::json summary_json(const RatioReport& rep) {
  RatioSummary s = rep.summary();
  nlohmann::json j;
  j["experiment"] = rep.experiment;
  j["min"] = s.min;
  j["max"] = s.max;
  j["spread"] = s.spread;
  j["used"] = s.used;
  j["skipped"] = s.skipped;
  j["seed"] = rep.seed;
  j["p"] = rep.p;
  j["q"] = rep.q;
  j["regime"] = rep.regime;
  return j;
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::config_invalid, "cannot open output file: " + path);
  out << body;
}

} // namespace brlab
