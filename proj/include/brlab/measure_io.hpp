#pragma once

#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "brlab/integrator.hpp"
#include "brlab/random_measure.hpp"

namespace brlab {

// JSONL: one line per path, {"events": [[t, mark], ...]}
inline std::string stream_to_jsonl(const MarkedEventStream& stream) {
  std::ostringstream out;
  for (const auto& path : stream.paths) {
    nlohmann::json j;
    j["events"] = nlohmann::json::array();
    for (const Event& e : path) j["events"].push_back({e.time, e.mark});
    out << j.dump() << "\n";
  }
  return out.str();
}

// JSONL: one line per path, {"cells": [[t0, t1, mark, mass], ...]}
inline std::string compensator_to_jsonl(const MarkedEventStream& stream,
                                        const CompensatorDensity& comp) {
  std::ostringstream out;
  for (std::size_t path = 0; path < stream.n_paths(); ++path) {
    nlohmann::json j;
    j["cells"] = nlohmann::json::array();
    comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double mass) {
      if (mass != 0.0)
        j["cells"].push_back(
            {comp.grid.bounds[cell], comp.grid.bounds[cell + 1], mark, mass});
    });
    out << j.dump() << "\n";
  }
  return out.str();
}

// Bundle configs:
//   {"grid_n": n, "T": horizon, "H_dim": d, "S": {"weights": [...]},
//    "continuous": {"scales": [...]},
//    "qlc_jumps": {"rate": r, "marks": [[...], ...]},
//    "accessible": {"times": [cell, ...], "dists": [[...], ...]}}
// Returns the config and the point weights of S (the integrand target space).
inline std::pair<BundleConfig, FiniteMeasureSpace> bundle_config_from_json(const nlohmann::json& j) {
  BundleConfig cfg;
  cfg.grid_n = j.at("grid_n").get<std::size_t>();
  cfg.horizon = j.at("T").get<double>();
  cfg.h_dim = j.at("H_dim").get<std::size_t>();
  FiniteMeasureSpace target(j.at("S").at("weights").get<std::vector<double>>());
  if (j.contains("continuous"))
    cfg.cont_scales = j.at("continuous").at("scales").get<std::vector<double>>();
  if (j.contains("qlc_jumps")) {
    cfg.jump_rate = j.at("qlc_jumps").at("rate").get<double>();
    for (const auto& m : j.at("qlc_jumps").at("marks"))
      cfg.jump_marks.push_back(m.get<std::vector<double>>());
  }
  if (j.contains("accessible")) {
    cfg.accessible_cells = j.at("accessible").at("times").get<std::vector<std::size_t>>();
    for (const auto& d : j.at("accessible").at("dists"))
      cfg.accessible_sizes.push_back(d.get<std::vector<double>>());
  }
  cfg.validate();
  return {std::move(cfg), std::move(target)};
}

inline nlohmann::json bundle_config_to_json(const BundleConfig& cfg,
                                            const FiniteMeasureSpace& target) {
  nlohmann::json j;
  j["grid_n"] = cfg.grid_n;
  j["T"] = cfg.horizon;
  j["H_dim"] = cfg.h_dim;
  j["S"] = {{"weights", target.weights}};
  if (!cfg.cont_scales.empty()) j["continuous"] = {{"scales", cfg.cont_scales}};
  if (!cfg.jump_marks.empty())
    j["qlc_jumps"] = {{"rate", cfg.jump_rate}, {"marks", cfg.jump_marks}};
  if (!cfg.accessible_cells.empty())
    j["accessible"] = {{"times", cfg.accessible_cells}, {"dists", cfg.accessible_sizes}};
  return j;
}

} // namespace brlab
