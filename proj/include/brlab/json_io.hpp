#pragma once

#include <string>
#include <utility>

#include <json.hpp>

#include "brlab/filtered_space.hpp"
#include "brlab/random_sequence.hpp"

namespace brlab {

using json = nlohmann::json;

// Document layout:
//   {"probs": [...], "levels": [[[sample,...],...],...],
//    "weights": [...], "entries": [[[value,...],...],...], "adapt_levels": [...]}
// Doubles survive the round trip bit-exactly (shortest round-trip formatting).

inline json to_json(const FilteredSpace& sp) {
  json j;
  j["probs"] = sp.probs();
  j["levels"] = sp.levels();
  return j;
}

inline FilteredSpace filtered_space_from_json(const json& j) {
  return FilteredSpace(j.at("probs").get<std::vector<double>>(),
                       j.at("levels").get<std::vector<Partition>>());
}

inline json to_json(const RandomLqSequence& seq) {
  json j;
  j["weights"] = seq.target.weights;
  json entries = json::array();
  for (const RandomLqVar& e : seq.entries) {
    json per_sample = json::array();
    for (const LqVector& v : e) per_sample.push_back(v.values);
    entries.push_back(std::move(per_sample));
  }
  j["entries"] = std::move(entries);
  j["adapt_levels"] = seq.levels;
  return j;
}

inline RandomLqSequence sequence_from_json(const json& j) {
  FiniteMeasureSpace target(j.at("weights").get<std::vector<double>>());
  std::vector<RandomLqVar> entries;
  for (const json& e : j.at("entries")) {
    RandomLqVar var;
    for (const json& v : e) var.emplace_back(v.get<std::vector<double>>());
    entries.push_back(std::move(var));
  }
  std::vector<int> levels = j.at("adapt_levels").get<std::vector<int>>();
  return RandomLqSequence(std::move(target), std::move(entries), std::move(levels));
}

inline json to_json(const FilteredSpace& sp, const RandomLqSequence& seq) {
  json j = to_json(sp);
  j.update(to_json(seq));
  return j;
}

inline std::pair<FilteredSpace, RandomLqSequence> space_and_sequence_from_json(const json& j) {
  return {filtered_space_from_json(j), sequence_from_json(j)};
}

} // namespace brlab
