#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "brlab/filtered_space.hpp"
#include "brlab/measure_space.hpp"

namespace brlab {

// An L^q(S)-valued random variable: one LqVector per sample.
using RandomLqVar = std::vector<LqVector>;

inline RandomLqVar zero_var(std::size_t n_samples, std::size_t n_points) {
  return RandomLqVar(n_samples, LqVector(n_points, 0.0));
}

// E_i X applied per point of S
inline RandomLqVar conditional_expectation(const FilteredSpace& sp, const RandomLqVar& x, int level) {
  const Partition& part = sp.partition(level);
  std::size_t n_points = x.front().size();
  RandomLqVar out(sp.n_samples(), LqVector(n_points, 0.0));
  for (const auto& block : part) {
    double mass = 0.0;
    for (std::size_t s : block) mass += sp.probs()[s];
    for (std::size_t j = 0; j < n_points; ++j) {
      double acc = 0.0;
      for (std::size_t s : block) acc += sp.probs()[s] * x[s][j];
      double mean = acc / mass;
      for (std::size_t s : block) out[s][j] = mean;
    }
  }
  return out;
}

// Adapted sequence (f_i) of L^q(S)-valued random variables; entry i is constant on
// atoms of F_{levels[i]} (default level i).
struct RandomLqSequence {
  FiniteMeasureSpace target;
  std::vector<RandomLqVar> entries;
  std::vector<int> levels;

  RandomLqSequence() = default;
  RandomLqSequence(FiniteMeasureSpace tgt, std::vector<RandomLqVar> ent)
      : target(std::move(tgt)), entries(std::move(ent)) {
    levels.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) levels[i] = static_cast<int>(i);
  }
  RandomLqSequence(FiniteMeasureSpace tgt, std::vector<RandomLqVar> ent, std::vector<int> lv)
      : target(std::move(tgt)), entries(std::move(ent)), levels(std::move(lv)) {}

  std::size_t length() const { return entries.size(); }
  std::size_t n_points() const { return target.size(); }

  int level(std::size_t i) const { return levels[i]; }
  int prev_level(std::size_t i) const { return i == 0 ? -1 : levels[i - 1]; }
};

inline void check_shapes(const FilteredSpace& sp, const RandomLqSequence& seq) {
  for (const RandomLqVar& e : seq.entries) {
    require(e.size() == sp.n_samples(), errc::shape_mismatch, "entry/sample count mismatch");
    for (const LqVector& v : e)
      require(v.size() == seq.n_points(), errc::shape_mismatch, "entry/point count mismatch");
  }
  for (int lv : seq.levels)
    require(lv >= -1 && lv < sp.n_levels(), errc::level_out_of_range, "adaptedness level out of range");
}

inline bool is_adapted(const FilteredSpace& sp, const RandomLqSequence& seq, double tol = 0.0) {
  for (std::size_t i = 0; i < seq.length(); ++i) {
    const Partition& part = sp.partition(seq.level(i));
    for (const auto& block : part)
      for (std::size_t s : block)
        for (std::size_t j = 0; j < seq.n_points(); ++j)
          if (std::fabs(seq.entries[i][s][j] - seq.entries[i][block.front()][j]) > tol) return false;
  }
  return true;
}

struct MdsReport {
  bool ok;
  double worst_violation;
};

// true iff E_{i-1} d_i vanishes atom-wise (within tol); reports the worst violation
inline MdsReport is_mds(const FilteredSpace& sp, const RandomLqSequence& seq, double tol = 1e-12) {
  check_shapes(sp, seq);
  double worst = 0.0;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    RandomLqVar m = conditional_expectation(sp, seq.entries[i], seq.prev_level(i));
    for (const LqVector& v : m)
      for (double x : v.values) worst = std::max(worst, std::fabs(x));
  }
  return {worst <= tol, worst};
}

// P((f_i)) = (Delta_i f_i) with Delta_i = E_i - E_{i-1}; idempotent, fixes every MDS
inline RandomLqSequence mds_project(const FilteredSpace& sp, const RandomLqSequence& seq) {
  check_shapes(sp, seq);
  RandomLqSequence out = seq;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    RandomLqVar ei = conditional_expectation(sp, seq.entries[i], seq.level(i));
    RandomLqVar eprev = conditional_expectation(sp, seq.entries[i], seq.prev_level(i));
    for (std::size_t s = 0; s < sp.n_samples(); ++s) out.entries[i][s] = ei[s] - eprev[s];
  }
  return out;
}

inline RandomLqSequence scaled(RandomLqSequence seq, double c) {
  for (RandomLqVar& e : seq.entries)
    for (LqVector& v : e) v *= c;
  return seq;
}

inline RandomLqVar sequence_sum(const RandomLqSequence& seq, std::size_t n_samples) {
  RandomLqVar total = zero_var(n_samples, seq.n_points());
  for (const RandomLqVar& e : seq.entries)
    for (std::size_t s = 0; s < n_samples; ++s) total[s] += e[s];
  return total;
}

} // namespace brlab
