#pragma once

#include <cstddef>
#include <vector>

#include "brlab/filtered_space.hpp"
#include "brlab/random_sequence.hpp"
#include "brlab/rng.hpp"

namespace brlab {

// Dyadic tree of the given depth: 2^depth samples, binary splits per level.
inline FilteredSpace dyadic_space(int depth, const std::vector<double>& probs) {
  std::size_t n = std::size_t{1} << depth;
  std::vector<Partition> levels;
  for (int lv = 1; lv <= depth; ++lv) {
    std::size_t blocks = std::size_t{1} << lv;
    std::size_t width = n / blocks;
    Partition part(blocks);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t k = 0; k < width; ++k) part[b].push_back(b * width + k);
    levels.push_back(std::move(part));
  }
  return FilteredSpace(probs, std::move(levels));
}

inline FilteredSpace dyadic_space(int depth) {
  std::size_t n = std::size_t{1} << depth;
  return dyadic_space(depth, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

// dyadic tree with mildly random probabilities (kept away from zero)
inline FilteredSpace random_dyadic_space(int depth, CounterRng& rng) {
  std::size_t n = std::size_t{1} << depth;
  std::vector<double> probs(n);
  double total = 0.0;
  for (double& p : probs) {
    p = 0.5 + rng.next_double();
    total += p;
  }
  for (double& p : probs) p /= total;
  // re-normalize exactly enough for the 1e-12 gate
  double check = 0.0;
  for (double p : probs) check += p;
  probs.back() += 1.0 - check;
  return dyadic_space(depth, probs);
}

// Adapted Gaussian sequence projected to a martingale difference sequence.
inline RandomLqSequence random_mds(const FilteredSpace& sp, std::size_t length,
                                   std::size_t n_points, CounterRng& rng) {
  FiniteMeasureSpace target(std::vector<double>(n_points, 1.0 / static_cast<double>(n_points)));
  std::vector<RandomLqVar> entries;
  for (std::size_t i = 0; i < length; ++i) {
    int lv = std::min<int>(static_cast<int>(i), sp.finest_level());
    const Partition& part = sp.partition(lv);
    RandomLqVar e(sp.n_samples(), LqVector(n_points, 0.0));
    for (const auto& block : part) {
      LqVector v(n_points, 0.0);
      for (std::size_t j = 0; j < n_points; ++j) v[j] = rng.next_normal();
      for (std::size_t s : block) e[s] = v;
    }
    entries.push_back(std::move(e));
  }
  std::vector<int> levels(length);
  for (std::size_t i = 0; i < length; ++i)
    levels[i] = std::min<int>(static_cast<int>(i), sp.finest_level());
  RandomLqSequence seq(std::move(target), std::move(entries), std::move(levels));
  return mds_project(sp, seq);
}

// Sequence of independent mean-zero entries: product tree where level i reveals factor i.
// Each entry i depends only on factor i, so it is independent of F_{i-1}.
inline std::pair<FilteredSpace, RandomLqSequence>
random_independent_sequence(std::size_t length, std::size_t branch, std::size_t n_points,
                            CounterRng& rng) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < length; ++i) n *= branch;
  std::vector<double> probs(n, 1.0 / static_cast<double>(n));
  std::vector<Partition> levels;
  std::size_t blocks = 1;
  for (std::size_t i = 0; i < length; ++i) {
    blocks *= branch;
    std::size_t width = n / blocks;
    Partition part(blocks);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t k = 0; k < width; ++k) part[b].push_back(b * width + k);
    levels.push_back(std::move(part));
  }
  FilteredSpace sp(probs, std::move(levels));

  FiniteMeasureSpace target(std::vector<double>(n_points, 1.0 / static_cast<double>(n_points)));
  std::vector<RandomLqVar> entries;
  std::size_t period = n;
  for (std::size_t i = 0; i < length; ++i) {
    period /= branch;
    // one value per outcome of factor i, centered
    std::vector<LqVector> outcome(branch, LqVector(n_points, 0.0));
    for (std::size_t j = 0; j < n_points; ++j) {
      double mean = 0.0;
      for (std::size_t o = 0; o < branch; ++o) {
        outcome[o][j] = rng.next_normal();
        mean += outcome[o][j];
      }
      mean /= static_cast<double>(branch);
      for (std::size_t o = 0; o < branch; ++o) outcome[o][j] -= mean;
    }
    RandomLqVar e(n, LqVector(n_points, 0.0));
    for (std::size_t s = 0; s < n; ++s) e[s] = outcome[(s / period) % branch];
    entries.push_back(std::move(e));
  }
  return {std::move(sp), RandomLqSequence(std::move(target), std::move(entries))};
}

} // namespace brlab
