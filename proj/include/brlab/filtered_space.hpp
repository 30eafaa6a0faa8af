#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "brlab/errors.hpp"

namespace brlab {

using Partition = std::vector<std::vector<std::size_t>>;

// Finite filtered probability space: a sample set with probabilities and a chain of
// refining partitions. Level -1 is the trivial partition; level L-1 the finest given one.
// Conditional expectations are exact probability-weighted atom averages.
class FilteredSpace {
public:
  FilteredSpace() = default;

  FilteredSpace(std::vector<double> probs, std::vector<Partition> levels)
      : probs_(std::move(probs)), levels_(std::move(levels)) {
    validate();
    index();
  }

  std::size_t n_samples() const { return probs_.size(); }
  int n_levels() const { return static_cast<int>(levels_.size()); }
  int finest_level() const { return n_levels() - 1; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<Partition>& levels() const { return levels_; }

  // partition at a level; level -1 is the trivial one
  const Partition& partition(int level) const {
    require(level >= -1 && level < n_levels(), errc::level_out_of_range, "level out of range");
    return level < 0 ? trivial_ : levels_[static_cast<std::size_t>(level)];
  }

  std::size_t atom_of(int level, std::size_t sample) const {
    require(level >= -1 && level < n_levels(), errc::level_out_of_range, "level out of range");
    return level < 0 ? 0 : atom_of_[static_cast<std::size_t>(level)][sample];
  }

  double atom_prob(int level, std::size_t atom) const {
    return level < 0 ? 1.0 : atom_prob_[static_cast<std::size_t>(level)][atom];
  }

  std::size_t n_atoms(int level) const { return partition(level).size(); }

private:
  void validate() const {
    require(!probs_.empty(), errc::bad_probabilities, "no samples");
    long double total = 0.0L; // compensated enough for large enumerated spaces
    for (double p : probs_) {
      require(p > 0.0 && std::isfinite(p), errc::bad_probabilities, "probabilities must be positive");
      total += p;
    }
    require(std::fabs(static_cast<double>(total - 1.0L)) <= 1e-12, errc::bad_probabilities,
            "probabilities must sum to 1");

    std::vector<std::size_t> owner(probs_.size());
    for (std::size_t li = 0; li < levels_.size(); ++li) {
      const Partition& part = levels_[li];
      std::vector<char> seen(probs_.size(), 0);
      std::vector<std::size_t> cur(probs_.size());
      for (std::size_t b = 0; b < part.size(); ++b) {
        require(!part[b].empty(), errc::non_refining, "empty block");
        for (std::size_t s : part[b]) {
          require(s < probs_.size(), errc::non_refining, "sample id out of range");
          require(!seen[s], errc::non_refining, "sample repeated within a level");
          seen[s] = 1;
          cur[s] = b;
        }
      }
      for (char c : seen) require(c, errc::non_refining, "level does not cover all samples");
      if (li > 0) {
        // every block of this level must sit inside a single block of the previous level
        for (const auto& block : part) {
          std::size_t up = owner[block.front()];
          for (std::size_t s : block)
            require(owner[s] == up, errc::non_refining, "partitions do not refine");
        }
      }
      owner = cur;
    }
  }

  void index() {
    trivial_.assign(1, {});
    trivial_[0].resize(probs_.size());
    std::iota(trivial_[0].begin(), trivial_[0].end(), std::size_t{0});
    atom_of_.resize(levels_.size());
    atom_prob_.resize(levels_.size());
    for (std::size_t li = 0; li < levels_.size(); ++li) {
      atom_of_[li].assign(probs_.size(), 0);
      atom_prob_[li].assign(levels_[li].size(), 0.0);
      for (std::size_t b = 0; b < levels_[li].size(); ++b)
        for (std::size_t s : levels_[li][b]) {
          atom_of_[li][s] = b;
          atom_prob_[li][b] += probs_[s];
        }
    }
  }

  std::vector<double> probs_;
  std::vector<Partition> levels_;
  Partition trivial_;
  std::vector<std::vector<std::size_t>> atom_of_;
  std::vector<std::vector<double>> atom_prob_;
};

inline FilteredSpace build_filtered_space(std::vector<double> probs, std::vector<Partition> levels) {
  return FilteredSpace(std::move(probs), std::move(levels));
}

// A scalar random variable is one value per sample.
using ScalarRV = std::vector<double>;

inline double expectation(const FilteredSpace& sp, const ScalarRV& x) {
  double acc = 0.0;
  for (std::size_t s = 0; s < sp.n_samples(); ++s) acc += sp.probs()[s] * x[s];
  return acc;
}

// E_i X: atom-wise probability-weighted average at the given level (-1 = plain mean).
inline ScalarRV conditional_expectation(const FilteredSpace& sp, const ScalarRV& x, int level) {
  require(x.size() == sp.n_samples(), errc::shape_mismatch, "variable/sample count mismatch");
  const Partition& part = sp.partition(level);
  ScalarRV out(sp.n_samples());
  for (std::size_t b = 0; b < part.size(); ++b) {
    double mass = 0.0, acc = 0.0;
    for (std::size_t s : part[b]) {
      mass += sp.probs()[s];
      acc += sp.probs()[s] * x[s];
    }
    double mean = acc / mass;
    for (std::size_t s : part[b]) out[s] = mean;
  }
  return out;
}

inline bool constant_on_atoms(const FilteredSpace& sp, const ScalarRV& x, int level, double tol = 0.0) {
  const Partition& part = sp.partition(level);
  for (const auto& block : part)
    for (std::size_t s : block)
      if (std::fabs(x[s] - x[block.front()]) > tol) return false;
  return true;
}

// (E |Z|^p)^(1/p), exact enumeration
inline double lp_moment(const FilteredSpace& sp, const ScalarRV& z, double p) {
  require(p > 0.0 && std::isfinite(p), errc::bad_exponent, "lp_moment needs p > 0");
  require(z.size() == sp.n_samples(), errc::shape_mismatch, "variable/sample count mismatch");
  double acc = 0.0;
  for (std::size_t s = 0; s < sp.n_samples(); ++s)
    acc += sp.probs()[s] * std::pow(std::fabs(z[s]), p);
  return std::pow(acc, 1.0 / p);
}

} // namespace brlab
