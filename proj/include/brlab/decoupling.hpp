#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "brlab/norms.hpp"
#include "brlab/random_sequence.hpp"

namespace brlab {

// Decoupled tangent sequence on an enlarged space. Product samples are tuples
// (w, s_1..s_n) where s_i ranges over the F_{i-1}-atom of w and carries the
// conditional probability of that atom; e_i(w, s) = d_i(s_i). Conditionally on
// each F_{i-1}-atom, e_i is an independent copy of the conditional law of d_i,
// and the (e_i) are independent given G = sigma(first coordinate).
struct DecoupledPair {
  FilteredSpace base;
  RandomLqSequence base_seq;

  FilteredSpace product;
  RandomLqSequence original; // d_i embedded in the product space
  RandomLqSequence tangent;  // e_i
  Partition g_atoms;         // sigma(first coordinate)
  std::vector<std::size_t> omega_of;
  std::vector<std::vector<std::size_t>> picks; // per product sample: s_1..s_n
};

namespace detail {

inline double canonical_zero(double x) { return x == 0.0 ? 0.0 : x; }

// conditional law as canonically aggregated (value, probability) pairs: group by the
// exact value vector, sort, and sum probabilities in sorted order so that identical
// multisets aggregate to identical bits
inline std::vector<std::pair<std::vector<double>, double>>
aggregate_law(std::vector<std::pair<std::vector<double>, double>> raw) {
  for (auto& kv : raw)
    for (double& x : kv.first) x = canonical_zero(x);
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  std::vector<std::pair<std::vector<double>, double>> out;
  for (const auto& kv : raw) {
    if (!out.empty() && out.back().first == kv.first)
      out.back().second += kv.second;
    else
      out.push_back(kv);
  }
  return out;
}

inline double total_variation_gap(const std::vector<std::pair<std::vector<double>, double>>& a,
                                  const std::vector<std::pair<std::vector<double>, double>>& b) {
  double gap = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (i < a.size() && j < b.size() && a[i].first == b[j].first) {
      gap += std::fabs(a[i].second - b[j].second);
      ++i;
      ++j;
    } else if (j >= b.size() || (i < a.size() && a[i].first < b[j].first)) {
      gap += std::fabs(a[i].second);
      ++i;
    } else {
      gap += std::fabs(b[j].second);
      ++j;
    }
  }
  return 0.5 * gap;
}

} // namespace detail

inline DecoupledPair decouple(const FilteredSpace& sp, const RandomLqSequence& seq,
                              std::size_t sample_cap = 1000000) {
  check_shapes(sp, seq);
  const std::size_t n = seq.length();

  // size check
  std::size_t total = 0;
  for (std::size_t w = 0; w < sp.n_samples(); ++w) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < n; ++i) {
      int lev = seq.prev_level(i);
      count *= sp.partition(lev)[sp.atom_of(lev, w)].size();
      require(total + count <= sample_cap, errc::dimension_cap,
              "decoupled product exceeds the sample cap");
    }
    total += count;
  }

  DecoupledPair pair;
  pair.base = sp;
  pair.base_seq = seq;

  std::vector<double> probs;
  probs.reserve(total);
  pair.omega_of.reserve(total);
  pair.picks.reserve(total);

  for (std::size_t w = 0; w < sp.n_samples(); ++w) {
    // odometer over the admissible picks per step
    std::vector<const std::vector<std::size_t>*> ranges(n);
    for (std::size_t i = 0; i < n; ++i) {
      int lev = seq.prev_level(i);
      ranges[i] = &sp.partition(lev)[sp.atom_of(lev, w)];
    }
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      double prob = sp.probs()[w];
      std::vector<std::size_t> pick(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t s = (*ranges[i])[idx[i]];
        pick[i] = s;
        prob *= sp.probs()[s] / sp.atom_prob(seq.prev_level(i), sp.atom_of(seq.prev_level(i), w));
      }
      probs.push_back(prob);
      pair.omega_of.push_back(w);
      pair.picks.push_back(std::move(pick));
      // advance
      std::size_t d = 0;
      for (; d < n; ++d) {
        if (++idx[d] < ranges[d]->size()) break;
        idx[d] = 0;
      }
      if (d == n) break;
    }
  }
  const std::size_t m = probs.size();

  // product levels: level i fixes (F_{lv_i}-atom of w, s_1..s_i); a final singleton
  // level resolves everything
  std::vector<Partition> plevels;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::vector<std::size_t>, std::vector<std::size_t>> blocks;
    for (std::size_t ps = 0; ps < m; ++ps) {
      std::vector<std::size_t> key;
      key.push_back(sp.atom_of(seq.level(i), pair.omega_of[ps]));
      for (std::size_t j = 0; j <= i; ++j) key.push_back(pair.picks[ps][j]);
      blocks[key].push_back(ps);
    }
    Partition part;
    for (auto& kv : blocks) part.push_back(std::move(kv.second));
    plevels.push_back(std::move(part));
  }
  {
    Partition singletons(m);
    for (std::size_t ps = 0; ps < m; ++ps) singletons[ps] = {ps};
    plevels.push_back(std::move(singletons));
  }

  pair.product = FilteredSpace(std::move(probs), std::move(plevels));

  // G = sigma(first coordinate)
  pair.g_atoms.assign(sp.n_samples(), {});
  for (std::size_t ps = 0; ps < m; ++ps) pair.g_atoms[pair.omega_of[ps]].push_back(ps);

  std::vector<RandomLqVar> orig(n, RandomLqVar(m)), tang(n, RandomLqVar(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ps = 0; ps < m; ++ps) {
      orig[i][ps] = seq.entries[i][pair.omega_of[ps]];
      tang[i][ps] = seq.entries[i][pair.picks[ps][i]];
    }
  std::vector<int> levels(n);
  for (std::size_t i = 0; i < n; ++i) levels[i] = static_cast<int>(i);
  pair.original = RandomLqSequence(seq.target, std::move(orig), levels);
  pair.tangent = RandomLqSequence(seq.target, std::move(tang), std::move(levels));
  return pair;
}

struct TangencyReport {
  bool ok;
  double worst_gap;
};

// exact comparison of one-step conditional laws, atom by atom
inline TangencyReport verify_tangency(const DecoupledPair& pair, double tol = 0.0) {
  const FilteredSpace& pr = pair.product;
  double worst = 0.0;
  for (std::size_t i = 0; i < pair.tangent.length(); ++i) {
    const Partition& part = pr.partition(pair.tangent.prev_level(i));
    for (std::size_t b = 0; b < part.size(); ++b) {
      double atom_p = pr.atom_prob(pair.tangent.prev_level(i), b);
      std::vector<std::pair<std::vector<double>, double>> law_d, law_e;
      for (std::size_t ps : part[b]) {
        double c = pr.probs()[ps] / atom_p;
        law_d.push_back({pair.original.entries[i][ps].values, c});
        law_e.push_back({pair.tangent.entries[i][ps].values, c});
      }
      double gap = detail::total_variation_gap(detail::aggregate_law(std::move(law_d)),
                                               detail::aggregate_law(std::move(law_e)));
      worst = std::max(worst, gap);
    }
  }
  return {worst <= tol, worst};
}

// condition (CI): the one-step conditional law given F_{i-1} agrees with the law
// given G, and the tangent entries are independent given G
inline bool verify_ci(const DecoupledPair& pair, double tol = 1e-12) {
  const FilteredSpace& pr = pair.product;
  const std::size_t n = pair.tangent.length();

  // per G-atom marginal laws of each e_i
  std::vector<std::vector<std::vector<std::pair<std::vector<double>, double>>>> marginals(
      pair.g_atoms.size());
  for (std::size_t w = 0; w < pair.g_atoms.size(); ++w) {
    double gp = 0.0;
    for (std::size_t ps : pair.g_atoms[w]) gp += pr.probs()[ps];
    marginals[w].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<std::vector<double>, double>> law;
      for (std::size_t ps : pair.g_atoms[w])
        law.push_back({pair.tangent.entries[i][ps].values, pr.probs()[ps] / gp});
      marginals[w][i] = detail::aggregate_law(std::move(law));
    }
  }

  // requirement 1: law(e_i | F_{i-1} atom) == law(e_i | G atom) for every w in the atom
  for (std::size_t i = 0; i < n; ++i) {
    const Partition& part = pr.partition(pair.tangent.prev_level(i));
    for (std::size_t b = 0; b < part.size(); ++b) {
      double atom_p = pr.atom_prob(pair.tangent.prev_level(i), b);
      std::vector<std::pair<std::vector<double>, double>> law;
      std::vector<char> seen(pair.g_atoms.size(), 0);
      for (std::size_t ps : part[b]) {
        law.push_back({pair.tangent.entries[i][ps].values, pr.probs()[ps] / atom_p});
        seen[pair.omega_of[ps]] = 1;
      }
      auto cond = detail::aggregate_law(std::move(law));
      for (std::size_t w = 0; w < seen.size(); ++w)
        if (seen[w] && detail::total_variation_gap(cond, marginals[w][i]) > tol) return false;
    }
  }

  // requirement 2: joint law given each G-atom factorizes into the marginals
  for (std::size_t w = 0; w < pair.g_atoms.size(); ++w) {
    double gp = 0.0;
    for (std::size_t ps : pair.g_atoms[w]) gp += pr.probs()[ps];
    std::vector<std::pair<std::vector<double>, double>> joint_raw;
    for (std::size_t ps : pair.g_atoms[w]) {
      std::vector<double> key;
      for (std::size_t i = 0; i < n; ++i)
        key.insert(key.end(), pair.tangent.entries[i][ps].values.begin(),
                   pair.tangent.entries[i][ps].values.end());
      joint_raw.push_back({std::move(key), pr.probs()[ps] / gp});
    }
    auto joint = detail::aggregate_law(std::move(joint_raw));
    std::size_t pts = pair.tangent.n_points();
    for (const auto& kv : joint) {
      double prod = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> vi(kv.first.begin() + i * pts, kv.first.begin() + (i + 1) * pts);
        double pi = 0.0;
        for (const auto& mk : marginals[w][i])
          if (mk.first == vi) pi = mk.second;
        prod *= pi;
      }
      if (std::fabs(kv.second - prod) > tol) return false;
    }
  }
  return true;
}

struct DecouplingRatio {
  double lhs;
  double rhs;
  double ratio;
};

// moments of the coupled and decoupled sums
inline DecouplingRatio decoupling_ratio(const DecoupledPair& pair, double p, double q) {
  double lhs = martingale_moment(pair.base, pair.base_seq, p, q);
  double rhs = martingale_moment(pair.product, pair.tangent, p, q);
  return {lhs, rhs, rhs == 0.0 ? (lhs == 0.0 ? 1.0 : std::numeric_limits<double>::infinity())
                               : lhs / rhs};
}

// recoupled direction: moment of the decoupled sum over moment of the coupled sum
inline DecouplingRatio recoupling_ratio(const DecoupledPair& pair, double p, double q) {
  DecouplingRatio r = decoupling_ratio(pair, p, q);
  return {r.rhs, r.lhs, r.lhs == 0.0 ? (r.rhs == 0.0 ? 1.0 : std::numeric_limits<double>::infinity())
                                     : r.rhs / r.lhs};
}

// entrywise value maps applied to both sequences keep them tangent and decoupled
inline DecoupledPair
tangent_under_map(const DecoupledPair& pair,
                  const std::vector<std::function<LqVector(const LqVector&)>>& maps) {
  require(maps.size() == pair.tangent.length(), errc::shape_mismatch,
          "one map per sequence index");
  DecoupledPair out = pair;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (std::size_t s = 0; s < pair.base.n_samples(); ++s)
      out.base_seq.entries[i][s] = maps[i](pair.base_seq.entries[i][s]);
    for (std::size_t ps = 0; ps < pair.product.n_samples(); ++ps) {
      out.original.entries[i][ps] = maps[i](pair.original.entries[i][ps]);
      out.tangent.entries[i][ps] = maps[i](pair.tangent.entries[i][ps]);
    }
  }
  return out;
}

} // namespace brlab
