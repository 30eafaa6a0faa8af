#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "brlab/errors.hpp"
#include "brlab/random_sequence.hpp"
#include "brlab/rng.hpp"

namespace brlab {

inline double conjugate_exponent(double p) { return p / (p - 1.0); }

inline void check_exponent(double p) {
  require(p >= 1.0 && std::isfinite(p), errc::bad_exponent, "exponent must lie in [1, inf)");
}

// ---------------------------------------------------------------------------
// Component norms on adapted sequences.
//
//   S_q^p      ( E || (sum_i E_{i-1}|f_i|^2)^(1/2) ||_Lq^p )^(1/p)
//   D_{q,q}^p  ( E ( sum_i E_{i-1}||f_i||_q^q )^(p/q) )^(1/p)
//   D_{p,q}^p  ( sum_i E ||f_i||_q^p )^(1/p)
// ---------------------------------------------------------------------------

enum class NormKind { S, Dqq, Dpq };

inline const char* to_string(NormKind k) {
  switch (k) {
    case NormKind::S: return "S";
    case NormKind::Dqq: return "Dqq";
    default: return "Dpq";
  }
}

namespace detail {

// sum_i E_{i-1}|f_i|^2, per (sample, point)
inline std::vector<LqVector> square_function(const FilteredSpace& sp, const RandomLqSequence& seq) {
  std::vector<LqVector> g(sp.n_samples(), LqVector(seq.n_points(), 0.0));
  for (std::size_t i = 0; i < seq.length(); ++i) {
    RandomLqVar sq(sp.n_samples(), LqVector(seq.n_points(), 0.0));
    for (std::size_t s = 0; s < sp.n_samples(); ++s)
      for (std::size_t j = 0; j < seq.n_points(); ++j)
        sq[s][j] = seq.entries[i][s][j] * seq.entries[i][s][j];
    RandomLqVar cond = conditional_expectation(sp, sq, seq.prev_level(i));
    for (std::size_t s = 0; s < sp.n_samples(); ++s) g[s] += cond[s];
  }
  return g;
}

// sum_i E_{i-1}||f_i||_q^q, per sample
inline ScalarRV conditional_qsum(const FilteredSpace& sp, const RandomLqSequence& seq, double q) {
  ScalarRV h(sp.n_samples(), 0.0);
  for (std::size_t i = 0; i < seq.length(); ++i) {
    ScalarRV u(sp.n_samples(), 0.0);
    for (std::size_t s = 0; s < sp.n_samples(); ++s) {
      double acc = 0.0;
      for (std::size_t j = 0; j < seq.n_points(); ++j)
        acc += seq.target.weights[j] * std::pow(std::fabs(seq.entries[i][s][j]), q);
      u[s] = acc;
    }
    ScalarRV cond = conditional_expectation(sp, u, seq.prev_level(i));
    for (std::size_t s = 0; s < sp.n_samples(); ++s) h[s] += cond[s];
  }
  return h;
}

} // namespace detail

inline double norm_S(const FilteredSpace& sp, const RandomLqSequence& seq, double p, double q) {
  check_exponent(p);
  check_exponent(q);
  check_shapes(sp, seq);
  std::vector<LqVector> g = detail::square_function(sp, seq);
  double acc = 0.0;
  for (std::size_t s = 0; s < sp.n_samples(); ++s) {
    double r = 0.0;
    for (std::size_t j = 0; j < seq.n_points(); ++j)
      r += seq.target.weights[j] * std::pow(g[s][j], q / 2.0);
    acc += sp.probs()[s] * std::pow(r, p / q);
  }
  return std::pow(acc, 1.0 / p);
}

inline double norm_Dqq(const FilteredSpace& sp, const RandomLqSequence& seq, double p, double q) {
  check_exponent(p);
  check_exponent(q);
  check_shapes(sp, seq);
  ScalarRV h = detail::conditional_qsum(sp, seq, q);
  double acc = 0.0;
  for (std::size_t s = 0; s < sp.n_samples(); ++s)
    acc += sp.probs()[s] * std::pow(h[s], p / q);
  return std::pow(acc, 1.0 / p);
}

inline double norm_Dpq(const FilteredSpace& sp, const RandomLqSequence& seq, double p, double q) {
  check_exponent(p);
  check_exponent(q);
  check_shapes(sp, seq);
  double acc = 0.0;
  for (std::size_t i = 0; i < seq.length(); ++i)
    for (std::size_t s = 0; s < sp.n_samples(); ++s)
      acc += sp.probs()[s] * std::pow(lq_norm(seq.target, seq.entries[i][s], q), p);
  return std::pow(acc, 1.0 / p);
}

inline double component_norm(const FilteredSpace& sp, const RandomLqSequence& seq, NormKind kind,
                             double p, double q) {
  switch (kind) {
    case NormKind::S: return norm_S(sp, seq, p, q);
    case NormKind::Dqq: return norm_Dqq(sp, seq, p, q);
    default: return norm_Dpq(sp, seq, p, q);
  }
}

// Rosenthal variant for independent mean-zero entries: || (sum_i E|f_i|^2)^(1/2) ||_Lq
inline double rosenthal_norm_S(const FilteredSpace& sp, const RandomLqSequence& seq, double q) {
  check_exponent(q);
  check_shapes(sp, seq);
  LqVector m(seq.n_points(), 0.0);
  for (std::size_t i = 0; i < seq.length(); ++i)
    for (std::size_t s = 0; s < sp.n_samples(); ++s)
      for (std::size_t j = 0; j < seq.n_points(); ++j)
        m[j] += sp.probs()[s] * seq.entries[i][s][j] * seq.entries[i][s][j];
  for (std::size_t j = 0; j < seq.n_points(); ++j) m[j] = std::sqrt(m[j]);
  return lq_norm(seq.target, m, q);
}

// ( E || sum_i d_i ||_Lq^p )^(1/p)
inline double martingale_moment(const FilteredSpace& sp, const RandomLqSequence& seq, double p,
                                double q) {
  check_exponent(p);
  check_exponent(q);
  check_shapes(sp, seq);
  RandomLqVar total = sequence_sum(seq, sp.n_samples());
  double acc = 0.0;
  for (std::size_t s = 0; s < sp.n_samples(); ++s)
    acc += sp.probs()[s] * std::pow(lq_norm(seq.target, total[s], q), p);
  return std::pow(acc, 1.0 / p);
}

// ---------------------------------------------------------------------------
// Subgradients of the component norms, flattened to entry coordinates
// (index order: entry i, sample s, point j). Nonsmooth points get subgradient 0.
// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t flat_size(const FilteredSpace& sp, const RandomLqSequence& seq) {
  return seq.length() * sp.n_samples() * seq.n_points();
}

inline std::vector<double> flatten(const FilteredSpace& sp, const RandomLqSequence& seq) {
  std::vector<double> x;
  x.reserve(flat_size(sp, seq));
  for (const RandomLqVar& e : seq.entries)
    for (const LqVector& v : e) x.insert(x.end(), v.values.begin(), v.values.end());
  return x;
}

inline void unflatten(const std::vector<double>& x, const FilteredSpace& sp, RandomLqSequence& seq) {
  std::size_t pos = 0;
  for (RandomLqVar& e : seq.entries)
    for (LqVector& v : e)
      for (double& val : v.values) val = x[pos++];
}

inline double safe_pow(double base, double expo) {
  if (base <= 0.0) return 0.0;
  return std::pow(base, expo);
}

inline std::vector<double> grad_norm_Dpq(const FilteredSpace& sp, const RandomLqSequence& seq,
                                         double p, double q, double value) {
  std::vector<double> g(flat_size(sp, seq), 0.0);
  if (value <= 0.0) return g;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < seq.length(); ++i)
    for (std::size_t s = 0; s < sp.n_samples(); ++s) {
      double n = lq_norm(seq.target, seq.entries[i][s], q);
      double outer = safe_pow(value, 1.0 - p) * sp.probs()[s] * safe_pow(n, p - q);
      for (std::size_t j = 0; j < seq.n_points(); ++j, ++pos) {
        double f = seq.entries[i][s][j];
        if (f != 0.0)
          g[pos] = outer * seq.target.weights[j] * safe_pow(std::fabs(f), q - 1.0) *
                   (f > 0 ? 1.0 : -1.0);
      }
    }
  return g;
}

inline std::vector<double> grad_norm_Dqq(const FilteredSpace& sp, const RandomLqSequence& seq,
                                         double p, double q, double value) {
  std::vector<double> g(flat_size(sp, seq), 0.0);
  if (value <= 0.0) return g;
  ScalarRV h = conditional_qsum(sp, seq, q);
  // weight per sample: P_w * h_w^(p/q - 1)
  ScalarRV hw(sp.n_samples());
  for (std::size_t s = 0; s < sp.n_samples(); ++s)
    hw[s] = sp.probs()[s] * safe_pow(h[s], p / q - 1.0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    int lev = seq.prev_level(i);
    const Partition& part = sp.partition(lev);
    // atom sums of hw
    std::vector<double> atom_hw(part.size(), 0.0);
    for (std::size_t b = 0; b < part.size(); ++b)
      for (std::size_t s : part[b]) atom_hw[b] += hw[s];
    for (std::size_t s = 0; s < sp.n_samples(); ++s) {
      std::size_t b = sp.atom_of(lev, s);
      double outer = safe_pow(value, 1.0 - p) * atom_hw[b] * sp.probs()[s] / sp.atom_prob(lev, b);
      for (std::size_t j = 0; j < seq.n_points(); ++j, ++pos) {
        double f = seq.entries[i][s][j];
        if (f != 0.0)
          g[pos] = outer * seq.target.weights[j] * safe_pow(std::fabs(f), q - 1.0) *
                   (f > 0 ? 1.0 : -1.0);
      }
    }
  }
  return g;
}

inline std::vector<double> grad_norm_S(const FilteredSpace& sp, const RandomLqSequence& seq,
                                       double p, double q, double value) {
  std::vector<double> g(flat_size(sp, seq), 0.0);
  if (value <= 0.0) return g;
  std::vector<LqVector> sqfn = square_function(sp, seq);
  // r_w = sum_j w_j g_jw^(q/2)
  ScalarRV r(sp.n_samples(), 0.0);
  for (std::size_t s = 0; s < sp.n_samples(); ++s)
    for (std::size_t j = 0; j < seq.n_points(); ++j)
      r[s] += seq.target.weights[j] * safe_pow(sqfn[s][j], q / 2.0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    int lev = seq.prev_level(i);
    const Partition& part = sp.partition(lev);
    // per atom and point: sum_{w in atom} P_w r_w^(p/q-1) g_jw^(q/2-1)
    std::vector<std::vector<double>> atom_coef(part.size(),
                                               std::vector<double>(seq.n_points(), 0.0));
    for (std::size_t b = 0; b < part.size(); ++b)
      for (std::size_t s : part[b]) {
        double rw = sp.probs()[s] * safe_pow(r[s], p / q - 1.0);
        for (std::size_t j = 0; j < seq.n_points(); ++j)
          atom_coef[b][j] += rw * safe_pow(sqfn[s][j], q / 2.0 - 1.0);
      }
    for (std::size_t s = 0; s < sp.n_samples(); ++s) {
      std::size_t b = sp.atom_of(lev, s);
      double share = sp.probs()[s] / sp.atom_prob(lev, b);
      for (std::size_t j = 0; j < seq.n_points(); ++j, ++pos) {
        double f = seq.entries[i][s][j];
        if (f != 0.0)
          g[pos] = safe_pow(value, 1.0 - p) * atom_coef[b][j] * seq.target.weights[j] * share * f;
      }
    }
  }
  return g;
}

inline std::vector<double> grad_component(const FilteredSpace& sp, const RandomLqSequence& seq,
                                          NormKind kind, double p, double q, double value) {
  switch (kind) {
    case NormKind::S: return grad_norm_S(sp, seq, p, q, value);
    case NormKind::Dqq: return grad_norm_Dqq(sp, seq, p, q, value);
    default: return grad_norm_Dpq(sp, seq, p, q, value);
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Sum norms: ||z||_{X_1+...+X_m} = inf { sum_k ||x_k||_{X_k} : z = sum x_k, x_k MDS }.
// Each component objective may itself be a max over several component norms.
//
// Solved by projected subgradient on the decomposition parts (mds_project after
// every step, 1/k step schedule), restarted from each trivial decomposition and
// from a random split, followed by a shrinking-step descent polish.
// ---------------------------------------------------------------------------

struct SumNormOptions {
  int iterations = 500;
  int polish_iterations = 250;
  int random_restarts = 2;
  std::uint64_t seed = 17;
};

struct DecompositionCertificate {
  std::vector<RandomLqSequence> components;
  std::vector<double> component_values;
  double objective = 0.0;
  int iterations = 0;
  double optimality_gap = 0.0; // span between the best and the last restart's best
  bool feasible = true;
};

namespace detail {

struct ComponentObjective {
  std::vector<NormKind> max_of;

  double value(const FilteredSpace& sp, const RandomLqSequence& x, double p, double q,
               NormKind* arg = nullptr) const {
    double best = -1.0;
    NormKind which = max_of.front();
    for (NormKind k : max_of) {
      double v = component_norm(sp, x, k, p, q);
      if (v > best) {
        best = v;
        which = k;
      }
    }
    if (arg) *arg = which;
    return best;
  }

  std::vector<double> subgrad(const FilteredSpace& sp, const RandomLqSequence& x, double p,
                              double q) const {
    NormKind which;
    double v = value(sp, x, p, q, &which);
    return grad_component(sp, x, which, p, q, v);
  }
};

} // namespace detail

inline DecompositionCertificate
sum_norm(const FilteredSpace& sp, const RandomLqSequence& z,
         const std::vector<std::vector<NormKind>>& components, double p, double q,
         const SumNormOptions& opts = {}) {
  check_exponent(p);
  check_exponent(q);
  check_shapes(sp, z);
  require(!components.empty(), errc::config_invalid, "sum_norm needs at least one component");

  std::vector<detail::ComponentObjective> objs;
  for (const auto& kinds : components) objs.push_back({kinds});
  const std::size_t m = objs.size();

  DecompositionCertificate cert;
  cert.components.assign(m, z);

  if (m == 1) {
    cert.component_values = {objs[0].value(sp, z, p, q)};
    cert.objective = cert.component_values[0];
    return cert;
  }

  const std::size_t dim = detail::flat_size(sp, z);
  RandomLqSequence scratch = z;

  auto objective = [&](const std::vector<std::vector<double>>& parts,
                       std::vector<double>* per_part = nullptr) {
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      detail::unflatten(parts[k], sp, scratch);
      double v = objs[k].value(sp, scratch, p, q);
      if (per_part) (*per_part)[k] = v;
      total += v;
    }
    require(std::isfinite(total), errc::solver_diverged, "sum_norm objective is not finite");
    return total;
  };

  std::vector<double> zflat = detail::flatten(sp, z);
  auto make_trivial = [&](std::size_t host) {
    std::vector<std::vector<double>> parts(m, std::vector<double>(dim, 0.0));
    parts[host] = zflat;
    return parts;
  };

  // starts: z assigned wholly to each component, plus random MDS splits
  std::vector<std::vector<std::vector<double>>> starts;
  for (std::size_t k = 0; k < m; ++k) starts.push_back(make_trivial(k));
  CounterRng rng(opts.seed);
  for (int r = 0; r < opts.random_restarts; ++r) {
    std::vector<std::vector<double>> parts(m, std::vector<double>(dim, 0.0));
    std::vector<std::vector<double>> noise;
    for (std::size_t k = 0; k + 1 < m; ++k) {
      RandomLqSequence w = z;
      std::vector<double> flat(dim);
      for (double& x : flat) x = rng.next_normal();
      detail::unflatten(flat, sp, w);
      w = mds_project(sp, w);
      noise.push_back(detail::flatten(sp, w));
    }
    // share z across parts and add centered noise that sums to zero over the parts
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t d = 0; d < dim; ++d) parts[k][d] = zflat[d] / static_cast<double>(m);
    for (std::size_t k = 0; k + 1 < m; ++k)
      for (std::size_t d = 0; d < dim; ++d) {
        double scale = 0.25 * std::fabs(zflat[d]);
        parts[k][d] += scale * noise[k][d];
        parts[m - 1][d] -= scale * noise[k][d];
      }
    starts.push_back(parts);
  }

  double best_value = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_parts;
  double last_restart_best = best_value;
  int used_iterations = 0;

  auto project_parts = [&](std::vector<std::vector<double>>& parts) {
    // keep every part an MDS and restore the exact constraint sum = z through part 0
    for (std::size_t k = 1; k < m; ++k) {
      detail::unflatten(parts[k], sp, scratch);
      parts[k] = detail::flatten(sp, mds_project(sp, scratch));
    }
    for (std::size_t d = 0; d < dim; ++d) {
      double rest = 0.0;
      for (std::size_t k = 1; k < m; ++k) rest += parts[k][d];
      parts[0][d] = zflat[d] - rest;
    }
  };

  for (auto& start : starts) {
    std::vector<std::vector<double>> parts = start;
    project_parts(parts);
    double cur = objective(parts);
    double restart_best = cur;
    std::vector<std::vector<double>> restart_parts = parts;
    double step0 = 0.5 * std::max(cur, 1e-12);

    for (int it = 1; it <= opts.iterations; ++it) {
      // subgradient wrt free parts 1..m-1 (part 0 carries the constraint)
      detail::unflatten(parts[0], sp, scratch);
      std::vector<double> g0 = objs[0].subgrad(sp, scratch, p, q);
      std::vector<std::vector<double>> dir(m - 1, std::vector<double>(dim, 0.0));
      double norm2 = 0.0;
      for (std::size_t k = 1; k < m; ++k) {
        detail::unflatten(parts[k], sp, scratch);
        std::vector<double> gk = objs[k].subgrad(sp, scratch, p, q);
        for (std::size_t d = 0; d < dim; ++d) {
          dir[k - 1][d] = gk[d] - g0[d];
          norm2 += dir[k - 1][d] * dir[k - 1][d];
        }
      }
      ++used_iterations;
      if (norm2 <= 1e-30) break;
      double step = step0 / (static_cast<double>(it) * std::sqrt(norm2));
      for (std::size_t k = 1; k < m; ++k)
        for (std::size_t d = 0; d < dim; ++d) parts[k][d] -= step * dir[k - 1][d];
      project_parts(parts);
      double v = objective(parts);
      if (v < restart_best) {
        restart_best = v;
        restart_parts = parts;
      }
    }

    // polish: full subgradient steps with geometric shrinking, accept improvements only
    parts = restart_parts;
    double step = 0.25 * std::max(restart_best, 1e-12);
    for (int it = 0; it < opts.polish_iterations && step > 1e-14 * std::max(restart_best, 1e-12);
         ++it) {
      detail::unflatten(parts[0], sp, scratch);
      std::vector<double> g0 = objs[0].subgrad(sp, scratch, p, q);
      std::vector<std::vector<double>> dir(m - 1, std::vector<double>(dim, 0.0));
      double norm2 = 0.0;
      for (std::size_t k = 1; k < m; ++k) {
        detail::unflatten(parts[k], sp, scratch);
        std::vector<double> gk = objs[k].subgrad(sp, scratch, p, q);
        for (std::size_t d = 0; d < dim; ++d) {
          dir[k - 1][d] = gk[d] - g0[d];
          norm2 += dir[k - 1][d] * dir[k - 1][d];
        }
      }
      if (norm2 <= 1e-30) break;
      std::vector<std::vector<double>> trial = parts;
      for (std::size_t k = 1; k < m; ++k)
        for (std::size_t d = 0; d < dim; ++d)
          trial[k][d] -= step / std::sqrt(norm2) * dir[k - 1][d];
      project_parts(trial);
      double v = objective(trial);
      ++used_iterations;
      if (v < restart_best) {
        restart_best = v;
        parts = trial;
        restart_parts = trial;
      } else {
        step *= 0.5;
      }
    }

    last_restart_best = restart_best;
    if (restart_best < best_value) {
      best_value = restart_best;
      best_parts = restart_parts;
    }
  }

  cert.component_values.assign(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    detail::unflatten(best_parts[k], sp, cert.components[k]);
    cert.component_values[k] = objs[k].value(sp, cert.components[k], p, q);
  }
  cert.objective = best_value;
  cert.iterations = used_iterations;
  cert.optimality_gap = std::fabs(last_restart_best - best_value);
  // feasibility: parts sum back to z
  double worst = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) acc += best_parts[k][d];
    worst = std::max(worst, std::fabs(acc - zflat[d]));
  }
  cert.feasible = worst <= 1e-9;
  return cert;
}

// ---------------------------------------------------------------------------
// The six-regime selector and the regime norm.
// ---------------------------------------------------------------------------

enum class Regime {
  q_le_p_two_le_q,  // S ^ Dqq ^ Dpq
  p_le_q_two_le_p,  // S ^ (Dqq + Dpq)
  p_lt_two_le_q,    // (S ^ Dqq) + Dpq
  q_lt_two_le_p,    // (S + Dqq) ^ Dpq
  q_le_p_le_two,    // S + (Dqq ^ Dpq)
  p_le_q_le_two,    // S + Dqq + Dpq
};

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::q_le_p_two_le_q: return "2<=q<=p";
    case Regime::p_le_q_two_le_p: return "2<=p<=q";
    case Regime::p_lt_two_le_q: return "p<2<=q";
    case Regime::q_lt_two_le_p: return "q<2<=p";
    case Regime::q_le_p_le_two: return "q<=p<=2";
    default: return "p<=q<=2";
  }
}

// ties resolve to the first matching row, in the listed order
inline Regime regime_of(double p, double q) {
  require(p > 1.0 && q > 1.0 && std::isfinite(p) && std::isfinite(q), errc::bad_exponent,
          "regimes need exponents in (1, inf)");
  if (2.0 <= q && q <= p) return Regime::q_le_p_two_le_q;
  if (2.0 <= p && p <= q) return Regime::p_le_q_two_le_p;
  if (p < 2.0 && 2.0 <= q) return Regime::p_lt_two_le_q;
  if (q < 2.0 && 2.0 <= p) return Regime::q_lt_two_le_p;
  if (q <= p && p <= 2.0) return Regime::q_le_p_le_two;
  return Regime::p_le_q_le_two;
}

struct RegimeNormSpec {
  double p;
  double q;
  double p_conj;
  double q_conj;
  Regime regime;

  RegimeNormSpec(double p_, double q_)
      : p(p_), q(q_), p_conj(conjugate_exponent(p_)), q_conj(conjugate_exponent(q_)),
        regime(regime_of(p_, q_)) {}

  RegimeNormSpec dual() const { return RegimeNormSpec(p_conj, q_conj); }
};

// Structure of one regime formula: either a max over groups (each group evaluated as
// the sum norm of its kinds) or a sum norm over groups (each group a max of its kinds).
struct RegimeFormula {
  bool top_is_max;
  std::vector<std::vector<NormKind>> groups;
};

inline RegimeFormula regime_formula(Regime r) {
  using K = NormKind;
  switch (r) {
    case Regime::q_le_p_two_le_q: return {true, {{K::S}, {K::Dqq}, {K::Dpq}}};
    case Regime::p_le_q_two_le_p: return {true, {{K::S}, {K::Dqq, K::Dpq}}};
    case Regime::p_lt_two_le_q: return {false, {{K::S, K::Dqq}, {K::Dpq}}};
    case Regime::q_lt_two_le_p: return {true, {{K::S, K::Dqq}, {K::Dpq}}};
    case Regime::q_le_p_le_two: return {false, {{K::S}, {K::Dqq, K::Dpq}}};
    default: return {false, {{K::S}, {K::Dqq}, {K::Dpq}}};
  }
}

inline double regime_norm(const FilteredSpace& sp, const RandomLqSequence& seq,
                          const RegimeNormSpec& spec, const SumNormOptions& opts = {}) {
  RegimeFormula formula = regime_formula(spec.regime);
  if (formula.top_is_max) {
    double best = 0.0;
    for (const auto& group : formula.groups) {
      double v;
      if (group.size() == 1) {
        v = component_norm(sp, seq, group.front(), spec.p, spec.q);
      } else {
        std::vector<std::vector<NormKind>> comps;
        for (NormKind k : group) comps.push_back({k});
        v = sum_norm(sp, seq, comps, spec.p, spec.q, opts).objective;
      }
      best = std::max(best, v);
    }
    return best;
  }
  return sum_norm(sp, seq, formula.groups, spec.p, spec.q, opts).objective;
}

// Remark-3.4 variant: the same norm on sequences supported on odd indices only.
inline double odd_regime_norm(const FilteredSpace& sp, const RandomLqSequence& seq,
                              const RegimeNormSpec& spec, const SumNormOptions& opts = {}) {
  for (std::size_t i = 0; i < seq.length(); i += 2)
    for (const LqVector& v : seq.entries[i])
      for (double x : v.values)
        require(x == 0.0, errc::even_index_nonzero, "even-index entries must vanish");
  return regime_norm(sp, seq, spec, opts);
}

} // namespace brlab
