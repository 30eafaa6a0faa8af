#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "brlab/norms.hpp"
#include "brlab/rng.hpp"

namespace brlab {

// Norming functional, in closed form: finite-dimensional L^q (1 < q < infinity) is
// smooth, so given x* in L^{q'}(S) there is an exact unit vector x in L^q(S) with
// <x, x*> = ||x*||_{q'}; no discretized approximation is needed.
inline LqVector duality_map(const FiniteMeasureSpace& s, const LqVector& x_star, double q_conj) {
  require(q_conj > 1.0 && std::isfinite(q_conj), errc::bad_exponent,
          "duality_map needs a conjugate exponent in (1, inf)");
  double nrm = lq_norm(s, x_star, q_conj);
  require(nrm > 0.0, errc::zero_vector, "duality_map of the zero vector");
  LqVector x(x_star.size(), 0.0);
  for (std::size_t j = 0; j < x_star.size(); ++j) {
    double v = x_star[j];
    if (v != 0.0)
      x[j] = (v > 0 ? 1.0 : -1.0) * std::pow(std::fabs(v) / nrm, q_conj - 1.0);
  }
  return x;
}

// sum_k E <f_k, g_k>
inline double sequence_pairing(const FilteredSpace& sp, const RandomLqSequence& f,
                               const RandomLqSequence& g) {
  require(f.length() == g.length() && f.n_points() == g.n_points(), errc::shape_mismatch,
          "pairing needs sequences of equal shape");
  check_shapes(sp, f);
  check_shapes(sp, g);
  double acc = 0.0;
  for (std::size_t k = 0; k < f.length(); ++k)
    for (std::size_t s = 0; s < sp.n_samples(); ++s)
      acc += sp.probs()[s] * pairing(f.target, f.entries[k][s], g.entries[k][s]);
  return acc;
}

// ( E s_q(f)^p )^(1/p) with s_q(f) = ( sum_k E_{k-1} ||f_k||^q )^(1/q).
// value_exponent selects the L^r(S) norm used on the values (default r = q).
inline double hsq_norm(const FilteredSpace& sp, const RandomLqSequence& seq, double p, double q,
                       double value_exponent = 0.0) {
  check_exponent(p);
  check_exponent(q);
  double r = value_exponent > 0.0 ? value_exponent : q;
  check_shapes(sp, seq);
  ScalarRV h(sp.n_samples(), 0.0);
  for (std::size_t k = 0; k < seq.length(); ++k) {
    ScalarRV u(sp.n_samples());
    for (std::size_t s = 0; s < sp.n_samples(); ++s)
      u[s] = std::pow(lq_norm(seq.target, seq.entries[k][s], r), q);
    ScalarRV cond = conditional_expectation(sp, u, seq.prev_level(k));
    for (std::size_t s = 0; s < sp.n_samples(); ++s) h[s] += cond[s];
  }
  double acc = 0.0;
  for (std::size_t s = 0; s < sp.n_samples(); ++s)
    acc += sp.probs()[s] * std::pow(h[s], p / q);
  return std::pow(acc, 1.0 / p);
}

// cumulative predictable sums s_q^k(f), per (entry, sample)
inline std::vector<ScalarRV> hsq_partial_sums(const FilteredSpace& sp, const RandomLqSequence& seq,
                                              double q, double value_exponent) {
  std::vector<ScalarRV> s_pow(seq.length(), ScalarRV(sp.n_samples(), 0.0));
  ScalarRV running(sp.n_samples(), 0.0);
  for (std::size_t k = 0; k < seq.length(); ++k) {
    ScalarRV u(sp.n_samples());
    for (std::size_t s = 0; s < sp.n_samples(); ++s)
      u[s] = std::pow(lq_norm(seq.target, seq.entries[k][s], value_exponent), q);
    ScalarRV cond = conditional_expectation(sp, u, seq.prev_level(k));
    for (std::size_t s = 0; s < sp.n_samples(); ++s) {
      running[s] += cond[s];
      s_pow[k][s] = running[s]; // this is s_q^k(f)^q, F_{k-1}-measurable
    }
  }
  return s_pow;
}

struct HsqSequence {
  RandomLqSequence seq;
  std::vector<ScalarRV> partial_sums_pow; // s_q^k(f)^q per entry and sample, nondecreasing in k
};

inline HsqSequence make_hsq_sequence(const FilteredSpace& sp, RandomLqSequence seq, double q,
                                     double value_exponent = 0.0) {
  double r = value_exponent > 0.0 ? value_exponent : q;
  HsqSequence out{std::move(seq), {}};
  out.partial_sums_pow = hsq_partial_sums(sp, out.seq, q, r);
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force dual norms: sup of <f, g> over the unit ball of a primal norm,
// by projected gradient ascent with random multistarts. The result is a lower
// bound certificate (the achieved f stays feasible), never an exact supremum claim.
// ---------------------------------------------------------------------------

struct DualNormOptions {
  int multistarts = 16;
  int iterations = 400;
  std::size_t dimension_cap = 64;
  std::uint64_t seed = 23;
};

struct DualNormResult {
  double value = 0.0;
  RandomLqSequence certificate;
  int iterations = 0;
  bool converged = false;
};

// sup <f,g> over {primal_norm(f) <= 1, f = structure(f)} rewritten as the convex
// program min primal_norm(f) over the affine slice {<f,g> = 1} intersected with the
// structural subspace; projected subgradient with finite-difference subgradients
// converges globally there, with no spurious stationary points.
inline DualNormResult
dual_norm_bruteforce(const FilteredSpace& sp, const RandomLqSequence& g,
                     const std::function<double(const RandomLqSequence&)>& primal_norm,
                     const std::function<RandomLqSequence(const RandomLqSequence&)>& structure,
                     const DualNormOptions& opts = {},
                     const RandomLqSequence* hint = nullptr) {
  std::size_t dim = g.length() * sp.n_samples() * g.n_points();
  require(dim <= opts.dimension_cap, errc::dimension_cap,
          "problem exceeds the brute-force dimension cap");

  DualNormResult best;
  best.certificate = g;

  // structured part of g drives the affine correction; if it vanishes, the pairing
  // is identically zero on the feasible set
  RandomLqSequence gs = structure(g);
  double gs_mass = sequence_pairing(sp, gs, gs);
  if (gs_mass <= 0.0) {
    best.converged = true;
    best.value = 0.0;
    return best;
  }

  auto project = [&](RandomLqSequence f) {
    f = structure(std::move(f));
    double c = (1.0 - sequence_pairing(sp, f, g)) / gs_mass;
    for (std::size_t k = 0; k < f.length(); ++k)
      for (std::size_t s = 0; s < sp.n_samples(); ++s)
        for (std::size_t j = 0; j < f.n_points(); ++j)
          f.entries[k][s][j] += c * gs.entries[k][s][j];
    return f;
  };

  auto fd_subgrad = [&](const RandomLqSequence& f, double scale) {
    std::vector<double> grad(dim, 0.0);
    RandomLqSequence probe = f;
    double h = 1e-6 * std::max(scale, 1e-6);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < f.length(); ++k)
      for (std::size_t s = 0; s < sp.n_samples(); ++s)
        for (std::size_t j = 0; j < f.n_points(); ++j, ++pos) {
          double orig = probe.entries[k][s][j];
          probe.entries[k][s][j] = orig + h;
          double up = primal_norm(probe);
          probe.entries[k][s][j] = orig - h;
          double down = primal_norm(probe);
          probe.entries[k][s][j] = orig;
          grad[pos] = (up - down) / (2.0 * h);
        }
    return grad;
  };

  double best_min = std::numeric_limits<double>::infinity();
  CounterRng root(opts.seed);

  auto descend = [&](RandomLqSequence f) {
    f = project(std::move(f));
    double cur = primal_norm(f);
    require(std::isfinite(cur), errc::solver_diverged, "primal norm not finite");
    RandomLqSequence local_best = f;
    double local_min = cur;
    double step0 = 0.5 * std::max(cur, 1e-9);
    for (int it = 1; it <= opts.iterations; ++it) {
      std::vector<double> grad = fd_subgrad(f, local_min);
      double gn = 0.0;
      for (double v : grad) gn += v * v;
      ++best.iterations;
      if (gn <= 1e-30) break;
      double step = step0 / (static_cast<double>(it) * std::sqrt(gn));
      std::size_t pos = 0;
      for (std::size_t k = 0; k < f.length(); ++k)
        for (std::size_t s = 0; s < sp.n_samples(); ++s)
          for (std::size_t j = 0; j < f.n_points(); ++j, ++pos)
            f.entries[k][s][j] -= step * grad[pos];
      f = project(std::move(f));
      double v = primal_norm(f);
      if (v < local_min) {
        local_min = v;
        local_best = f;
      }
    }
    // polish: shrinking steps, accept improvements only
    f = local_best;
    double step = 0.1 * std::max(local_min, 1e-9);
    for (int it = 0; it < opts.iterations / 2 && step > 1e-13 * std::max(local_min, 1e-9); ++it) {
      std::vector<double> grad = fd_subgrad(f, local_min);
      double gn = 0.0;
      for (double v : grad) gn += v * v;
      if (gn <= 1e-30) break;
      RandomLqSequence trial = f;
      std::size_t pos = 0;
      for (std::size_t k = 0; k < f.length(); ++k)
        for (std::size_t s = 0; s < sp.n_samples(); ++s)
          for (std::size_t j = 0; j < f.n_points(); ++j, ++pos)
            trial.entries[k][s][j] -= step / std::sqrt(gn) * grad[pos];
      trial = project(std::move(trial));
      double v = primal_norm(trial);
      ++best.iterations;
      if (v < local_min) {
        local_min = v;
        f = trial;
        local_best = trial;
      } else {
        step *= 0.5;
      }
    }
    if (local_min < best_min && local_min > 0.0) {
      best_min = local_min;
      best.value = 1.0 / local_min;
      best.certificate = scaled(local_best, 1.0 / local_min);
      best.converged = true;
    }
  };

  if (hint) descend(*hint);
  // the structured copy of g is the natural first start
  descend(gs);
  for (int ms = 0; ms < opts.multistarts; ++ms) {
    CounterRng rng = root.split(ms);
    RandomLqSequence f = g;
    for (std::size_t k = 0; k < f.length(); ++k)
      for (std::size_t s = 0; s < sp.n_samples(); ++s)
        for (std::size_t j = 0; j < f.n_points(); ++j) f.entries[k][s][j] = rng.next_normal();
    descend(std::move(f));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Near-extremal dual witness for the H^{s_q}_p pairing.
//
// For p <= q the closed-form construction h_k = v_k ||g_k||^{q'-1} P(g_k) with
// v_k = (s_{q'}^k(g))^{p'-q'} / ||g||^{p'-1} certifies pairing >= (q'/p') ||g||
// with ||h|| <= 1. For p > q the extremizer is only known non-constructively;
// we start from the same formula and refine by projected ascent until the
// q/p constant is certified.
// ---------------------------------------------------------------------------

struct WitnessResult {
  RandomLqSequence h;
  double h_norm = 0.0;   // hsq_norm(h, p, q)
  double pairing = 0.0;  // sum_k E <h_k, g_k>
  double g_norm = 0.0;   // hsq_norm(g, p', q') with L^{q'} values
  double certified_ratio = 0.0; // pairing / (h_norm * g_norm)
};

inline WitnessResult hsq_dual_witness(const FilteredSpace& sp, const RandomLqSequence& g,
                                      double p, double q, const DualNormOptions& opts = {}) {
  require(p > 1.0 && q > 1.0, errc::bad_exponent, "witness needs exponents in (1, inf)");
  double pc = conjugate_exponent(p);
  double qc = conjugate_exponent(q);
  double gnorm = hsq_norm(sp, g, pc, qc, qc);
  require(gnorm > 0.0, errc::zero_input, "dual witness of the zero sequence");

  std::vector<ScalarRV> s_pow = hsq_partial_sums(sp, g, qc, qc); // s_{q'}^k(g)^{q'}
  RandomLqSequence h = g;
  for (std::size_t k = 0; k < g.length(); ++k)
    for (std::size_t s = 0; s < sp.n_samples(); ++s) {
      double gk = lq_norm(g.target, g.entries[k][s], qc);
      if (gk == 0.0 || s_pow[k][s] <= 0.0) {
        h.entries[k][s] = LqVector(g.n_points(), 0.0);
        continue;
      }
      double v = std::pow(s_pow[k][s], (pc - qc) / qc) / std::pow(gnorm, pc - 1.0);
      LqVector dir = duality_map(g.target, g.entries[k][s], qc);
      h.entries[k][s] = (v * std::pow(gk, qc - 1.0)) * dir;
    }

  WitnessResult res;
  res.g_norm = gnorm;
  res.h = std::move(h);
  res.h_norm = hsq_norm(sp, res.h, p, q, q);
  res.pairing = sequence_pairing(sp, res.h, g);
  res.certified_ratio =
      res.h_norm > 0.0 ? res.pairing / (res.h_norm * res.g_norm) : 0.0;

  if (p > q) {
    // p > q: refine by ascent over the H^{s_q}_p unit ball, seeded by the formula
    double target = std::min(q / p, qc / pc);
    if (res.certified_ratio < target) {
      RandomLqSequence seed = res.h;
      if (res.h_norm > 0.0) seed = scaled(seed, 1.0 / res.h_norm);
      auto primal = [&](const RandomLqSequence& f) { return hsq_norm(sp, f, p, q, q); };
      auto adapt = [&](const RandomLqSequence& f) {
        RandomLqSequence out = f;
        for (std::size_t k = 0; k < f.length(); ++k)
          out.entries[k] = conditional_expectation(sp, f.entries[k], f.level(k));
        return out;
      };
      DualNormResult asc = dual_norm_bruteforce(sp, g, primal, adapt, opts, &seed);
      if (asc.converged) {
        res.h = asc.certificate;
        res.h_norm = primal(res.h);
        res.pairing = sequence_pairing(sp, res.h, g);
        res.certified_ratio = res.h_norm > 0.0 ? res.pairing / (res.h_norm * res.g_norm) : 0.0;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Reverse dual Doob: for 0 < p <= 1 and nonnegative f_n,
//   ( E | sum f_n |^p )^(1/p)  <=  p^{-1} ( E | sum E_n f_n |^p )^(1/p).
// ---------------------------------------------------------------------------

struct ReverseDualDoobResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline ReverseDualDoobResult reverse_dual_doob_check(const FilteredSpace& sp,
                                                     const std::vector<ScalarRV>& entries,
                                                     double p,
                                                     const std::vector<int>& level_map = {}) {
  require(p > 0.0 && p <= 1.0, errc::bad_exponent, "reverse dual Doob needs 0 < p <= 1");
  for (const ScalarRV& f : entries)
    for (double x : f) require(x >= 0.0, errc::negative_entry, "entries must be nonnegative");

  ScalarRV plain(sp.n_samples(), 0.0), conditioned(sp.n_samples(), 0.0);
  for (std::size_t n = 0; n < entries.size(); ++n) {
    int lv = level_map.empty() ? std::min<int>(static_cast<int>(n), sp.finest_level())
                               : level_map[n];
    ScalarRV en = conditional_expectation(sp, entries[n], lv);
    for (std::size_t s = 0; s < sp.n_samples(); ++s) {
      plain[s] += entries[n][s];
      conditioned[s] += en[s];
    }
  }
  ReverseDualDoobResult res;
  res.lhs = lp_moment(sp, plain, p);
  res.rhs = lp_moment(sp, conditioned, p) / p;
  res.holds = res.lhs <= res.rhs + 1e-12;
  return res;
}

// ---------------------------------------------------------------------------
// Sum/intersection duality on small plain vector couples:
//   (X ^ Y)* = X* + Y*  and  (X + Y)* = X* ^ Y*, isometrically.
// Checked numerically with lq-type norms, where the duals are again lq norms.
// ---------------------------------------------------------------------------

struct CoupleDualityReport {
  double intersection_dual = 0.0; // sup <f,g> over max(||f||_a, ||f||_b) <= 1
  double sum_of_duals = 0.0;      // inf ||g1||_{a'} + ||g2||_{b'} over g = g1+g2
  double sum_dual = 0.0;          // sup <f,g> over inf-decomposition ball of (a, b)
  double max_of_duals = 0.0;      // max(||g||_{a'}, ||g||_{b'})
  bool holds = false;
};

namespace detail {

// sup <f,g> over a norm ball of plain vectors, as 1 / min{N(f) : <f,g> = 1},
// by projected subgradient with finite-difference subgradients
inline double vector_dual_norm(const FiniteMeasureSpace& s, const LqVector& g,
                               const std::function<double(const std::vector<double>&)>& norm_fn,
                               std::size_t extra_copies = 1, int multistarts = 12,
                               int iterations = 500, std::uint64_t seed = 5) {
  // variables: extra_copies stacked vectors of g.size(); the pairing couples each
  // copy with g (used for sum-norm balls, where f = f1 + f2)
  std::size_t dim = g.size() * extra_copies;
  std::vector<double> gw(dim);
  for (std::size_t c = 0; c < extra_copies; ++c)
    for (std::size_t j = 0; j < g.size(); ++j) gw[c * g.size() + j] = s.weights[j] * g[j];
  double gmass = 0.0;
  for (double v : gw) gmass += v * v;
  if (gmass <= 0.0) return 0.0;

  auto project = [&](std::vector<double>& x) {
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) dot += x[d] * gw[d];
    double c = (1.0 - dot) / gmass;
    for (std::size_t d = 0; d < dim; ++d) x[d] += c * gw[d];
  };

  double best_min = std::numeric_limits<double>::infinity();
  CounterRng root(seed);
  for (int ms = 0; ms <= multistarts; ++ms) {
    std::vector<double> x(dim, 0.0);
    if (ms == 0) {
      for (std::size_t d = 0; d < dim; ++d) x[d] = gw[d];
    } else {
      CounterRng rng = root.split(ms);
      for (double& v : x) v = rng.next_normal();
    }
    project(x);
    double cur = norm_fn(x);
    double local = cur;
    double step0 = 0.5 * std::max(cur, 1e-9);
    std::vector<double> grad(dim), probe = x, best_x = x;
    for (int it = 1; it <= iterations; ++it) {
      double h = 1e-6 * std::max(local, 1e-6);
      for (std::size_t d = 0; d < dim; ++d) {
        double orig = probe[d];
        probe[d] = orig + h;
        double up = norm_fn(probe);
        probe[d] = orig - h;
        double down = norm_fn(probe);
        probe[d] = orig;
        grad[d] = (up - down) / (2.0 * h);
      }
      double gn = 0.0;
      for (double v : grad) gn += v * v;
      if (gn <= 1e-30) break;
      double step = step0 / (static_cast<double>(it) * std::sqrt(gn));
      for (std::size_t d = 0; d < dim; ++d) x[d] -= step * grad[d];
      project(x);
      double v = norm_fn(x);
      if (v < local) {
        local = v;
        best_x = x;
      }
      probe = x;
    }
    // polish around the incumbent
    x = best_x;
    probe = x;
    double step = 0.1 * std::max(local, 1e-9);
    for (int it = 0; it < iterations / 2 && step > 1e-13 * std::max(local, 1e-9); ++it) {
      double h = 1e-7 * std::max(local, 1e-6);
      for (std::size_t d = 0; d < dim; ++d) {
        double orig = probe[d];
        probe[d] = orig + h;
        double up = norm_fn(probe);
        probe[d] = orig - h;
        double down = norm_fn(probe);
        probe[d] = orig;
        grad[d] = (up - down) / (2.0 * h);
      }
      double gn = 0.0;
      for (double v : grad) gn += v * v;
      if (gn <= 1e-30) break;
      std::vector<double> trial = x;
      for (std::size_t d = 0; d < dim; ++d) trial[d] -= step / std::sqrt(gn) * grad[d];
      project(trial);
      double v = norm_fn(trial);
      if (v < local) {
        local = v;
        x = trial;
        best_x = trial;
        probe = x;
      } else {
        step *= 0.5;
      }
    }
    best_min = std::min(best_min, local);
  }
  return best_min > 0.0 ? 1.0 / best_min : 0.0;
}

} // namespace detail

inline CoupleDualityReport
sum_intersection_duality_check(const FiniteMeasureSpace& s, double a, double b, const LqVector& g,
                               double tol = 1e-6, std::size_t dimension_cap = 8) {
  require(g.size() <= dimension_cap, errc::dimension_cap, "couple check dimension cap exceeded");
  double ac = conjugate_exponent(a), bc = conjugate_exponent(b);
  CoupleDualityReport rep;

  if (lq_norm(s, g, 2.0) == 0.0) {
    rep.holds = true;
    return rep;
  }

  // dual of the intersection ball: N(f) = max(||f||_a, ||f||_b)
  rep.intersection_dual = detail::vector_dual_norm(
      s, g,
      [&](const std::vector<double>& x) {
        LqVector v(x);
        return std::max(lq_norm(s, v, a), lq_norm(s, v, b));
      },
      1);

  // inf decomposition of the dual norms by pattern search over g1 (g2 = g - g1)
  {
    LqVector g1(g.size(), 0.0);
    for (std::size_t j = 0; j < g.size(); ++j) g1[j] = 0.5 * g[j];
    auto objective = [&](const LqVector& x) {
      LqVector g2 = g;
      g2 -= x;
      return lq_norm(s, x, ac) + lq_norm(s, g2, bc);
    };
    double best = objective(g1);
    double h = 0.5 * (1.0 + lq_norm(s, g, 2.0));
    while (h > 1e-10) {
      bool improved = false;
      // full +-h cube over the (small) dimension
      std::size_t combos = 1;
      for (std::size_t j = 0; j < g.size(); ++j) combos *= 3;
      for (std::size_t c = 0; c < combos; ++c) {
        LqVector trial = g1;
        std::size_t rest = c;
        for (std::size_t j = 0; j < g.size(); ++j) {
          int off = static_cast<int>(rest % 3) - 1;
          rest /= 3;
          trial[j] += h * off;
        }
        double v = objective(trial);
        if (v < best - 1e-16) {
          best = v;
          g1 = trial;
          improved = true;
        }
      }
      if (!improved) h *= 0.5;
    }
    rep.sum_of_duals = best;
  }

  // the reverse pairing: sup <f1+f2, g> over the sum ball ||f1||_a + ||f2||_b <= 1
  rep.max_of_duals = std::max(lq_norm(s, g, ac), lq_norm(s, g, bc));
  rep.sum_dual = detail::vector_dual_norm(
      s, g,
      [&](const std::vector<double>& x) {
        LqVector f1(std::vector<double>(x.begin(), x.begin() + g.size()));
        LqVector f2(std::vector<double>(x.begin() + g.size(), x.end()));
        return lq_norm(s, f1, a) + lq_norm(s, f2, b);
      },
      2);

  rep.holds = std::fabs(rep.intersection_dual - rep.sum_of_duals) <=
                  tol * std::max(1.0, rep.sum_of_duals) &&
              std::fabs(rep.sum_dual - rep.max_of_duals) <= tol * std::max(1.0, rep.max_of_duals);
  return rep;
}

} // namespace brlab
