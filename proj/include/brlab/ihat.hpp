#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "brlab/random_measure.hpp"
#include "brlab/report.hpp"

namespace brlab {

// ---------------------------------------------------------------------------
// The I-hat norm family for predictable fields against a compensator:
//   S:   ( E || (int |F|^2 dnu)^(1/2) ||_q^p )^(1/p)
//   Dqq: ( E (int ||F||_q^q dnu)^(p/q) )^(1/p)
//   Dpq: ( E int ||F||_q^p dnu )^(1/p)
// and the same six-regime sum/intersection combination as for sequences.
// ---------------------------------------------------------------------------

struct IhatNorms {
  double S = 0.0;
  double Dqq = 0.0;
  double Dpq = 0.0;
};

namespace detail {

// per-path realized masses as one dense table (cells x marks)
inline std::vector<std::vector<double>> mass_table(const MarkedEventStream& stream,
                                                   const CompensatorDensity& comp) {
  std::size_t n = comp.grid.n_cells() * comp.n_marks;
  std::vector<std::vector<double>> out(stream.n_paths(), std::vector<double>(n, 0.0));
  for (std::size_t path = 0; path < stream.n_paths(); ++path)
    comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double m) {
      out[path][cell * comp.n_marks + mark] += m;
    });
  return out;
}

inline std::vector<LqVector> field_values_on_path(const PredictableField& F,
                                                  const MarkedEventStream& stream,
                                                  std::size_t n_cells, std::size_t path) {
  std::vector<LqVector> vals(n_cells * F.n_marks);
  for (std::size_t c = 0; c < n_cells; ++c)
    for (std::size_t k = 0; k < F.n_marks; ++k)
      vals[c * F.n_marks + k] =
          F.is_deterministic()
              ? F.deterministic[c * F.n_marks + k]
              : F.value(c, k, history_before(stream.paths[path], c));
  return vals;
}

} // namespace detail

inline IhatNorms ihat_component_norms(const PredictableField& F, const MarkedEventStream& stream,
                                      const CompensatorDensity& comp, double p, double q) {
  check_exponent(p);
  check_exponent(q);
  std::size_t n_cells = comp.grid.n_cells();
  std::size_t pts = F.target.size();
  auto masses = detail::mass_table(stream, comp);

  double accS = 0.0, accQQ = 0.0, accPQ = 0.0;
  for (std::size_t path = 0; path < stream.n_paths(); ++path) {
    std::vector<LqVector> vals = detail::field_values_on_path(F, stream, n_cells, path);
    LqVector sq(pts, 0.0);
    double u = 0.0, v = 0.0;
    for (std::size_t ck = 0; ck < n_cells * F.n_marks; ++ck) {
      double m = masses[path][ck];
      if (m == 0.0) continue;
      for (std::size_t j = 0; j < pts; ++j) sq[j] += m * vals[ck][j] * vals[ck][j];
      double n = lq_norm(F.target, vals[ck], q);
      u += m * std::pow(n, q);
      v += m * std::pow(n, p);
    }
    for (std::size_t j = 0; j < pts; ++j) sq[j] = std::sqrt(sq[j]);
    double w = stream.path_weights[path];
    accS += w * std::pow(lq_norm(F.target, sq, q), p);
    accQQ += w * std::pow(u, p / q);
    accPQ += w * v;
  }
  IhatNorms out;
  out.S = std::pow(accS, 1.0 / p);
  out.Dqq = std::pow(accQQ, 1.0 / p);
  out.Dpq = std::pow(accPQ, 1.0 / p);
  return out;
}

// ---------------------------------------------------------------------------
// Sum norms over deterministic field decompositions (the solver mirrors the
// sequence-space one: projected subgradient plus shrinking-step polish).
// ---------------------------------------------------------------------------

namespace detail {

struct FieldNormEvaluator {
  const MarkedEventStream* stream;
  const CompensatorDensity* comp;
  const std::vector<std::vector<double>>* masses;
  FiniteMeasureSpace target;
  std::size_t n_cells, n_marks, pts;
  double p, q;

  std::size_t dim() const { return n_cells * n_marks * pts; }

  double value(NormKind kind, const std::vector<double>& flat) const {
    double acc = 0.0;
    for (std::size_t path = 0; path < stream->n_paths(); ++path) {
      double w = stream->path_weights[path];
      if (kind == NormKind::S) {
        std::vector<double> sq(pts, 0.0);
        for (std::size_t ck = 0; ck < n_cells * n_marks; ++ck) {
          double m = (*masses)[path][ck];
          if (m == 0.0) continue;
          const double* x = &flat[ck * pts];
          for (std::size_t j = 0; j < pts; ++j) sq[j] += m * x[j] * x[j];
        }
        double r = 0.0;
        for (std::size_t j = 0; j < pts; ++j)
          r += target.weights[j] * std::pow(sq[j], q / 2.0);
        acc += w * std::pow(r, p / q);
      } else {
        double u = 0.0;
        for (std::size_t ck = 0; ck < n_cells * n_marks; ++ck) {
          double m = (*masses)[path][ck];
          if (m == 0.0) continue;
          const double* x = &flat[ck * pts];
          double nq = 0.0;
          for (std::size_t j = 0; j < pts; ++j)
            nq += target.weights[j] * std::pow(std::fabs(x[j]), q);
          double n = std::pow(nq, 1.0 / q);
          u += m * std::pow(n, kind == NormKind::Dqq ? q : p);
        }
        acc += w * (kind == NormKind::Dqq ? std::pow(u, p / q) : u);
      }
    }
    return std::pow(acc, 1.0 / p);
  }

  std::vector<double> grad(NormKind kind, const std::vector<double>& flat, double val) const {
    std::vector<double> g(dim(), 0.0);
    if (val <= 0.0) return g;
    for (std::size_t path = 0; path < stream->n_paths(); ++path) {
      double w = stream->path_weights[path];
      if (kind == NormKind::S) {
        std::vector<double> sq(pts, 0.0);
        for (std::size_t ck = 0; ck < n_cells * n_marks; ++ck) {
          double m = (*masses)[path][ck];
          if (m == 0.0) continue;
          const double* x = &flat[ck * pts];
          for (std::size_t j = 0; j < pts; ++j) sq[j] += m * x[j] * x[j];
        }
        double r = 0.0;
        for (std::size_t j = 0; j < pts; ++j)
          r += target.weights[j] * std::pow(sq[j], q / 2.0);
        if (r <= 0.0) continue;
        double outer = w * std::pow(r, p / q - 1.0);
        for (std::size_t ck = 0; ck < n_cells * n_marks; ++ck) {
          double m = (*masses)[path][ck];
          if (m == 0.0) continue;
          const double* x = &flat[ck * pts];
          for (std::size_t j = 0; j < pts; ++j)
            if (x[j] != 0.0 && sq[j] > 0.0)
              g[ck * pts + j] += outer * target.weights[j] *
                                 std::pow(sq[j], q / 2.0 - 1.0) * m * x[j];
        }
      } else {
        double u = 0.0;
        std::vector<double> nq_cache(n_cells * n_marks, 0.0);
        for (std::size_t ck = 0; ck < n_cells * n_marks; ++ck) {
          double m = (*masses)[path][ck];
          if (m == 0.0) continue;
          const double* x = &flat[ck * pts];
          double nq = 0.0;
          for (std::size_t j = 0; j < pts; ++j)
            nq += target.weights[j] * std::pow(std::fabs(x[j]), q);
          nq_cache[ck] = std::pow(nq, 1.0 / q);
          u += m * std::pow(nq_cache[ck], kind == NormKind::Dqq ? q : p);
        }
        double outer = kind == NormKind::Dqq ? w * std::pow(u, p / q - 1.0) : w;
        if (kind == NormKind::Dqq && u <= 0.0) continue;
        for (std::size_t ck = 0; ck < n_cells * n_marks; ++ck) {
          double m = (*masses)[path][ck];
          if (m == 0.0) continue;
          const double* x = &flat[ck * pts];
          double scale = kind == NormKind::Dqq
                             ? 1.0
                             : safe_pow(nq_cache[ck], p - q);
          for (std::size_t j = 0; j < pts; ++j)
            if (x[j] != 0.0)
              g[ck * pts + j] += outer * m * scale * target.weights[j] *
                                 safe_pow(std::fabs(x[j]), q - 1.0) * (x[j] > 0 ? 1.0 : -1.0);
        }
      }
    }
    double factor = safe_pow(val, 1.0 - p);
    for (double& x : g) x *= factor;
    return g;
  }
};

} // namespace detail

struct IhatRegimeResult {
  IhatNorms components;
  double value = 0.0;
};

// regime value of a deterministic field, reusing the six-regime structure
inline IhatRegimeResult ihat_regime_norm(const PredictableField& F,
                                         const MarkedEventStream& stream,
                                         const CompensatorDensity& comp,
                                         const RegimeNormSpec& spec,
                                         const SumNormOptions& opts = {}) {
  require(F.is_deterministic(), errc::config_invalid,
          "regime combinations decompose deterministic fields");
  auto masses = detail::mass_table(stream, comp);
  detail::FieldNormEvaluator ev{&stream, &comp,       &masses,
                                F.target, comp.grid.n_cells(), comp.n_marks,
                                F.target.size(), spec.p, spec.q};

  std::vector<double> zflat(ev.dim());
  for (std::size_t ck = 0; ck < ev.n_cells * ev.n_marks; ++ck)
    for (std::size_t j = 0; j < ev.pts; ++j)
      zflat[ck * ev.pts + j] = F.deterministic[ck][j];

  IhatRegimeResult out;
  out.components.S = ev.value(NormKind::S, zflat);
  out.components.Dqq = ev.value(NormKind::Dqq, zflat);
  out.components.Dpq = ev.value(NormKind::Dpq, zflat);

  auto group_value = [&](const std::vector<NormKind>& kinds, const std::vector<double>& x) {
    double best = 0.0;
    for (NormKind k : kinds) best = std::max(best, ev.value(k, x));
    return best;
  };
  auto group_grad = [&](const std::vector<NormKind>& kinds, const std::vector<double>& x) {
    NormKind which = kinds.front();
    double best = -1.0;
    for (NormKind k : kinds) {
      double v = ev.value(k, x);
      if (v > best) {
        best = v;
        which = k;
      }
    }
    return ev.grad(which, x, best);
  };

  auto solve_sum = [&](const std::vector<std::vector<NormKind>>& groups) {
    const std::size_t m = groups.size();
    if (m == 1) return group_value(groups[0], zflat);
    const std::size_t dim = ev.dim();
    std::vector<std::vector<std::vector<double>>> starts;
    for (std::size_t host = 0; host < m; ++host) {
      std::vector<std::vector<double>> parts(m, std::vector<double>(dim, 0.0));
      parts[host] = zflat;
      starts.push_back(parts);
    }
    CounterRng rng(opts.seed);
    for (int r = 0; r < opts.random_restarts; ++r) {
      std::vector<std::vector<double>> parts(m, std::vector<double>(dim, 0.0));
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t d = 0; d < dim; ++d) parts[k][d] = zflat[d] / static_cast<double>(m);
      for (std::size_t k = 0; k + 1 < m; ++k)
        for (std::size_t d = 0; d < dim; ++d) {
          double bump = 0.25 * std::fabs(zflat[d]) * rng.next_normal();
          parts[k][d] += bump;
          parts[m - 1][d] -= bump;
        }
      starts.push_back(parts);
    }

    auto restore = [&](std::vector<std::vector<double>>& parts) {
      for (std::size_t d = 0; d < dim; ++d) {
        double rest = 0.0;
        for (std::size_t k = 1; k < m; ++k) rest += parts[k][d];
        parts[0][d] = zflat[d] - rest;
      }
    };
    auto objective = [&](const std::vector<std::vector<double>>& parts) {
      double total = 0.0;
      for (std::size_t k = 0; k < m; ++k) total += group_value(groups[k], parts[k]);
      require(std::isfinite(total), errc::solver_diverged, "field sum norm diverged");
      return total;
    };

    double best = std::numeric_limits<double>::infinity();
    for (auto& start : starts) {
      auto parts = start;
      restore(parts);
      double cur = objective(parts);
      double incumbent = cur;
      auto incumbent_parts = parts;
      double step0 = 0.5 * std::max(cur, 1e-12);
      for (int it = 1; it <= opts.iterations; ++it) {
        std::vector<double> g0 = group_grad(groups[0], parts[0]);
        std::vector<std::vector<double>> dir(m - 1, std::vector<double>(dim));
        double norm2 = 0.0;
        for (std::size_t k = 1; k < m; ++k) {
          std::vector<double> gk = group_grad(groups[k], parts[k]);
          for (std::size_t d = 0; d < dim; ++d) {
            dir[k - 1][d] = gk[d] - g0[d];
            norm2 += dir[k - 1][d] * dir[k - 1][d];
          }
        }
        if (norm2 <= 1e-30) break;
        double step = step0 / (static_cast<double>(it) * std::sqrt(norm2));
        for (std::size_t k = 1; k < m; ++k)
          for (std::size_t d = 0; d < dim; ++d) parts[k][d] -= step * dir[k - 1][d];
        restore(parts);
        double v = objective(parts);
        if (v < incumbent) {
          incumbent = v;
          incumbent_parts = parts;
        }
      }
      // shrinking-step polish
      parts = incumbent_parts;
      double step = 0.25 * std::max(incumbent, 1e-12);
      for (int it = 0; it < opts.polish_iterations && step > 1e-14; ++it) {
        std::vector<double> g0 = group_grad(groups[0], parts[0]);
        std::vector<std::vector<double>> dir(m - 1, std::vector<double>(dim));
        double norm2 = 0.0;
        for (std::size_t k = 1; k < m; ++k) {
          std::vector<double> gk = group_grad(groups[k], parts[k]);
          for (std::size_t d = 0; d < dim; ++d) {
            dir[k - 1][d] = gk[d] - g0[d];
            norm2 += dir[k - 1][d] * dir[k - 1][d];
          }
        }
        if (norm2 <= 1e-30) break;
        auto trial = parts;
        for (std::size_t k = 1; k < m; ++k)
          for (std::size_t d = 0; d < dim; ++d)
            trial[k][d] -= step / std::sqrt(norm2) * dir[k - 1][d];
        restore(trial);
        double v = objective(trial);
        if (v < incumbent) {
          incumbent = v;
          parts = trial;
        } else {
          step *= 0.5;
        }
      }
      best = std::min(best, incumbent);
    }
    return best;
  };

  RegimeFormula formula = regime_formula(spec.regime);
  if (formula.top_is_max) {
    double best = 0.0;
    for (const auto& group : formula.groups) {
      double v;
      if (group.size() == 1) {
        v = group_value(group, zflat);
      } else {
        std::vector<std::vector<NormKind>> singletons;
        for (NormKind k : group) singletons.push_back({k});
        v = solve_sum(singletons);
      }
      best = std::max(best, v);
    }
    out.value = best;
  } else {
    out.value = solve_sum(formula.groups);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem-level harness: moment of the compensated integral against the regime
// value, with both the endpoint and the running-sup variants.
// ---------------------------------------------------------------------------

struct RandomMeasureEquivConfig {
  double p = 2.0;
  double q = 2.0;
  double horizon = 1.0;
  std::size_t grid_n = 16;
  std::size_t n_marks = 2;
  double rate = 1.0;
  bool cox = false;      // history-counting intensity instead of a constant one
  std::size_t n_paths = 256;
  std::size_t n_instances = 20;
  std::uint64_t seed = 1;
  SumNormOptions solver{150, 100, 1, 17}; // report-grade solver budget
};

struct RandomMeasureEquivReports {
  RatioReport endpoint;
  RatioReport running_sup;
};

inline RandomMeasureEquivReports mainintranmeas_report(const RandomMeasureEquivConfig& cfg) {
  RegimeNormSpec spec(cfg.p, cfg.q);
  RandomMeasureEquivReports out;
  for (RatioReport* rep : {&out.endpoint, &out.running_sup}) {
    rep->experiment = "random-measure-equivalence";
    rep->p = cfg.p;
    rep->q = cfg.q;
    rep->regime = regime_name(spec.regime);
    rep->seed = cfg.seed;
  }
  out.endpoint.experiment += "-end";
  out.running_sup.experiment += "-sup";

  CounterRng root(cfg.seed);
  std::vector<RatioRow> end_rows(cfg.n_instances), sup_rows(cfg.n_instances);
  parallel_for(cfg.n_instances, [&](std::size_t inst) {
    CounterRng rng = root.split(inst);
    MarkSpace marks(std::vector<double>(cfg.n_marks, 1.0));
    SimulatedMeasure sim;
    if (cfg.cox) {
      CoxIntensity intensity;
      intensity.bound = 2.0 * cfg.rate + 1.0;
      double rate = cfg.rate;
      intensity.rate = [rate](std::size_t, const std::vector<Event>& hist) {
        return rate * (1.0 + std::min<double>(static_cast<double>(hist.size()), 1.0));
      };
      sim = simulate_cox_rm(cfg.horizon, cfg.grid_n, marks, intensity, cfg.n_paths,
                            rng.next_u64());
    } else {
      sim = simulate_poisson_rm(cfg.horizon, cfg.grid_n, marks, cfg.rate, cfg.n_paths,
                                rng.next_u64());
    }

    // random deterministic scalar field
    PredictableField F;
    F.target = FiniteMeasureSpace({1.0});
    F.n_marks = cfg.n_marks;
    F.deterministic.resize(cfg.grid_n * cfg.n_marks);
    for (auto& v : F.deterministic) v = LqVector({rng.next_normal()});

    // running integrals over grid boundaries
    double sup_acc = 0.0, end_acc = 0.0;
    for (std::size_t path = 0; path < sim.stream.n_paths(); ++path) {
      std::vector<double> cell_drift(cfg.grid_n, 0.0);
      sim.compensator.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double m) {
        cell_drift[cell] += m * F.deterministic[cell * cfg.n_marks + mark][0];
      });
      double acc = 0.0, peak = 0.0;
      std::size_t evi = 0;
      const auto& evs = sim.stream.paths[path];
      for (std::size_t c = 0; c < cfg.grid_n; ++c) {
        while (evi < evs.size() && evs[evi].cell == c) {
          acc += F.deterministic[c * cfg.n_marks + evs[evi].mark][0];
          ++evi;
        }
        acc -= cell_drift[c];
        peak = std::max(peak, std::fabs(acc));
      }
      double w = sim.stream.path_weights[path];
      sup_acc += w * std::pow(peak, cfg.p);
      end_acc += w * std::pow(std::fabs(acc), cfg.p);
    }
    double lhs_sup = std::pow(sup_acc, 1.0 / cfg.p);
    double lhs_end = std::pow(end_acc, 1.0 / cfg.p);

    IhatRegimeResult rhs = ihat_regime_norm(F, sim.stream, sim.compensator, spec, cfg.solver);
    auto make_row = [&](double lhs) {
      RatioRow row;
      row.instance_id = inst;
      row.lhs = lhs;
      row.rhs = rhs.value;
      if (lhs == 0.0 && rhs.value == 0.0)
        row.skipped = true;
      else
        row.ratio = lhs / rhs.value;
      return row;
    };
    end_rows[inst] = make_row(lhs_end);
    sup_rows[inst] = make_row(lhs_sup);
  });
  out.endpoint.rows = std::move(end_rows);
  out.running_sup.rows = std::move(sup_rows);
  return out;
}

} // namespace brlab
