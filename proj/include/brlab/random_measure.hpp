#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "brlab/errors.hpp"
#include "brlab/measure_space.hpp"
#include "brlab/norms.hpp"
#include "brlab/parallel.hpp"
#include "brlab/rng.hpp"

namespace brlab {

// ---------------------------------------------------------------------------
// Integer-valued random measures on a time grid with a finite mark space.
//
// Model: each cell hosts at most one event. Within a cell the event arrives in
// continuous time with the cell's (predictable) hazard; the compensator accrues
// at the hazard rate and stops at the jump. This stopped compensator is the true
// one, so martingale identities hold exactly, not just up to O(dt).
// ---------------------------------------------------------------------------

struct MarkSpace {
  std::vector<double> weights; // m_k > 0

  MarkSpace() = default;
  explicit MarkSpace(std::vector<double> w) : weights(std::move(w)) {
    require(!weights.empty(), errc::config_invalid, "mark space must be nonempty");
    for (double m : weights)
      require(m > 0.0 && std::isfinite(m), errc::config_invalid, "mark weights must be positive");
  }
  std::size_t size() const { return weights.size(); }
};

struct TimeGrid {
  std::vector<double> bounds; // strictly increasing, bounds.front() == 0

  TimeGrid() = default;
  TimeGrid(double horizon, std::size_t n_cells) {
    bounds.resize(n_cells + 1);
    for (std::size_t c = 0; c <= n_cells; ++c)
      bounds[c] = horizon * static_cast<double>(c) / static_cast<double>(n_cells);
  }
  std::size_t n_cells() const { return bounds.empty() ? 0 : bounds.size() - 1; }
  double width(std::size_t c) const { return bounds[c + 1] - bounds[c]; }
  double horizon() const { return bounds.back(); }
};

struct Event {
  double time;      // absolute time, strictly inside its cell
  std::size_t cell;
  std::size_t mark;
};

struct MarkedEventStream {
  TimeGrid grid;
  std::size_t n_marks = 1;
  std::vector<std::vector<Event>> paths; // sorted by time; at most one event per cell
  std::vector<double> path_weights;      // exact probabilities (enumeration) or 1/n (MC)
  bool rate_warning = false;             // cell occupancy left the thin-cell regime

  std::size_t n_paths() const { return paths.size(); }
};

// events strictly before the given cell; predictable fields may read only these
inline std::vector<Event> history_before(const std::vector<Event>& evs, std::size_t cell) {
  std::vector<Event> out;
  for (const Event& e : evs) {
    if (e.cell >= cell) break;
    out.push_back(e);
  }
  return out;
}

// Per-(path, cell, mark) realized compensator masses. A base table carries the
// deterministic full-cell accrual; per-path overrides replace it wherever the
// accrual was stopped by an event (and everywhere, for path-dependent intensities).
struct CompensatorDensity {
  TimeGrid grid;
  std::size_t n_marks = 1;
  std::vector<double> base; // size n_cells*n_marks, or empty when fully path-dependent
  struct Cell {
    std::size_t cell;
    std::size_t mark;
    double mass;
  };
  std::vector<std::vector<Cell>> overrides; // per path, sorted by (cell, mark)

  double base_mass(std::size_t cell, std::size_t mark) const {
    return base.empty() ? 0.0 : base[cell * n_marks + mark];
  }

  // realized mass of one (cell, mark) on a path
  double mass(std::size_t path, std::size_t cell, std::size_t mark) const {
    for (const Cell& c : overrides[path])
      if (c.cell == cell && c.mark == mark) return c.mass;
    return base_mass(cell, mark);
  }

  template <typename Fn> // Fn(cell, mark, mass)
  void for_each_mass(std::size_t path, Fn&& fn) const {
    if (base.empty()) {
      for (const Cell& c : overrides[path]) fn(c.cell, c.mark, c.mass);
      return;
    }
    std::size_t idx = 0;
    const auto& ov = overrides[path];
    for (std::size_t cell = 0; cell < grid.n_cells(); ++cell)
      for (std::size_t mark = 0; mark < n_marks; ++mark) {
        if (idx < ov.size() && ov[idx].cell == cell && ov[idx].mark == mark) {
          fn(cell, mark, ov[idx].mass);
          ++idx;
        } else {
          fn(cell, mark, base[cell * n_marks + mark]);
        }
      }
  }

  double total_mass(std::size_t path) const {
    double acc = 0.0;
    for_each_mass(path, [&](std::size_t, std::size_t, double m) { acc += m; });
    return acc;
  }
};

// Predictable integrand: value per (cell, mark), optionally through the path's
// strictly-prior event history. Deterministic fields take the fast path everywhere.
struct PredictableField {
  FiniteMeasureSpace target;
  std::size_t n_marks = 1;
  std::vector<LqVector> deterministic;                 // size n_cells*n_marks when set
  std::function<LqVector(std::size_t cell, std::size_t mark,
                         const std::vector<Event>& history)>
      eval; // history = events strictly before the cell

  bool is_deterministic() const { return !deterministic.empty(); }

  LqVector value(std::size_t cell, std::size_t mark, const std::vector<Event>& history) const {
    if (is_deterministic()) return deterministic[cell * n_marks + mark];
    require(static_cast<bool>(eval), errc::not_predictable, "field has no evaluator");
    return eval(cell, mark, history);
  }
};

inline PredictableField constant_field(const FiniteMeasureSpace& target, const TimeGrid& grid,
                                       std::size_t n_marks, const LqVector& value) {
  PredictableField f;
  f.target = target;
  f.n_marks = n_marks;
  f.deterministic.assign(grid.n_cells() * n_marks, value);
  return f;
}

inline PredictableField scalar_constant_field(const TimeGrid& grid, std::size_t n_marks,
                                              double value) {
  return constant_field(FiniteMeasureSpace({1.0}), grid, n_marks, LqVector({value}));
}

// Path-dependent scalar intensity, structurally predictable: the callback sees only
// events strictly before the cell.
struct CoxIntensity {
  double bound = 1.0;
  std::function<double(std::size_t cell, const std::vector<Event>& history)> rate;

  double value(std::size_t cell, const std::vector<Event>& history) const {
    double r = rate(cell, history);
    require(r >= 0.0 && r <= bound + 1e-12 && std::isfinite(r), errc::intensity_not_predictable,
            "intensity violates its declared bound");
    return r;
  }
};

namespace detail {

// moments of the stopped accrual time tau ^ dt for total hazard density R:
//   no event: tau ^ dt = dt exactly;
//   event:    tau | event ~ truncated exponential on [0, dt].
struct CellClock {
  double pi;       // P(event) = 1 - exp(-R dt)
  double mean_evt; // E[tau | event]
  double var_evt;  // Var[tau | event]
};

inline CellClock cell_clock(double rate_density, double dt) {
  CellClock c;
  if (rate_density <= 0.0) {
    c.pi = 0.0;
    c.mean_evt = 0.0;
    c.var_evt = 0.0;
    return c;
  }
  double x = rate_density * dt;
  double pi = -std::expm1(-x);
  double core; // pi - x e^{-x}, prone to cancellation for small x
  if (x < 1e-3) {
    core = x * x * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
  } else {
    core = pi - x * std::exp(-x);
  }
  double e1 = core / rate_density; // E[tau 1_event]
  double e2;                       // E[tau^2 1_event]
  if (x < 1e-3) {
    e2 = dt * dt * x * (1.0 / 3.0 - x / 4.0 + x * x / 10.0 - x * x * x / 36.0);
  } else {
    e2 = (2.0 * core / rate_density - x * dt * std::exp(-x)) / rate_density;
  }
  c.pi = pi;
  c.mean_evt = e1 / pi;
  c.var_evt = e2 / pi - c.mean_evt * c.mean_evt;
  return c;
}

// truncated exponential draw on [0, dt]
inline double sample_cell_time(double rate_density, double dt, double u) {
  double pi = -std::expm1(-rate_density * dt);
  double t = -std::log1p(-u * pi) / rate_density;
  return std::min(t, dt);
}

} // namespace detail

struct SimulatedMeasure {
  MarkedEventStream stream;
  CompensatorDensity compensator;
};

// Homogeneous case: constant rate lambda, cell hazards lambda * m_k * dt. Sampling
// uses the exact equivalent binomial shortcut (cells are iid), so large path counts
// on fine grids stay cheap.
inline SimulatedMeasure simulate_poisson_rm(double horizon, std::size_t grid_n,
                                            const MarkSpace& marks, double rate,
                                            std::size_t n_paths, std::uint64_t seed) {
  require(rate >= 0.0 && std::isfinite(rate), errc::bad_rate, "rate must be nonnegative");
  require(grid_n >= 1 && horizon > 0.0, errc::config_invalid, "invalid grid");

  SimulatedMeasure out;
  out.stream.grid = TimeGrid(horizon, grid_n);
  out.stream.n_marks = marks.size();
  out.compensator.grid = out.stream.grid;
  out.compensator.n_marks = marks.size();

  double mark_total = 0.0;
  for (double m : marks.weights) mark_total += m;
  double dt = out.stream.grid.width(0);
  double density = rate * mark_total; // total hazard per unit time
  out.stream.rate_warning = density * dt > 0.1;

  out.compensator.base.resize(grid_n * marks.size());
  for (std::size_t c = 0; c < grid_n; ++c)
    for (std::size_t k = 0; k < marks.size(); ++k)
      out.compensator.base[c * marks.size() + k] = rate * marks.weights[k] * dt;

  double pi = density > 0.0 ? -std::expm1(-density * dt) : 0.0;
  out.stream.paths.resize(n_paths);
  out.stream.path_weights.assign(n_paths, 1.0 / static_cast<double>(n_paths));
  out.compensator.overrides.resize(n_paths);

  CounterRng root(seed);
  parallel_for(n_paths, [&](std::size_t path) {
    CounterRng rng = root.split(path);
    if (pi <= 0.0) return;
    // binomial count by inversion (cells are iid Bernoulli(pi))
    double u = rng.next_double();
    double logq = std::log1p(-pi);
    double pmf = std::exp(static_cast<double>(grid_n) * logq);
    double cdf = pmf;
    std::size_t count = 0;
    while (u > cdf && count < grid_n) {
      pmf *= (static_cast<double>(grid_n - count) / static_cast<double>(count + 1)) *
             (pi / (1.0 - pi));
      ++count;
      cdf += pmf;
    }
    if (count == 0) return;
    // distinct occupied cells, uniform
    std::vector<std::size_t> cells;
    cells.reserve(count);
    while (cells.size() < count) {
      std::size_t c = static_cast<std::size_t>(rng.next_below(grid_n));
      if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
    }
    std::sort(cells.begin(), cells.end());
    auto& evs = out.stream.paths[path];
    auto& ovs = out.compensator.overrides[path];
    for (std::size_t c : cells) {
      // mark by weight, arrival by the truncated within-cell clock
      double pick = rng.next_double() * mark_total;
      std::size_t mark = 0;
      double acc = marks.weights[0];
      while (pick > acc && mark + 1 < marks.size()) acc += marks.weights[++mark];
      double tau = detail::sample_cell_time(density, dt, rng.next_double());
      evs.push_back({out.stream.grid.bounds[c] + tau, c, mark});
      for (std::size_t k = 0; k < marks.size(); ++k)
        ovs.push_back({c, k, rate * marks.weights[k] * tau});
    }
  });
  return out;
}

// Path-dependent intensity; cells are processed sequentially per path.
inline SimulatedMeasure simulate_cox_rm(double horizon, std::size_t grid_n,
                                        const MarkSpace& marks, const CoxIntensity& intensity,
                                        std::size_t n_paths, std::uint64_t seed) {
  require(grid_n >= 1 && horizon > 0.0, errc::config_invalid, "invalid grid");
  SimulatedMeasure out;
  out.stream.grid = TimeGrid(horizon, grid_n);
  out.stream.n_marks = marks.size();
  out.compensator.grid = out.stream.grid;
  out.compensator.n_marks = marks.size();
  out.stream.paths.resize(n_paths);
  out.stream.path_weights.assign(n_paths, 1.0 / static_cast<double>(n_paths));
  out.compensator.overrides.resize(n_paths);

  double mark_total = 0.0;
  for (double m : marks.weights) mark_total += m;
  double dt = out.stream.grid.width(0);
  bool warn = false;

  CounterRng root(seed);
  parallel_for(n_paths, [&](std::size_t path) {
    CounterRng rng = root.split(path);
    auto& evs = out.stream.paths[path];
    auto& ovs = out.compensator.overrides[path];
    for (std::size_t c = 0; c < grid_n; ++c) {
      double r = intensity.value(c, evs);
      double density = r * mark_total;
      if (density * dt > 0.1) warn = true;
      double pi = density > 0.0 ? -std::expm1(-density * dt) : 0.0;
      bool event = rng.next_double() < pi;
      double tau = event ? detail::sample_cell_time(density, dt, rng.next_double()) : dt;
      for (std::size_t k = 0; k < marks.size(); ++k)
        ovs.push_back({c, k, r * marks.weights[k] * tau});
      if (event) {
        double pick = rng.next_double() * mark_total;
        std::size_t mark = 0;
        double acc = marks.weights[0];
        while (pick > acc && mark + 1 < marks.size()) acc += marks.weights[++mark];
        evs.push_back({out.stream.grid.bounds[c] + tau, c, mark});
      }
    }
  });
  out.stream.rate_warning = warn;
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration of the cell/mark outcome tree for a Cox intensity.
// Per-cell arrival positions are never enumerated; their closed-form moments
// enter the exact identities instead.
// ---------------------------------------------------------------------------

struct EnumeratedMeasure {
  TimeGrid grid;
  MarkSpace marks;
  // outcome = one event pattern; per cell: mark index + 1, or 0 for no event
  struct Outcome {
    double prob;
    std::vector<std::size_t> pattern;
    std::vector<double> rate; // realized intensity per cell (predictable)
  };
  std::vector<Outcome> outcomes;
  double mark_total = 0.0;

  std::vector<Event> events_of(const Outcome& o) const {
    std::vector<Event> evs;
    for (std::size_t c = 0; c < o.pattern.size(); ++c)
      if (o.pattern[c] > 0) {
        // nominal time label at the cell midpoint; exact laws never use it
        evs.push_back({grid.bounds[c] + 0.5 * grid.width(c), c, o.pattern[c] - 1});
      }
    return evs;
  }
};

inline EnumeratedMeasure enumerate_cox_rm(double horizon, std::size_t grid_n,
                                          const MarkSpace& marks, const CoxIntensity& intensity) {
  require(grid_n >= 1 && horizon > 0.0, errc::config_invalid, "invalid grid");
  EnumeratedMeasure out;
  out.grid = TimeGrid(horizon, grid_n);
  out.marks = marks;
  for (double m : marks.weights) out.mark_total += m;

  std::size_t combos = 1;
  for (std::size_t c = 0; c < grid_n; ++c) {
    combos *= marks.size() + 1;
    require(combos <= 200000, errc::dimension_cap, "enumerated outcome tree too large");
  }
  std::vector<std::size_t> pattern(grid_n, 0);
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    for (std::size_t c = 0; c < grid_n; ++c) {
      pattern[c] = rest % (marks.size() + 1);
      rest /= marks.size() + 1;
    }
    EnumeratedMeasure::Outcome o;
    o.pattern = pattern;
    o.prob = 1.0;
    o.rate.resize(grid_n);
    std::vector<Event> history;
    for (std::size_t c = 0; c < grid_n; ++c) {
      double r = intensity.value(c, history);
      o.rate[c] = r;
      double density = r * out.mark_total;
      double dt = out.grid.width(c);
      double pi = density > 0.0 ? -std::expm1(-density * dt) : 0.0;
      if (pattern[c] == 0) {
        o.prob *= 1.0 - pi;
      } else {
        std::size_t mark = pattern[c] - 1;
        o.prob *= pi * (r * marks.weights[mark] / std::max(density, 1e-300));
        history.push_back({out.grid.bounds[c] + 0.5 * dt, c, mark});
      }
    }
    if (o.prob > 0.0) out.outcomes.push_back(std::move(o));
  }
  return out;
}

// realize an EnumeratedMeasure as (stream, compensator) whose path weights are the
// exact outcome probabilities and whose masses are the conditional mean accruals
inline SimulatedMeasure realize_enumeration(const EnumeratedMeasure& em) {
  SimulatedMeasure out;
  out.stream.grid = em.grid;
  out.stream.n_marks = em.marks.size();
  out.compensator.grid = em.grid;
  out.compensator.n_marks = em.marks.size();
  for (const auto& o : em.outcomes) {
    out.stream.paths.push_back(em.events_of(o));
    out.stream.path_weights.push_back(o.prob);
    std::vector<CompensatorDensity::Cell> ovs;
    for (std::size_t c = 0; c < em.grid.n_cells(); ++c) {
      double dt = em.grid.width(c);
      detail::CellClock clock = detail::cell_clock(o.rate[c] * em.mark_total, dt);
      double accrual = o.pattern[c] > 0 ? clock.mean_evt : dt;
      for (std::size_t k = 0; k < em.marks.size(); ++k)
        ovs.push_back({c, k, o.rate[c] * em.marks.weights[k] * accrual});
    }
    out.compensator.overrides.push_back(std::move(ovs));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

namespace detail {

// cells fully realized by a grid-boundary time t
inline std::size_t cells_upto(const TimeGrid& grid, double t) {
  std::size_t c = 0;
  while (c < grid.n_cells() && grid.bounds[c + 1] <= t + 1e-15) ++c;
  return c;
}

} // namespace detail

// (F * mu)_t - (F * nu)_t per path, evaluated at a grid boundary time
inline std::vector<LqVector> compensated_integral(const PredictableField& F,
                                                  const MarkedEventStream& stream,
                                                  const CompensatorDensity& comp, double t) {
  std::size_t pts = F.target.size();
  std::vector<LqVector> out(stream.n_paths(), LqVector(pts, 0.0));
  std::size_t cmax = detail::cells_upto(comp.grid, t);

  if (F.is_deterministic() && !comp.base.empty()) {
    // deterministic base drift once; per path only the events and the stopped cells
    LqVector base_drift(pts, 0.0);
    for (std::size_t c = 0; c < cmax; ++c)
      for (std::size_t k = 0; k < comp.n_marks; ++k) {
        double m = comp.base[c * comp.n_marks + k];
        if (m != 0.0) base_drift += m * F.deterministic[c * F.n_marks + k];
      }
    parallel_for(stream.n_paths(), [&](std::size_t path) {
      LqVector acc(pts, 0.0);
      for (const Event& e : stream.paths[path]) {
        if (e.time > t) break;
        acc += F.deterministic[e.cell * F.n_marks + e.mark];
      }
      acc -= base_drift;
      for (const auto& ov : comp.overrides[path])
        if (ov.cell < cmax) {
          double delta = ov.mass - comp.base[ov.cell * comp.n_marks + ov.mark];
          if (delta != 0.0) acc -= delta * F.deterministic[ov.cell * F.n_marks + ov.mark];
        }
      out[path] = std::move(acc);
    });
    return out;
  }

  for (std::size_t path = 0; path < stream.n_paths(); ++path) {
    LqVector acc(pts, 0.0);
    const auto& evs = stream.paths[path];
    for (const Event& e : evs) {
      if (e.time > t) break;
      if (F.is_deterministic())
        acc += F.deterministic[e.cell * F.n_marks + e.mark];
      else
        acc += F.value(e.cell, e.mark, history_before(evs, e.cell));
    }
    if (F.is_deterministic()) {
      comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double mass) {
        if (cell < cmax && mass != 0.0)
          acc -= mass * F.deterministic[cell * F.n_marks + mark];
      });
    } else {
      comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double mass) {
        if (cell < cmax && mass != 0.0)
          acc -= mass * F.value(cell, mark, history_before(evs, cell));
      });
    }
    out[path] = std::move(acc);
  }
  return out;
}

// per-path (||F||^r * nu)_t
inline std::vector<double> field_power_against_compensator(const PredictableField& F,
                                                           const MarkedEventStream& stream,
                                                           const CompensatorDensity& comp,
                                                           double r, double q, double t) {
  std::vector<double> out(stream.n_paths(), 0.0);
  std::size_t cmax = detail::cells_upto(comp.grid, t);

  if (F.is_deterministic()) {
    std::vector<double> powF(cmax * comp.n_marks);
    for (std::size_t c = 0; c < cmax; ++c)
      for (std::size_t k = 0; k < comp.n_marks; ++k)
        powF[c * comp.n_marks + k] =
            std::pow(lq_norm(F.target, F.deterministic[c * F.n_marks + k], q), r);
    if (!comp.base.empty()) {
      double base_total = 0.0;
      for (std::size_t ck = 0; ck < cmax * comp.n_marks; ++ck)
        base_total += comp.base[ck] * powF[ck];
      parallel_for(stream.n_paths(), [&](std::size_t path) {
        double acc = base_total;
        for (const auto& ov : comp.overrides[path])
          if (ov.cell < cmax)
            acc += (ov.mass - comp.base[ov.cell * comp.n_marks + ov.mark]) *
                   powF[ov.cell * comp.n_marks + ov.mark];
        out[path] = acc;
      });
    } else {
      parallel_for(stream.n_paths(), [&](std::size_t path) {
        double acc = 0.0;
        comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double mass) {
          if (cell < cmax && mass != 0.0) acc += mass * powF[cell * comp.n_marks + mark];
        });
        out[path] = acc;
      });
    }
    return out;
  }

  for (std::size_t path = 0; path < stream.n_paths(); ++path) {
    const auto& evs = stream.paths[path];
    double acc = 0.0;
    comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double mass) {
      if (cell < cmax && mass != 0.0) {
        const LqVector v = F.value(cell, mark, history_before(evs, cell));
        acc += mass * std::pow(lq_norm(F.target, v, q), r);
      }
    });
    out[path] = acc;
  }
  return out;
}

template <typename T>
inline double weighted_mean(const std::vector<T>& values, const std::vector<double>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * values[i];
  return acc;
}

// ---------------------------------------------------------------------------
// Novikov inequalities
// ---------------------------------------------------------------------------

struct NovikovReport {
  double lhs = 0.0;               // (E |f * mu-bar|^p)^(1/p) at the horizon
  double rhs_sq = 0.0;            // (E |f|^2 * nu)^(1/2) term (p >= 2 regime)
  double rhs_p = 0.0;             // (E |f|^p * nu)^(1/p) term
  double rhs = 0.0;               // regime combination
  double ratio = 0.0;
  bool holds = false;
  double standard_error = 0.0;    // MC standard error of lhs^p
};

struct NovikovOptions {
  bool two_sided = false;  // require total compensator mass <= 1 per path
  double constant = 100.0; // generous envelope for the one-sided checks
};

inline NovikovReport novikov_check(const PredictableField& F, const MarkedEventStream& stream,
                                   const CompensatorDensity& comp, double p,
                                   const NovikovOptions& opts = {}) {
  check_exponent(p);
  require(F.target.size() == 1, errc::shape_mismatch, "novikov_check wants a scalar field");
  double t = stream.grid.horizon();
  if (opts.two_sided)
    for (std::size_t path = 0; path < stream.n_paths(); ++path)
      require(comp.total_mass(path) <= 1.0 + 1e-12, errc::mass_exceeds_one,
              "two-sided mode needs total compensator mass <= 1");

  std::vector<LqVector> ints = compensated_integral(F, stream, comp, t);
  std::vector<double> powed(ints.size());
  for (std::size_t i = 0; i < ints.size(); ++i) powed[i] = std::pow(std::fabs(ints[i][0]), p);
  double lhs_p = weighted_mean(powed, stream.path_weights);

  std::vector<double> nu2 = field_power_against_compensator(F, stream, comp, 2.0, 2.0, t);
  std::vector<double> nup = field_power_against_compensator(F, stream, comp, p, 2.0, t);
  double rhs2 = weighted_mean(nu2, stream.path_weights);
  double rhsp = weighted_mean(nup, stream.path_weights);

  NovikovReport rep;
  rep.lhs = std::pow(lhs_p, 1.0 / p);
  rep.rhs_sq = std::sqrt(rhs2);
  rep.rhs_p = std::pow(rhsp, 1.0 / p);
  rep.rhs = p <= 2.0 ? rep.rhs_p
                     : std::pow(std::pow(rhs2, p / 2.0) + rhsp, 1.0 / p);
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : (rep.lhs == 0.0 ? 1.0 : INFINITY);
  if (opts.two_sided)
    rep.holds = rep.lhs <= opts.constant * rep.rhs && rep.rhs <= opts.constant * rep.lhs;
  else
    rep.holds = rep.lhs <= opts.constant * rep.rhs || (rep.lhs == 0.0 && rep.rhs == 0.0);
  // standard error of the lhs^p estimate
  double var = 0.0;
  for (std::size_t i = 0; i < powed.size(); ++i)
    var += stream.path_weights[i] * (powed[i] - lhs_p) * (powed[i] - lhs_p);
  rep.standard_error = std::sqrt(var / static_cast<double>(std::max<std::size_t>(1, powed.size())));
  return rep;
}

// Exact p = 2 isometry on an enumerated Cox tree:
//   E |f * mu-bar|^2 = E |f|^2 * nu,
// both sides by outcome enumeration plus closed-form within-cell clock moments.
struct IsometryReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline IsometryReport novikov_isometry_exact(const PredictableField& F,
                                             const EnumeratedMeasure& em, double tol = 1e-12) {
  require(F.target.size() == 1, errc::shape_mismatch, "isometry check wants a scalar field");
  double lhs = 0.0, rhs = 0.0;
  for (const auto& o : em.outcomes) {
    std::vector<Event> evs = em.events_of(o);
    double mean = 0.0, var = 0.0, nu_quad = 0.0;
    for (std::size_t c = 0; c < em.grid.n_cells(); ++c) {
      double dt = em.grid.width(c);
      double density = o.rate[c] * em.mark_total;
      detail::CellClock clock = detail::cell_clock(density, dt);
      // B_c = sum_k f_ck r_ck  couples all marks through the shared clock
      double b = 0.0;
      for (std::size_t k = 0; k < em.marks.size(); ++k)
        b += F.value(c, k, history_before(evs, c))[0] * o.rate[c] * em.marks.weights[k];
      if (o.pattern[c] > 0) {
        double f_evt = F.value(c, o.pattern[c] - 1, history_before(evs, c))[0];
        mean += f_evt - b * clock.mean_evt;
        var += b * b * clock.var_evt;
        for (std::size_t k = 0; k < em.marks.size(); ++k) {
          double f = F.value(c, k, history_before(evs, c))[0];
          nu_quad += f * f * o.rate[c] * em.marks.weights[k] * clock.mean_evt;
        }
      } else {
        mean -= b * dt;
        for (std::size_t k = 0; k < em.marks.size(); ++k) {
          double f = F.value(c, k, history_before(evs, c))[0];
          nu_quad += f * f * o.rate[c] * em.marks.weights[k] * dt;
        }
      }
    }
    lhs += o.prob * (mean * mean + var);
    rhs += o.prob * nu_quad;
  }
  return {lhs, rhs, std::fabs(lhs - rhs) <= tol * std::max(1.0, std::fabs(rhs))};
}

// exact martingale property: E[(F * mu-bar)_horizon] = 0 on the enumerated tree
inline double enumerated_mean_integral(const PredictableField& F, const EnumeratedMeasure& em) {
  double total = 0.0;
  for (const auto& o : em.outcomes) {
    std::vector<Event> evs = em.events_of(o);
    double mean = 0.0;
    for (std::size_t c = 0; c < em.grid.n_cells(); ++c) {
      double dt = em.grid.width(c);
      detail::CellClock clock = detail::cell_clock(o.rate[c] * em.mark_total, dt);
      double accrual = o.pattern[c] > 0 ? clock.mean_evt : dt;
      for (std::size_t k = 0; k < em.marks.size(); ++k)
        mean -= F.value(c, k, history_before(evs, c))[0] * o.rate[c] * em.marks.weights[k] * accrual;
      if (o.pattern[c] > 0) mean += F.value(c, o.pattern[c] - 1, history_before(evs, c))[0];
    }
    total += o.prob * mean;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Restriction: (mu 1_A, nu 1_A) for a predictable (cell, mark) set A is again a
// measure/compensator pair; integration commutes with restriction.
// ---------------------------------------------------------------------------

inline SimulatedMeasure restrict_measure(const MarkedEventStream& stream,
                                         const CompensatorDensity& comp,
                                         const std::function<bool(std::size_t cell,
                                                                  std::size_t mark)>& keep) {
  SimulatedMeasure out;
  out.stream = stream;
  out.compensator = comp;
  for (auto& path : out.stream.paths) {
    std::vector<Event> kept;
    for (const Event& e : path)
      if (keep(e.cell, e.mark)) kept.push_back(e);
    path = std::move(kept);
  }
  if (!out.compensator.base.empty()) {
    // fold the base into per-path overrides only where it gets zeroed
    for (std::size_t c = 0; c < comp.grid.n_cells(); ++c)
      for (std::size_t k = 0; k < comp.n_marks; ++k)
        if (!keep(c, k)) out.compensator.base[c * comp.n_marks + k] = 0.0;
  }
  for (auto& ovs : out.compensator.overrides)
    for (auto& cell : ovs)
      if (!keep(cell.cell, cell.mark)) cell.mass = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Time change: A_t = nu([0,t] x J) + t per path. Relabels event times and cell
// boundaries; masses ride along unchanged, and the flattened compensator has
// density at most one per unit time.
// ---------------------------------------------------------------------------

struct TimeChangeResult {
  // same cells and masses as the input, new time labels
  MarkedEventStream stream;                    // per-path grids via cell_bounds
  CompensatorDensity compensator;              // same masses, indexed by cell as before
  std::vector<std::vector<double>> cell_bounds; // per path: changed boundary positions
  struct Segment {
    double t0, t1;
    std::size_t cell, mark;
    double mass;
  };
  std::vector<std::vector<Segment>> segments; // per path: constant-density pieces
  std::vector<double> total_change;           // A_infinity per path
};

inline TimeChangeResult time_change(const MarkedEventStream& stream,
                                    const CompensatorDensity& comp) {
  const std::size_t n_cells = comp.grid.n_cells();
  for (std::size_t c = 0; c < n_cells; ++c)
    require(comp.grid.width(c) > 0.0, errc::atom_in_time, "compensator cell of zero width");

  TimeChangeResult out;
  out.stream = stream;
  out.compensator = comp;
  out.cell_bounds.resize(stream.n_paths());
  out.segments.resize(stream.n_paths());
  out.total_change.resize(stream.n_paths());

  for (std::size_t path = 0; path < stream.n_paths(); ++path) {
    // total mass per cell and the event's accrual split point
    std::vector<double> cell_mass(n_cells, 0.0);
    comp.for_each_mass(path, [&](std::size_t cell, std::size_t, double m) {
      cell_mass[cell] += m;
    });
    std::vector<double> evt_offset(n_cells, -1.0);
    for (const Event& e : stream.paths[path])
      evt_offset[e.cell] = e.time - comp.grid.bounds[e.cell];

    std::vector<double> bounds(n_cells + 1, 0.0);
    auto& segs = out.segments[path];
    double a = 0.0;
    for (std::size_t c = 0; c < n_cells; ++c) {
      double dt = comp.grid.width(c);
      double start = a;
      if (evt_offset[c] >= 0.0 && evt_offset[c] < dt) {
        // accruing piece [cell start, jump), then flat-in-mass remainder
        double tau = evt_offset[c];
        double mid = start + cell_mass[c] + tau;
        double end = mid + (dt - tau);
        comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double m) {
          if (cell == c && (m != 0.0 || tau > 0.0))
            segs.push_back({start, mid, cell, mark, m});
        });
        a = end;
      } else {
        double end = start + cell_mass[c] + dt;
        comp.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double m) {
          if (cell == c) segs.push_back({start, end, cell, mark, m});
        });
        a = end;
      }
      bounds[c + 1] = a;
    }
    out.cell_bounds[path] = bounds;
    out.total_change[path] = a;

    // event time labels move to A(t-)
    for (Event& e : out.stream.paths[path]) {
      double tau = e.time - comp.grid.bounds[e.cell];
      // within the accruing piece the slope is (cell density + 1)
      double density = cell_mass[e.cell] /
                       (evt_offset[e.cell] >= 0.0 && evt_offset[e.cell] < comp.grid.width(e.cell)
                            ? evt_offset[e.cell]
                            : comp.grid.width(e.cell));
      if (!(std::isfinite(density))) density = 0.0;
      e.time = bounds[e.cell] + tau * (density + 1.0);
    }
  }
  return out;
}

// worst compensator density per unit time after a time change
inline double max_segment_density(const TimeChangeResult& tc) {
  double worst = 0.0;
  for (const auto& segs : tc.segments) {
    // group segment masses by (t0, t1) across marks
    std::map<std::pair<double, double>, double> per_piece;
    for (const auto& s : segs) per_piece[{s.t0, s.t1}] += s.mass;
    for (const auto& kv : per_piece) {
      double len = kv.first.second - kv.first.first;
      if (len > 0.0) worst = std::max(worst, kv.second / len);
    }
  }
  return worst;
}

// (F * mu)_infinity and (F * nu)_infinity recomputed through the changed labels
struct ChangedIntegrals {
  std::vector<double> f_mu;
  std::vector<double> f_nu;
};

inline ChangedIntegrals integrals_after_change(const PredictableField& F,
                                               const TimeChangeResult& tc) {
  ChangedIntegrals out;
  out.f_mu.resize(tc.stream.n_paths(), 0.0);
  out.f_nu.resize(tc.stream.n_paths(), 0.0);
  for (std::size_t path = 0; path < tc.stream.n_paths(); ++path) {
    const auto& evs = tc.stream.paths[path];
    double mu_acc = 0.0;
    for (const Event& e : evs)
      mu_acc += F.is_deterministic() ? F.deterministic[e.cell * F.n_marks + e.mark][0]
                                     : F.value(e.cell, e.mark, history_before(evs, e.cell))[0];
    double nu_acc = 0.0;
    for (const auto& s : tc.segments[path]) {
      double v = F.is_deterministic()
                     ? F.deterministic[s.cell * F.n_marks + s.mark][0]
                     : F.value(s.cell, s.mark, history_before(evs, s.cell))[0];
      nu_acc += v * s.mass;
    }
    out.f_mu[path] = mu_acc;
    out.f_nu[path] = nu_acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictable projection onto the dyadic coarsening P_m, and the Riemann-type
// compensator approximation built from it. Conditioning is with respect to the
// event-pattern history at each dyadic block start.
// ---------------------------------------------------------------------------

// values: per (path, grid cell); returns the projected process
inline std::vector<std::vector<double>>
predictable_projection(const std::vector<std::vector<double>>& values,
                       const MarkedEventStream& stream, int m) {
  std::size_t n_cells = stream.grid.n_cells();
  require((n_cells & (n_cells - 1)) == 0, errc::config_invalid,
          "projection wants a power-of-two grid");
  std::size_t blocks = std::size_t{1} << m;
  require(blocks <= n_cells, errc::config_invalid, "dyadic level finer than the grid");
  std::size_t width = n_cells / blocks;

  std::vector<std::vector<double>> out(values.size(),
                                       std::vector<double>(n_cells, 0.0));
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t start = b * width;
    // group paths by the event pattern strictly before the block start
    std::map<std::vector<std::pair<std::size_t, std::size_t>>, std::vector<std::size_t>> groups;
    for (std::size_t path = 0; path < stream.n_paths(); ++path) {
      std::vector<std::pair<std::size_t, std::size_t>> key;
      for (const Event& e : stream.paths[path]) {
        if (e.cell >= start) break;
        key.push_back({e.cell, e.mark});
      }
      groups[key].push_back(path);
    }
    for (const auto& kv : groups) {
      double mass = 0.0;
      for (std::size_t path : kv.second) mass += stream.path_weights[path];
      for (std::size_t c = start; c < start + width; ++c) {
        double mean = 0.0;
        for (std::size_t path : kv.second)
          mean += stream.path_weights[path] * values[path][c];
        mean /= mass;
        for (std::size_t path : kv.second) out[path][c] = mean;
      }
    }
  }
  return out;
}

// cumulative increasing path functional: per path, values at every grid boundary
using IncreasingPath = std::vector<std::vector<double>>;

// sum of conditional dyadic increments E[F((n+1)/2^m) - F(n/2^m) | pattern history];
// converges to F(horizon) as m grows
inline std::vector<double> compensator_riemann(const IncreasingPath& F,
                                               const MarkedEventStream& stream, int m,
                                               double lipschitz_bound) {
  std::size_t n_cells = stream.grid.n_cells();
  require((n_cells & (n_cells - 1)) == 0, errc::config_invalid,
          "riemann sum wants a power-of-two grid");
  std::size_t blocks = std::size_t{1} << m;
  require(blocks <= n_cells, errc::config_invalid, "dyadic level finer than the grid");
  std::size_t width = n_cells / blocks;

  for (std::size_t path = 0; path < F.size(); ++path) {
    require(F[path].size() == n_cells + 1, errc::shape_mismatch, "boundary values expected");
    require(std::fabs(F[path][0]) <= 1e-12, errc::lipschitz_violated, "F(0) must vanish");
    for (std::size_t c = 0; c < n_cells; ++c) {
      double inc = F[path][c + 1] - F[path][c];
      require(inc >= -1e-12, errc::lipschitz_violated, "F must be increasing");
      require(inc <= lipschitz_bound * stream.grid.width(c) + 1e-9, errc::lipschitz_violated,
              "F violates its Lipschitz bound");
    }
  }

  std::vector<double> approx(F.size(), 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t start = b * width;
    std::map<std::vector<std::pair<std::size_t, std::size_t>>, std::vector<std::size_t>> groups;
    for (std::size_t path = 0; path < stream.n_paths(); ++path) {
      std::vector<std::pair<std::size_t, std::size_t>> key;
      for (const Event& e : stream.paths[path]) {
        if (e.cell >= start) break;
        key.push_back({e.cell, e.mark});
      }
      groups[key].push_back(path);
    }
    for (const auto& kv : groups) {
      double mass = 0.0, mean_inc = 0.0;
      for (std::size_t path : kv.second) {
        mass += stream.path_weights[path];
        mean_inc += stream.path_weights[path] * (F[path][start + width] - F[path][start]);
      }
      mean_inc /= mass;
      for (std::size_t path : kv.second) approx[path] += mean_inc;
    }
  }
  return approx;
}

} // namespace brlab
