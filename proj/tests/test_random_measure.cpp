#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "brlab/ihat.hpp"
#include "brlab/measure_io.hpp"
#include "brlab/random_measure.hpp"

using namespace brlab;

namespace {

CoxIntensity counting_intensity(double base) {
  CoxIntensity in;
  in.bound = 4.0 * base + 1.0;
  in.rate = [base](std::size_t, const std::vector<Event>& hist) {
    return base * (1.0 + std::min<double>(static_cast<double>(hist.size()), 2.0));
  };
  return in;
}

} // namespace

TEST_CASE("simulate_poisson_rm basics") {
  MarkSpace marks({1.0});

  SECTION("zero rate gives an empty stream and zero compensator") {
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 8, marks, 0.0, 16, 7);
    for (const auto& path : sim.stream.paths) REQUIRE(path.empty());
    for (std::size_t path = 0; path < 16; ++path)
      REQUIRE(sim.compensator.total_mass(path) == 0.0);
  }

  SECTION("negative rate is rejected") {
    CHECK_THROWS_AS(simulate_poisson_rm(1.0, 8, marks, -1.0, 4, 7), error);
  }

  SECTION("expected event count matches the intensity within 3 standard errors") {
    double lambda = 1.4;
    std::size_t n_paths = 20000;
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 256, marks, lambda, n_paths, 11);
    double mean = 0.0;
    for (const auto& path : sim.stream.paths) mean += static_cast<double>(path.size());
    mean /= static_cast<double>(n_paths);
    double expect =
        256.0 * -std::expm1(-lambda / 256.0); // cells are Bernoulli in the grid model
    double se = std::sqrt(lambda / static_cast<double>(n_paths));
    REQUIRE(std::fabs(mean - expect) <= 3.0 * se);
  }

  SECTION("at most one event per cell, times strictly increasing, inside cells") {
    SimulatedMeasure sim = simulate_poisson_rm(2.0, 32, MarkSpace({1.0, 0.5}), 3.0, 200, 13);
    for (const auto& path : sim.stream.paths) {
      std::set<std::size_t> cells;
      double last = -1.0;
      for (const Event& e : path) {
        REQUIRE(cells.insert(e.cell).second);
        REQUIRE(e.time > last);
        REQUIRE(e.time >= sim.stream.grid.bounds[e.cell]);
        REQUIRE(e.time <= sim.stream.grid.bounds[e.cell + 1]);
        last = e.time;
      }
    }
  }

  SECTION("thin-cell warning") {
    SimulatedMeasure ok = simulate_poisson_rm(1.0, 256, marks, 2.0, 4, 3);
    REQUIRE_FALSE(ok.stream.rate_warning);
    SimulatedMeasure coarse = simulate_poisson_rm(1.0, 4, marks, 2.0, 4, 3);
    REQUIRE(coarse.stream.rate_warning);
  }
}

TEST_CASE("compensated integral") {
  MarkSpace marks({1.0});

  SECTION("zero field integrates to zero") {
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 16, marks, 2.0, 32, 17);
    PredictableField F = scalar_constant_field(sim.stream.grid, 1, 0.0);
    auto ints = compensated_integral(F, sim.stream, sim.compensator, 1.0);
    for (const auto& v : ints) REQUIRE(v[0] == 0.0);
  }

  SECTION("compensated Poisson: N_t minus the realized compensator mass") {
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 64, marks, 2.0, 64, 19);
    PredictableField F = scalar_constant_field(sim.stream.grid, 1, 1.0);
    auto ints = compensated_integral(F, sim.stream, sim.compensator, 1.0);
    for (std::size_t path = 0; path < 64; ++path) {
      double expected = static_cast<double>(sim.stream.paths[path].size()) -
                        sim.compensator.total_mass(path);
      REQUIRE(ints[path][0] == Catch::Approx(expected).margin(1e-12));
      // the realized mass approaches lambda t as the grid refines
      REQUIRE(std::fabs(sim.compensator.total_mass(path) - 2.0) <=
              2.0 * (1.0 / 64.0) * (static_cast<double>(sim.stream.paths[path].size()) + 1.0));
    }
  }

  SECTION("martingale property: mean integral vanishes within 3 standard errors") {
    std::size_t n_paths = 40000;
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 128, marks, 2.0, n_paths, 23);
    PredictableField F = scalar_constant_field(sim.stream.grid, 1, 1.0);
    auto ints = compensated_integral(F, sim.stream, sim.compensator, 1.0);
    double mean = 0.0, var = 0.0;
    for (const auto& v : ints) mean += v[0];
    mean /= static_cast<double>(n_paths);
    for (const auto& v : ints) var += (v[0] - mean) * (v[0] - mean);
    var /= static_cast<double>(n_paths);
    REQUIRE(std::fabs(mean) <= 3.0 * std::sqrt(var / static_cast<double>(n_paths)));
  }
}

TEST_CASE("exact enumeration identities") {
  MarkSpace marks({1.0, 0.7, 0.4});
  CoxIntensity intensity = counting_intensity(0.8);

  SECTION("martingale property is exact on the outcome tree") {
    EnumeratedMeasure em = enumerate_cox_rm(1.0, 3, marks, intensity);
    PredictableField F;
    F.target = FiniteMeasureSpace({1.0});
    F.n_marks = 3;
    F.deterministic.resize(3 * 3);
    CounterRng rng(29);
    for (auto& v : F.deterministic) v = LqVector({rng.next_normal()});
    REQUIRE(std::fabs(enumerated_mean_integral(F, em)) <= 1e-13);

    // total probability of the tree is exactly one
    double total = 0.0;
    for (const auto& o : em.outcomes) total += o.prob;
    REQUIRE(total == Catch::Approx(1.0).margin(1e-13));
  }

  SECTION("p = 2 isometry holds to 1e-12 with a path-dependent field") {
    EnumeratedMeasure em = enumerate_cox_rm(1.0, 3, marks, intensity);
    PredictableField F;
    F.target = FiniteMeasureSpace({1.0});
    F.n_marks = 3;
    F.eval = [](std::size_t cell, std::size_t mark, const std::vector<Event>& hist) {
      double v = 0.3 + 0.2 * static_cast<double>(cell) + 0.1 * static_cast<double>(mark) +
                 0.4 * static_cast<double>(hist.size());
      return LqVector({v});
    };
    IsometryReport rep = novikov_isometry_exact(F, em);
    REQUIRE(rep.holds);
    REQUIRE(rep.lhs == Catch::Approx(rep.rhs).margin(1e-12));
  }

  SECTION("MC estimate agrees with the exact enumeration within 3 standard errors") {
    EnumeratedMeasure em = enumerate_cox_rm(1.0, 3, marks, intensity);
    PredictableField F = scalar_constant_field(em.grid, 3, 1.0);
    IsometryReport exact = novikov_isometry_exact(F, em);

    SimulatedMeasure sim = simulate_cox_rm(1.0, 3, marks, intensity, 30000, 31);
    NovikovReport mc = novikov_check(F, sim.stream, sim.compensator, 2.0);
    REQUIRE(std::fabs(mc.lhs * mc.lhs - exact.lhs) <= 3.0 * mc.standard_error + 1e-9);
  }
}

TEST_CASE("novikov_check") {
  MarkSpace marks({1.0});

  SECTION("zero field reports holds") {
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 8, marks, 1.0, 32, 37);
    PredictableField F = scalar_constant_field(sim.stream.grid, 1, 0.0);
    NovikovReport rep = novikov_check(F, sim.stream, sim.compensator, 2.0);
    REQUIRE(rep.lhs == 0.0);
    REQUIRE(rep.holds);
  }

  SECTION("two-sided mode rejects total mass above one") {
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 64, marks, 2.0, 16, 41);
    PredictableField F = scalar_constant_field(sim.stream.grid, 1, 1.0);
    NovikovOptions opts;
    opts.two_sided = true;
    CHECK_THROWS_AS(novikov_check(F, sim.stream, sim.compensator, 2.0, opts), error);
  }

  SECTION("two-sided mode passes for small total mass") {
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 64, marks, 0.5, 4000, 43);
    PredictableField F = scalar_constant_field(sim.stream.grid, 1, 1.0);
    NovikovOptions opts;
    opts.two_sided = true;
    opts.constant = 16.0;
    NovikovReport rep = novikov_check(F, sim.stream, sim.compensator, 1.5, opts);
    REQUIRE(rep.holds);
  }

  SECTION("fourth moment of the compensated Poisson grows like lambda(3 lambda + 1)") {
    // the one-sided-reversed comparison E|f * mu-bar|^4 vs E|f|^4 * nu spreads with lambda
    double r2 = 0.0, r8 = 0.0;
    for (double lambda : {2.0, 8.0}) {
      SimulatedMeasure sim = simulate_poisson_rm(1.0, 4096, marks, lambda, 60000, 47);
      PredictableField F = scalar_constant_field(sim.stream.grid, 1, 1.0);
      NovikovReport rep = novikov_check(F, sim.stream, sim.compensator, 4.0);
      double quart = std::pow(rep.lhs, 4.0);
      double expect = lambda * (3.0 * lambda + 1.0);
      REQUIRE(quart == Catch::Approx(expect).epsilon(0.08));
      double reversed = quart / std::pow(rep.rhs_p, 4.0);
      (lambda < 4.0 ? r2 : r8) = reversed;
    }
    REQUIRE(r8 > r2);
  }
}

TEST_CASE("restriction commutes with integration") {
  MarkSpace marks({1.0, 0.5});
  SimulatedMeasure sim = simulate_poisson_rm(1.0, 16, marks, 2.0, 200, 53);
  CounterRng rng(59);
  PredictableField F;
  F.target = FiniteMeasureSpace({1.0});
  F.n_marks = 2;
  F.deterministic.resize(16 * 2);
  for (auto& v : F.deterministic) v = LqVector({rng.next_normal()});

  auto keep = [](std::size_t cell, std::size_t mark) { return (cell + mark) % 2 == 0; };
  SimulatedMeasure restricted = restrict_measure(sim.stream, sim.compensator, keep);

  PredictableField F_masked = F;
  for (std::size_t c = 0; c < 16; ++c)
    for (std::size_t k = 0; k < 2; ++k)
      if (!keep(c, k)) F_masked.deterministic[c * 2 + k] = LqVector({0.0});

  auto a = compensated_integral(F, restricted.stream, restricted.compensator, 1.0);
  auto b = compensated_integral(F_masked, sim.stream, sim.compensator, 1.0);
  for (std::size_t path = 0; path < a.size(); ++path)
    REQUIRE(a[path][0] == Catch::Approx(b[path][0]).margin(1e-12));
}

TEST_CASE("ihat component norms") {
  SECTION("single deterministic cell closed forms") {
    TimeGrid grid(1.0, 1);
    MarkedEventStream stream;
    stream.grid = grid;
    stream.n_marks = 1;
    stream.paths = {{}};
    stream.path_weights = {1.0};
    CompensatorDensity comp;
    comp.grid = grid;
    comp.n_marks = 1;
    double nu0 = 0.37;
    comp.base = {nu0};
    comp.overrides.resize(1);

    FiniteMeasureSpace tgt({0.5, 0.5});
    LqVector x({1.0, -2.0});
    PredictableField F;
    F.target = tgt;
    F.n_marks = 1;
    F.deterministic = {x};

    double p = 1.7, q = 2.6;
    IhatNorms n = ihat_component_norms(F, stream, comp, p, q);
    LqVector absx({1.0, 2.0});
    REQUIRE(n.S == Catch::Approx(lq_norm(tgt, absx, q) * std::sqrt(nu0)).margin(1e-12));
    REQUIRE(n.Dqq == Catch::Approx(lq_norm(tgt, x, q) * std::pow(nu0, 1.0 / q)).margin(1e-12));
    REQUIRE(n.Dpq == Catch::Approx(lq_norm(tgt, x, q) * std::pow(nu0, 1.0 / p)).margin(1e-12));
  }

  SECTION("zero field gives zero norms; p = q = 2 collapses the three") {
    MarkSpace marks({1.0, 0.6});
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 8, marks, 1.5, 64, 61);
    PredictableField zero = scalar_constant_field(sim.stream.grid, 2, 0.0);
    IhatNorms z = ihat_component_norms(zero, sim.stream, sim.compensator, 2.5, 1.5);
    REQUIRE(z.S == 0.0);
    REQUIRE(z.Dqq == 0.0);
    REQUIRE(z.Dpq == 0.0);

    CounterRng rng(67);
    PredictableField F;
    F.target = FiniteMeasureSpace({1.0});
    F.n_marks = 2;
    F.deterministic.resize(8 * 2);
    for (auto& v : F.deterministic) v = LqVector({rng.next_normal()});
    IhatNorms n = ihat_component_norms(F, sim.stream, sim.compensator, 2.0, 2.0);
    REQUIRE(n.S == Catch::Approx(n.Dqq).margin(1e-12));
    REQUIRE(n.Dqq == Catch::Approx(n.Dpq).margin(1e-12));
  }
}

TEST_CASE("ihat regime value") {
  MarkSpace marks({1.0});
  SimulatedMeasure sim = simulate_poisson_rm(1.0, 4, marks, 1.0, 32, 71);
  CounterRng rng(73);
  PredictableField F;
  F.target = FiniteMeasureSpace({1.0});
  F.n_marks = 1;
  F.deterministic.resize(4);
  for (auto& v : F.deterministic) v = LqVector({rng.next_normal()});

  SECTION("p = q = 2: regime value equals the common component norm") {
    RegimeNormSpec spec(2.0, 2.0);
    IhatRegimeResult r = ihat_regime_norm(F, sim.stream, sim.compensator, spec);
    REQUIRE(r.value == Catch::Approx(r.components.S).margin(1e-9));
  }

  SECTION("sum regimes never exceed component norms; intersections never fall below") {
    RegimeNormSpec sum_spec(1.5, 1.5); // q <= p <= 2: S + (Dqq ^ Dpq)
    IhatRegimeResult rs = ihat_regime_norm(F, sim.stream, sim.compensator, sum_spec);
    REQUIRE(rs.value <= rs.components.S + 1e-9);

    RegimeNormSpec max_spec(3.0, 2.5); // 2 <= q <= p: full intersection
    IhatRegimeResult rm = ihat_regime_norm(F, sim.stream, sim.compensator, max_spec);
    REQUIRE(rm.value >=
            std::max({rm.components.S, rm.components.Dqq, rm.components.Dpq}) - 1e-9);
  }
}

TEST_CASE("time change") {
  MarkSpace marks({1.0});

  SECTION("zero compensator: identity relabeling") {
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 8, marks, 0.0, 4, 79);
    TimeChangeResult tc = time_change(sim.stream, sim.compensator);
    for (std::size_t path = 0; path < 4; ++path)
      for (std::size_t c = 0; c <= 8; ++c)
        REQUIRE(tc.cell_bounds[path][c] ==
                Catch::Approx(sim.stream.grid.bounds[c]).margin(1e-12));
  }

  SECTION("deterministic rate: uniform dilation of event-free paths") {
    double lambda = 1.5;
    SimulatedMeasure sim = simulate_poisson_rm(1.0, 16, marks, lambda, 64, 83);
    TimeChangeResult tc = time_change(sim.stream, sim.compensator);
    for (std::size_t path = 0; path < 64; ++path) {
      if (!sim.stream.paths[path].empty()) continue;
      for (std::size_t c = 0; c <= 16; ++c)
        REQUIRE(tc.cell_bounds[path][c] ==
                Catch::Approx((lambda + 1.0) * sim.stream.grid.bounds[c]).margin(1e-12));
    }
  }

  SECTION("post-change compensator density is at most one") {
    CoxIntensity intensity = counting_intensity(1.2);
    SimulatedMeasure sim = simulate_cox_rm(1.0, 8, MarkSpace({1.0, 0.5}), intensity, 128, 89);
    TimeChangeResult tc = time_change(sim.stream, sim.compensator);
    REQUIRE(max_segment_density(tc) <= 1.0 + 1e-12);
  }

  SECTION("integrals and component norms are invariant") {
    CoxIntensity intensity = counting_intensity(0.9);
    SimulatedMeasure sim = simulate_cox_rm(1.0, 8, marks, intensity, 64, 97);
    CounterRng rng(101);
    PredictableField F;
    F.target = FiniteMeasureSpace({1.0});
    F.n_marks = 1;
    F.deterministic.resize(8);
    for (auto& v : F.deterministic) v = LqVector({rng.next_normal()});

    auto before = compensated_integral(F, sim.stream, sim.compensator, 1.0);

    TimeChangeResult tc = time_change(sim.stream, sim.compensator);
    ChangedIntegrals after = integrals_after_change(F, tc);
    for (std::size_t path = 0; path < 64; ++path) {
      double nu_signed = 0.0;
      sim.compensator.for_each_mass(path, [&](std::size_t cell, std::size_t mark, double m) {
        nu_signed += m * F.deterministic[cell * 1 + mark][0];
      });
      double mu_before = before[path][0] + nu_signed;
      REQUIRE(after.f_mu[path] == Catch::Approx(mu_before).margin(1e-12));
      REQUIRE(after.f_nu[path] == Catch::Approx(nu_signed).margin(1e-12));
    }

    // all three component norms are unchanged
    IhatNorms n0 = ihat_component_norms(F, sim.stream, sim.compensator, 1.6, 2.4);
    IhatNorms n1 = ihat_component_norms(F, tc.stream, tc.compensator, 1.6, 2.4);
    REQUIRE(n0.S == Catch::Approx(n1.S).margin(1e-12));
    REQUIRE(n0.Dqq == Catch::Approx(n1.Dqq).margin(1e-12));
    REQUIRE(n0.Dpq == Catch::Approx(n1.Dpq).margin(1e-12));
  }
}

TEST_CASE("predictable projection and the Riemann compensator") {
  MarkSpace marks({1.0});
  CoxIntensity intensity = counting_intensity(1.0);
  SimulatedMeasure sim = simulate_cox_rm(1.0, 8, marks, intensity, 512, 103);

  SECTION("deterministic and block-adapted processes are fixed") {
    std::vector<std::vector<double>> det(sim.stream.n_paths(), std::vector<double>(8, 0.0));
    for (auto& row : det)
      for (std::size_t c = 0; c < 8; ++c) row[c] = 1.0 + static_cast<double>(c);
    auto proj = predictable_projection(det, sim.stream, 2);
    for (std::size_t path = 0; path < det.size(); ++path)
      for (std::size_t c = 0; c < 8; ++c)
        REQUIRE(proj[path][c] == Catch::Approx(det[path][c]).margin(1e-12));
  }

  SECTION("finer levels track a path-dependent process more closely") {
    std::vector<std::vector<double>> counts(sim.stream.n_paths(), std::vector<double>(8, 0.0));
    for (std::size_t path = 0; path < sim.stream.n_paths(); ++path) {
      for (std::size_t c = 0; c < 8; ++c) {
        double acc = 0.0;
        for (const Event& e : sim.stream.paths[path])
          if (e.cell <= c) acc += 1.0;
        counts[path][c] = acc;
      }
    }
    double prev = 1e300;
    for (int m : {0, 1, 2, 3}) {
      auto proj = predictable_projection(counts, sim.stream, m);
      double dev = 0.0;
      for (std::size_t path = 0; path < counts.size(); ++path)
        for (std::size_t c = 0; c < 8; ++c)
          dev = std::max(dev, std::fabs(proj[path][c] - counts[path][c]));
      REQUIRE(dev <= prev + 1e-12);
      prev = dev;
    }
  }

  SECTION("linear functional: approximation error at most c/2^m") {
    double c = 1.7, horizon = 1.0;
    IncreasingPath F(sim.stream.n_paths(), std::vector<double>(9, 0.0));
    for (auto& row : F)
      for (std::size_t b = 0; b <= 8; ++b) row[b] = c * horizon * static_cast<double>(b) / 8.0;
    for (int m : {0, 1, 2, 3}) {
      auto approx = compensator_riemann(F, sim.stream, m, c + 0.1);
      for (std::size_t path = 0; path < F.size(); ++path)
        REQUIRE(std::fabs(approx[path] - c * horizon) <= c / std::pow(2.0, m) + 1e-12);
    }
  }

  SECTION("realized compensator mass: error shrinks with the dyadic level") {
    IncreasingPath F(sim.stream.n_paths(), std::vector<double>(9, 0.0));
    for (std::size_t path = 0; path < F.size(); ++path) {
      for (std::size_t c = 0; c < 8; ++c) {
        double inc = 0.0;
        sim.compensator.for_each_mass(path, [&](std::size_t cell, std::size_t, double m) {
          if (cell == c) inc += m;
        });
        F[path][c + 1] = F[path][c] + inc;
      }
    }
    double coarse = 0.0, fine = 0.0;
    for (int m : {0, 3}) {
      auto approx = compensator_riemann(F, sim.stream, m, intensity.bound + 1.0);
      double dev = 0.0;
      for (std::size_t path = 0; path < F.size(); ++path)
        dev += sim.stream.path_weights[path] * std::fabs(approx[path] - F[path][8]);
      (m == 0 ? coarse : fine) = dev;
    }
    REQUIRE(fine <= coarse + 1e-12);
  }

  SECTION("violations are rejected") {
    IncreasingPath bad(sim.stream.n_paths(), std::vector<double>(9, 0.0));
    for (auto& row : bad) row[3] = 1.0;
    CHECK_THROWS_AS(compensator_riemann(bad, sim.stream, 1, 0.5), error);
  }
}

TEST_CASE("JSONL serialization of streams and compensators") {
  MarkSpace marks({1.0, 0.5});
  SimulatedMeasure sim = simulate_poisson_rm(1.0, 8, marks, 2.0, 3, 107);
  std::string stream_lines = stream_to_jsonl(sim.stream);
  std::string comp_lines = compensator_to_jsonl(sim.stream, sim.compensator);
  REQUIRE(std::count(stream_lines.begin(), stream_lines.end(), '\n') == 3);
  REQUIRE(std::count(comp_lines.begin(), comp_lines.end(), '\n') == 3);
  std::istringstream in(stream_lines);
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    REQUIRE(j.contains("events"));
  }
}

TEST_CASE("mainintranmeas_report at p=q=2 sits in the Doob band") {
  RandomMeasureEquivConfig cfg;
  cfg.p = 2.0;
  cfg.q = 2.0;
  cfg.grid_n = 16;
  cfg.n_marks = 1;
  cfg.rate = 1.2;
  cfg.n_paths = 3000;
  cfg.n_instances = 5;
  cfg.seed = 311;
  RandomMeasureEquivReports reps = mainintranmeas_report(cfg);
  RatioSummary end = reps.endpoint.summary();
  RatioSummary sup = reps.running_sup.summary();
  REQUIRE(end.min >= 0.85);
  REQUIRE(end.max <= 1.15);
  REQUIRE(sup.min >= end.min - 1e-12);
  REQUIRE(sup.max <= 2.0 * end.max);
}
