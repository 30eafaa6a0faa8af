#include <catch2/catch_amalgamated.hpp>

#include "brlab/filtered_space.hpp"
#include "brlab/instances.hpp"
#include "brlab/json_io.hpp"
#include "brlab/measure_space.hpp"
#include "brlab/random_sequence.hpp"

using namespace brlab;

namespace {

RandomLqSequence scalar_sequence(const FiniteMeasureSpace& tgt,
                                 std::vector<std::vector<double>> entries,
                                 std::vector<int> levels) {
  std::vector<RandomLqVar> vars;
  for (const auto& e : entries) {
    RandomLqVar var;
    for (double x : e) var.push_back(LqVector({x}));
    vars.push_back(var);
  }
  return RandomLqSequence(tgt, std::move(vars), std::move(levels));
}

} // namespace

TEST_CASE("build_filtered_space validates input") {
  // canonical dyadic tree of depth 2
  FilteredSpace sp = dyadic_space(2);
  REQUIRE(sp.n_samples() == 4);
  REQUIRE(sp.n_levels() == 2);
  REQUIRE(sp.atom_of(0, 0) == sp.atom_of(0, 1));
  REQUIRE(sp.atom_of(0, 0) != sp.atom_of(0, 2));

  // single sample: trivial space
  FilteredSpace tiny = build_filtered_space({1.0}, {{{0}}});
  ScalarRV x{3.0};
  REQUIRE(conditional_expectation(tiny, x, 0)[0] == 3.0);
  REQUIRE(conditional_expectation(tiny, x, -1)[0] == 3.0);

  // malformed: second level does not cover the samples
  CHECK_THROWS_AS(build_filtered_space({0.5, 0.5}, {{{0, 1}}, {{0}}}), error);
  try {
    build_filtered_space({0.5, 0.5}, {{{0}, {1}}, {{0, 1}}});
  } catch (const error& e) {
    CHECK(e.code() == errc::non_refining);
  }

  // bad probabilities
  CHECK_THROWS_AS(build_filtered_space({0.5, 0.4}, {{{0}, {1}}}), error);
  CHECK_THROWS_AS(build_filtered_space({1.5, -0.5}, {{{0}, {1}}}), error);
}

TEST_CASE("conditional expectation on the dyadic tree") {
  FilteredSpace sp = dyadic_space(2);
  ScalarRV x{1.0, 2.0, 3.0, 4.0};

  ScalarRV mean = conditional_expectation(sp, x, -1);
  for (double v : mean) REQUIRE(v == Catch::Approx(2.5).margin(1e-14));

  ScalarRV lvl0 = conditional_expectation(sp, x, 0);
  REQUIRE(lvl0[0] == Catch::Approx(1.5).margin(1e-14));
  REQUIRE(lvl0[1] == Catch::Approx(1.5).margin(1e-14));
  REQUIRE(lvl0[2] == Catch::Approx(3.5).margin(1e-14));
  REQUIRE(lvl0[3] == Catch::Approx(3.5).margin(1e-14));

  // finest level: unchanged
  ScalarRV finest = conditional_expectation(sp, x, sp.finest_level());
  for (std::size_t s = 0; s < 4; ++s) REQUIRE(finest[s] == x[s]);

  CHECK_THROWS_AS(conditional_expectation(sp, x, 7), error);
}

TEST_CASE("tower property holds exactly on random instances") {
  CounterRng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    FilteredSpace sp = random_dyadic_space(3, rng);
    ScalarRV x(sp.n_samples());
    for (double& v : x) v = rng.next_normal();
    for (int i = -1; i < sp.n_levels(); ++i)
      for (int j = -1; j < sp.n_levels(); ++j) {
        ScalarRV inner = conditional_expectation(sp, x, j);
        ScalarRV lhs = conditional_expectation(sp, inner, i);
        ScalarRV rhs = conditional_expectation(sp, x, std::min(i, j));
        for (std::size_t s = 0; s < sp.n_samples(); ++s)
          REQUIRE(lhs[s] == Catch::Approx(rhs[s]).margin(1e-12));
      }
  }
}

TEST_CASE("Jensen contraction for conditional expectations") {
  CounterRng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    FilteredSpace sp = random_dyadic_space(3, rng);
    ScalarRV x(sp.n_samples());
    for (double& v : x) v = rng.next_normal();
    double p = 1.0 + 3.0 * rng.next_double();
    for (int i = -1; i < sp.n_levels(); ++i) {
      ScalarRV ei = conditional_expectation(sp, x, i);
      REQUIRE(lp_moment(sp, ei, p) <= lp_moment(sp, x, p) + 1e-12);
    }
  }
}

TEST_CASE("lq_norm basics") {
  FiniteMeasureSpace one({1.0});
  REQUIRE(lq_norm(one, LqVector({2.0}), 3.0) == Catch::Approx(2.0).margin(1e-14));
  REQUIRE(lq_norm(one, LqVector({0.0}), 2.0) == 0.0);

  FiniteMeasureSpace two({1.0, 1.0});
  REQUIRE(lq_norm(two, LqVector({3.0, 4.0}), 2.0) == Catch::Approx(5.0).margin(1e-13));

  CHECK_THROWS_AS(lq_norm(two, LqVector({1.0, 1.0}), 0.5), error);
}

TEST_CASE("lq_norm is a norm on random instances") {
  CounterRng rng(5);
  FiniteMeasureSpace s({0.3, 1.2, 0.5});
  for (int rep = 0; rep < 50; ++rep) {
    LqVector a({rng.next_normal(), rng.next_normal(), rng.next_normal()});
    LqVector b({rng.next_normal(), rng.next_normal(), rng.next_normal()});
    double q = 1.0 + 4.0 * rng.next_double();
    double c = 2.0 * rng.next_normal();
    // absolute homogeneity
    REQUIRE(lq_norm(s, c * a, q) == Catch::Approx(std::fabs(c) * lq_norm(s, a, q)).margin(1e-10));
    // triangle inequality
    REQUIRE(lq_norm(s, a + b, q) <= lq_norm(s, a, q) + lq_norm(s, b, q) + 1e-12);
  }
}

TEST_CASE("lp_moment") {
  FilteredSpace sp = build_filtered_space({0.25, 0.75}, {{{0}, {1}}});
  ScalarRV z{2.0, 0.0};
  REQUIRE(lp_moment(sp, z, 2.0) == Catch::Approx(1.0).margin(1e-14));

  ScalarRV c{-3.0, -3.0};
  REQUIRE(lp_moment(sp, c, 1.7) == Catch::Approx(3.0).margin(1e-13));

  FilteredSpace fair = build_filtered_space({0.5, 0.5}, {{{0}, {1}}});
  ScalarRV pm{1.0, -1.0};
  REQUIRE(lp_moment(fair, pm, 4.0) == Catch::Approx(1.0).margin(1e-14));

  CHECK_THROWS_AS(lp_moment(sp, z, 0.0), error);
}

TEST_CASE("is_mds and mds_project") {
  FilteredSpace sp = dyadic_space(2);
  FiniteMeasureSpace tgt({1.0});

  SECTION("all-zero sequence is an MDS") {
    auto zero = scalar_sequence(tgt, {{0, 0, 0, 0}, {0, 0, 0, 0}}, {0, 1});
    auto rep = is_mds(sp, zero);
    REQUIRE(rep.ok);
    REQUIRE(rep.worst_violation == 0.0);
  }

  SECTION("constant entry fails with violation 1") {
    auto bad = scalar_sequence(tgt, {{0, 0, 0, 0}, {1, 1, 1, 1}}, {0, 1});
    auto rep = is_mds(sp, bad);
    REQUIRE_FALSE(rep.ok);
    REQUIRE(rep.worst_violation == Catch::Approx(1.0).margin(1e-14));
  }

  SECTION("dyadic +-1 increments form an MDS") {
    auto walk = scalar_sequence(tgt, {{1, 1, -1, -1}, {1, -1, 1, -1}}, {0, 1});
    REQUIRE(is_mds(sp, walk).ok);
  }

  SECTION("projection of a level-1 entry") {
    auto seq = scalar_sequence(tgt, {{0, 0, 0, 0}, {1, 2, 3, 4}}, {0, 1});
    auto proj = mds_project(sp, seq);
    // Delta_1 f_1 = E_1 f_1 - E_0 f_1
    REQUIRE(proj.entries[1][0][0] == Catch::Approx(-0.5).margin(1e-14));
    REQUIRE(proj.entries[1][1][0] == Catch::Approx(0.5).margin(1e-14));
    REQUIRE(proj.entries[1][2][0] == Catch::Approx(-0.5).margin(1e-14));
    REQUIRE(proj.entries[1][3][0] == Catch::Approx(0.5).margin(1e-14));
    REQUIRE(is_mds(sp, proj).ok);
  }

  SECTION("projection fixes every MDS and kills constants") {
    auto walk = scalar_sequence(tgt, {{1, 1, -1, -1}, {2, -2, 1, -1}}, {0, 1});
    auto proj = mds_project(sp, walk);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t s = 0; s < 4; ++s)
        REQUIRE(proj.entries[i][s][0] == Catch::Approx(walk.entries[i][s][0]).margin(1e-14));

    auto constant = scalar_sequence(tgt, {{3, 3, 3, 3}, {3, 3, 3, 3}}, {0, 1});
    auto zeroed = mds_project(sp, constant);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t s = 0; s < 4; ++s)
        REQUIRE(std::fabs(zeroed.entries[i][s][0]) <= 1e-14);
  }

  SECTION("projection is idempotent on random adapted sequences") {
    CounterRng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
      FilteredSpace rsp = random_dyadic_space(3, rng);
      RandomLqSequence seq = random_mds(rsp, 3, 2, rng);
      RandomLqSequence twice = mds_project(rsp, mds_project(rsp, seq));
      RandomLqSequence once = mds_project(rsp, seq);
      for (std::size_t i = 0; i < seq.length(); ++i)
        for (std::size_t s = 0; s < rsp.n_samples(); ++s)
          for (std::size_t j = 0; j < seq.n_points(); ++j)
            REQUIRE(twice.entries[i][s][j] ==
                    Catch::Approx(once.entries[i][s][j]).margin(1e-12));
    }
  }
}

TEST_CASE("JSON round trip is bit-exact") {
  CounterRng rng(11);
  FilteredSpace sp = random_dyadic_space(2, rng);
  RandomLqSequence seq = random_mds(sp, 2, 3, rng);

  json doc = to_json(sp, seq);
  std::string text = doc.dump();
  auto [sp2, seq2] = space_and_sequence_from_json(json::parse(text));

  REQUIRE(sp2.n_samples() == sp.n_samples());
  for (std::size_t s = 0; s < sp.n_samples(); ++s) REQUIRE(sp2.probs()[s] == sp.probs()[s]);
  REQUIRE(seq2.length() == seq.length());
  for (std::size_t i = 0; i < seq.length(); ++i)
    for (std::size_t s = 0; s < sp.n_samples(); ++s)
      for (std::size_t j = 0; j < seq.n_points(); ++j)
        REQUIRE(seq2.entries[i][s][j] == seq.entries[i][s][j]);
  for (std::size_t j = 0; j < seq.n_points(); ++j)
    REQUIRE(seq2.target.weights[j] == seq.target.weights[j]);
}
