#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "brlab/decoupling.hpp"
#include "brlab/instances.hpp"

using namespace brlab;

namespace {

// path-dependent MDS on the uniform dyadic tree: step-2 size depends on the step-1 sign
RandomLqSequence path_dependent_mds(const FilteredSpace& sp) {
  FiniteMeasureSpace tgt({1.0});
  std::vector<RandomLqVar> entries(2, zero_var(sp.n_samples(), 1));
  for (std::size_t s = 0; s < sp.n_samples(); ++s) {
    bool up = sp.atom_of(0, s) == 0;
    entries[0][s][0] = up ? 1.0 : -1.0;
    double scale = up ? 2.0 : 0.5;
    entries[1][s][0] = (s % 2 == 0 ? scale : -scale);
  }
  return RandomLqSequence(tgt, std::move(entries), {0, 1});
}

} // namespace

TEST_CASE("decouple: deterministic sequence is its own tangent") {
  FilteredSpace sp = build_filtered_space({1.0}, {{{0}}});
  FiniteMeasureSpace tgt({1.0, 1.0});
  RandomLqSequence det(tgt, {RandomLqVar{LqVector({1.0, 2.0})}}, {0});
  DecoupledPair pair = decouple(sp, det);
  REQUIRE(pair.product.n_samples() == 1);
  REQUIRE(pair.tangent.entries[0][0][0] == 1.0);
  auto t = verify_tangency(pair);
  REQUIRE(t.ok);
  REQUIRE(t.worst_gap == 0.0);
  REQUIRE(verify_ci(pair));
}

TEST_CASE("decouple on the dyadic tree: exact tangency and CI") {
  FilteredSpace sp = dyadic_space(2);
  RandomLqSequence seq = path_dependent_mds(sp);
  DecoupledPair pair = decouple(sp, seq);

  SECTION("verifications pass with zero gap on the dyadic model") {
    auto t = verify_tangency(pair);
    REQUIRE(t.ok);
    REQUIRE(t.worst_gap == 0.0);
    REQUIRE(verify_ci(pair));
  }

  SECTION("tangent conditional histograms match the original ones") {
    // spot-check one atom by hand: on the first level-0 atom, the second tangent
    // entry takes values +-2 with conditional probability 1/2 each
    const Partition& part = pair.product.partition(pair.tangent.prev_level(1));
    bool found = false;
    for (const auto& block : part) {
      if (pair.omega_of[block.front()] != 0) continue;
      double p_pos = 0.0, mass = 0.0;
      for (std::size_t ps : block) {
        mass += pair.product.probs()[ps];
        if (pair.tangent.entries[1][ps][0] == 2.0) p_pos += pair.product.probs()[ps];
      }
      REQUIRE(p_pos / mass == Catch::Approx(0.5).margin(1e-14));
      found = true;
    }
    REQUIRE(found);
  }

  SECTION("the embedded original is not conditionally independent given G") {
    DecoupledPair impostor = pair;
    impostor.tangent = impostor.original;
    REQUIRE_FALSE(verify_ci(impostor));
  }

  SECTION("shuffled-values impostor fails tangency") {
    DecoupledPair impostor = pair;
    for (std::size_t ps = 0; ps < impostor.product.n_samples(); ++ps)
      impostor.tangent.entries[1][ps][0] *= 3.0;
    auto t = verify_tangency(impostor);
    REQUIRE_FALSE(t.ok);
    REQUIRE(t.worst_gap > 0.0);
  }
}

TEST_CASE("independent inputs decouple to ratio one") {
  CounterRng rng(41);
  auto [sp, seq] = random_independent_sequence(2, 2, 1, rng);
  DecoupledPair pair = decouple(sp, seq);
  auto t = verify_tangency(pair);
  REQUIRE(t.ok);
  REQUIRE(verify_ci(pair));
  for (double p : {1.5, 2.0, 3.0}) {
    DecouplingRatio r = decoupling_ratio(pair, p, 2.0);
    REQUIRE(r.ratio == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("p = 2 decoupling ratio is one for any MDS") {
  FilteredSpace sp = dyadic_space(2);
  RandomLqSequence seq = path_dependent_mds(sp);
  DecoupledPair pair = decouple(sp, seq);
  DecouplingRatio r = decoupling_ratio(pair, 2.0, 2.0);
  REQUIRE(r.ratio == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("single-step sequences are trivially decoupled") {
  CounterRng rng(43);
  FilteredSpace sp = random_dyadic_space(2, rng);
  RandomLqSequence seq = random_mds(sp, 1, 2, rng);
  DecoupledPair pair = decouple(sp, seq);
  REQUIRE(verify_tangency(pair, 1e-15).ok);
  REQUIRE(verify_ci(pair));
}

TEST_CASE("tangent_under_map preserves tangency and CI") {
  FilteredSpace sp = dyadic_space(2);
  RandomLqSequence seq = path_dependent_mds(sp);
  DecoupledPair pair = decouple(sp, seq);

  SECTION("identity maps give the same pair") {
    std::vector<std::function<LqVector(const LqVector&)>> ident(
        2, [](const LqVector& v) { return v; });
    DecoupledPair same = tangent_under_map(pair, ident);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t ps = 0; ps < pair.product.n_samples(); ++ps)
        REQUIRE(same.tangent.entries[i][ps][0] == pair.tangent.entries[i][ps][0]);
  }

  SECTION("zero maps give a trivially tangent pair") {
    std::vector<std::function<LqVector(const LqVector&)>> zero(
        2, [](const LqVector& v) { return LqVector(v.size(), 0.0); });
    DecoupledPair z = tangent_under_map(pair, zero);
    auto t = verify_tangency(z);
    REQUIRE(t.ok);
    REQUIRE(verify_ci(z));
  }

  SECTION("coordinate truncation keeps the pair decoupled") {
    std::vector<std::function<LqVector(const LqVector&)>> trunc(2, [](const LqVector& v) {
      LqVector out = v;
      for (double& x : out.values) x = std::clamp(x, -1.0, 1.0);
      return out;
    });
    DecoupledPair tr = tangent_under_map(pair, trunc);
    auto t = verify_tangency(tr);
    REQUIRE(t.ok);
    REQUIRE(t.worst_gap == 0.0);
    REQUIRE(verify_ci(tr));
  }
}

TEST_CASE("uniqueness in law: independent reconstructions share the joint tangent law") {
  FilteredSpace sp = dyadic_space(2);
  RandomLqSequence seq = path_dependent_mds(sp);
  DecoupledPair a = decouple(sp, seq);
  DecoupledPair b = decouple(sp, seq);

  auto joint_law = [](const DecoupledPair& pair) {
    std::vector<std::pair<std::vector<double>, double>> raw;
    for (std::size_t ps = 0; ps < pair.product.n_samples(); ++ps) {
      std::vector<double> key;
      for (std::size_t i = 0; i < pair.tangent.length(); ++i)
        key.insert(key.end(), pair.tangent.entries[i][ps].values.begin(),
                   pair.tangent.entries[i][ps].values.end());
      raw.push_back({key, pair.product.probs()[ps]});
    }
    return detail::aggregate_law(std::move(raw));
  };
  REQUIRE(detail::total_variation_gap(joint_law(a), joint_law(b)) == 0.0);
}

TEST_CASE("random instances decouple exactly and stay MDS") {
  CounterRng rng(47);
  for (int rep = 0; rep < 25; ++rep) {
    FilteredSpace sp = dyadic_space(2 + static_cast<int>(rng.next_below(2)));
    RandomLqSequence seq = random_mds(sp, 2, 2, rng);
    DecoupledPair pair = decouple(sp, seq);
    auto t = verify_tangency(pair);
    REQUIRE(t.ok);
    REQUIRE(t.worst_gap == 0.0);
    REQUIRE(verify_ci(pair));
    REQUIRE(is_mds(pair.product, pair.tangent, 1e-12).ok);
  }
}

TEST_CASE("sample cap is enforced") {
  FilteredSpace sp = dyadic_space(3);
  CounterRng rng(53);
  RandomLqSequence seq = random_mds(sp, 3, 1, rng);
  CHECK_THROWS_AS(decouple(sp, seq, 100), error);
}

TEST_CASE("recoupling direction stays in a band on random instances") {
  CounterRng rng(61);
  double lo = 1e300, hi = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    FilteredSpace sp = dyadic_space(2);
    RandomLqSequence seq = random_mds(sp, 2, 2, rng);
    DecoupledPair pair = decouple(sp, seq);
    for (double p : {1.5, 2.5}) {
      DecouplingRatio d = decoupling_ratio(pair, p, 2.0);
      DecouplingRatio r = recoupling_ratio(pair, p, 2.0);
      REQUIRE(d.ratio * r.ratio == Catch::Approx(1.0).margin(1e-9));
      lo = std::min(lo, d.ratio);
      hi = std::max(hi, d.ratio);
    }
  }
  // both decoupling and recoupling constants are finite on the ensemble
  REQUIRE(lo > 0.3);
  REQUIRE(hi < 3.0);
}
