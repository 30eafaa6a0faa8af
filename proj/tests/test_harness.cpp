#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "brlab/harness.hpp"

using namespace brlab;

namespace {

json tiny_br_config(double p, double q, std::uint64_t seed) {
  return json{{"experiments",
               {{{"kind", "br-equivalence"},
                 {"p", p},
                 {"q", q},
                 {"depth", 2},
                 {"length", 2},
                 {"n_points", 1},
                 {"n_instances", 5},
                 {"seed", seed}}}}};
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("brlab_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("run: empty experiment list exits zero with an empty report") {
  TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path.string();
  std::ostringstream log;
  json cfg{{"experiments", json::array()}};
  REQUIRE(run(cfg, opts, log) == 0);
  std::ifstream in(dir.path / "summary.json");
  json summary;
  in >> summary;
  REQUIRE(summary.is_array());
  REQUIRE(summary.empty());
}

TEST_CASE("run: br-equivalence at p=q=2 passes with all ratios one") {
  TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path.string();
  std::ostringstream log;
  REQUIRE(run(tiny_br_config(2.0, 2.0, 5), opts, log) == 0);
  std::ifstream in(dir.path / "br-equivalence_0.json");
  json j;
  in >> j;
  REQUIRE(j.at("min").get<double>() == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(j.at("max").get<double>() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("run: invalid configs exit 2 through the error code") {
  json bad{{"experiments", {{{"kind", "no-such-kind"}}}}};
  TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path.string();
  std::ostringstream log;
  CHECK_THROWS_AS(run(bad, opts, log), error);
  try {
    run(bad, opts, log);
  } catch (const error& e) {
    REQUIRE(e.code() == errc::config_invalid);
  }
}

TEST_CASE("determinism: identical config and seed give byte-identical CSV bodies") {
  TempDir a, b;
  std::ostringstream log;
  RunOptions oa, ob;
  oa.out_dir = a.path.string();
  ob.out_dir = b.path.string();
  oa.timestamp = "first run";
  ob.timestamp = "second run"; // only the header comment differs
  json cfg = tiny_br_config(3.0, 1.5, 77);
  REQUIRE(run(cfg, oa, log) == 0);
  REQUIRE(run(cfg, ob, log) == 0);
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string csv_a = read(a.path / "br-equivalence_0.csv");
  std::string csv_b = read(b.path / "br-equivalence_0.csv");
  // strip the leading comment lines
  auto body = [](const std::string& s) { return s.substr(s.find("instance_id")); };
  REQUIRE(body(csv_a) == body(csv_b));
  REQUIRE(csv_a != csv_b); // timestamps differ
}

TEST_CASE("baselines") {
  ExperimentResult res;
  res.name = "br-equivalence";
  res.report.experiment = "br-equivalence";
  res.report.p = 3.0;
  res.report.q = 1.5;
  res.report.regime = "q<2<=p";
  res.report.seed = 1;
  res.hash = 42;
  res.report.add(0, 1.2, 1.0);
  res.report.add(1, 0.9, 1.0);

  SECTION("first run creates the band; identical rerun leaves it unchanged") {
    BaselineStore store;
    REQUIRE(baseline_update(store, res, false));
    BaselineEntry e = store.entries.begin()->second;
    REQUIRE(e.min == Catch::Approx(0.9));
    REQUIRE(e.max == Catch::Approx(1.2));
    REQUIRE(baseline_update(store, res, false));
    REQUIRE(store.entries.begin()->second.min == Catch::Approx(0.9));
    REQUIRE(store.entries.begin()->second.max == Catch::Approx(1.2));
  }

  SECTION("changed config hash is refused without force") {
    BaselineStore store;
    REQUIRE(baseline_update(store, res, false));
    ExperimentResult other = res;
    other.hash = 43;
    CHECK_THROWS_AS(baseline_update(store, other, false), error);
    REQUIRE(baseline_update(store, other, true));
  }

  SECTION("small widening under a new seed is accepted, large is not") {
    BaselineStore store;
    REQUIRE(baseline_update(store, res, false));
    ExperimentResult wider = res;
    wider.report.seed = 2;
    wider.report.rows.clear();
    wider.report.add(0, 1.25, 1.0); // < 10% above 1.2
    REQUIRE(baseline_update(store, wider, false));
    REQUIRE(store.entries.begin()->second.max == Catch::Approx(1.25));

    ExperimentResult huge = res;
    huge.report.seed = 3;
    huge.report.rows.clear();
    huge.report.add(0, 2.0, 1.0);
    REQUIRE_FALSE(baseline_update(store, huge, false));
    REQUIRE(baseline_update(store, huge, true));
  }

  SECTION("comparison inflates the stored band by 10%") {
    BaselineStore store;
    REQUIRE(baseline_update(store, res, false));
    ExperimentResult probe = res;
    probe.report.rows.clear();
    probe.report.add(0, 1.31, 1.0); // within 1.2 * 1.10
    REQUIRE(compare_to_baseline(store, probe).pass);
    probe.report.rows.clear();
    probe.report.add(0, 1.35, 1.0); // outside
    BaselineComparison cmp = compare_to_baseline(store, probe);
    REQUIRE_FALSE(cmp.pass);
    REQUIRE_FALSE(cmp.diffs.empty());
  }

  SECTION("empty store compares as pass-with-warning") {
    BaselineStore store;
    BaselineComparison cmp = compare_to_baseline(store, res);
    REQUIRE(cmp.pass);
    REQUIRE(cmp.warning);
  }

  SECTION("store round-trips through JSON") {
    BaselineStore store;
    REQUIRE(baseline_update(store, res, false));
    BaselineStore back = BaselineStore::from_json(store.to_json());
    REQUIRE(back.entries.size() == 1);
    REQUIRE(back.entries.begin()->second.max == store.entries.begin()->second.max);
  }
}

TEST_CASE("config hash ignores the seed") {
  json a{{"kind", "br-equivalence"}, {"p", 2.0}, {"seed", 1}};
  json b{{"kind", "br-equivalence"}, {"p", 2.0}, {"seed", 999}};
  json c{{"kind", "br-equivalence"}, {"p", 2.5}, {"seed", 1}};
  REQUIRE(config_hash(a) == config_hash(b));
  REQUIRE(config_hash(a) != config_hash(c));
}

TEST_CASE("duality-suite experiment passes its internal assertions") {
  json cfg{{"experiments",
            {{{"kind", "duality-suite"},
              {"p", 1.5},
              {"q", 3.0},
              {"n_instances", 4},
              {"length", 2},
              {"n_points", 2},
              {"seed", 3}}}}};
  TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path.string();
  std::ostringstream log;
  REQUIRE(run(cfg, opts, log) == 0);
}

TEST_CASE("decoupling experiment asserts exact verification") {
  json cfg{{"experiments",
            {{{"kind", "decoupling"},
              {"n_instances", 6},
              {"depth", 2},
              {"length", 2},
              {"n_points", 1},
              {"p", 2.0},
              {"q", 2.0},
              {"seed", 11}}}}};
  TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path.string();
  std::ostringstream log;
  REQUIRE(run(cfg, opts, log) == 0);
}
