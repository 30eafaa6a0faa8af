#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "brlab/decoupling.hpp"
#include "brlab/duality.hpp"
#include "brlab/equivalence.hpp"
#include "brlab/ihat.hpp"
#include "brlab/instances.hpp"
#include "brlab/integrator.hpp"
#include "brlab/json_io.hpp"
#include "brlab/report.hpp"

namespace brlab {

// ---------------------------------------------------------------------------
// Batch experiment runner. A config is a JSON document
//   {"experiments": [ {"kind": "...", ...}, ... ]}
// Each experiment writes a CSV table and a JSON summary; the run exits 0 only
// if every per-experiment assertion holds.
// ---------------------------------------------------------------------------

inline int exit_ok() { return 0; }
inline int exit_assert_failed() { return 1; }
inline int exit_config_invalid() { return 2; }

// content hash of a config with the seed field removed, so reruns under a new
// seed count as the same experiment
inline std::uint64_t config_hash(json config) {
  config.erase("seed");
  std::string text = config.dump();
  std::uint64_t h = 1469598103934665603ULL; // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct ExperimentResult {
  std::string name;
  RatioReport report;
  std::vector<std::string> failures; // empty = all assertions held
  std::string claim;                 // one-line statement of what was checked
  std::uint64_t hash = 0;
};

namespace detail {

inline double get_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}
inline std::size_t get_or(const json& j, const char* key, std::size_t fallback) {
  return j.contains(key) ? j.at(key).get<std::size_t>() : fallback;
}

inline void assert_positive_finite(ExperimentResult& res) {
  RatioSummary s = res.report.summary();
  if (s.used == 0) return;
  if (!(s.min > 0.0) || !std::isfinite(s.max))
    res.failures.push_back("ratio band must be positive and finite");
}

} // namespace detail

inline ExperimentResult run_br_equivalence(const json& cfg, std::uint64_t seed, bool independent) {
  BrEquivalenceConfig c;
  c.p = cfg.at("p").get<double>();
  c.q = cfg.at("q").get<double>();
  c.depth = static_cast<int>(detail::get_or(cfg, "depth", std::size_t{2}));
  c.length = detail::get_or(cfg, "length", std::size_t{2});
  c.n_points = detail::get_or(cfg, "n_points", std::size_t{2});
  c.n_instances = detail::get_or(cfg, "n_instances", std::size_t{50});
  c.seed = seed;
  c.independent = independent;
  ExperimentResult res;
  res.name = independent ? "rosenthal" : "br-equivalence";
  res.claim = "two-sided martingale moment vs six-regime predictable norm";
  res.report = br_equivalence_report(c);
  detail::assert_positive_finite(res);
  if (c.p == 2.0 && c.q == 2.0) {
    RatioSummary s = res.report.summary();
    if (std::fabs(s.min - 1.0) > 1e-9 || std::fabs(s.max - 1.0) > 1e-9)
      res.failures.push_back("p=q=2 ratios must equal one");
  }
  return res;
}

inline ExperimentResult run_decoupling(const json& cfg, std::uint64_t seed) {
  std::size_t n_instances = detail::get_or(cfg, "n_instances", std::size_t{50});
  int depth = static_cast<int>(detail::get_or(cfg, "depth", std::size_t{2}));
  std::size_t length = detail::get_or(cfg, "length", std::size_t{2});
  std::size_t n_points = detail::get_or(cfg, "n_points", std::size_t{1});
  double p = detail::get_or(cfg, "p", 2.5);
  double q = detail::get_or(cfg, "q", 1.5);

  ExperimentResult res;
  res.name = "decoupling";
  res.claim = "tangency and (CI) hold exactly; coupled/decoupled moment ratios";
  res.report.experiment = res.name;
  res.report.p = p;
  res.report.q = q;
  res.report.seed = seed;
  res.report.regime = regime_name(regime_of(p, q));

  CounterRng root(seed);
  for (std::size_t i = 0; i < n_instances; ++i) {
    CounterRng rng = root.split(i);
    FilteredSpace sp = dyadic_space(depth); // uniform tree keeps the gap exactly zero
    RandomLqSequence seq = random_mds(sp, length, n_points, rng);
    DecoupledPair pair = decouple(sp, seq);
    TangencyReport t = verify_tangency(pair);
    if (!(t.ok && t.worst_gap == 0.0))
      res.failures.push_back("tangency gap must be exactly zero, instance " + std::to_string(i));
    if (!verify_ci(pair))
      res.failures.push_back("condition (CI) failed, instance " + std::to_string(i));
    DecouplingRatio r = decoupling_ratio(pair, p, q);
    res.report.add(i, r.lhs, r.rhs);
  }
  detail::assert_positive_finite(res);
  return res;
}

inline ExperimentResult run_novikov(const json& cfg, std::uint64_t seed) {
  double lambda = detail::get_or(cfg, "lambda", 2.0);
  double horizon = detail::get_or(cfg, "horizon", 1.0);
  std::size_t grid_n = detail::get_or(cfg, "grid_n", std::size_t{1} << 14);
  std::size_t n_paths = detail::get_or(cfg, "n_paths", std::size_t{1000000});
  double p = detail::get_or(cfg, "p", 4.0);
  double tolerance = detail::get_or(cfg, "tolerance", 0.02);

  ExperimentResult res;
  res.name = "novikov";
  res.claim = "fourth moment of the unit-field compensated stream equals rate*(3*rate+1)";
  res.report.experiment = res.name;
  res.report.p = p;
  res.report.q = 2.0;
  res.report.seed = seed;
  res.report.regime = "-";

  MarkSpace marks({1.0});
  SimulatedMeasure sim = simulate_poisson_rm(horizon, grid_n, marks, lambda, n_paths, seed);
  PredictableField F = scalar_constant_field(sim.stream.grid, 1, 1.0);
  NovikovReport nov = novikov_check(F, sim.stream, sim.compensator, p);
  double moment = std::pow(nov.lhs, p);
  double expect = lambda * (3.0 * lambda + 1.0) * horizon * horizon; // p = 4, unit field
  res.report.add(0, moment, expect);
  if (p == 4.0 && std::fabs(moment - expect) > tolerance * expect)
    res.failures.push_back("quartic moment outside the configured tolerance");

  // enumeration-mode exactness alongside the Monte Carlo estimate
  CoxIntensity intensity;
  intensity.bound = 3.0;
  intensity.rate = [](std::size_t, const std::vector<Event>& hist) {
    return 1.0 + std::min<double>(static_cast<double>(hist.size()), 1.0);
  };
  EnumeratedMeasure em = enumerate_cox_rm(1.0, 3, MarkSpace({1.0, 0.5}), intensity);
  PredictableField G = scalar_constant_field(em.grid, 2, 0.8);
  IsometryReport iso = novikov_isometry_exact(G, em);
  res.report.add(1, iso.lhs, iso.rhs);
  if (!iso.holds) res.failures.push_back("p=2 isometry not exact in enumeration mode");
  return res;
}

inline ExperimentResult run_random_measure_equivalence(const json& cfg, std::uint64_t seed) {
  RandomMeasureEquivConfig c;
  c.p = cfg.at("p").get<double>();
  c.q = cfg.at("q").get<double>();
  c.grid_n = detail::get_or(cfg, "grid_n", std::size_t{16});
  c.n_marks = detail::get_or(cfg, "n_marks", std::size_t{2});
  c.rate = detail::get_or(cfg, "rate", 1.0);
  c.cox = cfg.contains("cox") && cfg.at("cox").get<bool>();
  c.n_paths = detail::get_or(cfg, "n_paths", std::size_t{256});
  c.n_instances = detail::get_or(cfg, "n_instances", std::size_t{20});
  c.seed = seed;
  ExperimentResult res;
  res.name = "random-measure-equivalence";
  res.claim = "compensated-integral maximal moment vs I-hat regime value";
  RandomMeasureEquivReports reps = mainintranmeas_report(c);
  res.report = reps.running_sup;
  detail::assert_positive_finite(res);
  return res;
}

inline ExperimentResult run_main_si(const json& cfg, std::uint64_t seed) {
  MainSiConfig c;
  c.p = cfg.at("p").get<double>();
  c.q = cfg.at("q").get<double>();
  c.grid_n = detail::get_or(cfg, "grid_n", std::size_t{8});
  c.h_dim = detail::get_or(cfg, "h_dim", std::size_t{2});
  c.n_points = detail::get_or(cfg, "n_points", std::size_t{2});
  c.n_paths = detail::get_or(cfg, "n_paths", std::size_t{512});
  c.n_instances = detail::get_or(cfg, "n_instances", std::size_t{10});
  c.seed = seed;
  ExperimentResult res;
  res.name = "main-si";
  res.claim = "three-part stochastic-integral maximal moment vs combined right side";
  res.report = main_si_report(c);
  detail::assert_positive_finite(res);
  return res;
}

inline ExperimentResult run_duality_suite(const json& cfg, std::uint64_t seed) {
  double p = detail::get_or(cfg, "p", 1.5);
  double q = detail::get_or(cfg, "q", 3.0);
  std::size_t n_instances = detail::get_or(cfg, "n_instances", std::size_t{25});
  std::size_t length = detail::get_or(cfg, "length", std::size_t{3});
  std::size_t n_points = detail::get_or(cfg, "n_points", std::size_t{2});

  ExperimentResult res;
  res.name = "duality-suite";
  res.claim = "brute-force dual norm within the two-sided witness band";
  res.report.experiment = res.name;
  res.report.p = p;
  res.report.q = q;
  res.report.seed = seed;
  res.report.regime = regime_name(regime_of(p, q));

  double pc = conjugate_exponent(p), qc = conjugate_exponent(q);
  double constant = std::min(q / p, qc / pc);
  CounterRng root(seed);
  for (std::size_t i = 0; i < n_instances; ++i) {
    CounterRng rng = root.split(i);
    FilteredSpace sp = random_dyadic_space(2, rng);
    RandomLqSequence g = random_mds(sp, length, n_points, rng);
    WitnessResult w = hsq_dual_witness(sp, g, p, q);
    if (w.certified_ratio < constant - 1e-6)
      res.failures.push_back("witness missed the lower constant, instance " + std::to_string(i));

    auto primal = [&](const RandomLqSequence& f) { return hsq_norm(sp, f, p, q, q); };
    auto adapt = [&](const RandomLqSequence& f) {
      RandomLqSequence out = f;
      for (std::size_t k = 0; k < f.length(); ++k)
        out.entries[k] = conditional_expectation(sp, f.entries[k], f.level(k));
      return out;
    };
    RandomLqSequence seed_h = w.h;
    if (w.h_norm > 0.0) seed_h = scaled(seed_h, 1.0 / w.h_norm);
    DualNormResult bf = dual_norm_bruteforce(sp, g, primal, adapt, {}, &seed_h);
    if (bf.value < constant * w.g_norm - 1e-6 || bf.value > w.g_norm + 1e-6)
      res.failures.push_back("brute-force dual norm left the band, instance " +
                             std::to_string(i));
    res.report.add(i, bf.value, w.g_norm);
  }

  // reverse dual Doob sweep rides along
  for (double pp : {0.3, 0.5, 1.0}) {
    CounterRng rng = root.split(1000 + static_cast<std::uint64_t>(pp * 10));
    for (int rep = 0; rep < 20; ++rep) {
      FilteredSpace sp = random_dyadic_space(2, rng);
      std::vector<ScalarRV> fs;
      for (std::size_t k = 0; k < 2; ++k) {
        ScalarRV f(sp.n_samples());
        for (double& x : f) x = std::fabs(rng.next_normal());
        fs.push_back(f);
      }
      if (!reverse_dual_doob_check(sp, fs, pp).holds)
        res.failures.push_back("reverse dual Doob failed");
    }
  }
  return res;
}

inline ExperimentResult run_experiment(const json& cfg, std::uint64_t seed) {
  require(cfg.contains("kind"), errc::config_invalid, "experiment needs a kind");
  std::string kind = cfg.at("kind").get<std::string>();
  ExperimentResult res;
  if (kind == "br-equivalence")
    res = run_br_equivalence(cfg, seed, false);
  else if (kind == "rosenthal")
    res = run_br_equivalence(cfg, seed, true);
  else if (kind == "decoupling")
    res = run_decoupling(cfg, seed);
  else if (kind == "novikov")
    res = run_novikov(cfg, seed);
  else if (kind == "random-measure-equivalence")
    res = run_random_measure_equivalence(cfg, seed);
  else if (kind == "main-si")
    res = run_main_si(cfg, seed);
  else if (kind == "duality-suite")
    res = run_duality_suite(cfg, seed);
  else
    fail(errc::config_invalid, "unknown experiment kind: " + kind);
  res.hash = config_hash(cfg);
  return res;
}

// ---------------------------------------------------------------------------
// Regression baselines: per (experiment, p, q, regime) a recorded ratio band.
// ---------------------------------------------------------------------------

struct BaselineEntry {
  double min = 0.0;
  double max = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t hash = 0;
};

struct BaselineStore {
  std::map<std::string, BaselineEntry> entries;

  static std::string key_of(const RatioReport& rep) {
    std::ostringstream k;
    k << rep.experiment << "|p=" << format_double(rep.p) << "|q=" << format_double(rep.q)
      << "|" << rep.regime;
    return k.str();
  }

  json to_json() const {
    json j;
    for (const auto& kv : entries)
      j[kv.first] = {{"min", kv.second.min},
                     {"max", kv.second.max},
                     {"seed", kv.second.seed},
                     {"hash", kv.second.hash}};
    return j;
  }

  static BaselineStore from_json(const json& j) {
    BaselineStore s;
    for (auto it = j.begin(); it != j.end(); ++it)
      s.entries[it.key()] = {it.value().at("min").get<double>(),
                             it.value().at("max").get<double>(),
                             it.value().at("seed").get<std::uint64_t>(),
                             it.value().at("hash").get<std::uint64_t>()};
    return s;
  }
};

// records or widens a band; refuses a changed config hash without force, and
// widenings beyond the 10% policy threshold also need force
inline bool baseline_update(BaselineStore& store, const ExperimentResult& res, bool force) {
  RatioSummary s = res.report.summary();
  if (s.used == 0) return true;
  std::string key = BaselineStore::key_of(res.report);
  auto it = store.entries.find(key);
  if (it == store.entries.end()) {
    store.entries[key] = {s.min, s.max, res.report.seed, res.hash};
    return true;
  }
  if (it->second.hash != res.hash && !force)
    fail(errc::hash_mismatch, "config hash changed for baseline " + key);
  double new_min = std::min(it->second.min, s.min);
  double new_max = std::max(it->second.max, s.max);
  bool widens_too_much =
      new_max > 1.10 * it->second.max || new_min < it->second.min / 1.10;
  if (widens_too_much && !force) return false;
  it->second.min = new_min;
  it->second.max = new_max;
  it->second.seed = res.report.seed;
  it->second.hash = res.hash;
  return true;
}

struct BaselineComparison {
  bool pass = true;
  bool warning = false; // empty store
  std::vector<std::string> diffs;
};

// every ratio must sit inside the stored band inflated by 10%
inline BaselineComparison compare_to_baseline(const BaselineStore& store,
                                              const ExperimentResult& res) {
  BaselineComparison cmp;
  RatioSummary s = res.report.summary();
  if (s.used == 0) return cmp;
  std::string key = BaselineStore::key_of(res.report);
  auto it = store.entries.find(key);
  if (it == store.entries.end()) {
    cmp.warning = true;
    return cmp;
  }
  double lo = it->second.min / 1.10, hi = it->second.max * 1.10;
  for (const RatioRow& row : res.report.rows) {
    if (row.skipped) continue;
    if (row.ratio < lo || row.ratio > hi) {
      cmp.pass = false;
      cmp.diffs.push_back(key + ": instance " + std::to_string(row.instance_id) + " ratio " +
                          format_double(row.ratio) + " outside [" + format_double(lo) + ", " +
                          format_double(hi) + "]");
    }
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Top-level run
// ---------------------------------------------------------------------------

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  std::string baseline_path;
  bool update_baseline = false;
  bool force = false;
  std::string timestamp; // goes into the CSV header comment only
};

inline int run(const json& config, const RunOptions& opts, std::ostream& log) {
  require(config.contains("experiments") && config.at("experiments").is_array(),
          errc::config_invalid, "config needs an experiments array");

  BaselineStore store;
  bool have_store = false;
  if (!opts.baseline_path.empty() && std::filesystem::exists(opts.baseline_path)) {
    std::ifstream in(opts.baseline_path);
    json j;
    in >> j;
    store = BaselineStore::from_json(j);
    have_store = true;
  }

  bool all_ok = true;
  json summary = json::array();
  std::size_t idx = 0;
  for (const json& exp : config.at("experiments")) {
    std::uint64_t seed = opts.seed_override
                             ? *opts.seed_override
                             : static_cast<std::uint64_t>(detail::get_or(exp, "seed",
                                                                         std::size_t{1}));
    ExperimentResult res = run_experiment(exp, seed);

    std::string base = opts.out_dir + "/" + res.name + "_" + std::to_string(idx);
    write_file(base + ".csv", to_csv(res.report, opts.timestamp));
    json js = summary_json(res.report);
    js["claim"] = res.claim;
    js["config_hash"] = res.hash;
    js["failures"] = res.failures;
    write_file(base + ".json", js.dump(2) + "\n");
    summary.push_back(js);

    for (const std::string& f : res.failures) {
      log << "[fail] " << res.name << ": " << f << "\n";
      all_ok = false;
    }

    if (!opts.baseline_path.empty()) {
      if (opts.update_baseline) {
        if (!baseline_update(store, res, opts.force)) {
          log << "[fail] " << res.name << ": baseline widening beyond the 10% policy\n";
          all_ok = false;
        }
      } else if (have_store) {
        BaselineComparison cmp = compare_to_baseline(store, res);
        if (cmp.warning) log << "[warn] " << res.name << ": no baseline recorded\n";
        for (const std::string& d : cmp.diffs) log << "[fail] " << d << "\n";
        if (!cmp.pass) all_ok = false;
      } else {
        log << "[warn] baseline file missing, comparison skipped\n";
      }
    }
    ++idx;
  }

  write_file(opts.out_dir + "/summary.json", summary.dump(2) + "\n");
  if (opts.update_baseline && !opts.baseline_path.empty())
    write_file(opts.baseline_path, store.to_json().dump(2) + "\n");
  return all_ok ? exit_ok() : exit_assert_failed();
}

} // namespace brlab
