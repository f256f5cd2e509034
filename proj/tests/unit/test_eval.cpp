#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "mihe/eval.hpp"

using namespace mihe;

namespace {

ScoreSet make_scores(const std::vector<double>& s, const std::vector<bool>& t) {
  ScoreSet out;
  for (std::size_t k = 0; k < s.size(); ++k) out.entries.push_back({std::to_string(k), s[k], t[k]});
  return out;
}

// Probability that a random positive outscores a random negative, ties half.
double pair_auc(const ScoreSet& s) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& p : s.entries)
    for (const auto& n : s.entries)
      if (*p.truth && !*n.truth) {
        pairs += 1.0;
        wins += p.score > n.score ? 1.0 : (p.score == n.score ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST_CASE("ROC of a small example") {
  const ScoreSet s = make_scores({0.9, 0.8, 0.7, 0.6}, {true, false, true, false});
  const auto roc = roc_curve(s);
  REQUIRE(roc.size() == 5);
  CHECK(roc[0].fpr == 0.0);
  CHECK(roc[0].tpr == 0.0);
  CHECK(roc[1].tpr == 0.5);
  CHECK(roc[2].fpr == 0.5);
  CHECK(roc[4].fpr == 1.0);
  CHECK(roc[4].tpr == 1.0);
  CHECK(auc(s) == doctest::Approx(0.75));
}

TEST_CASE("perfect, inverted and constant scores") {
  CHECK(auc(make_scores({3, 2, 1, 0}, {true, true, false, false})) == 1.0);
  CHECK(auc(make_scores({0, 1, 2, 3}, {true, true, false, false})) == 0.0);
  const ScoreSet flat = make_scores({1, 1, 1, 1}, {true, false, true, false});
  CHECK(auc(flat) == 0.5);
  CHECK(roc_curve(flat).size() == 2);
}

TEST_CASE("AUC equals the pairwise win rate") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> level(0, 9);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s;
    std::vector<bool> t;
    for (int k = 0; k < 60; ++k) {
      s.push_back(level(rng));
      t.push_back(coin(rng));
    }
    t[0] = true;
    t[1] = false;
    const ScoreSet set = make_scores(s, t);
    CHECK(auc(set) == doctest::Approx(pair_auc(set)).epsilon(1e-12));
  }
}

TEST_CASE("ROC input errors") {
  CHECK_THROWS_AS(auc(make_scores({1, 2}, {true, true})), std::invalid_argument);
  ScoreSet missing = make_scores({1, 2}, {true, false});
  missing.entries[1].truth.reset();
  CHECK_THROWS_AS(auc(missing), std::invalid_argument);
  CHECK_THROWS_AS(missing.set_truth({true}), std::invalid_argument);
}

TEST_CASE("partial AUC and NAUC") {
  const ScoreSet perfect = make_scores({3, 2, 1, 0}, {true, true, false, false});
  CHECK(partial_auc(roc_curve(perfect), 0.1) == doctest::Approx(1.0));
  // chance-level diagonal: area under y = x on [0, f] divided by f is f / 2
  const std::vector<RocPoint> diag{{0.0, 0.0}, {1.0, 1.0}};
  CHECK(partial_auc(diag, 0.2) == doctest::Approx(0.1));
  CHECK(partial_auc(diag, 1.0) == doctest::Approx(0.5));
  CHECK(partial_auc(diag, 3.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(partial_auc(diag, 0.0), std::invalid_argument);

  // 10 instances, 8 negatives: 0.1 alarms per unit area with unit pixels -> 1 / 8
  const ScoreSet s = make_scores({9, 8, 7, 6, 5, 4, 3, 2, 1, 0},
                                 {true, false, true, false, false, false, false, false, false, false});
  CHECK(far_to_fpr(s, 0.1, 1.0) == doctest::Approx(0.125));
  CHECK(far_to_fpr(s, 10.0, 1.0) == 1.0);
  CHECK(nauc(s, 0.1, 1.0) == doctest::Approx(partial_auc(roc_curve(s), 0.125)));
  CHECK(nauc(s, 1e6, 1.0) == doctest::Approx(auc(s)));
  CHECK_THROWS_AS(nauc(s, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("spectral angle") {
  VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << 1.0, 1.0;
  CHECK(spectral_angle_deg(a, b) == doctest::Approx(45.0));
  CHECK(spectral_angle_deg(a, 3.0 * a) == doctest::Approx(0.0));
  CHECK(spectral_angle_deg(a, -a) == doctest::Approx(180.0));
}

TEST_CASE("lower median and derived seeds") {
  CHECK(lower_median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(lower_median({4.0, 1.0, 3.0, 2.0}) == 2.0);
  CHECK(std::isnan(lower_median({})));

  std::set<std::uint64_t> seen;
  for (std::uint64_t g = 0; g < 20; ++g)
    for (std::uint64_t r = 0; r < 20; ++r) seen.insert(derive_seed(7, g, r));
  CHECK(seen.size() == 400);
  CHECK(derive_seed(7, 3, 4) == derive_seed(7, 3, 4));
  CHECK(derive_seed(7, 3, 4) != derive_seed(8, 3, 4));
}

TEST_CASE("sweep spec validation and parameter overrides") {
  CHECK_NOTHROW(default_sweep_spec().validate());
  SweepSpec bad;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.axes = {{"gamma", {1.0}}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.axes = {{"M", {}}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.axes = {{"M", {3}}};
  bad.runs_per_setting = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  const HyperParams hp = with_param(with_param(HyperParams{}, "M", 4.0), "lambda", 0.2);
  CHECK(hp.M == 4);
  CHECK(hp.lambda == 0.2);
  CHECK(with_param(HyperParams{}, "b", -2.0).b == -2.0);
  CHECK(with_param(HyperParams{}, "beta", 3.0).beta == 3.0);
  CHECK_THROWS_AS(with_param(HyperParams{}, "rho", 1.0), std::invalid_argument);
}

TEST_CASE("small sweep: row order, statistics and failed runs") {
  ExperimentConfig cfg;
  cfg.sim = presets::parameter_study(20, 10, 0.3, 1);
  cfg.test_seed = 2;
  cfg.hp.M = 2;
  cfg.hp.max_outer_iters = 1;
  cfg.hp.ista_iters = 20;
  cfg.hp.reuse_codes_within_iteration = true;
  const ExperimentData data = prepare_experiment(rock_fixture_library(), cfg);
  CHECK_FALSE(data.train.flat_instances() == data.test.flat_instances());

  SweepSpec spec;
  spec.runs_per_setting = 2;
  // 300 background concepts exceed the 100 negative instances and must fail
  spec.axes = {{"M", {2, 300}}, {"beta", {1.0}}};
  testutil::WarningCapture w;
  const auto rows = run_sweep(data, cfg, spec);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].id == "M");
  CHECK(rows[2].id == "beta");
  CHECK(rows[0].failed == 0);
  CHECK(rows[0].aucs.size() == 2);
  CHECK(rows[0].min_auc <= rows[0].median_auc);
  CHECK(rows[0].median_auc <= rows[0].max_auc);
  CHECK(rows[1].failed == 2);
  CHECK(std::isnan(rows[1].median_auc));
  int failures = 0;
  for (const auto& m : w.messages) failures += m.find("sweep run failed") != std::string::npos;
  CHECK(failures == 2);

  spec.joint = true;
  spec.runs_per_setting = 1;
  spec.axes = {{"M", {1, 2}}, {"beta", {1.0, 2.0, 3.0}}};
  const auto grid = run_sweep(data, cfg, spec);
  REQUIRE(grid.size() == 6);
  CHECK(grid[1].values[0].second == 1.0);
  CHECK(grid[1].values[1].second == 2.0);
  CHECK(grid[3].values[0].second == 2.0);
  CHECK(grid[3].values[1].second == 1.0);
}

TEST_CASE("a single experiment reports AUC and target angles") {
  ExperimentConfig cfg;
  cfg.sim = presets::parameter_study(20, 10, 0.3, 1);
  cfg.hp.M = 2;
  cfg.hp.max_outer_iters = 1;
  cfg.hp.ista_iters = 20;
  const ExperimentData data = prepare_experiment(rock_fixture_library(), cfg);
  const RunResult r = run_experiment(data, cfg.hp, DetectorMethod::kAce);
  CHECK(r.auc >= 0.0);
  CHECK(r.auc <= 1.0);
  REQUIRE(r.target_angles_deg.size() == 1);
  CHECK(r.target_angles_deg[0] >= 0.0);
  CHECK(r.scores.entries.size() == 200);
}
