#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "mihe/io.hpp"

using namespace mihe;
using nlohmann::json;

TEST_CASE("bag CSV round trip keeps bag order and values exactly") {
  auto toy = testutil::make_toy(1, 4, 1, 2, 3, 5);
  std::stringstream ss;
  write_bags_csv(ss, toy.ds);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == "bag_id,bag_label,f0,f1,f2,f3");
  const BagDataset back = read_bags_csv(ss);
  REQUIRE(back.bags.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.bags[i].id == toy.ds.bags[i].id);
    CHECK(back.bags[i].label == toy.ds.bags[i].label);
    CHECK(back.bags[i].instances == toy.ds.bags[i].instances);
  }
}

TEST_CASE("bag CSV groups interleaved rows and rejects malformed input") {
  std::stringstream ok("bag_id,bag_label,f0\na,1,0.5\nb,0,1.5\na,1,2.5\n");
  const BagDataset ds = read_bags_csv(ok);
  REQUIRE(ds.bags.size() == 2);
  CHECK(ds.bags[0].id == "a");
  CHECK(ds.bags[0].size() == 2);
  CHECK(ds.bags[0].instances(0, 1) == 2.5);

  std::stringstream mixed("bag_id,bag_label,f0\na,1,0.5\na,0,1.5\n");
  CHECK_THROWS_AS(read_bags_csv(mixed), IoError);
  std::stringstream label("bag_id,bag_label,f0\na,2,0.5\n");
  CHECK_THROWS_AS(read_bags_csv(label), IoError);
  std::stringstream fields("bag_id,bag_label,f0,f1\na,1,0.5\n");
  CHECK_THROWS_AS(read_bags_csv(fields), IoError);
  std::stringstream number("bag_id,bag_label,f0\na,1,abc\n");
  CHECK_THROWS_AS(read_bags_csv(number), IoError);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_bags_csv(empty), IoError);
}

TEST_CASE("truth and score files") {
  const SimulatedData sim =
      generate_dataset(rock_fixture_library(), presets::parameter_study(4, 2, 0.1, 1));
  std::stringstream truth_csv;
  write_truth_csv(truth_csv, sim);
  const auto truth = read_truth_csv(truth_csv);
  REQUIRE(truth.size() == 40);
  CHECK(truth[0].instance_id == "0");
  CHECK(truth[0].bag_id == "bag_001");
  CHECK(truth[0].truth);
  CHECK_FALSE(truth[2].truth);
  CHECK_FALSE(truth[39].truth);

  ScoreSet s;
  for (int k = 0; k < 40; ++k) s.entries.push_back({std::to_string(k), 0.25 * k, std::nullopt});
  attach_truth(s, truth);
  CHECK(*s.entries[1].truth);

  std::stringstream scores_csv;
  write_scores_csv(scores_csv, s);
  const ScoreSet back = read_scores_csv(scores_csv);
  REQUIRE(back.entries.size() == 40);
  for (std::size_t k = 0; k < 40; ++k) {
    CHECK(back.entries[k].score == s.entries[k].score);
    CHECK(back.entries[k].truth == s.entries[k].truth);
  }

  ScoreSet extra = s;
  extra.entries.push_back({"999", 0.0, std::nullopt});
  CHECK_THROWS_AS(attach_truth(extra, truth), IoError);
  auto dup = truth;
  dup.push_back(truth[0]);
  CHECK_THROWS_AS(attach_truth(s, dup), IoError);
}

TEST_CASE("model JSON round trip is exact") {
  auto toy = testutil::make_toy(2, 5, 1, 2, 2, 8);
  ModelFile m;
  m.hp.M = 2;
  m.hp.seed = 77;
  m.dict = toy.dict;
  const BackgroundStats bg = fit_background(toy.ds.stacked(BagLabel::kNegative));
  m.mu = bg.mu;
  m.sigma = bg.sigma;
  m.seed = 77;
  m.iterations = 12;
  m.final_objective = -3.25;

  const std::string text = dump_model(m);
  const ModelFile back = model_from_json(json::parse(text));
  CHECK(back.dict.full() == m.dict.full());
  CHECK(back.mu == m.mu);
  CHECK(back.sigma == m.sigma);
  CHECK(back.iterations == 12);
  CHECK(back.final_objective == -3.25);
  CHECK(back.hp.M == 2);
  CHECK(back.hp.seed == 77);
  CHECK(dump_model(back) == text);
  CHECK((back.background().sigma_inv * m.sigma - MatrixXd::Identity(5, 5)).norm() < 1e-8);

  json broken = json::parse(text);
  broken["schema_version"] = 2;
  CHECK_THROWS_AS(model_from_json(broken), ConfigError);
}

TEST_CASE("hyperparameter JSON") {
  HyperParams hp;
  hp.M = 3;
  hp.b = -2.0;
  hp.armijo.initial_step = 0.05;
  hp.background_init = BackgroundInit::kKMeans;
  const HyperParams back = hyperparams_from_json(hyperparams_to_json(hp));
  CHECK(back.M == 3);
  CHECK(back.b == -2.0);
  CHECK(back.armijo.initial_step == 0.05);
  CHECK(back.background_init == BackgroundInit::kKMeans);

  CHECK_THROWS_WITH_AS(hyperparams_from_json(json{{"schema_version", 1}, {"gamma", 2}}),
                       doctest::Contains("gamma"), ConfigError);
  CHECK_THROWS_AS(hyperparams_from_json(json{{"schema_version", 1}, {"M", "nine"}}), ConfigError);
  CHECK_THROWS_AS(hyperparams_from_json(json{{"schema_version", 1}, {"beta", -1.0}}), ConfigError);
  CHECK_THROWS_AS(hyperparams_from_json(json{{"schema_version", 9}}), ConfigError);
  CHECK_THROWS_AS(hyperparams_from_json(json{{"schema_version", 1}, {"background_init", "pca"}}),
                  ConfigError);
}

TEST_CASE("simulation and sweep configs") {
  SimulationFile f;
  f.sim = presets::incomplete_background(0.5, 10, 4, 3);
  const SimulationFile back = simulation_from_json(simulation_to_json(f));
  CHECK(back.sim.target_names == f.sim.target_names);
  CHECK(back.sim.bag_background_subsets == f.sim.bag_background_subsets);
  CHECK(back.sim.seed == 3);

  const SweepSpec spec = sweep_spec_from_json(
      json{{"schema_version", 1}, {"axes", json::array({json{{"param", "M"}, {"values", {1, 3}}}})},
           {"runs_per_setting", 2}});
  REQUIRE(spec.axes.size() == 1);
  CHECK(spec.axes[0].values == std::vector<double>{1, 3});
  CHECK(spec.runs_per_setting == 2);
  CHECK(sweep_spec_from_json(json{{"schema_version", 1}}).axes.size() == 4);
  CHECK_THROWS_AS(sweep_spec_from_json(json{{"schema_version", 1},
                                            {"axes", json::array({json{{"param", "q"}, {"values", {1}}}})}}),
                  ConfigError);
}

TEST_CASE("sweep CSV layout") {
  SweepRow r;
  r.id = "grid";
  r.values = {{"M", 3.0}, {"beta", 0.5}};
  r.median_auc = 0.875;
  r.min_auc = 0.75;
  r.max_auc = 0.9375;
  r.failed = 1;
  std::stringstream ss;
  write_sweep_csv(ss, {r});
  CHECK(ss.str() == "param_or_grid_id,values,median_auc,min_auc,max_auc,failed\n"
                    "grid,M=3;beta=0.5,0.875,0.75,0.9375,1\n");
}

TEST_CASE("library resolution") {
  CHECK(resolve_library("builtin:rocks").bands() == 211);
  CHECK_THROWS_AS(resolve_library("builtin:minerals"), ConfigError);
  CHECK_THROWS_AS(resolve_library("/nonexistent/lib.csv"), IoError);
}
