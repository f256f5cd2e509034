#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mihe/eval.hpp"
#include "mihe/trainer.hpp"

using namespace mihe;

namespace {

HyperParams quick_hp(int M, int iters) {
  HyperParams hp;
  hp.T = 1;
  hp.M = M;
  hp.max_outer_iters = iters;
  hp.ista_iters = 50;
  hp.seed = 42;
  return hp;
}

double min_angle_to_columns(const VectorXd& v, const MatrixXd& cols) {
  double best = 180.0;
  for (Index k = 0; k < cols.cols(); ++k) best = std::min(best, spectral_angle_deg(v, cols.col(k)));
  return best;
}

}  // namespace

TEST_CASE("target initialization is a normalized mean of half the positive instances") {
  BagDataset ds;
  MatrixXd same(3, 4);
  same.colwise() = VectorXd::Constant(3, 2.0);
  ds.bags.push_back(testutil::make_bag("p", true, same));
  ds.bags.push_back(testutil::make_bag("n", false, MatrixXd::Ones(3, 2)));
  Rng rng(1);
  const MatrixXd t = init_targets(ds, 2, rng);
  REQUIRE(t.cols() == 2);
  for (Index k = 0; k < 2; ++k) CHECK(t.col(k).isApprox(VectorXd::Constant(3, 1.0 / std::sqrt(3.0))));
}

TEST_CASE("VCA recovers pure pixels of a noise-free mixture") {
  std::mt19937_64 gen(31);
  const MatrixXd E = testutil::uniform(gen, 40, 3, 0.1, 1.0);
  MatrixXd data(40, 203);
  data.leftCols(3) = E;
  std::gamma_distribution<double> g(1.0, 1.0);
  for (Index j = 3; j < data.cols(); ++j) {
    VectorXd w(3);
    for (Index k = 0; k < 3; ++k) w(k) = g(gen);
    data.col(j) = E * (w / w.sum());
  }
  Rng rng(7);
  const VcaResult res = vca(data, 3, rng);
  REQUIRE(res.endmembers.cols() == 3);
  for (Index k = 0; k < 3; ++k) CHECK(min_angle_to_columns(E.col(k), res.endmembers) < 1e-6);
  for (Index k = 0; k < 3; ++k) CHECK(res.endmembers.col(k).norm() == doctest::Approx(1.0));
}

TEST_CASE("background initializers give unit columns and refuse too few instances") {
  auto toy = testutil::make_toy(2, 10, 1, 3, 4, 8);
  Rng a(5), b(5);
  const MatrixXd v = init_backgrounds_vca(toy.ds, 3, a);
  const MatrixXd k = init_backgrounds_kmeans(toy.ds, 3, b);
  for (Index c = 0; c < 3; ++c) {
    CHECK(v.col(c).norm() == doctest::Approx(1.0));
    CHECK(k.col(c).norm() == doctest::Approx(1.0));
  }
  Rng c(1);
  CHECK_THROWS_AS(init_backgrounds_vca(toy.ds, 17, c), Error);
  CHECK_THROWS_AS(init_backgrounds_kmeans(toy.ds, 17, c), Error);
}

TEST_CASE("Armijo search accepts the first sufficient decrease") {
  // f(v) = ||v - e1||^2 restricted to the sphere
  const VectorXd target = VectorXd::Unit(3, 0);
  auto f = [&](const VectorXd& v) { return (v - target).squaredNorm(); };
  VectorXd atom(3);
  atom << 0.0, 1.0, 0.0;
  const VectorXd grad = 2.0 * (atom - target);
  ArmijoParams cfg;
  cfg.initial_step = 0.4;
  const ArmijoResult r = armijo_update_atom(atom, grad, f, cfg);
  CHECK(r.accepted);
  CHECK(r.trials == 1);
  CHECK(r.step == 0.4);
  CHECK(r.atom.norm() == doctest::Approx(1.0));
  CHECK(r.value_after <= r.value_before - cfg.sufficient_decrease_c * r.step * grad.squaredNorm());
}

TEST_CASE("Armijo search leaves the atom alone when nothing improves") {
  VectorXd atom = VectorXd::Unit(3, 1);
  const VectorXd grad = VectorXd::Unit(3, 0);
  auto worse = [&](const VectorXd& v) { return (v - atom).norm(); };
  ArmijoParams cfg;
  const ArmijoResult r = armijo_update_atom(atom, grad, worse, cfg);
  CHECK_FALSE(r.accepted);
  CHECK(r.atom == atom);
  CHECK(r.trials == cfg.max_backtracks);

  const ArmijoResult z = armijo_update_atom(atom, VectorXd::Zero(3), worse, cfg);
  CHECK_FALSE(z.accepted);
  CHECK(z.trials == 0);
}

TEST_CASE("training keeps unit atoms and reports one trace entry per iteration") {
  auto toy = testutil::make_toy(4, 12, 1, 2, 6, 10);
  const HyperParams hp = quick_hp(2, 4);
  const TrainReport r = train(toy.ds, hp);
  CHECK(r.iterations_run >= 1);
  CHECK(r.iterations_run <= 4);
  CHECK(r.objective_trace.size() == static_cast<std::size_t>(r.iterations_run));
  CHECK(r.norm_deviation_trace.size() == static_cast<std::size_t>(r.iterations_run));
  for (double dev : r.norm_deviation_trace) CHECK(dev < 1e-12);
  CHECK(r.atom_updates.size() == static_cast<std::size_t>(r.iterations_run * 3));
  CHECK(r.final_dictionary.max_norm_deviation() < 1e-12);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto toy = testutil::make_toy(6, 10, 1, 2, 4, 8);
  HyperParams hp = quick_hp(2, 3);
  const TrainReport a = train(toy.ds, hp);
  const TrainReport b = train(toy.ds, hp);
  CHECK(a.final_dictionary.full() == b.final_dictionary.full());
  hp.seed = 43;
  const TrainReport c = train(toy.ds, hp);
  CHECK_FALSE(a.initial_dictionary.targets == c.initial_dictionary.targets);
}

TEST_CASE("zero iterations return the initial dictionary") {
  auto toy = testutil::make_toy(7, 10, 1, 2, 4, 8);
  const TrainReport r = train(toy.ds, quick_hp(2, 0));
  CHECK(r.iterations_run == 0);
  CHECK(r.objective_trace.empty());
  CHECK(r.final_dictionary.full() == r.initial_dictionary.full());
}

TEST_CASE("accepted atom updates lower the objective with frozen codes") {
  auto toy = testutil::make_toy(8, 10, 1, 2, 4, 8);
  const TrainReport r = train(toy.ds, quick_hp(2, 2));
  int accepted = 0;
  for (const auto& u : r.atom_updates)
    if (u.line_search.accepted) {
      ++accepted;
      CHECK(u.line_search.value_after < u.line_search.value_before);
    }
  CHECK(accepted > 0);
}

TEST_CASE("training rejects invalid inputs") {
  auto toy = testutil::make_toy(9, 10, 1, 2, 4, 8);
  HyperParams hp = quick_hp(2, 1);
  hp.beta = -1.0;
  CHECK_THROWS_AS(train(toy.ds, hp), std::invalid_argument);

  BagDataset only_pos;
  only_pos.bags.push_back(toy.ds.bags[0]);
  CHECK_THROWS_AS(train(only_pos, quick_hp(2, 1)), Error);

  ConceptDictionary wrong = toy.dict;
  wrong.backgrounds = wrong.backgrounds.leftCols(1);
  CHECK_THROWS_AS(train_from(toy.ds, quick_hp(2, 1), wrong), std::invalid_argument);
}

TEST_CASE("reusing codes within an iteration still trains") {
  auto toy = testutil::make_toy(10, 10, 1, 2, 4, 8);
  HyperParams hp = quick_hp(2, 2);
  hp.reuse_codes_within_iteration = true;
  const TrainReport r = train(toy.ds, hp);
  CHECK(r.iterations_run >= 1);
  CHECK(r.final_dictionary.max_norm_deviation() < 1e-12);
}
