#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mihe/detectors.hpp"

using namespace mihe;

namespace {

BackgroundStats identity_background(Index d) {
  BackgroundStats bg;
  bg.mu = VectorXd::Zero(d);
  bg.sigma = MatrixXd::Identity(d, d);
  bg.sigma_inv = MatrixXd::Identity(d, d);
  return bg;
}

}  // namespace

TEST_CASE("background fit matches the sample mean and covariance") {
  std::mt19937_64 rng(3);
  const MatrixXd X = testutil::gaussian(rng, 4, 50);
  const BackgroundStats bg = fit_background(X, 0.0);
  const VectorXd mu = X.rowwise().mean();
  MatrixXd cov = MatrixXd::Zero(4, 4);
  for (Index j = 0; j < X.cols(); ++j) cov += (X.col(j) - mu) * (X.col(j) - mu).transpose();
  cov /= 49.0;
  CHECK((bg.mu - mu).norm() < 1e-12);
  CHECK((bg.sigma - cov).norm() < 1e-12);
  CHECK((bg.sigma * bg.sigma_inv - MatrixXd::Identity(4, 4)).norm() < 1e-9);

  const BackgroundStats ridged = fit_background(X, 0.5);
  CHECK((ridged.sigma - cov - 0.5 * MatrixXd::Identity(4, 4)).norm() < 1e-12);
  CHECK(default_ridge(X) == doctest::Approx(1e-6 * cov.trace() / 4.0));
}

TEST_CASE("background fit warns when instances are scarce and fails when singular") {
  testutil::WarningCapture w;
  std::mt19937_64 rng(3);
  const MatrixXd X = testutil::gaussian(rng, 6, 4);
  CHECK_NOTHROW(fit_background(X));
  CHECK(w.messages.size() == 1);
  CHECK_THROWS_AS(fit_background(X, 0.0), Error);
  CHECK_THROWS_AS(fit_background(MatrixXd(6, 0)), Error);
}

TEST_CASE("ACE with an identity background is the squared cosine") {
  std::mt19937_64 rng(12);
  const BackgroundStats bg = identity_background(5);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd x = testutil::gaussian(rng, 5, 1);
    const VectorXd s = testutil::gaussian(rng, 5, 1);
    const double c = x.dot(s) / (x.norm() * s.norm());
    CHECK(ace_score(x, s, bg) == doctest::Approx(c * c));
    CHECK(smf_score(x, s, bg) == doctest::Approx(x.dot(s) / s.norm()));
  }
}

TEST_CASE("ACE is bounded, scale invariant and maximal along the signature") {
  std::mt19937_64 rng(14);
  const MatrixXd X = testutil::gaussian(rng, 6, 80);
  const BackgroundStats bg = fit_background(X);
  const VectorXd s = testutil::uniform(rng, 6, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd x = testutil::gaussian(rng, 6, 1);
    const double v = ace_score(x, s, bg);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(ace_score(bg.mu + 3.0 * (x - bg.mu), s, bg) == doctest::Approx(v));
    CHECK(ace_score(x, 0.2 * s, bg) == doctest::Approx(v));
  }
  CHECK(ace_score(bg.mu + 2.0 * s, s, bg) == doctest::Approx(1.0));
  CHECK(ace_score(bg.mu, s, bg) == 0.0);
  CHECK_THROWS_AS(ace_score(bg.mu, VectorXd::Zero(6), bg), std::invalid_argument);
}

TEST_CASE("HSD is the ratio of background and full residuals") {
  std::mt19937_64 rng(15);
  ConceptDictionary d;
  d.targets = testutil::uniform(rng, 10, 1);
  d.backgrounds = testutil::uniform(rng, 10, 3);
  normalize_columns(d.targets);
  normalize_columns(d.backgrounds);
  IstaConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd x = testutil::uniform(rng, 10, 1);
    const VectorXd a = solve_lasso(x, d.full(), 1e-3, cfg);
    const VectorXd p = solve_lasso(x, d.backgrounds, 1e-3, cfg);
    const double expected = (x - d.backgrounds * p).squaredNorm() / (x - d.full() * a).squaredNorm();
    const HsdResult h = hsd_score(x, d, 1e-3, cfg);
    CHECK_FALSE(h.capped);
    CHECK(h.score == doctest::Approx(expected));
  }
}

TEST_CASE("HSD is capped when the full dictionary reconstructs exactly") {
  ConceptDictionary d;
  d.targets = MatrixXd::Identity(2, 2).leftCols(1);
  d.backgrounds = MatrixXd::Identity(2, 2).rightCols(1);
  VectorXd x(2);
  x << 1.0, 1.0;
  const HsdResult h = hsd_score(x, d, 0.0, IstaConfig{});
  CHECK(h.capped);
  CHECK(h.score == kHsdCap);
}

TEST_CASE("detect scores every column and takes the best target") {
  std::mt19937_64 rng(16);
  const MatrixXd bgdata = testutil::gaussian(rng, 5, 60);
  const BackgroundStats bg = fit_background(bgdata);
  ConceptDictionary d;
  d.targets = testutil::uniform(rng, 5, 2);
  d.backgrounds = testutil::uniform(rng, 5, 2);
  const MatrixXd scene = testutil::gaussian(rng, 5, 25);

  DetectOptions opts;
  opts.background = &bg;
  const ScoreSet s = detect(scene, d, opts);
  REQUIRE(s.entries.size() == 25);
  for (Index j = 0; j < 25; ++j) {
    const double expected = std::max(ace_score(scene.col(j), d.targets.col(0), bg),
                                     ace_score(scene.col(j), d.targets.col(1), bg));
    CHECK(s.entries[static_cast<std::size_t>(j)].id == std::to_string(j));
    CHECK(s.entries[static_cast<std::size_t>(j)].score == doctest::Approx(expected));
  }

  opts.method = DetectorMethod::kHsd;
  const ScoreSet h = detect(scene.leftCols(3), d, opts);
  for (Index j = 0; j < 3; ++j)
    CHECK(h.entries[static_cast<std::size_t>(j)].score ==
          doctest::Approx(hsd_score(scene.col(j), d, opts.lambda, opts.ista).score));

  DetectOptions none;
  CHECK_THROWS_AS(detect(scene, d, none), std::invalid_argument);
  CHECK_THROWS_AS(detect(MatrixXd::Ones(4, 2), d, opts), std::invalid_argument);
}

TEST_CASE("method names round-trip") {
  for (auto m : {DetectorMethod::kHsd, DetectorMethod::kAce, DetectorMethod::kSmf})
    CHECK(parse_method(method_name(m)) == m);
  CHECK_THROWS_AS(parse_method("glrt"), std::invalid_argument);
}
