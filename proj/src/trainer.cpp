#include "mihe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace mihe {

MatrixXd init_targets(const BagDataset& ds, int T, Rng& rng) {
  if (T < 1) throw std::invalid_argument("init_targets: T must be >= 1");
  const MatrixXd pos = ds.stacked(BagLabel::kPositive);
  const Index n = pos.cols();
  if (n == 0) throw Error("init_targets: no positive instances");
  const Index subset = (n + 1) / 2;

  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  MatrixXd out(pos.rows(), T);
  std::vector<Index> pick;
  for (int t = 0; t < T; ++t) {
    pick.clear();
    std::sample(all.begin(), all.end(), std::back_inserter(pick), subset, rng);
    VectorXd mean = VectorXd::Zero(pos.rows());
    for (Index j : pick) mean += pos.col(j);
    out.col(t) = mean / static_cast<double>(pick.size());
  }
  normalize_columns(out);
  return out;
}

namespace {

// Leading `p` eigenvectors (descending eigenvalue) of a symmetric matrix.
MatrixXd leading_eigenvectors(const MatrixXd& sym, Index p) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw Error("vca: eigendecomposition failed");
  return eig.eigenvectors().rightCols(p).rowwise().reverse();
}

double estimate_snr(const MatrixXd& data, const VectorXd& mean,
                    const MatrixXd& projected) {
  const double n = static_cast<double>(data.cols());
  const double L = static_cast<double>(data.rows());
  const double p = static_cast<double>(projected.rows());
  const double p_y = data.squaredNorm() / n;
  const double p_x = projected.squaredNorm() / n + mean.squaredNorm();
  const double num = p_x - p / L * p_y;
  const double den = p_y - p_x;
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  if (num <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

}  // namespace

VcaResult vca(const MatrixXd& data, int p, Rng& rng) {
  const Index L = data.rows();
  const Index n = data.cols();
  if (p < 1) throw std::invalid_argument("vca: p must be >= 1");
  if (n < p) throw Error("vca: fewer instances than requested endmembers");
  if (p > L) throw Error("vca: more endmembers than bands");

  const VectorXd mean = data.rowwise().mean();
  const MatrixXd centered = data.colwise() - mean;
  const MatrixXd u_centered =
      leading_eigenvectors(centered * centered.transpose() / static_cast<double>(n), p);
  const MatrixXd x_centered = u_centered.transpose() * centered;
  const double snr = estimate_snr(data, mean, x_centered);
  const double snr_threshold = 15.0 + 10.0 * std::log10(static_cast<double>(p));

  MatrixXd y;
  MatrixXd denoised;
  if (snr < snr_threshold && p > 1) {
    // Low SNR: project onto the (p-1)-dimensional affine subspace and lift
    // with a constant coordinate.
    const Index dsub = p - 1;
    const MatrixXd x = x_centered.topRows(dsub);
    denoised = (u_centered.leftCols(dsub) * x).colwise() + mean;
    double c = std::sqrt(x.colwise().squaredNorm().maxCoeff());
    if (c == 0.0) c = 1.0;
    y.resize(p, n);
    y.topRows(dsub) = x;
    y.row(dsub).setConstant(c);
  } else {
    // High SNR: projective projection onto the p-dimensional subspace.
    const MatrixXd ud =
        leading_eigenvectors(data * data.transpose() / static_cast<double>(n), p);
    const MatrixXd xp = ud.transpose() * data;
    denoised = ud * xp;
    const VectorXd u = xp.rowwise().mean();
    const Eigen::RowVectorXd scale = u.transpose() * xp;
    y = xp;
    for (Index j = 0; j < n; ++j) {
      if (scale[j] != 0.0) y.col(j) /= scale[j];
    }
  }

  VcaResult out;
  out.indices.resize(static_cast<std::size_t>(p));
  MatrixXd basis = MatrixXd::Zero(p, p);
  basis(p - 1, 0) = 1.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index i = 0; i < p; ++i) {
    VectorXd w(p);
    for (Index k = 0; k < p; ++k) w[k] = unif(rng);
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(basis);
    VectorXd f = w - basis * (cod.pseudoInverse() * w);
    const double fn = f.norm();
    if (fn > 0.0) f /= fn;
    const Eigen::RowVectorXd v = f.transpose() * y;
    Index best = 0;
    v.cwiseAbs().maxCoeff(&best);
    out.indices[static_cast<std::size_t>(i)] = best;
    basis.col(i) = y.col(best);
  }

  out.endmembers.resize(L, p);
  for (Index i = 0; i < p; ++i)
    out.endmembers.col(i) = denoised.col(out.indices[static_cast<std::size_t>(i)]);
  normalize_columns(out.endmembers);
  return out;
}

MatrixXd init_backgrounds_vca(const BagDataset& ds, int M, Rng& rng) {
  if (M < 1) throw std::invalid_argument("init_backgrounds_vca: M must be >= 1");
  const MatrixXd neg = ds.stacked(BagLabel::kNegative);
  if (neg.cols() < M)
    throw Error("init_backgrounds_vca: fewer negative instances than background concepts");
  return vca(neg, M, rng).endmembers;
}

MatrixXd init_backgrounds_kmeans(const BagDataset& ds, int M, Rng& rng) {
  if (M < 1) throw std::invalid_argument("init_backgrounds_kmeans: M must be >= 1");
  const MatrixXd neg = ds.stacked(BagLabel::kNegative);
  const Index n = neg.cols();
  if (n < M)
    throw Error("init_backgrounds_kmeans: fewer negative instances than background concepts");

  MatrixXd centers(neg.rows(), M);
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.col(0) = neg.col(first(rng));
  VectorXd dist = (neg.colwise() - VectorXd(centers.col(0))).colwise().squaredNorm().transpose();
  for (Index c = 1; c < M; ++c) {
    const double total = dist.sum();
    Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= dist[pick];
        if (target <= 0.0) break;
      }
    }
    centers.col(c) = neg.col(pick);
    dist = dist.cwiseMin(
        (neg.colwise() - VectorXd(centers.col(c))).colwise().squaredNorm().transpose());
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (Index j = 0; j < n; ++j) {
      Index best = 0;
      (centers.colwise() - VectorXd(neg.col(j))).colwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(j)] != best) {
        assign[static_cast<std::size_t>(j)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    MatrixXd sums = MatrixXd::Zero(neg.rows(), M);
    VectorXd count = VectorXd::Zero(M);
    for (Index j = 0; j < n; ++j) {
      sums.col(assign[static_cast<std::size_t>(j)]) += neg.col(j);
      count[assign[static_cast<std::size_t>(j)]] += 1.0;
    }
    for (Index c = 0; c < M; ++c)
      if (count[c] > 0.0) centers.col(c) = sums.col(c) / count[c];
  }
  normalize_columns(centers);
  return centers;
}

ArmijoResult armijo_update_atom(const VectorXd& atom, const VectorXd& grad,
                                const std::function<double(const VectorXd&)>& eval,
                                const ArmijoParams& cfg) {
  ArmijoResult res;
  res.atom = atom;
  res.value_before = eval(atom);
  res.value_after = res.value_before;
  const double grad_sq = grad.squaredNorm();
  if (grad_sq == 0.0) return res;

  double step = cfg.initial_step;
  for (int trial = 0; trial < cfg.max_backtracks; ++trial, step *= cfg.shrink_factor) {
    res.trials = trial + 1;
    VectorXd candidate = atom - step * grad;
    const double n = candidate.norm();
    if (!(n > 0.0) || !std::isfinite(n)) continue;
    candidate /= n;
    const double value = eval(candidate);
    if (std::isfinite(value) &&
        value <= res.value_before - cfg.sufficient_decrease_c * step * grad_sq) {
      res.atom = std::move(candidate);
      res.accepted = true;
      res.step = step;
      res.value_after = value;
      return res;
    }
  }
  return res;
}

IstaConfig ista_config(const HyperParams& hp) {
  IstaConfig cfg;
  cfg.max_iters = hp.ista_iters;
  cfg.tolerance = hp.ista_tolerance;
  return cfg;
}

namespace {

// Codes against `dict`; background codes are copied from `reuse_p` when given.
CodeBook solve_codes_impl(const BagDataset& ds, const ConceptDictionary& dict,
                          const HyperParams& hp, const CodeBook* reuse_p) {
  const IstaConfig cfg = ista_config(hp);
  const LassoSolver full(dict.full(), hp.lambda, cfg);
  std::optional<LassoSolver> background;
  if (!reuse_p) background.emplace(dict.backgrounds, hp.lambda, cfg);
  const bool neg_a = hp.alpha_incoh != 0.0;

  CodeBook codes(ds.bags.size());
  const int nbags = static_cast<int>(ds.bags.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < nbags; ++i) {
    const Bag& bag = ds.bags[static_cast<std::size_t>(i)];
    BagCodes& c = codes[static_cast<std::size_t>(i)];
    if (bag.positive() || neg_a) c.a = full.solve_columns(bag.instances);
    c.p = reuse_p ? (*reuse_p)[static_cast<std::size_t>(i)].p
                  : background->solve_columns(bag.instances);
  }
  return codes;
}

}  // namespace

CodeBook solve_codes(const BagDataset& ds, const ConceptDictionary& dict,
                     const HyperParams& hp) {
  return solve_codes_impl(ds, dict, hp, nullptr);
}

ConceptDictionary initialize_dictionary(const BagDataset& ds,
                                        const HyperParams& hp) {
  Rng rng(hp.seed);
  ConceptDictionary dict;
  dict.targets = init_targets(ds, hp.T, rng);
  dict.backgrounds = hp.background_init == BackgroundInit::kKMeans
                         ? init_backgrounds_kmeans(ds, hp.M, rng)
                         : init_backgrounds_vca(ds, hp.M, rng);
  return dict;
}

TrainReport train(const BagDataset& ds, const HyperParams& hp) {
  hp.validate();
  const auto violations = validate_dataset(ds);
  if (!violations.empty()) {
    std::string msg = "train: invalid dataset:";
    for (const auto& v : violations)
      msg += " [" + (v.bag_id.empty() ? std::string("dataset") : v.bag_id) + "] " + v.message + ";";
    throw Error(msg);
  }
  return train_from(ds, hp, initialize_dictionary(ds, hp));
}

TrainReport train_from(const BagDataset& ds, const HyperParams& hp,
                       ConceptDictionary dict) {
  hp.validate();
  if (dict.num_targets() != hp.T || dict.num_backgrounds() != hp.M ||
      dict.dim() != ds.dim())
    throw std::invalid_argument("train_from: dictionary shape does not match hyperparameters");

  TrainReport report;
  report.initial_dictionary = dict;
  report.final_dictionary = dict;
  if (hp.max_outer_iters == 0) return report;

  const Index T = dict.num_targets();
  const Index atoms = dict.num_atoms();

  CodeBook codes = solve_codes(ds, dict, hp);
  double previous = evaluate_objective(ds, dict, hp, codes).total;
  bool codes_fresh = true;
  bool background_fresh = true;  // p codes match the current D-

  for (int iter = 0; iter < hp.max_outer_iters; ++iter) {
    for (Index k = 0; k < atoms; ++k) {
      if (!codes_fresh && !hp.reuse_codes_within_iteration)
        codes = solve_codes_impl(ds, dict, hp, background_fresh ? &codes : nullptr);
      codes_fresh = false;

      const bool is_target = k < T;
      const VectorXd grad = is_target ? grad_target_atom(k, ds, dict, hp, codes)
                                      : grad_background_atom(k, ds, dict, hp, codes);
      ConceptDictionary trial = dict;
      auto eval = [&](const VectorXd& atom) {
        trial.set_atom(k, atom);
        return evaluate_objective(ds, trial, hp, codes).total;
      };
      AtomUpdate update;
      update.iteration = iter;
      update.atom = k;
      update.line_search = armijo_update_atom(dict.atom(k), grad, eval, hp.armijo);
      if (update.line_search.accepted) {
        dict.set_atom(k, update.line_search.atom);
        if (!is_target) background_fresh = false;
      }
      report.atom_updates.push_back(std::move(update));
    }

    codes = solve_codes(ds, dict, hp);
    codes_fresh = true;
    background_fresh = true;
    const ObjectiveBreakdown current = evaluate_objective(ds, dict, hp, codes);
    report.objective_trace.push_back(current);
    report.norm_deviation_trace.push_back(dict.max_norm_deviation());
    report.iterations_run = iter + 1;

    const double change = std::abs(current.total - previous);
    previous = current.total;
    if (change == 0.0 || change < hp.change_tolerance * std::abs(current.total)) {
      report.stop_reason = StopReason::kTolerance;
      break;
    }
  }
  report.final_dictionary = dict;
  return report;
}

}  // namespace mihe
