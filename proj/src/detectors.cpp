#include "mihe/detectors.hpp"

#include <cmath>
#include <sstream>

namespace mihe {

double default_ridge(const MatrixXd& negatives) {
  const Index n = negatives.cols();
  if (n < 2) return 0.0;
  const MatrixXd centered = negatives.colwise() - negatives.rowwise().mean();
  const double trace = centered.squaredNorm() / static_cast<double>(n - 1);
  return 1e-6 * trace / static_cast<double>(negatives.rows());
}

BackgroundStats fit_background(const MatrixXd& negatives, double ridge) {
  const Index d = negatives.rows();
  const Index n = negatives.cols();
  if (n < 1) throw Error("fit_background: no negative instances");
  if (n < d + 1) {
    std::ostringstream msg;
    msg << "fit_background: " << n << " instances for dimension " << d
        << "; covariance relies on the ridge";
    warn(msg.str());
  }
  if (ridge < 0.0) ridge = default_ridge(negatives);

  BackgroundStats bg;
  bg.mu = negatives.rowwise().mean();
  const MatrixXd centered = negatives.colwise() - bg.mu;
  bg.sigma = n > 1 ? MatrixXd(centered * centered.transpose() / static_cast<double>(n - 1))
                   : MatrixXd::Zero(d, d);
  bg.sigma.diagonal().array() += ridge;

  Eigen::LLT<MatrixXd> llt(bg.sigma);
  if (llt.info() != Eigen::Success)
    throw Error("fit_background: covariance is singular; use a larger ridge");
  bg.sigma_inv = llt.solve(MatrixXd::Identity(d, d));
  bg.sigma_inv = 0.5 * (bg.sigma_inv + bg.sigma_inv.transpose()).eval();
  if (!bg.sigma_inv.allFinite())
    throw Error("fit_background: covariance inverse is not finite; use a larger ridge");
  return bg;
}

double smf_score(const Eigen::Ref<const VectorXd>& x, const VectorXd& s,
                 const BackgroundStats& bg) {
  const VectorXd w = bg.sigma_inv * s;
  const double norm = std::sqrt(s.dot(w));
  if (!(norm > 0.0)) throw std::invalid_argument("smf_score: zero signature");
  return w.dot(x - bg.mu) / norm;
}

double ace_score(const Eigen::Ref<const VectorXd>& x, const VectorXd& s,
                 const BackgroundStats& bg) {
  const VectorXd z = x - bg.mu;
  const VectorXd w = bg.sigma_inv * s;
  const double ss = s.dot(w);
  if (!(ss > 0.0)) throw std::invalid_argument("ace_score: zero signature");
  const double zz = z.dot(bg.sigma_inv * z);
  if (!(zz > 0.0)) return 0.0;
  const double sz = w.dot(z);
  return std::min(1.0, sz * sz / (ss * zz));
}

HsdResult hsd_score(const Eigen::Ref<const VectorXd>& x,
                    const ConceptDictionary& dict, double lambda,
                    const IstaConfig& cfg) {
  const MatrixXd full = dict.full();
  const VectorXd a = solve_lasso(x, full, lambda, cfg);
  const VectorXd p = solve_lasso(x, dict.backgrounds, lambda, cfg);
  const double r_sq = (x - full * a).squaredNorm();
  const double q_sq = (x - dict.backgrounds * p).squaredNorm();
  if (r_sq < 1e-30) return {kHsdCap, true};
  return {q_sq / r_sq, false};
}

DetectorMethod parse_method(const std::string& name) {
  if (name == "hsd") return DetectorMethod::kHsd;
  if (name == "ace") return DetectorMethod::kAce;
  if (name == "smf") return DetectorMethod::kSmf;
  throw std::invalid_argument("unknown detection method '" + name + "' (expected hsd, ace or smf)");
}

std::string method_name(DetectorMethod m) {
  switch (m) {
    case DetectorMethod::kHsd: return "hsd";
    case DetectorMethod::kAce: return "ace";
    case DetectorMethod::kSmf: return "smf";
  }
  return "?";
}

ScoreSet detect_signature(const MatrixXd& scene, const VectorXd& signature,
                          DetectorMethod method, const BackgroundStats& bg) {
  if (method == DetectorMethod::kHsd)
    throw std::invalid_argument("detect_signature: HSD needs a dictionary");
  if (scene.rows() != signature.size() || bg.mu.size() != signature.size())
    throw std::invalid_argument("detect_signature: dimension mismatch");
  ScoreSet out;
  out.entries.resize(static_cast<std::size_t>(scene.cols()));
  for (Index j = 0; j < scene.cols(); ++j) {
    auto& e = out.entries[static_cast<std::size_t>(j)];
    e.id = std::to_string(j);
    e.score = method == DetectorMethod::kAce ? ace_score(scene.col(j), signature, bg)
                                             : smf_score(scene.col(j), signature, bg);
  }
  return out;
}

ScoreSet detect(const MatrixXd& scene, const ConceptDictionary& dict,
                const DetectOptions& opts) {
  if (scene.cols() > 0 && scene.rows() != dict.dim())
    throw std::invalid_argument("detect: scene and dictionary dimensions differ");
  ScoreSet out;
  const Index n = scene.cols();
  out.entries.resize(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) out.entries[static_cast<std::size_t>(j)].id = std::to_string(j);
  if (n == 0) return out;

  if (opts.method == DetectorMethod::kHsd) {
    const LassoSolver full(dict.full(), opts.lambda, opts.ista);
    const LassoSolver background(dict.backgrounds, opts.lambda, opts.ista);
    const MatrixXd a = full.solve_columns(scene);
    const MatrixXd p = background.solve_columns(scene);
    const VectorXd r_sq = (scene - full.dictionary() * a).colwise().squaredNorm().transpose();
    const VectorXd q_sq = (scene - dict.backgrounds * p).colwise().squaredNorm().transpose();
    for (Index j = 0; j < n; ++j) {
      out.entries[static_cast<std::size_t>(j)].score =
          r_sq[j] < 1e-30 ? kHsdCap : q_sq[j] / r_sq[j];
    }
    return out;
  }

  if (!opts.background) throw std::invalid_argument("detect: ACE/SMF need background statistics");
  for (Index t = 0; t < dict.num_targets(); ++t) {
    const ScoreSet single = detect_signature(scene, dict.targets.col(t), opts.method, *opts.background);
    for (Index j = 0; j < n; ++j) {
      auto& e = out.entries[static_cast<std::size_t>(j)];
      const double s = single.entries[static_cast<std::size_t>(j)].score;
      e.score = t == 0 ? s : std::max(e.score, s);
    }
  }
  return out;
}

}  // namespace mihe
