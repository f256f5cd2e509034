#ifndef MIHE_DETECTORS_HPP
#define MIHE_DETECTORS_HPP

#include <optional>
#include <string>
#include <vector>

#include "mihe/model.hpp"
#include "mihe/scores.hpp"
#include "mihe/sparse.hpp"

namespace mihe {

struct BackgroundStats {
  VectorXd mu;
  MatrixXd sigma;      // sample covariance + ridge * I
  MatrixXd sigma_inv;
};

/// Default ridge: 1e-6 * trace(sample covariance) / d.
double default_ridge(const MatrixXd& negatives);

/// Mean and (N-1)-normalized covariance of the columns of `negatives`, plus
/// `ridge` on the diagonal. A negative ridge selects default_ridge().
BackgroundStats fit_background(const MatrixXd& negatives, double ridge = -1.0);

/// s^T S^-1 (x - mu) / sqrt(s^T S^-1 s)
double smf_score(const Eigen::Ref<const VectorXd>& x, const VectorXd& s,
                 const BackgroundStats& bg);

/// Squared whitened cosine between x - mu and s. Zero when x == mu.
double ace_score(const Eigen::Ref<const VectorXd>& x, const VectorXd& s,
                 const BackgroundStats& bg);

inline constexpr double kHsdCap = 1e30;

struct HsdResult {
  double score = 0.0;
  bool capped = false;  // full-dictionary residual was numerically zero
};

/// ||x - D- p||^2 / ||x - D a||^2 with a, p lasso codes over [D+ D-] and D-.
HsdResult hsd_score(const Eigen::Ref<const VectorXd>& x,
                    const ConceptDictionary& dict, double lambda,
                    const IstaConfig& cfg);

enum class DetectorMethod { kHsd, kAce, kSmf };

DetectorMethod parse_method(const std::string& name);
std::string method_name(DetectorMethod m);

struct DetectOptions {
  DetectorMethod method = DetectorMethod::kAce;
  double lambda = 1e-3;
  IstaConfig ista;
  /// Required for ACE and SMF.
  const BackgroundStats* background = nullptr;
};

/// Scores every column of `scene`. ACE and SMF take the maximum over the
/// target concepts; HSD pools D+ in one statistic. Entry ids are the column
/// indices.
ScoreSet detect(const MatrixXd& scene, const ConceptDictionary& dict,
                const DetectOptions& opts);

/// Single-signature ACE/SMF scoring.
ScoreSet detect_signature(const MatrixXd& scene, const VectorXd& signature,
                          DetectorMethod method, const BackgroundStats& bg);

}  // namespace mihe

#endif  // MIHE_DETECTORS_HPP
