#ifndef MIHE_SPARSE_HPP
#define MIHE_SPARSE_HPP

#include <optional>
#include <vector>

#include "mihe/model.hpp"

namespace mihe {

struct IstaConfig {
  int max_iters = 200;
  /// Stop once the largest coefficient change of an iteration drops below
  /// this value.
  double tolerance = 1e-6;
  std::optional<double> step_override;
};

/// sign(v) * max(|v| - lambda, 0), elementwise.
VectorXd soft_threshold(const VectorXd& v, double lambda);

/// 1 / largest eigenvalue of D^T D, estimated by power iteration.
double ista_step_length(const MatrixXd& D);

/// 0.5 * ||x - D a||^2 + lambda * ||a||_1
double lasso_objective(const Eigen::Ref<const VectorXd>& x, const MatrixXd& D,
                       const VectorXd& a, double lambda);

struct LassoResult {
  VectorXd a;
  int iterations = 0;
  bool converged = false;
  /// Objective after each iteration, index 0 being the zero start. Only
  /// filled when requested.
  std::vector<double> objective_trace;
};

LassoResult solve_lasso_detailed(const Eigen::Ref<const VectorXd>& x,
                                 const MatrixXd& D, double lambda,
                                 const IstaConfig& cfg,
                                 bool record_trace = false);

/// ISTA from a = 0: a <- S_{delta*lambda}(a + delta * D^T (x - D a)).
VectorXd solve_lasso(const Eigen::Ref<const VectorXd>& x, const MatrixXd& D,
                     double lambda, const IstaConfig& cfg);

/// Lasso solver bound to one dictionary. Caches the Gram matrix and step so
/// that many instances can be coded against the same D.
class LassoSolver {
 public:
  LassoSolver(MatrixXd D, double lambda, IstaConfig cfg);

  VectorXd solve(const Eigen::Ref<const VectorXd>& x) const;

  /// Codes every column of X. Each column follows its own stopping rule, so
  /// the result matches column-by-column calls to solve().
  MatrixXd solve_columns(const MatrixXd& X) const;

  const MatrixXd& dictionary() const { return dict_; }
  double step() const { return step_; }

 private:
  MatrixXd dict_;
  MatrixXd gram_;
  double lambda_;
  IstaConfig cfg_;
  double step_;
};

}  // namespace mihe

#endif  // MIHE_SPARSE_HPP
