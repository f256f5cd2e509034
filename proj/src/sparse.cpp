#include "mihe/sparse.hpp"

#include <cmath>

namespace mihe {

namespace {

constexpr double kPowerTolerance = 1e-10;
constexpr int kPowerMaxIters = 1000;

inline double shrink(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double largest_eigenvalue(const MatrixXd& gram) {
  const Index m = gram.rows();
  // Deterministic start with distinct entries so it is not orthogonal to the
  // dominant eigenvector of a structured Gram matrix.
  VectorXd v(m);
  for (Index k = 0; k < m; ++k) v[k] = 1.0 + static_cast<double>(k) / (m + 1);
  v.normalize();
  double value = v.dot(gram * v);
  for (int it = 0; it < kPowerMaxIters; ++it) {
    VectorXd w = gram * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    const double next = v.dot(gram * v);
    const bool done = std::abs(next - value) <= kPowerTolerance * std::abs(next);
    value = next;
    if (done) break;
  }
  return value;
}

}  // namespace

VectorXd soft_threshold(const VectorXd& v, double lambda) {
  VectorXd out(v.size());
  for (Index k = 0; k < v.size(); ++k) out[k] = shrink(v[k], lambda);
  return out;
}

double ista_step_length(const MatrixXd& D) {
  if (D.size() == 0 || D.isZero(0.0))
    throw Error("ista_step_length: dictionary is the zero matrix");
  const double eig = largest_eigenvalue(D.transpose() * D);
  if (!(eig > 0.0)) throw Error("ista_step_length: non-positive eigenvalue");
  return 1.0 / eig;
}

double lasso_objective(const Eigen::Ref<const VectorXd>& x, const MatrixXd& D,
                       const VectorXd& a, double lambda) {
  return 0.5 * (x - D * a).squaredNorm() + lambda * a.lpNorm<1>();
}

LassoResult solve_lasso_detailed(const Eigen::Ref<const VectorXd>& x,
                                 const MatrixXd& D, double lambda,
                                 const IstaConfig& cfg, bool record_trace) {
  if (x.size() != D.rows())
    throw std::invalid_argument("solve_lasso: x length does not match D rows");
  LassoResult res;
  res.a = VectorXd::Zero(D.cols());
  if (record_trace) res.objective_trace.push_back(0.5 * x.squaredNorm());
  if (D.cols() == 0) {
    res.converged = true;
    return res;
  }
  const double step = cfg.step_override ? *cfg.step_override : ista_step_length(D);
  const MatrixXd gram = D.transpose() * D;
  const VectorXd corr = D.transpose() * x;
  const double thresh = step * lambda;
  VectorXd next(D.cols());
  for (int it = 0; it < cfg.max_iters; ++it) {
    next.noalias() = res.a + step * (corr - gram * res.a);
    double change = 0.0;
    for (Index k = 0; k < next.size(); ++k) {
      next[k] = shrink(next[k], thresh);
      change = std::max(change, std::abs(next[k] - res.a[k]));
    }
    res.a.swap(next);
    res.iterations = it + 1;
    if (record_trace) res.objective_trace.push_back(lasso_objective(x, D, res.a, lambda));
    if (change < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

VectorXd solve_lasso(const Eigen::Ref<const VectorXd>& x, const MatrixXd& D,
                     double lambda, const IstaConfig& cfg) {
  return solve_lasso_detailed(x, D, lambda, cfg).a;
}

LassoSolver::LassoSolver(MatrixXd D, double lambda, IstaConfig cfg)
    : dict_(std::move(D)), lambda_(lambda), cfg_(cfg) {
  gram_ = dict_.transpose() * dict_;
  step_ = cfg_.step_override ? *cfg_.step_override : ista_step_length(dict_);
}

VectorXd LassoSolver::solve(const Eigen::Ref<const VectorXd>& x) const {
  IstaConfig cfg = cfg_;
  cfg.step_override = step_;
  return solve_lasso(x, dict_, lambda_, cfg);
}

MatrixXd LassoSolver::solve_columns(const MatrixXd& X) const {
  if (X.rows() != dict_.rows())
    throw std::invalid_argument("solve_columns: row count does not match D");
  const Index m = dict_.cols();
  const Index n = X.cols();
  MatrixXd A = MatrixXd::Zero(m, n);
  if (m == 0 || n == 0) return A;
  const MatrixXd corr = dict_.transpose() * X;
  const double thresh = step_ * lambda_;

  // Columns are processed in cache-sized chunks. Within a chunk, converged
  // columns are copied to A right away and compacted out of the working
  // block once enough of them pile up.
  constexpr Index kChunk = 1024;
  MatrixXd cur(m, kChunk), c(m, kChunk), next(m, kChunk);
  Eigen::RowVectorXd change(kChunk);
  std::vector<Index> active(static_cast<std::size_t>(kChunk));
  std::vector<char> done(static_cast<std::size_t>(kChunk));
  for (Index start = 0; start < n; start += kChunk) {
    Index na = std::min(kChunk, n - start);
    for (Index j = 0; j < na; ++j) active[static_cast<std::size_t>(j)] = start + j;
    std::fill(done.begin(), done.end(), 0);
    cur.leftCols(na).setZero();
    c.leftCols(na) = corr.middleCols(start, na);
    Index finished = 0;
    for (int it = 0; it < cfg_.max_iters && na > finished; ++it) {
      auto nx = next.leftCols(na);
      auto cu = cur.leftCols(na);
      nx.noalias() = gram_.lazyProduct(cu);
      nx = cu + step_ * (c.leftCols(na) - nx);
      nx = (nx.array().abs() - thresh).max(0.0) * nx.array().sign();
      change.head(na) = (nx - cu).cwiseAbs().colwise().maxCoeff();
      cu = nx;
      for (Index j = 0; j < na; ++j) {
        if (done[static_cast<std::size_t>(j)] || change[j] >= cfg_.tolerance) continue;
        done[static_cast<std::size_t>(j)] = 1;
        A.col(active[static_cast<std::size_t>(j)]) = cur.col(j);
        ++finished;
      }
      if (finished > 0 && 4 * finished >= na) {
        Index keep = 0;
        for (Index j = 0; j < na; ++j) {
          if (done[static_cast<std::size_t>(j)]) continue;
          if (keep != j) {
            cur.col(keep) = cur.col(j);
            c.col(keep) = c.col(j);
            active[static_cast<std::size_t>(keep)] = active[static_cast<std::size_t>(j)];
          }
          done[static_cast<std::size_t>(keep)] = 0;
          ++keep;
        }
        na = keep;
        finished = 0;
      }
    }
    for (Index j = 0; j < na; ++j)
      if (!done[static_cast<std::size_t>(j)]) A.col(active[static_cast<std::size_t>(j)]) = cur.col(j);
  }
  return A;
}

}  // namespace mihe
