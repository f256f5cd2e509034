#ifndef MIHE_OBJECTIVE_HPP
#define MIHE_OBJECTIVE_HPP

#include <span>
#include <vector>

#include "mihe/model.hpp"

namespace mihe {

/// Sparse codes of every instance of one bag, stored column-wise.
/// `a` is (T+M) x N_i over [D+ D-]; `p` is M x N_i over D-. `a` may be left
/// empty for negative bags when the incoherence weight is zero.
struct BagCodes {
  MatrixXd a;
  MatrixXd p;
};

/// One entry per bag, aligned with BagDataset::bags.
using CodeBook = std::vector<BagCodes>;

/// Codes of instance `j` of bag `i`, with residuals against `dict`.
SparseCodes instance_codes(const BagDataset& ds, const CodeBook& codes,
                           const ConceptDictionary& dict, Index i, Index j);

struct ObjectiveBreakdown {
  double gm_term = 0.0;
  double fidelity_term = 0.0;
  double incoherence_term = 0.0;
  double total = 0.0;
};

/// Below this squared norm the background residual q counts as zero.
inline constexpr double kDegenerateResidual = 1e-30;
/// Floor applied to per-bag sums of Lambda^b before taking the log.
inline constexpr double kGmSumFloor = 1e-300;

/// exp(-beta ||x - D a||^2 / ||x - D- p||^2)
double hybrid_statistic(const Eigen::Ref<const VectorXd>& x,
                        const ConceptDictionary& dict, const SparseCodes& codes,
                        double beta);

/// ((1/N) sum v^b)^(1/b); evaluated in log space so that large |b| does not
/// overflow.
double generalized_mean(std::span<const double> values, double b);

/// Full objective: generalized-mean term over positive bags, background
/// fidelity and cross incoherence over negative bags. Residuals are
/// recomputed from `dict`, so the codes may be frozen while `dict` varies.
ObjectiveBreakdown evaluate_objective(const BagDataset& ds,
                                      const ConceptDictionary& dict,
                                      const HyperParams& hp,
                                      const CodeBook& codes);

/// Gradient of the objective w.r.t. target atom `t` (0 <= t < T) with codes
/// held fixed.
VectorXd grad_target_atom(Index t, const BagDataset& ds,
                          const ConceptDictionary& dict, const HyperParams& hp,
                          const CodeBook& codes);

/// Gradient w.r.t. background atom `k`, given as an index into [D+ D-]
/// (T <= k < T+M), with codes held fixed.
VectorXd grad_background_atom(Index k, const BagDataset& ds,
                              const ConceptDictionary& dict,
                              const HyperParams& hp, const CodeBook& codes);

}  // namespace mihe

#endif  // MIHE_OBJECTIVE_HPP
