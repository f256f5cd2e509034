#ifndef MIHE_TRAINER_HPP
#define MIHE_TRAINER_HPP

#include <functional>
#include <random>
#include <vector>

#include "mihe/model.hpp"
#include "mihe/objective.hpp"
#include "mihe/sparse.hpp"

namespace mihe {

using Rng = std::mt19937_64;

/// Each column is the normalized mean of ceil(N+/2) positive-bag instances
/// drawn without replacement.
MatrixXd init_targets(const BagDataset& ds, int T, Rng& rng);

struct VcaResult {
  MatrixXd endmembers;          // d x p, unit columns
  std::vector<Index> indices;   // source column of each endmember
};

/// Vertex component analysis on the columns of `data`.
VcaResult vca(const MatrixXd& data, int p, Rng& rng);

/// VCA over the union of the negative bags.
MatrixXd init_backgrounds_vca(const BagDataset& ds, int M, Rng& rng);

/// k-means centers of the negative instances (k-means++ seeding, Lloyd
/// iterations), normalized. Alternative background initializer.
MatrixXd init_backgrounds_kmeans(const BagDataset& ds, int M, Rng& rng);

struct ArmijoResult {
  VectorXd atom;
  bool accepted = false;
  double step = 0.0;
  double value_before = 0.0;
  double value_after = 0.0;
  int trials = 0;
};

/// Backtracking line search on one unit-norm atom. Tries s0, s0*shrink, ...
/// and keeps the first normalized candidate with
/// eval(candidate) <= eval(atom) - c * s * ||grad||^2. Returns the atom
/// unchanged when no trial qualifies.
ArmijoResult armijo_update_atom(const VectorXd& atom, const VectorXd& grad,
                                const std::function<double(const VectorXd&)>& eval,
                                const ArmijoParams& cfg);

IstaConfig ista_config(const HyperParams& hp);

/// Codes every instance: a over [D+ D-] and p over D- for positive bags,
/// p (and a when alpha_incoh > 0) for negative bags.
CodeBook solve_codes(const BagDataset& ds, const ConceptDictionary& dict,
                     const HyperParams& hp);

enum class StopReason { kMaxIters, kTolerance };

struct AtomUpdate {
  int iteration = 0;
  Index atom = 0;  // index into [D+ D-]
  ArmijoResult line_search;
};

struct TrainReport {
  int iterations_run = 0;
  std::vector<ObjectiveBreakdown> objective_trace;
  /// Largest column-norm deviation from 1 after each outer iteration.
  std::vector<double> norm_deviation_trace;
  std::vector<AtomUpdate> atom_updates;
  StopReason stop_reason = StopReason::kMaxIters;
  ConceptDictionary initial_dictionary;
  ConceptDictionary final_dictionary;
};

/// Initializes the dictionary from the data using hp.seed.
ConceptDictionary initialize_dictionary(const BagDataset& ds,
                                        const HyperParams& hp);

/// Alternating optimization: for each atom, re-solve codes, take a gradient
/// step with Armijo backtracking and renormalize; repeat until the relative
/// objective change falls below hp.change_tolerance or hp.max_outer_iters.
TrainReport train(const BagDataset& ds, const HyperParams& hp);

/// Same, starting from a given dictionary.
TrainReport train_from(const BagDataset& ds, const HyperParams& hp,
                       ConceptDictionary init);

}  // namespace mihe

#endif  // MIHE_TRAINER_HPP
