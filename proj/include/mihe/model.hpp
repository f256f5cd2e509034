#ifndef MIHE_MODEL_HPP
#define MIHE_MODEL_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mihe {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A single pixel spectrum.
using Spectrum = VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an instance is reconstructed exactly by the background
/// concepts, so the hybrid statistic has a zero denominator.
class DegenerateBackgroundError : public Error {
 public:
  using Error::Error;
};

/// Warnings go through a process-wide sink (stderr by default).
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

enum class BagLabel { kNegative = 0, kPositive = 1 };

/// A labelled multiset of instances. Instances are stored column-wise.
struct Bag {
  std::string id;
  BagLabel label = BagLabel::kNegative;
  MatrixXd instances;  // d x N_i

  bool positive() const { return label == BagLabel::kPositive; }
  Index size() const { return instances.cols(); }
  Index dim() const { return instances.rows(); }
  auto instance(Index j) const { return instances.col(j); }
};

struct BagCounts {
  Index positive_bags = 0;       // K+
  Index negative_bags = 0;       // K-
  Index positive_instances = 0;  // N+
  Index negative_instances = 0;  // N-
  Index total() const { return positive_instances + negative_instances; }
};

struct BagDataset {
  std::vector<Bag> bags;

  /// Dimensionality of the first bag (0 for an empty dataset).
  Index dim() const { return bags.empty() ? 0 : bags.front().dim(); }
  BagCounts counts() const;

  /// All instances of bags with the given label, concatenated in bag order.
  MatrixXd stacked(BagLabel label) const;
};

struct DatasetViolation {
  std::string bag_id;  // empty for dataset-wide violations
  std::string message;
};

/// Reports every broken dataset invariant; empty when the dataset is usable
/// for training.
std::vector<DatasetViolation> validate_dataset(const BagDataset& ds);

/// Target concepts D+ (d x T) and background concepts D- (d x M).
struct ConceptDictionary {
  MatrixXd targets;
  MatrixXd backgrounds;

  Index dim() const { return targets.rows(); }
  Index num_targets() const { return targets.cols(); }
  Index num_backgrounds() const { return backgrounds.cols(); }
  Index num_atoms() const { return targets.cols() + backgrounds.cols(); }

  /// [D+ D-]
  MatrixXd full() const;
  /// Column `k` of [D+ D-].
  VectorXd atom(Index k) const;
  void set_atom(Index k, const VectorXd& value);

  /// Largest deviation of any column norm from 1.
  double max_norm_deviation() const;
};

/// Scales every column of `m` to unit Euclidean norm. Throws on a zero column.
void normalize_columns(MatrixXd& m);

struct ArmijoParams {
  double initial_step = 0.01;
  double shrink_factor = 0.5;
  double sufficient_decrease_c = 1e-4;
  int max_backtracks = 20;
};

enum class BackgroundInit { kVca, kKMeans };

struct HyperParams {
  int T = 1;
  int M = 9;
  double rho = 0.8;
  double b = 5.0;
  double beta = 5.0;
  double lambda = 1e-3;
  double alpha_incoh = 1.0;
  int max_outer_iters = 100;
  double change_tolerance = 1e-5;
  int ista_iters = 200;
  double ista_tolerance = 1e-6;
  ArmijoParams armijo;
  std::uint64_t seed = 0;
  bool reuse_codes_within_iteration = false;
  BackgroundInit background_init = BackgroundInit::kVca;

  /// Throws std::invalid_argument on a hard violation; warns when rho >= 1.
  void validate() const;
};

/// Codes of one instance: a over [D+ D-], p over D-, and the residuals they
/// induce, r = x - D a and q = x - D- p.
struct SparseCodes {
  VectorXd a;
  VectorXd p;
  VectorXd r;
  VectorXd q;

  auto a_plus(Index T) const { return a.head(T); }
  auto a_minus(Index T) const { return a.tail(a.size() - T); }
};

/// Builds SparseCodes for `x` with residuals consistent with `dict`.
SparseCodes make_codes(const Eigen::Ref<const VectorXd>& x,
                       const ConceptDictionary& dict, VectorXd a, VectorXd p);

}  // namespace mihe

#endif  // MIHE_MODEL_HPP
