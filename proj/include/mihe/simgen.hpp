#ifndef MIHE_SIMGEN_HPP
#define MIHE_SIMGEN_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mihe/model.hpp"

namespace mihe {

/// Named spectra sampled on a common wavelength grid (micrometres).
struct SpectralLibrary {
  VectorXd wavelengths;
  std::vector<std::string> names;
  MatrixXd spectra;  // bands x endmembers, column order matches `names`

  Index bands() const { return wavelengths.size(); }
  /// Column of `name`; throws Error naming the endmember when absent.
  Index index_of(const std::string& name) const;
  VectorXd spectrum(const std::string& name) const { return spectra.col(index_of(name)); }
};

/// Reads `wavelength,<name1>,<name2>,...` with one row per band.
SpectralLibrary read_library_csv(std::istream& in);
SpectralLibrary load_library_csv(const std::string& path);
void write_library_csv(std::ostream& out, const SpectralLibrary& lib);

/// Smooth synthetic stand-ins for five rock spectra (211 bands,
/// 0.4-2.5 um): red_slate, verde_antique, phyllite, pyroxenite,
/// quartz_conglomerate.
SpectralLibrary rock_fixture_library();

struct SimConfig {
  std::vector<std::string> target_names;
  std::vector<std::string> background_names;
  int bags_pos = 15;
  int bags_neg = 5;
  int pts_per_bag = 500;
  int target_pts_per_pos_bag = 200;
  /// Mean proportion of each target in target pixels.
  std::vector<double> target_mean;
  double snr_db = 20.0;
  /// Optional background endmembers per bag (positive bags first); every
  /// bag uses `background_names` when absent.
  std::optional<std::vector<std::vector<std::string>>> bag_background_subsets;
  /// Target pixels mix with a random nonempty subset of the bag's
  /// background endmembers instead of all of them.
  bool random_background_subset = false;
  double dirichlet_scale = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Dirichlet draw over k >= 2 components whose first coordinate has mean
/// `mean_target`; the remaining mass splits evenly.
VectorXd sample_proportions(std::mt19937_64& rng, int k, double mean_target,
                            double scale = 10.0);

/// Dirichlet with concentrations `alpha` (all > 0).
VectorXd sample_dirichlet(std::mt19937_64& rng, const VectorXd& alpha);

/// Adds white Gaussian noise with variance mean(clean^2) / 10^(snr_db/10).
MatrixXd add_noise_to_snr(const MatrixXd& clean, double snr_db,
                          std::mt19937_64& rng);

/// Realized 10 log10(signal power / noise power).
double realized_snr_db(const MatrixXd& clean, const MatrixXd& noisy);

struct BagTruth {
  std::vector<bool> is_target;  // per instance
  MatrixXd proportions;         // endmembers x N_i, order of `endmembers`
  MatrixXd clean;               // d x N_i before noise
};

struct SimulatedData {
  BagDataset dataset;
  std::vector<std::string> endmembers;  // targets then backgrounds
  Index num_targets = 0;
  std::vector<BagTruth> truth;          // aligned with dataset.bags
  MatrixXd endmember_spectra;           // d x endmembers

  /// Instance ground truth flattened in dataset order.
  std::vector<bool> flat_truth() const;
  /// All instances flattened in dataset order (d x N).
  MatrixXd flat_instances() const;
};

SimulatedData generate_dataset(const SpectralLibrary& lib, const SimConfig& cfg);

/// Preset layouts of the simulated experiments.
namespace presets {

/// 15 positive bags (5 with verde_antique+phyllite+pyroxenite, 5 with
/// phyllite+pyroxenite, 5 with pyroxenite) and 5 negative bags with
/// phyllite+pyroxenite; red_slate target.
SimConfig incomplete_background(double target_mean, int pts_per_bag = 500,
                                int target_pts = 200, std::uint64_t seed = 0);

/// Two targets (red_slate, quartz_conglomerate) over verde_antique,
/// phyllite and pyroxenite; 5 positive and 5 negative bags.
SimConfig multi_target(double mean1, double mean2, int pts_per_bag = 500,
                       int target_pts = 200, std::uint64_t seed = 0);

/// 5 positive and 5 negative bags of 100 points, 50 target points at mean
/// proportion 0.1 mixed with a random subset of three backgrounds.
SimConfig parameter_study(int pts_per_bag = 100, int target_pts = 50,
                          double target_mean = 0.1, std::uint64_t seed = 0);

}  // namespace presets

}  // namespace mihe

#endif  // MIHE_SIMGEN_HPP
