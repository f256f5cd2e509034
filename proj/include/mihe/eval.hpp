#ifndef MIHE_EVAL_HPP
#define MIHE_EVAL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mihe/detectors.hpp"
#include "mihe/scores.hpp"
#include "mihe/simgen.hpp"
#include "mihe/trainer.hpp"

namespace mihe {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Threshold sweep over distinct scores, highest first. Tied scores enter
/// together. Starts at (0,0) and ends at (1,1).
std::vector<RocPoint> roc_curve(const ScoreSet& s);

/// Trapezoidal area under roc_curve (ties count one half).
double auc(const ScoreSet& s);

/// Area under the ROC polyline on [0, fpr_max], divided by fpr_max.
double partial_auc(const std::vector<RocPoint>& roc, double fpr_max);

/// FPR bound implied by a false-alarm-rate cutoff (alarms per unit area):
/// far_cutoff * (area_per_sample * N) / N-, clipped to 1.
double far_to_fpr(const ScoreSet& s, double far_cutoff, double area_per_sample);

/// ROC area up to the FPR equivalent of `far_cutoff`, normalized to [0, 1].
double nauc(const ScoreSet& s, double far_cutoff, double area_per_sample = 1.0);

/// Angle in degrees between two spectra.
double spectral_angle_deg(const VectorXd& a, const VectorXd& b);

/// Training and test scenes plus everything needed to score one run.
struct ExperimentConfig {
  SimConfig sim;
  /// Seed of the independently generated test scene.
  std::uint64_t test_seed = 1;
  HyperParams hp;
  DetectorMethod method = DetectorMethod::kAce;
  /// Negative selects the default ridge.
  double ridge = -1.0;
};

struct ExperimentData {
  SimulatedData train;
  SimulatedData test;
};

ExperimentData prepare_experiment(const SpectralLibrary& lib, const ExperimentConfig& cfg);

struct RunResult {
  double auc = 0.0;
  /// Per configured target, the smallest angle to any learned target (deg).
  std::vector<double> target_angles_deg;
  TrainReport report;
  ScoreSet scores;
};

/// Train on data.train with `hp`, score data.test, compute AUC.
RunResult run_experiment(const ExperimentData& data, const HyperParams& hp,
                         DetectorMethod method, double ridge = -1.0);

/// Seed of run `run` at grid point `grid_index`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t grid_index, std::uint64_t run);

/// Lower median for even counts.
double lower_median(std::vector<double> values);

struct SweepAxis {
  std::string param;  // M, beta, lambda or b
  std::vector<double> values;
};

struct SweepSpec {
  std::vector<SweepAxis> axes;
  /// Cartesian product of all axes instead of one axis at a time.
  bool joint = false;
  int runs_per_setting = 5;

  void validate() const;
};

/// Broad default ranges for M, beta, lambda and b.
SweepSpec default_sweep_spec();

/// Apply `param` = `value` to a copy of `hp`.
HyperParams with_param(HyperParams hp, const std::string& param, double value);

struct SweepRow {
  std::string id;                                      // axis name or "grid"
  std::vector<std::pair<std::string, double>> values;  // setting
  double median_auc = 0.0;
  double min_auc = 0.0;
  double max_auc = 0.0;
  std::vector<double> aucs;
  int failed = 0;
};

/// Runs every setting `runs_per_setting` times with derived seeds; rows come
/// out in grid order. A failing run is counted in `failed` and skipped.
std::vector<SweepRow> run_sweep(const ExperimentData& data, const ExperimentConfig& base,
                                const SweepSpec& spec);

}  // namespace mihe

#endif  // MIHE_EVAL_HPP
