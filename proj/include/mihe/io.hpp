#ifndef MIHE_IO_HPP
#define MIHE_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mihe/detectors.hpp"
#include "mihe/eval.hpp"
#include "mihe/model.hpp"
#include "mihe/simgen.hpp"
#include "mihe/trainer.hpp"

namespace mihe {

/// Bad or inconsistent configuration (JSON syntax, unknown keys, values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, unwritable or malformed data files.
class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kSchemaVersion = 1;

// Bag CSV: header `bag_id,bag_label,f0,...,f{d-1}`, one row per instance.
// Rows of a bag need not be contiguous; bags keep first-appearance order.
BagDataset read_bags_csv(std::istream& in);
void write_bags_csv(std::ostream& out, const BagDataset& ds);
BagDataset load_bags(const std::string& path);
/// All instances of a bag CSV in row order (d x rows).
MatrixXd load_scene(const std::string& path);
void save_bags(const std::string& path, const BagDataset& ds);

/// Instance ids are 0-based row indices of the bag CSV.
struct TruthRow {
  std::string instance_id;
  std::string bag_id;
  bool truth = false;
};

void write_truth_csv(std::ostream& out, const SimulatedData& sim);
std::vector<TruthRow> read_truth_csv(std::istream& in);
std::vector<TruthRow> load_truth(const std::string& path);

/// `instance_id,score[,truth]`
void write_scores_csv(std::ostream& out, const ScoreSet& s);
ScoreSet read_scores_csv(std::istream& in);
ScoreSet load_scores(const std::string& path);

/// Joins truth rows onto scores by instance id. Throws IoError on a missing
/// or duplicate id.
void attach_truth(ScoreSet& s, const std::vector<TruthRow>& truth);

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc);
void write_trace_csv(std::ostream& out, const TrainReport& report);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct ModelFile {
  int schema_version = kSchemaVersion;
  HyperParams hp;
  ConceptDictionary dict;
  VectorXd mu;
  MatrixXd sigma;
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_objective = 0.0;

  /// Background statistics with the inverse recomputed from sigma.
  BackgroundStats background() const;
};

nlohmann::json model_to_json(const ModelFile& m);
ModelFile model_from_json(const nlohmann::json& j);
std::string dump_model(const ModelFile& m);
void save_model(const std::string& path, const ModelFile& m);
ModelFile load_model(const std::string& path);

// JSON configs. Every object carries `schema_version`; unknown keys are
// rejected with ConfigError naming the key.
nlohmann::json hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const nlohmann::json& j);

/// `library` is "builtin:rocks" or a CSV path.
struct SimulationFile {
  std::string library = "builtin:rocks";
  SimConfig sim;
};

SimulationFile simulation_from_json(const nlohmann::json& j);
nlohmann::json simulation_to_json(const SimulationFile& f);

struct ExperimentFile {
  std::string library = "builtin:rocks";
  ExperimentConfig experiment;
};

ExperimentFile experiment_from_json(const nlohmann::json& j);
SweepSpec sweep_spec_from_json(const nlohmann::json& j);

SpectralLibrary resolve_library(const std::string& spec);

/// Parses a JSON file; syntax errors become ConfigError with line and column.
nlohmann::json load_json(const std::string& path);

}  // namespace mihe

#endif  // MIHE_IO_HPP
