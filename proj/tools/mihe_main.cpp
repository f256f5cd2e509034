#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "mihe/io.hpp"
#include "mihe/text.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitIo = 4;

struct Failure {
  int code;
  std::string message;
};

std::ofstream create(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw mihe::IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw mihe::IoError("failed writing '" + path + "'");
}

struct SimulateArgs {
  std::string config, out, truth;
};

int cmd_simulate(const SimulateArgs& a, std::optional<std::uint64_t> seed) {
  mihe::SimulationFile file;
  try {
    file = mihe::simulation_from_json(mihe::load_json(a.config));
  } catch (const mihe::ConfigError& e) {
    throw Failure{kExitConfig, a.config + ": " + e.what()};
  }
  if (seed) file.sim.seed = *seed;
  mihe::SimulatedData sim;
  try {
    sim = mihe::generate_dataset(mihe::resolve_library(file.library), file.sim);
  } catch (const mihe::IoError&) {
    throw;
  } catch (const mihe::Error& e) {
    throw Failure{kExitConfig, a.config + ": " + e.what()};
  }
  mihe::save_bags(a.out, sim.dataset);
  auto truth = create(a.truth);
  mihe::write_truth_csv(truth, sim);
  finish(truth, a.truth);

  const auto c = sim.dataset.counts();
  std::cout << "bags: " << c.positive_bags << " positive, " << c.negative_bags << " negative\n"
            << "instances: " << c.total() << "\n"
            << "bands: " << sim.dataset.dim() << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, params, model, trace;
  double ridge = -1.0;
};

int cmd_train(const TrainArgs& a, std::optional<std::uint64_t> seed) {
  mihe::HyperParams hp;
  try {
    hp = mihe::hyperparams_from_json(mihe::load_json(a.params));
  } catch (const mihe::ConfigError& e) {
    throw Failure{kExitConfig, a.params + ": " + e.what()};
  }
  if (seed) hp.seed = *seed;
  const mihe::BagDataset ds = mihe::load_bags(a.data);

  mihe::ModelFile model;
  try {
    const mihe::TrainReport report = mihe::train(ds, hp);
    const mihe::BackgroundStats bg =
        mihe::fit_background(ds.stacked(mihe::BagLabel::kNegative), a.ridge);
    model.hp = hp;
    model.dict = report.final_dictionary;
    model.mu = bg.mu;
    model.sigma = bg.sigma;
    model.seed = hp.seed;
    model.iterations = report.iterations_run;
    model.final_objective =
        report.objective_trace.empty()
            ? mihe::evaluate_objective(ds, model.dict, hp, mihe::solve_codes(ds, model.dict, hp)).total
            : report.objective_trace.back().total;

    auto trace = create(a.trace);
    mihe::write_trace_csv(trace, report);
    finish(trace, a.trace);
    std::cout << "iterations: " << report.iterations_run << "\n"
              << "objective: " << mihe::format_double(model.final_objective) << "\n";
  } catch (const mihe::IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw Failure{kExitTraining, std::string("training failed: ") + e.what()};
  }
  mihe::save_model(a.model, model);
  return 0;
}

struct DetectArgs {
  std::string model, scene, method = "ace", out, truth;
};

int cmd_detect(const DetectArgs& a) {
  mihe::DetectorMethod method;
  try {
    method = mihe::parse_method(a.method);
  } catch (const std::exception& e) {
    throw Failure{kExitConfig, e.what()};
  }
  const mihe::ModelFile model = mihe::load_model(a.model);
  const mihe::MatrixXd scene = mihe::load_scene(a.scene);
  if (scene.rows() != model.dict.dim())
    throw Failure{kExitIo, "dimension mismatch: model has " + std::to_string(model.dict.dim()) +
                               " bands, scene has " + std::to_string(scene.rows())};

  mihe::ScoreSet scores;
  try {
    const mihe::BackgroundStats bg = model.background();
    mihe::DetectOptions opts;
    opts.method = method;
    opts.lambda = model.hp.lambda;
    opts.ista = mihe::ista_config(model.hp);
    opts.background = &bg;
    scores = mihe::detect(scene, model.dict, opts);
  } catch (const std::exception& e) {
    throw Failure{kExitIo, std::string("detection failed: ") + e.what()};
  }
  if (!a.truth.empty()) mihe::attach_truth(scores, mihe::load_truth(a.truth));
  auto out = create(a.out);
  mihe::write_scores_csv(out, scores);
  finish(out, a.out);
  return 0;
}

struct EvalArgs {
  std::string scores, truth, metrics, roc;
  std::optional<double> nauc_far;
  double area_per_sample = 1.0;
};

int cmd_eval(const EvalArgs& a) {
  mihe::ScoreSet scores = mihe::load_scores(a.scores);
  if (!a.truth.empty()) mihe::attach_truth(scores, mihe::load_truth(a.truth));

  nlohmann::json metrics;
  std::vector<mihe::RocPoint> roc;
  try {
    roc = mihe::roc_curve(scores);
    metrics["auc"] = mihe::auc(scores);
    if (a.nauc_far) {
      metrics["nauc"] = mihe::nauc(scores, *a.nauc_far, a.area_per_sample);
      metrics["nauc_far"] = *a.nauc_far;
      metrics["nauc_fpr_max"] = mihe::far_to_fpr(scores, *a.nauc_far, a.area_per_sample);
      metrics["area_per_sample"] = a.area_per_sample;
    }
  } catch (const std::invalid_argument& e) {
    throw Failure{kExitIo, e.what()};
  }
  std::size_t pos = 0;
  for (const auto& e : scores.entries) pos += *e.truth ? 1 : 0;
  metrics["positives"] = pos;
  metrics["negatives"] = scores.entries.size() - pos;

  auto m = create(a.metrics);
  m << metrics.dump(2) << "\n";
  finish(m, a.metrics);
  if (!a.roc.empty()) {
    auto r = create(a.roc);
    mihe::write_roc_csv(r, roc);
    finish(r, a.roc);
  }
  std::cout << "auc: " << mihe::format_double(metrics["auc"].get<double>()) << "\n";
  if (a.nauc_far) std::cout << "nauc: " << mihe::format_double(metrics["nauc"].get<double>()) << "\n";
  return 0;
}

struct SweepArgs {
  std::string config, spec, out;
};

int cmd_sweep(const SweepArgs& a, std::optional<std::uint64_t> seed) {
  mihe::ExperimentFile file;
  mihe::SweepSpec spec;
  try {
    file = mihe::experiment_from_json(mihe::load_json(a.config));
  } catch (const mihe::ConfigError& e) {
    throw Failure{kExitConfig, a.config + ": " + e.what()};
  }
  try {
    spec = mihe::sweep_spec_from_json(mihe::load_json(a.spec));
  } catch (const mihe::ConfigError& e) {
    throw Failure{kExitConfig, a.spec + ": " + e.what()};
  }
  if (seed) file.experiment.hp.seed = *seed;

  mihe::ExperimentData data;
  try {
    data = mihe::prepare_experiment(mihe::resolve_library(file.library), file.experiment);
  } catch (const mihe::IoError&) {
    throw;
  } catch (const mihe::Error& e) {
    throw Failure{kExitConfig, a.config + ": " + e.what()};
  }
  const auto rows = mihe::run_sweep(data, file.experiment, spec);
  auto out = create(a.out);
  mihe::write_sweep_csv(out, rows);
  finish(out, a.out);
  int failed = 0;
  for (const auto& r : rows) failed += r.failed;
  std::cout << "settings: " << rows.size() << "\n" << "failed runs: " << failed << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-instance target and background concept learning"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  int threads = 0;
  app.add_option("--seed", seed, "Override the seed of the config");
  app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic bag dataset");
  simulate->add_option("--config", sim.config, "Simulation JSON")->required();
  simulate->add_option("--out", sim.out, "Bag CSV to write")->required();
  simulate->add_option("--truth", sim.truth, "Ground-truth CSV to write")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Learn target and background concepts");
  train->add_option("--data", tr.data, "Bag CSV")->required();
  train->add_option("--params", tr.params, "Hyperparameter JSON")->required();
  train->add_option("--model", tr.model, "Model JSON to write")->required();
  train->add_option("--trace", tr.trace, "Objective trace CSV to write")->required();
  train->add_option("--ridge", tr.ridge, "Covariance ridge (negative: default)");

  DetectArgs det;
  auto* detect = app.add_subcommand("detect", "Score every instance of a scene");
  detect->add_option("--model", det.model, "Model JSON")->required();
  detect->add_option("--scene", det.scene, "Bag CSV to score")->required();
  detect->add_option("--method", det.method, "hsd, ace or smf")->capture_default_str();
  detect->add_option("--out", det.out, "Score CSV to write")->required();
  detect->add_option("--truth", det.truth, "Ground-truth CSV to attach");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "ROC, AUC and NAUC of a score file");
  eval->add_option("--scores", ev.scores, "Score CSV")->required();
  eval->add_option("--truth", ev.truth, "Ground-truth CSV (unless scores carry truth)");
  eval->add_option("--metrics", ev.metrics, "Metrics JSON to write")->required();
  eval->add_option("--roc", ev.roc, "ROC CSV to write");
  eval->add_option("--nauc-far", ev.nauc_far, "False alarms per unit area for NAUC");
  eval->add_option("--area-per-sample", ev.area_per_sample, "Area covered by one instance")
      ->capture_default_str();

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Hyperparameter sweep");
  sweep->add_option("--config", sw.config, "Experiment JSON")->required();
  sweep->add_option("--spec", sw.spec, "Sweep JSON")->required();
  sweep->add_option("--out", sw.out, "Sweep CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*simulate) return cmd_simulate(sim, seed);
    if (*train) return cmd_train(tr, seed);
    if (*detect) return cmd_detect(det);
    if (*eval) return cmd_eval(ev);
    if (*sweep) return cmd_sweep(sw, seed);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const mihe::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mihe::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
