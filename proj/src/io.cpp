#include "mihe/io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mihe/text.hpp"

namespace mihe {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::string fmt(double v) { return format_double(v); }

double field_double(std::string_view s, int line) {
  try {
    return parse_double(s);
  } catch (const std::invalid_argument& e) {
    throw IoError("line " + std::to_string(line) + ": " + e.what());
  }
}

struct RawRow {
  std::string bag_id;
  BagLabel label;
  std::vector<double> values;
};

// Header check plus every data row; d is the number of feature columns.
std::vector<RawRow> read_bag_rows(std::istream& in, Index& d) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("bag CSV: missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "bag_id" || header[1] != "bag_label")
    throw IoError("bag CSV: header must be bag_id,bag_label,f0,...");
  d = static_cast<Index>(header.size() - 2);

  std::vector<RawRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (static_cast<Index>(f.size()) != d + 2)
      throw IoError("bag CSV line " + std::to_string(lineno) + ": expected " +
                    std::to_string(d + 2) + " fields, got " + std::to_string(f.size()));
    RawRow row;
    row.bag_id = std::string(f[0]);
    if (f[1] == "0")
      row.label = BagLabel::kNegative;
    else if (f[1] == "1")
      row.label = BagLabel::kPositive;
    else
      throw IoError("bag CSV line " + std::to_string(lineno) + ": bag_label must be 0 or 1");
    row.values.reserve(static_cast<std::size_t>(d));
    for (std::size_t k = 2; k < f.size(); ++k) row.values.push_back(field_double(f[k], lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Field reader that remembers which keys were consumed.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  T require(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    T out{};
    get(key, out);
    return out;
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void schema() {
    used_.insert("schema_version");
    if (!j_.contains("schema_version")) return;
    int v = 0;
    get("schema_version", v);
    if (v != kSchemaVersion)
      throw ConfigError(where_ + ": unsupported schema_version " + std::to_string(v));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json matrix_to_json(const MatrixXd& m) {
  json data = json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from_json(const json& j, const std::string& where) {
  Fields f(j, where);
  const auto rows = f.require<Index>("rows");
  const auto cols = f.require<Index>("cols");
  const auto data = f.require<std::vector<double>>("data");
  f.finish();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw ConfigError(where + ": data has " + std::to_string(data.size()) +
                      " entries, expected rows*cols");
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

std::string init_name(BackgroundInit b) { return b == BackgroundInit::kVca ? "vca" : "kmeans"; }

SimConfig sim_from_fields(Fields& f) {
  SimConfig c;
  c.target_names = f.require<std::vector<std::string>>("target_names");
  c.background_names = f.require<std::vector<std::string>>("background_names");
  f.get("bags_pos", c.bags_pos);
  f.get("bags_neg", c.bags_neg);
  f.get("pts_per_bag", c.pts_per_bag);
  f.get("target_pts_per_pos_bag", c.target_pts_per_pos_bag);
  c.target_mean = f.require<std::vector<double>>("target_mean");
  f.get("snr_db", c.snr_db);
  if (f.has("bag_background_subsets")) {
    std::vector<std::vector<std::string>> subsets;
    f.get("bag_background_subsets", subsets);
    c.bag_background_subsets = subsets;
  }
  f.get("random_background_subset", c.random_background_subset);
  f.get("dirichlet_scale", c.dirichlet_scale);
  f.get("seed", c.seed);
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace

BagDataset read_bags_csv(std::istream& in) {
  Index d = 0;
  const auto rows = read_bag_rows(in, d);
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> members;
  std::unordered_map<std::string, BagLabel> labels;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const RawRow& r = rows[k];
    auto it = labels.find(r.bag_id);
    if (it == labels.end()) {
      labels.emplace(r.bag_id, r.label);
      order.push_back(r.bag_id);
    } else if (it->second != r.label) {
      throw IoError("bag CSV: bag '" + r.bag_id + "' has mixed labels");
    }
    members[r.bag_id].push_back(k);
  }

  BagDataset ds;
  for (const auto& id : order) {
    Bag bag;
    bag.id = id;
    bag.label = labels[id];
    const auto& idx = members[id];
    bag.instances.resize(d, static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      for (Index b = 0; b < d; ++b)
        bag.instances(b, static_cast<Index>(j)) = rows[idx[j]].values[static_cast<std::size_t>(b)];
    ds.bags.push_back(std::move(bag));
  }
  return ds;
}

void write_bags_csv(std::ostream& out, const BagDataset& ds) {
  const Index d = ds.dim();
  out << "bag_id,bag_label";
  for (Index b = 0; b < d; ++b) out << ",f" << b;
  out << '\n';
  for (const auto& bag : ds.bags) {
    const char label = bag.positive() ? '1' : '0';
    for (Index j = 0; j < bag.size(); ++j) {
      out << bag.id << ',' << label;
      for (Index b = 0; b < bag.dim(); ++b) out << ',' << fmt(bag.instances(b, j));
      out << '\n';
    }
  }
}

BagDataset load_bags(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_bags_csv(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

MatrixXd load_scene(const std::string& path) {
  auto in = open_in(path);
  Index d = 0;
  std::vector<RawRow> rows;
  try {
    rows = read_bag_rows(in, d);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
  MatrixXd scene(d, static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (Index b = 0; b < d; ++b)
      scene(b, static_cast<Index>(k)) = rows[k].values[static_cast<std::size_t>(b)];
  return scene;
}

void save_bags(const std::string& path, const BagDataset& ds) {
  auto out = open_out(path);
  write_bags_csv(out, ds);
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_truth_csv(std::ostream& out, const SimulatedData& sim) {
  out << "instance_id,bag_id,truth\n";
  std::size_t row = 0;
  for (std::size_t i = 0; i < sim.dataset.bags.size(); ++i) {
    const auto& bag = sim.dataset.bags[i];
    for (Index j = 0; j < bag.size(); ++j)
      out << row++ << ',' << bag.id << ',' << (sim.truth[i].is_target[static_cast<std::size_t>(j)] ? 1 : 0)
          << '\n';
  }
}

std::vector<TruthRow> read_truth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("truth CSV: missing header");
  const auto header = split_csv_line(line);
  if (header.size() != 3 || header[0] != "instance_id" || header[1] != "bag_id" || header[2] != "truth")
    throw IoError("truth CSV: header must be instance_id,bag_id,truth");
  std::vector<TruthRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3 || (f[2] != "0" && f[2] != "1"))
      throw IoError("truth CSV line " + std::to_string(lineno) + ": malformed row");
    rows.push_back({std::string(f[0]), std::string(f[1]), f[2] == "1"});
  }
  return rows;
}

std::vector<TruthRow> load_truth(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_truth_csv(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_scores_csv(std::ostream& out, const ScoreSet& s) {
  const bool with_truth =
      !s.entries.empty() && std::all_of(s.entries.begin(), s.entries.end(),
                                        [](const ScoreEntry& e) { return e.truth.has_value(); });
  out << (with_truth ? "instance_id,score,truth\n" : "instance_id,score\n");
  for (const auto& e : s.entries) {
    out << e.id << ',' << fmt(e.score);
    if (with_truth) out << ',' << (*e.truth ? 1 : 0);
    out << '\n';
  }
}

ScoreSet read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("score CSV: missing header");
  const auto header = split_csv_line(line);
  const bool with_truth = header.size() == 3 && header[2] == "truth";
  if (header.size() < 2 || header[0] != "instance_id" || header[1] != "score" ||
      (header.size() == 3 && !with_truth) || header.size() > 3)
    throw IoError("score CSV: header must be instance_id,score[,truth]");
  ScoreSet s;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw IoError("score CSV line " + std::to_string(lineno) + ": wrong field count");
    ScoreEntry e;
    e.id = std::string(f[0]);
    e.score = field_double(f[1], lineno);
    if (with_truth) {
      if (f[2] != "0" && f[2] != "1")
        throw IoError("score CSV line " + std::to_string(lineno) + ": truth must be 0 or 1");
      e.truth = f[2] == "1";
    }
    s.entries.push_back(std::move(e));
  }
  return s;
}

ScoreSet load_scores(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_scores_csv(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void attach_truth(ScoreSet& s, const std::vector<TruthRow>& truth) {
  std::unordered_map<std::string, bool> by_id;
  for (const auto& t : truth)
    if (!by_id.emplace(t.instance_id, t.truth).second)
      throw IoError("duplicate truth for instance '" + t.instance_id + "'");
  for (auto& e : s.entries) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) throw IoError("no truth for instance '" + e.id + "'");
    e.truth = it->second;
  }
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc) {
  out << "fpr,tpr\n";
  for (const auto& p : roc) out << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
}

void write_trace_csv(std::ostream& out, const TrainReport& report) {
  out << "iter,gm,fidelity,incoherence,total\n";
  for (std::size_t k = 0; k < report.objective_trace.size(); ++k) {
    const auto& o = report.objective_trace[k];
    out << k << ',' << fmt(o.gm_term) << ',' << fmt(o.fidelity_term) << ','
        << fmt(o.incoherence_term) << ',' << fmt(o.total) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "param_or_grid_id,values,median_auc,min_auc,max_auc,failed\n";
  for (const auto& row : rows) {
    std::string values;
    for (const auto& [param, v] : row.values) {
      if (!values.empty()) values += ';';
      values += param + "=" + fmt(v);
    }
    out << row.id << ',' << values << ',' << fmt(row.median_auc) << ',' << fmt(row.min_auc) << ','
        << fmt(row.max_auc) << ',' << row.failed << '\n';
  }
}

BackgroundStats ModelFile::background() const {
  BackgroundStats bg;
  bg.mu = mu;
  bg.sigma = sigma;
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw Error("model background covariance is not positive definite");
  bg.sigma_inv = llt.solve(MatrixXd::Identity(sigma.rows(), sigma.cols()));
  return bg;
}

json hyperparams_to_json(const HyperParams& hp) {
  return json{
      {"schema_version", kSchemaVersion},
      {"T", hp.T},
      {"M", hp.M},
      {"rho", hp.rho},
      {"b", hp.b},
      {"beta", hp.beta},
      {"lambda", hp.lambda},
      {"alpha_incoh", hp.alpha_incoh},
      {"max_outer_iters", hp.max_outer_iters},
      {"change_tolerance", hp.change_tolerance},
      {"ista_iters", hp.ista_iters},
      {"ista_tolerance", hp.ista_tolerance},
      {"armijo",
       {{"initial_step", hp.armijo.initial_step},
        {"shrink_factor", hp.armijo.shrink_factor},
        {"sufficient_decrease_c", hp.armijo.sufficient_decrease_c},
        {"max_backtracks", hp.armijo.max_backtracks}}},
      {"seed", hp.seed},
      {"reuse_codes_within_iteration", hp.reuse_codes_within_iteration},
      {"background_init", init_name(hp.background_init)},
  };
}

HyperParams hyperparams_from_json(const json& j) {
  Fields f(j, "hyperparams");
  f.schema();
  HyperParams hp;
  f.get("T", hp.T);
  f.get("M", hp.M);
  f.get("rho", hp.rho);
  f.get("b", hp.b);
  f.get("beta", hp.beta);
  f.get("lambda", hp.lambda);
  f.get("alpha_incoh", hp.alpha_incoh);
  f.get("max_outer_iters", hp.max_outer_iters);
  f.get("change_tolerance", hp.change_tolerance);
  f.get("ista_iters", hp.ista_iters);
  f.get("ista_tolerance", hp.ista_tolerance);
  if (f.has("armijo")) {
    Fields a(f.raw("armijo"), "hyperparams.armijo");
    a.get("initial_step", hp.armijo.initial_step);
    a.get("shrink_factor", hp.armijo.shrink_factor);
    a.get("sufficient_decrease_c", hp.armijo.sufficient_decrease_c);
    a.get("max_backtracks", hp.armijo.max_backtracks);
    a.finish();
  }
  f.get("seed", hp.seed);
  f.get("reuse_codes_within_iteration", hp.reuse_codes_within_iteration);
  std::string init = init_name(hp.background_init);
  f.get("background_init", init);
  if (init == "vca")
    hp.background_init = BackgroundInit::kVca;
  else if (init == "kmeans")
    hp.background_init = BackgroundInit::kKMeans;
  else
    throw ConfigError("hyperparams.background_init: expected 'vca' or 'kmeans', got '" + init + "'");
  f.finish();
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return hp;
}

json model_to_json(const ModelFile& m) {
  json hp = hyperparams_to_json(m.hp);
  hp.erase("schema_version");
  return json{
      {"schema_version", m.schema_version},
      {"hyperparams", hp},
      {"dictionary", {{"targets", matrix_to_json(m.dict.targets)},
                      {"backgrounds", matrix_to_json(m.dict.backgrounds)}}},
      {"background", {{"mu", matrix_to_json(m.mu)}, {"sigma", matrix_to_json(m.sigma)}}},
      {"training", {{"seed", m.seed}, {"iterations", m.iterations}, {"final_objective", m.final_objective}}},
  };
}

ModelFile model_from_json(const json& j) {
  Fields f(j, "model");
  ModelFile m;
  m.schema_version = f.require<int>("schema_version");
  if (m.schema_version != kSchemaVersion)
    throw ConfigError("model: unsupported schema_version " + std::to_string(m.schema_version));
  m.hp = hyperparams_from_json(f.raw("hyperparams"));

  Fields d(f.raw("dictionary"), "model.dictionary");
  m.dict.targets = matrix_from_json(d.raw("targets"), "model.dictionary.targets");
  m.dict.backgrounds = matrix_from_json(d.raw("backgrounds"), "model.dictionary.backgrounds");
  d.finish();

  Fields b(f.raw("background"), "model.background");
  const MatrixXd mu = matrix_from_json(b.raw("mu"), "model.background.mu");
  m.sigma = matrix_from_json(b.raw("sigma"), "model.background.sigma");
  b.finish();
  if (mu.cols() != 1) throw ConfigError("model.background.mu: expected a column vector");
  m.mu = mu.col(0);

  Fields t(f.raw("training"), "model.training");
  t.get("seed", m.seed);
  t.get("iterations", m.iterations);
  t.get("final_objective", m.final_objective);
  t.finish();
  f.finish();

  const Index dim = m.dict.targets.rows();
  if (m.dict.backgrounds.rows() != dim || m.mu.size() != dim || m.sigma.rows() != dim ||
      m.sigma.cols() != dim)
    throw ConfigError("model: inconsistent dimensions");
  if (m.dict.num_targets() != m.hp.T || m.dict.num_backgrounds() != m.hp.M)
    throw ConfigError("model: dictionary size does not match T and M");
  return m;
}

std::string dump_model(const ModelFile& m) { return model_to_json(m).dump(2) + "\n"; }

void save_model(const std::string& path, const ModelFile& m) {
  auto out = open_out(path);
  out << dump_model(m);
  if (!out) throw IoError("failed writing '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model '" + path + "'");
  try {
    return model_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(path + ": " + e.what());
  }
}

SimulationFile simulation_from_json(const json& j) {
  Fields f(j, "simulation");
  f.schema();
  SimulationFile out;
  f.get("library", out.library);
  out.sim = sim_from_fields(f);
  f.finish();
  return out;
}

json simulation_to_json(const SimulationFile& s) {
  const SimConfig& c = s.sim;
  json j{
      {"schema_version", kSchemaVersion},
      {"library", s.library},
      {"target_names", c.target_names},
      {"background_names", c.background_names},
      {"bags_pos", c.bags_pos},
      {"bags_neg", c.bags_neg},
      {"pts_per_bag", c.pts_per_bag},
      {"target_pts_per_pos_bag", c.target_pts_per_pos_bag},
      {"target_mean", c.target_mean},
      {"snr_db", c.snr_db},
      {"random_background_subset", c.random_background_subset},
      {"dirichlet_scale", c.dirichlet_scale},
      {"seed", c.seed},
  };
  if (c.bag_background_subsets) j["bag_background_subsets"] = *c.bag_background_subsets;
  return j;
}

ExperimentFile experiment_from_json(const json& j) {
  Fields f(j, "experiment");
  f.schema();
  ExperimentFile out;
  f.get("library", out.library);
  {
    Fields s(f.raw("sim"), "experiment.sim");
    out.experiment.sim = sim_from_fields(s);
    s.finish();
  }
  f.get("test_seed", out.experiment.test_seed);
  if (f.has("hyperparams")) out.experiment.hp = hyperparams_from_json(f.raw("hyperparams"));
  std::string method = method_name(out.experiment.method);
  f.get("method", method);
  try {
    out.experiment.method = parse_method(method);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("experiment.method: ") + e.what());
  }
  f.get("ridge", out.experiment.ridge);
  f.finish();
  return out;
}

SweepSpec sweep_spec_from_json(const json& j) {
  Fields f(j, "sweep");
  f.schema();
  SweepSpec spec;
  if (f.has("axes")) {
    const json& axes = f.raw("axes");
    if (!axes.is_array()) throw ConfigError("sweep.axes: expected an array");
    for (std::size_t k = 0; k < axes.size(); ++k) {
      Fields a(axes[k], "sweep.axes[" + std::to_string(k) + "]");
      SweepAxis axis;
      axis.param = a.require<std::string>("param");
      axis.values = a.require<std::vector<double>>("values");
      a.finish();
      spec.axes.push_back(std::move(axis));
    }
  } else {
    spec.axes = default_sweep_spec().axes;
  }
  f.get("joint", spec.joint);
  f.get("runs_per_setting", spec.runs_per_setting);
  f.finish();
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

SpectralLibrary resolve_library(const std::string& spec) {
  if (spec == "builtin:rocks") return rock_fixture_library();
  if (spec.rfind("builtin:", 0) == 0) throw ConfigError("unknown builtin library '" + spec + "'");
  try {
    return load_library_csv(spec);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(e.what());
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace mihe
