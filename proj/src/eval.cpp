#include "mihe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace mihe {

void ScoreSet::set_truth(const std::vector<bool>& truth) {
  if (truth.size() != entries.size())
    throw std::invalid_argument("ScoreSet::set_truth: size mismatch");
  for (std::size_t k = 0; k < truth.size(); ++k) entries[k].truth = truth[k];
}

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts class_counts(const ScoreSet& s) {
  ClassCounts c;
  for (const auto& e : s.entries) {
    if (!e.truth) throw std::invalid_argument("score entry '" + e.id + "' has no ground truth");
    if (*e.truth)
      ++c.pos;
    else
      ++c.neg;
  }
  if (c.pos == 0 || c.neg == 0)
    throw std::invalid_argument("ROC needs at least one positive and one negative instance");
  return c;
}

}  // namespace

std::vector<RocPoint> roc_curve(const ScoreSet& s) {
  const ClassCounts counts = class_counts(s);
  std::vector<std::size_t> order(s.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.entries[a].score > s.entries[b].score;
  });

  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double level = s.entries[order[k]].score;
    while (k < order.size() && s.entries[order[k]].score == level) {
      if (*s.entries[order[k]].truth)
        ++tp;
      else
        ++fp;
      ++k;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(counts.neg),
                   static_cast<double>(tp) / static_cast<double>(counts.pos)});
  }
  return roc;
}

double auc(const ScoreSet& s) {
  const auto roc = roc_curve(s);
  double area = 0.0;
  for (std::size_t k = 1; k < roc.size(); ++k)
    area += (roc[k].fpr - roc[k - 1].fpr) * 0.5 * (roc[k].tpr + roc[k - 1].tpr);
  return area;
}

double partial_auc(const std::vector<RocPoint>& roc, double fpr_max) {
  if (!(fpr_max > 0.0)) throw std::invalid_argument("partial_auc: fpr_max must be > 0");
  fpr_max = std::min(fpr_max, 1.0);
  double area = 0.0;
  for (std::size_t k = 1; k < roc.size(); ++k) {
    const RocPoint& a = roc[k - 1];
    const RocPoint& b = roc[k];
    if (a.fpr >= fpr_max) break;
    if (b.fpr <= fpr_max) {
      area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
    } else {
      const double t = (fpr_max - a.fpr) / (b.fpr - a.fpr);
      const double tpr_cut = a.tpr + t * (b.tpr - a.tpr);
      area += (fpr_max - a.fpr) * 0.5 * (a.tpr + tpr_cut);
      break;
    }
  }
  return area / fpr_max;
}

double far_to_fpr(const ScoreSet& s, double far_cutoff, double area_per_sample) {
  if (!(far_cutoff > 0.0)) throw std::invalid_argument("nauc: far_cutoff must be > 0");
  if (!(area_per_sample > 0.0)) throw std::invalid_argument("nauc: area_per_sample must be > 0");
  const ClassCounts counts = class_counts(s);
  const double total_area = area_per_sample * static_cast<double>(s.entries.size());
  return std::min(1.0, far_cutoff * total_area / static_cast<double>(counts.neg));
}

double nauc(const ScoreSet& s, double far_cutoff, double area_per_sample) {
  const double fpr_max = far_to_fpr(s, far_cutoff, area_per_sample);
  if (!(fpr_max > 0.0)) throw std::invalid_argument("nauc: FPR bound must be > 0");
  return partial_auc(roc_curve(s), fpr_max);
}

double spectral_angle_deg(const VectorXd& a, const VectorXd& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI;
}

ExperimentData prepare_experiment(const SpectralLibrary& lib, const ExperimentConfig& cfg) {
  ExperimentData data;
  data.train = generate_dataset(lib, cfg.sim);
  SimConfig test = cfg.sim;
  test.seed = cfg.test_seed;
  data.test = generate_dataset(lib, test);
  return data;
}

RunResult run_experiment(const ExperimentData& data, const HyperParams& hp,
                         DetectorMethod method, double ridge) {
  RunResult res;
  res.report = train(data.train.dataset, hp);
  const ConceptDictionary& dict = res.report.final_dictionary;

  const BackgroundStats bg =
      fit_background(data.train.dataset.stacked(BagLabel::kNegative), ridge);
  DetectOptions opts;
  opts.method = method;
  opts.lambda = hp.lambda;
  opts.ista = ista_config(hp);
  opts.background = &bg;
  res.scores = detect(data.test.flat_instances(), dict, opts);
  res.scores.set_truth(data.test.flat_truth());
  res.auc = auc(res.scores);

  for (Index t = 0; t < data.train.num_targets; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < dict.num_targets(); ++k)
      best = std::min(best, spectral_angle_deg(dict.targets.col(k),
                                               data.train.endmember_spectra.col(t)));
    res.target_angles_deg.push_back(best);
  }
  return res;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t grid_index, std::uint64_t run) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ grid_index) ^ (run * 0xd1b54a32d192ed03ULL));
}

double lower_median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

void SweepSpec::validate() const {
  static const std::set<std::string> known{"M", "beta", "lambda", "b"};
  if (axes.empty()) throw std::invalid_argument("sweep spec: no parameters");
  if (runs_per_setting < 1) throw std::invalid_argument("sweep spec: runs_per_setting must be >= 1");
  for (const auto& axis : axes) {
    if (!known.count(axis.param))
      throw std::invalid_argument("sweep spec: unknown parameter '" + axis.param + "'");
    if (axis.values.empty())
      throw std::invalid_argument("sweep spec: no values for '" + axis.param + "'");
  }
}

SweepSpec default_sweep_spec() {
  SweepSpec spec;
  spec.axes = {
      {"M", {1, 2, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21}},
      {"beta", {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100}},
      {"lambda", {1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1}},
      {"b", {-10, -5, -2, -1, 1e-10, 1, 2, 5, 10, 20, 50, 100}},
  };
  return spec;
}

HyperParams with_param(HyperParams hp, const std::string& param, double value) {
  if (param == "M")
    hp.M = static_cast<int>(std::lround(value));
  else if (param == "beta")
    hp.beta = value;
  else if (param == "lambda")
    hp.lambda = value;
  else if (param == "b")
    hp.b = value;
  else
    throw std::invalid_argument("unknown sweep parameter '" + param + "'");
  return hp;
}

std::vector<SweepRow> run_sweep(const ExperimentData& data, const ExperimentConfig& base,
                                const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepRow> rows;
  if (spec.joint) {
    std::size_t total = 1;
    for (const auto& axis : spec.axes) total *= axis.values.size();
    // last axis varies fastest
    for (std::size_t g = 0; g < total; ++g) {
      SweepRow row;
      row.id = "grid";
      std::size_t rem = g;
      for (std::size_t a = spec.axes.size(); a-- > 0;) {
        const auto& vals = spec.axes[a].values;
        row.values.emplace_back(spec.axes[a].param, vals[rem % vals.size()]);
        rem /= vals.size();
      }
      std::reverse(row.values.begin(), row.values.end());
      rows.push_back(std::move(row));
    }
  } else {
    for (const auto& axis : spec.axes)
      for (double v : axis.values) {
        SweepRow row;
        row.id = axis.param;
        row.values.emplace_back(axis.param, v);
        rows.push_back(std::move(row));
      }
  }

  const int runs = spec.runs_per_setting;
  const int jobs = static_cast<int>(rows.size()) * runs;
  std::vector<double> results(static_cast<std::size_t>(jobs), std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(dynamic)
  for (int job = 0; job < jobs; ++job) {
    const std::size_t r = static_cast<std::size_t>(job / runs);
    const int run = job % runs;
    try {
      HyperParams hp = base.hp;
      for (const auto& [param, value] : rows[r].values) hp = with_param(hp, param, value);
      hp.seed = derive_seed(base.hp.seed, r, static_cast<std::uint64_t>(run));
      results[static_cast<std::size_t>(job)] = run_experiment(data, hp, base.method, base.ridge).auc;
    } catch (const std::exception& e) {
      warn(std::string("sweep run failed: ") + e.what());
    }
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    SweepRow& row = rows[r];
    for (int run = 0; run < runs; ++run) {
      const double v = results[r * static_cast<std::size_t>(runs) + static_cast<std::size_t>(run)];
      if (std::isnan(v))
        ++row.failed;
      else
        row.aucs.push_back(v);
    }
    row.median_auc = lower_median(row.aucs);
    if (row.aucs.empty()) {
      row.min_auc = row.max_auc = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.min_auc = *std::min_element(row.aucs.begin(), row.aucs.end());
      row.max_auc = *std::max_element(row.aucs.begin(), row.aucs.end());
    }
  }
  return rows;
}

}  // namespace mihe
