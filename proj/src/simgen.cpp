#include "mihe/simgen.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "mihe/text.hpp"

namespace mihe {

Index SpectralLibrary::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return static_cast<Index>(k);
  throw Error("unknown endmember '" + name + "'");
}

SpectralLibrary read_library_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("spectral library: empty input");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "wavelength")
    throw Error("spectral library: header must be 'wavelength,<name>,...'");
  SpectralLibrary lib;
  for (std::size_t k = 1; k < header.size(); ++k) lib.names.emplace_back(header[k]);

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << "spectral library line " << lineno << ": expected " << header.size()
          << " fields, got " << fields.size();
      throw Error(msg.str());
    }
    std::vector<double> row;
    for (auto f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const std::invalid_argument& e) {
        throw Error("spectral library line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("spectral library: no bands");
  const Index bands = static_cast<Index>(rows.size());
  lib.wavelengths.resize(bands);
  lib.spectra.resize(bands, static_cast<Index>(lib.names.size()));
  for (Index b = 0; b < bands; ++b) {
    lib.wavelengths[b] = rows[static_cast<std::size_t>(b)][0];
    for (Index k = 0; k < lib.spectra.cols(); ++k)
      lib.spectra(b, k) = rows[static_cast<std::size_t>(b)][static_cast<std::size_t>(k) + 1];
  }
  return lib;
}

SpectralLibrary load_library_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open spectral library '" + path + "'");
  return read_library_csv(in);
}

void write_library_csv(std::ostream& out, const SpectralLibrary& lib) {
  out << "wavelength";
  for (const auto& n : lib.names) out << ',' << n;
  out << '\n';
  for (Index b = 0; b < lib.bands(); ++b) {
    out << format_double(lib.wavelengths[b]);
    for (Index k = 0; k < lib.spectra.cols(); ++k) out << ',' << format_double(lib.spectra(b, k));
    out << '\n';
  }
}

SpectralLibrary rock_fixture_library() {
  constexpr Index kBands = 211;
  SpectralLibrary lib;
  lib.wavelengths = VectorXd::LinSpaced(kBands, 0.4, 2.5);
  const auto& wl = lib.wavelengths.array();
  // Gaussian absorption/emission feature.
  auto band = [&](double center, double width, double depth) -> Eigen::ArrayXd {
    return depth * (-0.5 * ((wl - center) / width).square()).exp();
  };
  const Eigen::ArrayXd slope = wl - 0.4;

  lib.names = {"red_slate", "verde_antique", "phyllite", "pyroxenite", "quartz_conglomerate"};
  lib.spectra.resize(kBands, 5);
  // Ferric red edge with a 0.88 um absorption.
  lib.spectra.col(0) = 0.08 + 0.20 / (1.0 + (-(wl - 0.62) / 0.05).exp()) -
                       band(0.88, 0.12, 0.06) - band(2.21, 0.05, 0.03) + 0.02 * slope;
  // Serpentine: green peak, broad ferrous band, OH features.
  lib.spectra.col(1) = 0.10 + band(0.55, 0.06, 0.03) + 0.05 * slope - band(1.05, 0.2, 0.04) -
                       band(1.39, 0.03, 0.04) - band(2.32, 0.04, 0.05);
  lib.spectra.col(2) = 0.14 + 0.04 * slope - band(1.41, 0.03, 0.03) - band(1.91, 0.05, 0.04) -
                       band(2.20, 0.04, 0.04);
  // Pyroxene 1 and 2 um bands.
  lib.spectra.col(3) = 0.11 + 0.02 * slope - band(0.95, 0.12, 0.04) - band(2.0, 0.25, 0.04);
  lib.spectra.col(4) = 0.30 + 0.06 * slope - band(1.41, 0.03, 0.02) - band(1.92, 0.05, 0.03) -
                       band(2.2, 0.04, 0.02);
  return lib;
}

void SimConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("simulation config: " + m); };
  if (target_names.empty()) fail("at least one target endmember is required");
  if (background_names.empty()) fail("at least one background endmember is required");
  if (target_mean.size() != target_names.size())
    fail("target_mean needs one entry per target");
  double total = 0.0;
  for (double m : target_mean) {
    if (!(m > 0.0 && m < 1.0)) fail("target_mean entries must lie in (0, 1)");
    total += m;
  }
  if (!(total < 1.0)) fail("target_mean entries must sum to less than 1");
  if (!std::isfinite(snr_db)) fail("snr_db must be finite");
  if (bags_pos < 0 || bags_neg < 0) fail("bag counts must be nonnegative");
  if (pts_per_bag < 1) fail("pts_per_bag must be >= 1");
  if (target_pts_per_pos_bag < 0 || target_pts_per_pos_bag > pts_per_bag)
    fail("target_pts_per_pos_bag must lie in [0, pts_per_bag]");
  if (!(dirichlet_scale > 0.0)) fail("dirichlet_scale must be > 0");
  if (bag_background_subsets) {
    if (static_cast<int>(bag_background_subsets->size()) != bags_pos + bags_neg)
      fail("bag_background_subsets needs one entry per bag");
    const std::set<std::string> known(background_names.begin(), background_names.end());
    for (const auto& subset : *bag_background_subsets) {
      if (subset.empty()) fail("every bag needs at least one background endmember");
      for (const auto& name : subset)
        if (!known.count(name))
          fail("bag background '" + name + "' is not listed in background_names");
    }
  }
}

VectorXd sample_dirichlet(std::mt19937_64& rng, const VectorXd& alpha) {
  VectorXd out(alpha.size());
  double sum = 0.0;
  for (Index k = 0; k < alpha.size(); ++k) {
    std::gamma_distribution<double> gamma(alpha[k], 1.0);
    out[k] = gamma(rng);
    sum += out[k];
  }
  if (!(sum > 0.0)) {
    // Every gamma draw underflowed; fall back to the mean.
    return alpha / alpha.sum();
  }
  return out / sum;
}

VectorXd sample_proportions(std::mt19937_64& rng, int k, double mean_target,
                            double scale) {
  if (k < 2) throw std::invalid_argument("sample_proportions: k must be >= 2");
  if (!(mean_target > 0.0 && mean_target < 1.0))
    throw std::invalid_argument("sample_proportions: mean_target must lie in (0, 1)");
  VectorXd alpha = VectorXd::Constant(k, scale * (1.0 - mean_target) / (k - 1));
  alpha[0] = scale * mean_target;
  return sample_dirichlet(rng, alpha);
}

MatrixXd add_noise_to_snr(const MatrixXd& clean, double snr_db, std::mt19937_64& rng) {
  const double power = clean.squaredNorm() / static_cast<double>(clean.size());
  if (!(power > 0.0)) throw std::invalid_argument("add_noise_to_snr: clean signal is zero");
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> noise(0.0, sigma);
  MatrixXd out = clean;
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i) out(i, j) += noise(rng);
  return out;
}

double realized_snr_db(const MatrixXd& clean, const MatrixXd& noisy) {
  return 10.0 * std::log10(clean.squaredNorm() / (noisy - clean).squaredNorm());
}

std::vector<bool> SimulatedData::flat_truth() const {
  std::vector<bool> out;
  for (const auto& t : truth) out.insert(out.end(), t.is_target.begin(), t.is_target.end());
  return out;
}

MatrixXd SimulatedData::flat_instances() const {
  const BagCounts c = dataset.counts();
  MatrixXd out(dataset.dim(), c.total());
  Index col = 0;
  for (const auto& bag : dataset.bags) {
    out.middleCols(col, bag.size()) = bag.instances;
    col += bag.size();
  }
  return out;
}

SimulatedData generate_dataset(const SpectralLibrary& lib, const SimConfig& cfg) {
  cfg.validate();
  SimulatedData sim;
  const std::size_t n_targets = cfg.target_names.size();
  for (const auto& n : cfg.target_names) sim.endmembers.push_back(n);
  sim.num_targets = static_cast<Index>(n_targets);
  for (const auto& n : cfg.background_names) sim.endmembers.push_back(n);
  sim.endmember_spectra.resize(lib.bands(), static_cast<Index>(sim.endmembers.size()));
  for (std::size_t k = 0; k < sim.endmembers.size(); ++k)
    sim.endmember_spectra.col(static_cast<Index>(k)) = lib.spectrum(sim.endmembers[k]);

  auto background_index = [&](const std::string& name) {
    for (std::size_t k = 0; k < cfg.background_names.size(); ++k)
      if (cfg.background_names[k] == name) return static_cast<Index>(n_targets + k);
    throw Error("unknown endmember '" + name + "'");
  };

  std::mt19937_64 rng(cfg.seed);
  const int total_bags = cfg.bags_pos + cfg.bags_neg;
  const double target_total =
      std::accumulate(cfg.target_mean.begin(), cfg.target_mean.end(), 0.0);

  for (int b = 0; b < total_bags; ++b) {
    const bool positive = b < cfg.bags_pos;
    std::vector<Index> bg;
    if (cfg.bag_background_subsets) {
      for (const auto& name : (*cfg.bag_background_subsets)[static_cast<std::size_t>(b)])
        bg.push_back(background_index(name));
    } else {
      for (const auto& name : cfg.background_names) bg.push_back(background_index(name));
    }

    BagTruth truth;
    const Index n = cfg.pts_per_bag;
    truth.proportions = MatrixXd::Zero(static_cast<Index>(sim.endmembers.size()), n);
    truth.is_target.assign(static_cast<std::size_t>(n), false);
    for (Index j = 0; j < n; ++j) {
      if (positive && j < cfg.target_pts_per_pos_bag) {
        std::vector<Index> mix = bg;
        if (cfg.random_background_subset && bg.size() > 1) {
          std::bernoulli_distribution coin(0.5);
          do {
            mix.clear();
            for (Index k : bg)
              if (coin(rng)) mix.push_back(k);
          } while (mix.empty());
        }
        VectorXd alpha(static_cast<Index>(n_targets + mix.size()));
        for (std::size_t t = 0; t < n_targets; ++t)
          alpha[static_cast<Index>(t)] = cfg.dirichlet_scale * cfg.target_mean[t];
        for (std::size_t k = 0; k < mix.size(); ++k)
          alpha[static_cast<Index>(n_targets + k)] =
              cfg.dirichlet_scale * (1.0 - target_total) / static_cast<double>(mix.size());
        const VectorXd p = sample_dirichlet(rng, alpha);
        for (std::size_t t = 0; t < n_targets; ++t)
          truth.proportions(static_cast<Index>(t), j) = p[static_cast<Index>(t)];
        for (std::size_t k = 0; k < mix.size(); ++k)
          truth.proportions(mix[k], j) = p[static_cast<Index>(n_targets + k)];
        truth.is_target[static_cast<std::size_t>(j)] = true;
      } else if (bg.size() == 1) {
        truth.proportions(bg[0], j) = 1.0;
      } else {
        const VectorXd p = sample_dirichlet(rng, VectorXd::Ones(static_cast<Index>(bg.size())));
        for (std::size_t k = 0; k < bg.size(); ++k) truth.proportions(bg[k], j) = p[static_cast<Index>(k)];
      }
    }
    truth.clean = sim.endmember_spectra * truth.proportions;

    Bag bag;
    std::ostringstream id;
    id << "bag_" << std::setw(3) << std::setfill('0') << (b + 1);
    bag.id = id.str();
    bag.label = positive ? BagLabel::kPositive : BagLabel::kNegative;
    sim.dataset.bags.push_back(std::move(bag));
    sim.truth.push_back(std::move(truth));
  }

  // Noise is added once over the assembled scene so the SNR is global.
  MatrixXd clean(lib.bands(), static_cast<Index>(total_bags) * cfg.pts_per_bag);
  Index col = 0;
  for (const auto& t : sim.truth) {
    clean.middleCols(col, t.clean.cols()) = t.clean;
    col += t.clean.cols();
  }
  const MatrixXd noisy = clean.size() ? add_noise_to_snr(clean, cfg.snr_db, rng) : clean;
  col = 0;
  for (auto& bag : sim.dataset.bags) {
    bag.instances = noisy.middleCols(col, cfg.pts_per_bag);
    col += cfg.pts_per_bag;
  }
  return sim;
}

namespace presets {

SimConfig incomplete_background(double target_mean, int pts_per_bag, int target_pts,
                                std::uint64_t seed) {
  SimConfig cfg;
  cfg.target_names = {"red_slate"};
  cfg.background_names = {"verde_antique", "phyllite", "pyroxenite"};
  cfg.bags_pos = 15;
  cfg.bags_neg = 5;
  cfg.pts_per_bag = pts_per_bag;
  cfg.target_pts_per_pos_bag = target_pts;
  cfg.target_mean = {target_mean};
  cfg.snr_db = 20.0;
  std::vector<std::vector<std::string>> subsets;
  for (int b = 0; b < 5; ++b) subsets.push_back({"verde_antique", "phyllite", "pyroxenite"});
  for (int b = 0; b < 5; ++b) subsets.push_back({"phyllite", "pyroxenite"});
  for (int b = 0; b < 5; ++b) subsets.push_back({"pyroxenite"});
  for (int b = 0; b < 5; ++b) subsets.push_back({"phyllite", "pyroxenite"});
  cfg.bag_background_subsets = subsets;
  cfg.seed = seed;
  return cfg;
}

SimConfig multi_target(double mean1, double mean2, int pts_per_bag, int target_pts,
                       std::uint64_t seed) {
  SimConfig cfg;
  cfg.target_names = {"red_slate", "quartz_conglomerate"};
  cfg.background_names = {"verde_antique", "phyllite", "pyroxenite"};
  cfg.bags_pos = 5;
  cfg.bags_neg = 5;
  cfg.pts_per_bag = pts_per_bag;
  cfg.target_pts_per_pos_bag = target_pts;
  cfg.target_mean = {mean1, mean2};
  cfg.snr_db = 20.0;
  cfg.seed = seed;
  return cfg;
}

SimConfig parameter_study(int pts_per_bag, int target_pts, double target_mean,
                          std::uint64_t seed) {
  SimConfig cfg;
  cfg.target_names = {"red_slate"};
  cfg.background_names = {"verde_antique", "phyllite", "pyroxenite"};
  cfg.bags_pos = 5;
  cfg.bags_neg = 5;
  cfg.pts_per_bag = pts_per_bag;
  cfg.target_pts_per_pos_bag = target_pts;
  cfg.target_mean = {target_mean};
  cfg.snr_db = 20.0;
  cfg.random_background_subset = true;
  cfg.seed = seed;
  return cfg;
}

}  // namespace presets

}  // namespace mihe
