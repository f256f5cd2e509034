#include "mihe/objective.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mihe {

namespace {

// Residuals and generalized-mean weights of one positive bag.
struct PositiveBagTerms {
  MatrixXd r;
  MatrixXd q;
  VectorXd r_sq;
  VectorXd q_sq;
  VectorXd weights;  // Lambda^b / sum Lambda^b; zero for skipped instances
  double log_sum = 0.0;  // ln sum_j Lambda^b, floored
  Index used = 0;
};

void check_codes(const BagDataset& ds, const ConceptDictionary& dict,
                 const CodeBook& codes, bool need_negative_a) {
  if (codes.size() != ds.bags.size())
    throw std::invalid_argument("code book does not match dataset bag count");
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const Bag& bag = ds.bags[i];
    const BagCodes& c = codes[i];
    if (c.p.rows() != dict.num_backgrounds() || c.p.cols() != bag.size())
      throw std::invalid_argument("background codes missing or mis-sized for bag " + bag.id);
    if (bag.positive() || need_negative_a) {
      if (c.a.rows() != dict.num_atoms() || c.a.cols() != bag.size())
        throw std::invalid_argument("full-dictionary codes missing or mis-sized for bag " + bag.id);
    }
  }
}

PositiveBagTerms positive_terms(const Bag& bag, const BagCodes& c,
                                const ConceptDictionary& dict,
                                const MatrixXd& full, const HyperParams& hp) {
  PositiveBagTerms t;
  t.r = bag.instances - full * c.a;
  t.q = bag.instances - dict.backgrounds * c.p;
  t.r_sq = t.r.colwise().squaredNorm().transpose();
  t.q_sq = t.q.colwise().squaredNorm().transpose();

  const Index n = bag.size();
  VectorXd exponent(n);  // b * ln Lambda
  double peak = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j) {
    if (t.q_sq[j] < kDegenerateResidual) {
      std::ostringstream msg;
      msg << "bag " << bag.id << " instance " << j
          << ": background residual is zero, skipped in generalized mean";
      warn(msg.str());
      exponent[j] = -std::numeric_limits<double>::infinity();
      continue;
    }
    exponent[j] = hp.b * (-hp.beta * t.r_sq[j] / t.q_sq[j]);
    peak = std::max(peak, exponent[j]);
    ++t.used;
  }
  t.weights = VectorXd::Zero(n);
  if (t.used == 0) {
    t.log_sum = std::log(kGmSumFloor);
    return t;
  }
  double sum = 0.0;
  for (Index j = 0; j < n; ++j) {
    if (!std::isfinite(exponent[j])) continue;
    t.weights[j] = std::exp(exponent[j] - peak);
    sum += t.weights[j];
  }
  t.weights /= sum;
  t.log_sum = std::max(peak + std::log(sum), std::log(kGmSumFloor));
  return t;
}

}  // namespace

SparseCodes instance_codes(const BagDataset& ds, const CodeBook& codes,
                           const ConceptDictionary& dict, Index i, Index j) {
  const BagCodes& c = codes.at(static_cast<std::size_t>(i));
  const auto x = ds.bags.at(static_cast<std::size_t>(i)).instance(j);
  VectorXd a = c.a.size() ? VectorXd(c.a.col(j)) : VectorXd::Zero(dict.num_atoms());
  return make_codes(x, dict, std::move(a), c.p.col(j));
}

double hybrid_statistic(const Eigen::Ref<const VectorXd>& x,
                        const ConceptDictionary& dict, const SparseCodes& codes,
                        double beta) {
  const double r_sq = (x - dict.full() * codes.a).squaredNorm();
  const double q_sq = (x - dict.backgrounds * codes.p).squaredNorm();
  if (q_sq < kDegenerateResidual)
    throw DegenerateBackgroundError(
        "hybrid statistic undefined: instance is exactly reconstructed by the background concepts");
  return std::exp(-beta * r_sq / q_sq);
}

double generalized_mean(std::span<const double> values, double b) {
  if (b == 0.0) throw std::invalid_argument("generalized_mean: b must be nonzero");
  if (values.empty()) throw std::invalid_argument("generalized_mean: empty input");
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("generalized_mean: values must be positive");
    peak = std::max(peak, b * std::log(v));
  }
  double sum = 0.0;
  for (double v : values) sum += std::exp(b * std::log(v) - peak);
  const double log_mean = peak + std::log(sum / static_cast<double>(values.size()));
  return std::exp(log_mean / b);
}

ObjectiveBreakdown evaluate_objective(const BagDataset& ds,
                                      const ConceptDictionary& dict,
                                      const HyperParams& hp,
                                      const CodeBook& codes) {
  const bool need_neg_a = hp.alpha_incoh != 0.0;
  check_codes(ds, dict, codes, need_neg_a);
  const MatrixXd full = dict.full();
  const Index T = dict.num_targets();

  ObjectiveBreakdown out;
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const Bag& bag = ds.bags[i];
    const BagCodes& c = codes[i];
    if (bag.positive()) {
      const PositiveBagTerms t = positive_terms(bag, c, dict, full, hp);
      if (t.used == 0) continue;
      out.gm_term -= (t.log_sum - std::log(static_cast<double>(bag.size()))) / hp.b;
    } else {
      if (hp.rho != 0.0)
        out.fidelity_term +=
            hp.rho * (bag.instances - dict.backgrounds * c.p).squaredNorm();
      if (need_neg_a) {
        const MatrixXd recon = dict.targets * c.a.topRows(T);
        const VectorXd proj =
            recon.cwiseProduct(bag.instances).colwise().sum().transpose();
        out.incoherence_term += 0.5 * hp.alpha_incoh * proj.squaredNorm();
      }
    }
  }
  out.total = out.gm_term + out.fidelity_term + out.incoherence_term;
  return out;
}

VectorXd grad_target_atom(Index t, const BagDataset& ds,
                          const ConceptDictionary& dict, const HyperParams& hp,
                          const CodeBook& codes) {
  const Index T = dict.num_targets();
  if (t < 0 || t >= T) throw std::out_of_range("grad_target_atom: bad target index");
  const bool need_neg_a = hp.alpha_incoh != 0.0;
  check_codes(ds, dict, codes, need_neg_a);
  const MatrixXd full = dict.full();

  VectorXd grad = VectorXd::Zero(dict.dim());
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const Bag& bag = ds.bags[i];
    const BagCodes& c = codes[i];
    if (bag.positive()) {
      const PositiveBagTerms pt = positive_terms(bag, c, dict, full, hp);
      if (pt.used == 0) continue;
      VectorXd coef = VectorXd::Zero(bag.size());
      for (Index j = 0; j < bag.size(); ++j) {
        if (pt.weights[j] == 0.0) continue;
        coef[j] = pt.weights[j] * 2.0 * hp.beta * c.a(t, j) / pt.q_sq[j];
      }
      grad.noalias() -= pt.r * coef;
    } else if (need_neg_a) {
      const MatrixXd recon = dict.targets * c.a.topRows(T);
      const VectorXd proj =
          recon.cwiseProduct(bag.instances).colwise().sum().transpose();
      const VectorXd coef = hp.alpha_incoh * proj.cwiseProduct(c.a.row(t).transpose());
      grad.noalias() += bag.instances * coef;
    }
  }
  return grad;
}

VectorXd grad_background_atom(Index k, const BagDataset& ds,
                              const ConceptDictionary& dict,
                              const HyperParams& hp, const CodeBook& codes) {
  const Index T = dict.num_targets();
  if (k < T || k >= dict.num_atoms())
    throw std::out_of_range("grad_background_atom: bad background index");
  check_codes(ds, dict, codes, hp.alpha_incoh != 0.0);
  const MatrixXd full = dict.full();
  const Index kb = k - T;

  VectorXd grad = VectorXd::Zero(dict.dim());
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    const Bag& bag = ds.bags[i];
    const BagCodes& c = codes[i];
    if (bag.positive()) {
      const PositiveBagTerms pt = positive_terms(bag, c, dict, full, hp);
      if (pt.used == 0) continue;
      VectorXd r_coef = VectorXd::Zero(bag.size());
      VectorXd q_coef = VectorXd::Zero(bag.size());
      for (Index j = 0; j < bag.size(); ++j) {
        if (pt.weights[j] == 0.0) continue;
        const double scale = pt.weights[j] * 2.0 * hp.beta;
        r_coef[j] = scale * c.a(k, j) / pt.q_sq[j];
        q_coef[j] = -scale * c.p(kb, j) * pt.r_sq[j] / (pt.q_sq[j] * pt.q_sq[j]);
      }
      grad.noalias() -= pt.r * r_coef;
      grad.noalias() -= pt.q * q_coef;
    } else if (hp.rho != 0.0) {
      const MatrixXd q = bag.instances - dict.backgrounds * c.p;
      grad.noalias() -= 2.0 * hp.rho * (q * c.p.row(kb).transpose());
    }
  }
  return grad;
}

}  // namespace mihe
