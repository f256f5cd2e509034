#include "mihe/model.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>

namespace mihe {

namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler() {
  static WarningHandler h = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return h;
}

}  // namespace

void set_warning_handler(WarningHandler h) {
  std::lock_guard lock(handler_mutex());
  handler() = std::move(h);
}

void warn(std::string_view message) {
  std::lock_guard lock(handler_mutex());
  if (handler()) handler()(message);
}

BagCounts BagDataset::counts() const {
  BagCounts c;
  for (const auto& bag : bags) {
    if (bag.positive()) {
      ++c.positive_bags;
      c.positive_instances += bag.size();
    } else {
      ++c.negative_bags;
      c.negative_instances += bag.size();
    }
  }
  return c;
}

MatrixXd BagDataset::stacked(BagLabel label) const {
  Index n = 0;
  for (const auto& bag : bags)
    if (bag.label == label) n += bag.size();
  MatrixXd out(dim(), n);
  Index col = 0;
  for (const auto& bag : bags) {
    if (bag.label != label) continue;
    out.middleCols(col, bag.size()) = bag.instances;
    col += bag.size();
  }
  return out;
}

std::vector<DatasetViolation> validate_dataset(const BagDataset& ds) {
  std::vector<DatasetViolation> out;
  const Index d = ds.dim();
  if (d == 0 && !ds.bags.empty())
    out.push_back({ds.bags.front().id, "instance dimensionality is zero"});
  for (const auto& bag : ds.bags) {
    if (bag.size() < 1) {
      out.push_back({bag.id, "bag has no instances"});
      continue;
    }
    if (bag.dim() != d) {
      std::ostringstream msg;
      msg << "dimension mismatch: expected " << d << ", got " << bag.dim();
      out.push_back({bag.id, msg.str()});
      continue;
    }
    if (!bag.instances.allFinite())
      out.push_back({bag.id, "non-finite instance value"});
  }
  const BagCounts c = ds.counts();
  if (c.positive_bags == 0) out.push_back({"", "no positive bags"});
  if (c.negative_bags == 0) out.push_back({"", "no negative bags"});
  return out;
}

MatrixXd ConceptDictionary::full() const {
  MatrixXd d(dim(), num_atoms());
  d << targets, backgrounds;
  return d;
}

VectorXd ConceptDictionary::atom(Index k) const {
  if (k < 0 || k >= num_atoms()) throw std::out_of_range("atom index out of range");
  return k < num_targets() ? targets.col(k)
                           : backgrounds.col(k - num_targets());
}

void ConceptDictionary::set_atom(Index k, const VectorXd& value) {
  if (k < 0 || k >= num_atoms()) throw std::out_of_range("atom index out of range");
  if (value.size() != dim()) throw std::invalid_argument("atom has the wrong dimension");
  if (k < num_targets())
    targets.col(k) = value;
  else
    backgrounds.col(k - num_targets()) = value;
}

double ConceptDictionary::max_norm_deviation() const {
  double worst = 0.0;
  for (Index k = 0; k < targets.cols(); ++k)
    worst = std::max(worst, std::abs(targets.col(k).norm() - 1.0));
  for (Index k = 0; k < backgrounds.cols(); ++k)
    worst = std::max(worst, std::abs(backgrounds.col(k).norm() - 1.0));
  return worst;
}

void normalize_columns(MatrixXd& m) {
  for (Index k = 0; k < m.cols(); ++k) {
    const double n = m.col(k).norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw Error("cannot normalize a zero or non-finite column");
    m.col(k) /= n;
  }
}

void HyperParams::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid hyperparameters: " + what);
  };
  if (T < 1) fail("T must be >= 1");
  if (M < 1) fail("M must be >= 1");
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(rho >= 0.0)) fail("rho must be >= 0");
  if (!(alpha_incoh >= 0.0)) fail("alpha_incoh must be >= 0");
  if (b == 0.0 || !std::isfinite(b)) fail("b must be finite and nonzero");
  if (max_outer_iters < 0) fail("max_outer_iters must be >= 0");
  if (!(change_tolerance >= 0.0)) fail("change_tolerance must be >= 0");
  if (ista_iters < 1) fail("ista_iters must be >= 1");
  if (!(ista_tolerance >= 0.0)) fail("ista_tolerance must be >= 0");
  if (!(armijo.initial_step > 0.0)) fail("armijo.initial_step must be > 0");
  if (!(armijo.shrink_factor > 0.0 && armijo.shrink_factor < 1.0))
    fail("armijo.shrink_factor must be in (0, 1)");
  if (!(armijo.sufficient_decrease_c >= 0.0))
    fail("armijo.sufficient_decrease_c must be >= 0");
  if (armijo.max_backtracks < 1) fail("armijo.max_backtracks must be >= 1");
  if (rho >= 1.0) warn("rho >= 1: negative bags dominate the objective");
}

SparseCodes make_codes(const Eigen::Ref<const VectorXd>& x,
                       const ConceptDictionary& dict, VectorXd a, VectorXd p) {
  SparseCodes c;
  c.r = x - dict.full() * a;
  c.q = x - dict.backgrounds * p;
  c.a = std::move(a);
  c.p = std::move(p);
  return c;
}

}  // namespace mihe
