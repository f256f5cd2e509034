#ifndef MIHE_TEST_HELPERS_HPP
#define MIHE_TEST_HELPERS_HPP

#include <random>
#include <string>
#include <vector>

#include "mihe/model.hpp"

namespace testutil {

using mihe::Index;
using mihe::MatrixXd;
using mihe::VectorXd;

inline MatrixXd uniform(std::mt19937_64& rng, Index rows, Index cols, double lo = 0.0,
                        double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  return MatrixXd::NullaryExpr(rows, cols, [&] { return u(rng); });
}

inline MatrixXd gaussian(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> n;
  return MatrixXd::NullaryExpr(rows, cols, [&] { return n(rng); });
}

inline mihe::Bag make_bag(std::string id, bool positive, MatrixXd instances) {
  mihe::Bag b;
  b.id = std::move(id);
  b.label = positive ? mihe::BagLabel::kPositive : mihe::BagLabel::kNegative;
  b.instances = std::move(instances);
  return b;
}

/// Small random problem: alternating positive/negative bags, unit atoms.
struct Toy {
  mihe::BagDataset ds;
  mihe::ConceptDictionary dict;
};

inline Toy make_toy(std::uint64_t seed, int d, int T, int M, int bags, int per_bag) {
  std::mt19937_64 rng(seed);
  Toy t;
  for (int i = 0; i < bags; ++i)
    t.ds.bags.push_back(make_bag("b" + std::to_string(i), i % 2 == 0, uniform(rng, d, per_bag, 0.05, 1.0)));
  t.dict.targets = uniform(rng, d, T, 0.05, 1.0);
  t.dict.backgrounds = uniform(rng, d, M, 0.05, 1.0);
  mihe::normalize_columns(t.dict.targets);
  mihe::normalize_columns(t.dict.backgrounds);
  return t;
}

/// Captures warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningCapture() {
    mihe::set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { mihe::set_warning_handler(nullptr); }
};

}  // namespace testutil

#endif
