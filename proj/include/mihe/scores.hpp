#ifndef MIHE_SCORES_HPP
#define MIHE_SCORES_HPP

#include <optional>
#include <string>
#include <vector>

namespace mihe {

struct ScoreEntry {
  std::string id;
  double score = 0.0;
  std::optional<bool> truth;
};

/// Per-instance detection scores, optionally with ground truth.
struct ScoreSet {
  std::vector<ScoreEntry> entries;

  /// Attaches labels in entry order; sizes must match.
  void set_truth(const std::vector<bool>& truth);
};

}  // namespace mihe

#endif  // MIHE_SCORES_HPP
