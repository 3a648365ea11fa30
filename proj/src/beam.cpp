// SPDX-License-Identifier: Apache-2.0
#include "slu/beam.hpp"

#include <algorithm>
#include <limits>

#include "slu/error.hpp"

namespace slu {

namespace {

struct Candidate {
  double score;
  int parent;
  int label;
};

constexpr double kDead = -std::numeric_limits<double>::infinity();

}  // namespace

BeamHypothesis beam_search(std::size_t steps, std::size_t width, int start_label, const BeamStepFn& step,
                           const BeamReorderFn& reorder) {
  if (width < 1) throw_error(ErrorKind::kConfig, "beam width must be at least 1");
  std::vector<double> scores(width, kDead);
  scores[0] = 0.0;
  std::vector<std::vector<int>> histories(width);
  std::vector<int> previous(width, start_label);

  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < steps; ++t) {
    Mat log_probs = step(t, previous);
    if (log_probs.rows() != static_cast<Eigen::Index>(width)) {
      throw_error(ErrorKind::kDimension, "beam step returned " + std::to_string(log_probs.rows()) + " rows for width " +
                                             std::to_string(width));
    }
    candidates.clear();
    for (std::size_t k = 0; k < width; ++k) {
      if (scores[k] == kDead) continue;
      for (Eigen::Index c = 0; c < log_probs.cols(); ++c) {
        candidates.push_back({scores[k] + log_probs(static_cast<Eigen::Index>(k), c), static_cast<int>(k),
                              static_cast<int>(c)});
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.label < b.label;
                      });

    std::vector<int> parents(width, 0);
    std::vector<double> next_scores(width, kDead);
    std::vector<std::vector<int>> next_histories(width);
    std::vector<int> next_previous(width, start_label);
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& cand = candidates[k];
      parents[k] = cand.parent;
      next_scores[k] = cand.score;
      next_histories[k] = histories[cand.parent];
      next_histories[k].push_back(cand.label);
      next_previous[k] = cand.label;
    }
    reorder(parents);
    scores = std::move(next_scores);
    histories = std::move(next_histories);
    previous = std::move(next_previous);
  }

  // Row 0 holds the best hypothesis after the final sort.
  return BeamHypothesis{histories[0], steps == 0 ? 0.0 : scores[0]};
}

}  // namespace slu
