// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "slu/tensor.hpp"

namespace slu {

struct BeamHypothesis {
  std::vector<int> labels;
  double log_prob = 0.0;
};

/// Returns [width x classes] log-probabilities of the next label for each
/// beam row, given the label each row emitted last.
using BeamStepFn = std::function<Mat(std::size_t step, std::span<const int> previous)>;
/// Row k of the decoder state must become old row parents[k].
using BeamReorderFn = std::function<void(std::span<const int> parents)>;

/// Fixed-length beam search over `steps` labels. The decoder state always
/// has `width` rows; rows that hold no live hypothesis are ignored. Ties are
/// broken towards the lower (parent row, label) pair, so width 1 is greedy
/// argmax decoding.
BeamHypothesis beam_search(std::size_t steps, std::size_t width, int start_label, const BeamStepFn& step,
                           const BeamReorderFn& reorder);

}  // namespace slu
