// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slu/checkpoint.hpp"
#include "slu/data.hpp"
#include "slu/model.hpp"
#include "slu/optim.hpp"

namespace slu {

struct TrainConfig {
  std::size_t batch_size = 16;
  double max_grad_norm = 5.0;
  AdamConfig adam;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  /// Evaluate on dev every this many epochs (and after the last one).
  std::size_t eval_every = 1;
  /// Stop after this many evaluations without improvement.
  std::size_t patience = 10;
  /// Tokens seen fewer times in training map to <unk>.
  std::size_t min_count = 1;

  /// Throws kConfig.
  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  /// Mean per-utterance training loss over the epoch, dropout included.
  double train_loss = 0.0;
  std::optional<double> dev_f1;
  std::optional<double> dev_intent_error;
};

/// `epoch\ttrain_loss\tdev_f1\tdev_intent_err`, with `n/a` for absent heads.
std::string format_metrics(const EpochMetrics& m);

struct TrainResult {
  /// Snapshot taken at the best dev evaluation.
  Checkpoint best;
  std::vector<EpochMetrics> log;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

using MetricsCallback = std::function<void(const EpochMetrics&)>;

/// Derives an independent stream seed from a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Builds vocabularies from `train`, initializes a model and trains it with
/// Adam and global-norm clipping. The best checkpoint is chosen by dev slot
/// F1 (ties broken by dev intent error), or by dev intent error for
/// intent-only models.
TrainResult train(const ModelConfig& model_config, const TrainConfig& config, std::span<const Utterance> train_set,
                  std::span<const Utterance> dev_set, const MetricsCallback& on_eval = {});

}  // namespace slu
