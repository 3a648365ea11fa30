// SPDX-License-Identifier: Apache-2.0
#include "slu/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "slu/error.hpp"
#include "slu/tagger.hpp"

namespace slu {

void TrainConfig::validate() const {
  if (batch_size < 1) throw_error(ErrorKind::kConfig, "batch_size must be at least 1");
  if (!(max_grad_norm > 0.0)) throw_error(ErrorKind::kConfig, "max_grad_norm must be positive");
  if (!(adam.lr > 0.0)) throw_error(ErrorKind::kConfig, "lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw_error(ErrorKind::kConfig, "beta1 must be in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw_error(ErrorKind::kConfig, "beta2 must be in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw_error(ErrorKind::kConfig, "epsilon must be positive");
  if (epochs < 1) throw_error(ErrorKind::kConfig, "epochs must be at least 1");
  if (eval_every < 1) throw_error(ErrorKind::kConfig, "eval_every must be at least 1");
  if (patience < 1) throw_error(ErrorKind::kConfig, "patience must be at least 1");
  if (min_count < 1) throw_error(ErrorKind::kConfig, "min_count must be at least 1");
}

std::string format_metrics(const EpochMetrics& m) {
  char buf[160];
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", *v);
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%s\t%s", m.epoch, m.train_loss, opt(m.dev_f1).c_str(),
                opt(m.dev_intent_error).c_str());
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, std::span<const Utterance> train_set,
                  std::span<const Utterance> dev_set, const MetricsCallback& on_eval) {
  model_config.validate();
  config.validate();
  if (train_set.empty()) throw_error(ErrorKind::kDomain, "training corpus is empty");
  if (dev_set.empty()) throw_error(ErrorKind::kDomain, "dev corpus is empty");

  Vocabularies vocab = build_vocab(train_set, config.min_count);
  Rng init_rng(derive_seed(config.seed, 0));
  Rng order_rng(derive_seed(config.seed, 1));
  Rng dropout_rng(derive_seed(config.seed, 2));

  JointModel model(model_config, vocab.dims(), init_rng);
  AdamState adam = AdamState::for_params(model.params());
  const std::vector<EncodedUtterance> encoded = encode_corpus(train_set, vocab);

  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const bool by_intent = !model_config.has_slots();
  TrainResult result;
  // Higher is better; joint models break slot F1 ties on intent error.
  std::optional<std::pair<double, double>> best_score;
  std::size_t stale = 0;
  ForwardOptions options{Mode::kTrain, &dropout_rng};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Batch batch = make_batch(encoded, std::span<const std::size_t>(order).subspan(start, end - start));
      Graph g(true);
      const ModelOutput out = model.forward(g, batch, options);
      const Var loss = model.loss(g, out, batch);
      const double value = g.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw_error(ErrorKind::kNumeric, "training loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += value * static_cast<double>(batch.rows());
      g.backward(loss);
      clip_gradients(model.params(), config.max_grad_norm);
      adam_step(model.params(), adam, config.adam);
    }
    result.epochs_run = epoch;

    if (epoch % config.eval_every != 0 && epoch != config.epochs) continue;
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(encoded.size());
    const Tagger tagger(model, vocab);
    const EvalReport report = tagger.evaluate(dev_set, model_config.beam_width);
    if (report.slots) m.dev_f1 = report.slots->total.f1();
    m.dev_intent_error = report.intent_error;
    result.log.push_back(m);
    if (on_eval) on_eval(m);

    const std::pair<double, double> score =
        by_intent ? std::pair(-*m.dev_intent_error, 0.0)
                  : std::pair(*m.dev_f1, m.dev_intent_error ? -*m.dev_intent_error : 0.0);
    if (!best_score || score > *best_score) {
      best_score = score;
      stale = 0;
      result.best_epoch = epoch;
      result.best.model = model_config;
      result.best.vocab = vocab;
      result.best.params = model.params();
      result.best.adam = adam;
      result.best.step = adam.t;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace slu
