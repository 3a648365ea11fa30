// SPDX-License-Identifier: Apache-2.0
#include "slu/slu.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <new>

#include "slu/config.hpp"
#include "slu/data.hpp"
#include "slu/error.hpp"
#include "slu/eval.hpp"
#include "slu/tagger.hpp"
#include "slu/trainer.hpp"

struct slu_config {
  slu::RunConfig run;
};

struct slu_corpus {
  std::vector<slu::Utterance> utterances;
};

struct slu_model {
  slu::Checkpoint checkpoint;
  slu::Tagger tagger;
  std::string source;
};

struct slu_report {
  slu::EvalReport report;
};

struct slu_prediction {
  slu::Prediction prediction;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
slu_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_message(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn) g_log_fn(message.c_str(), g_log_user);
}

slu_status status_of(slu::ErrorKind kind) {
  switch (kind) {
    case slu::ErrorKind::kConfig: return SLU_E_CONFIG;
    case slu::ErrorKind::kIo: return SLU_E_IO;
    case slu::ErrorKind::kParse: return SLU_E_PARSE;
    case slu::ErrorKind::kDimension: return SLU_E_DIMENSION;
    case slu::ErrorKind::kDomain: return SLU_E_DOMAIN;
    case slu::ErrorKind::kUnsupported: return SLU_E_UNSUPPORTED;
    case slu::ErrorKind::kVocabMismatch: return SLU_E_VOCAB;
    case slu::ErrorKind::kNumeric: return SLU_E_NUMERIC;
  }
  return SLU_E_INTERNAL;
}

template <typename F>
slu_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SLU_OK;
  } catch (const slu::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SLU_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SLU_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) slu::throw_error(slu::ErrorKind::kDomain, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<slu::Utterance> load_any(const std::string& path) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) return slu::load_corpus(path);
  std::vector<slu::Utterance> all;
  for (const char* name : {"train.txt", "dev.txt", "test.txt"}) {
    const fs::path p = fs::path(path) / name;
    if (!fs::exists(p)) continue;
    auto part = slu::load_corpus(p.string());
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (all.empty()) slu::throw_error(slu::ErrorKind::kIo, "data directory '" + path + "' has no corpus files");
  return all;
}

slu::DataSplits load_splits(const slu::RunConfig& run) {
  if (run.data.empty()) slu::throw_error(slu::ErrorKind::kConfig, "no training data given (set 'data')");
  if (std::filesystem::is_directory(run.data)) {
    return slu::load_data_dir(run.data, run.dev_fraction, run.train.seed);
  }
  slu::DataSplits s;
  s.train = slu::load_corpus(run.data);
  slu::hold_out_dev(s.train, s.dev, run.dev_fraction, run.train.seed);
  return s;
}

slu::TrainResult run_training(const slu::RunConfig& run, std::span<const slu::Utterance> train,
                              std::span<const slu::Utterance> dev, slu_metrics_fn on_metrics, void* user,
                              std::ofstream* log) {
  return slu::train(run.model, run.train, train, dev, [&](const slu::EpochMetrics& m) {
    const std::string line = slu::format_metrics(m);
    if (log) *log << line << '\n' << std::flush;
    if (on_metrics) on_metrics(line.c_str(), user);
  });
}

slu_model* make_model(slu::Checkpoint ckpt, std::string source) {
  slu::Tagger tagger = slu::Tagger::from_checkpoint(ckpt);
  return new slu_model{std::move(ckpt), std::move(tagger), std::move(source)};
}

void check_coverage(const slu_model* model, std::span<const slu::Utterance> corpus) {
  const auto& config = model->checkpoint.model;
  const auto coverage = slu::vocab_coverage(model->checkpoint.vocab, corpus, config.has_slots(), config.has_intent());
  if (coverage.unknown_labels.empty()) return;
  std::string names;
  for (std::size_t i = 0; i < coverage.unknown_labels.size() && i < 8; ++i) {
    names += (i ? ", " : "") + coverage.unknown_labels[i];
  }
  if (coverage.unknown_labels.size() > 8) names += ", ...";
  const std::string summary = std::to_string(coverage.unknown_labels.size()) + " of " +
                              std::to_string(coverage.distinct_labels) + " gold labels are unknown to checkpoint '" +
                              model->source + "' (" + names + ")";
  if (coverage.mismatched()) {
    slu::throw_error(slu::ErrorKind::kVocabMismatch,
                     "vocabulary mismatch: " + summary + "; the corpus does not match this checkpoint");
  }
  log_message("warning: " + summary + "; they are scored as errors");
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

extern "C" {

const char* slu_last_error(void) { return g_last_error.c_str(); }

const char* slu_status_name(slu_status status) {
  switch (status) {
    case SLU_OK: return "ok";
    case SLU_E_CONFIG: return "config error";
    case SLU_E_IO: return "i/o error";
    case SLU_E_PARSE: return "parse error";
    case SLU_E_DIMENSION: return "dimension error";
    case SLU_E_DOMAIN: return "domain error";
    case SLU_E_UNSUPPORTED: return "unsupported operation";
    case SLU_E_VOCAB: return "vocabulary mismatch";
    case SLU_E_NUMERIC: return "numeric error";
    case SLU_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* slu_version(void) { return "1.0.0"; }

void slu_set_log_handler(slu_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

void slu_string_free(char* s) { std::free(s); }

slu_status slu_config_new(slu_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new slu_config{};
  });
}

void slu_config_free(slu_config* config) { delete config; }

slu_status slu_config_set(slu_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    slu::set_option(config->run, key, value);
  });
}

slu_status slu_config_get(const slu_config* config, const char* key, char** out) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(out, "out");
    *out = dup_string(slu::get_option(config->run, key));
  });
}

slu_status slu_config_load_file(slu_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    slu::apply_config_file(config->run, path);
  });
}

slu_status slu_config_dump(const slu_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = dup_string(slu::dump_config(config->run));
  });
}

slu_status slu_config_validate(const slu_config* config) {
  return guarded([&] {
    require(config, "config");
    config->run.model.validate();
    config->run.train.validate();
  });
}

slu_status slu_corpus_load(const char* path, slu_corpus** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new slu_corpus{load_any(path)};
  });
}

slu_status slu_corpus_from_text(const char* text, slu_corpus** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new slu_corpus{slu::parse_corpus_text(text)};
  });
}

size_t slu_corpus_size(const slu_corpus* corpus) { return corpus ? corpus->utterances.size() : 0; }

slu_status slu_corpus_to_text(const slu_corpus* corpus, char** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(out, "out");
    *out = dup_string(slu::serialize_corpus(corpus->utterances));
  });
}

void slu_corpus_free(slu_corpus* corpus) { delete corpus; }

slu_status slu_generate_data(const slu_config* config) {
  return guarded([&] {
    require(config, "config");
    const auto& run = config->run;
    if (run.out.empty()) slu::throw_error(slu::ErrorKind::kConfig, "no output directory given (set 'out')");
    if (run.n_train < 1) slu::throw_error(slu::ErrorKind::kConfig, "n_train must be at least 1");
    const slu::SyntheticGrammar grammar =
        run.grammar.empty() ? slu::default_grammar() : slu::load_grammar(run.grammar);
    const auto all = slu::generate_synthetic(grammar, run.n_train + run.n_dev + run.n_test, run.train.seed);
    std::error_code ec;
    std::filesystem::create_directories(run.out, ec);
    if (ec) slu::throw_error(slu::ErrorKind::kIo, "cannot create directory '" + run.out + "': " + ec.message());
    const std::span<const slu::Utterance> span(all);
    const std::filesystem::path dir(run.out);
    slu::save_corpus((dir / "train.txt").string(), span.subspan(0, run.n_train));
    slu::save_corpus((dir / "dev.txt").string(), span.subspan(run.n_train, run.n_dev));
    slu::save_corpus((dir / "test.txt").string(), span.subspan(run.n_train + run.n_dev, run.n_test));
  });
}

slu_status slu_train(const slu_config* config, slu_metrics_fn on_metrics, void* user, slu_model** out_model) {
  return guarded([&] {
    require(config, "config");
    const auto& run = config->run;
    const slu::DataSplits splits = load_splits(run);
    std::optional<std::ofstream> log;
    if (!run.metrics_log.empty()) {
      log.emplace(run.metrics_log, std::ios::trunc);
      if (!*log) slu::throw_error(slu::ErrorKind::kIo, "cannot write metrics log '" + run.metrics_log + "'");
    }
    slu::TrainResult result = run_training(run, splits.train, splits.dev, on_metrics, user, log ? &*log : nullptr);
    log_message("best dev evaluation at epoch " + std::to_string(result.best_epoch) + " of " +
                std::to_string(result.epochs_run));
    if (!run.out.empty()) slu::save_checkpoint(run.out, result.best, run.precision);
    if (out_model) *out_model = make_model(std::move(result.best), run.out.empty() ? "<memory>" : run.out);
  });
}

slu_status slu_model_load(const char* path, slu_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = make_model(slu::load_checkpoint(path), path);
  });
}

slu_status slu_model_save(const slu_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    slu::save_checkpoint(path, model->checkpoint);
  });
}

void slu_model_free(slu_model* model) { delete model; }

int slu_model_has_slots(const slu_model* model) { return model && model->checkpoint.model.has_slots(); }
int slu_model_has_intent(const slu_model* model) { return model && model->checkpoint.model.has_intent(); }
int slu_model_has_attention(const slu_model* model) { return model && model->checkpoint.model.attention; }

slu_status slu_model_config(const slu_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = dup_string(slu::model_config_text(model->checkpoint.model));
  });
}

slu_status slu_model_evaluate(const slu_model* model, const slu_corpus* corpus, int beam_width, slu_report** out) {
  return guarded([&] {
    require(model, "model");
    require(corpus, "corpus");
    require(out, "out");
    check_coverage(model, corpus->utterances);
    *out = new slu_report{model->tagger.evaluate(corpus->utterances, beam_width)};
  });
}

void slu_report_free(slu_report* report) { delete report; }

double slu_report_slot_f1(const slu_report* report) {
  return report && report->report.slots ? report->report.slots->total.f1() : -1.0;
}

double slu_report_intent_error(const slu_report* report) {
  return report && report->report.intent_error ? *report->report.intent_error : -1.0;
}

slu_status slu_report_format(const slu_report* report, int key_values, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(key_values ? slu::format_key_values(report->report) : slu::format_table(report->report));
  });
}

slu_status slu_model_predict(const slu_model* model, const char* const* tokens, size_t n_tokens, int beam_width,
                             slu_prediction** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    if (n_tokens > 0) require(tokens, "tokens");
    std::vector<std::vector<std::string>> sentence(1);
    for (size_t i = 0; i < n_tokens; ++i) {
      require(tokens[i], "token");
      sentence[0].emplace_back(tokens[i]);
    }
    auto predictions = model->tagger.predict(sentence, beam_width);
    *out = new slu_prediction{std::move(predictions.front())};
  });
}

void slu_prediction_free(slu_prediction* prediction) { delete prediction; }

size_t slu_prediction_length(const slu_prediction* p) { return p ? p->prediction.tokens.size() : 0; }

const char* slu_prediction_slot(const slu_prediction* p, size_t i) {
  if (!p || i >= p->prediction.slots.size()) return nullptr;
  return p->prediction.slots[i].c_str();
}

const char* slu_prediction_intent(const slu_prediction* p) {
  return p && p->prediction.intent ? p->prediction.intent->c_str() : nullptr;
}

double slu_prediction_log_prob(const slu_prediction* p) { return p ? p->prediction.slot_log_prob : 0.0; }

slu_status slu_model_attention_csv(const slu_model* model, const slu_corpus* corpus, size_t index, const char* head,
                                   int beam_width, char** out) {
  return guarded([&] {
    require(model, "model");
    require(corpus, "corpus");
    require(head, "head");
    require(out, "out");
    const auto& config = model->checkpoint.model;
    const std::string which(head);
    if (which != "slot" && which != "intent") {
      slu::throw_error(slu::ErrorKind::kConfig, "attention head must be 'slot' or 'intent', got '" + which + "'");
    }
    if (!config.attention) {
      slu::throw_error(slu::ErrorKind::kUnsupported,
                       "checkpoint '" + model->source +
                           "' was trained without attention (the aligned-input encoder-decoder or the "
                           "mean-pooling BiRNN), so it has no attention weights to inspect");
    }
    if (which == "slot" && !config.has_slots()) {
      slu::throw_error(slu::ErrorKind::kUnsupported, "checkpoint '" + model->source + "' has no slot head");
    }
    if (which == "intent" && !config.has_intent()) {
      slu::throw_error(slu::ErrorKind::kUnsupported, "checkpoint '" + model->source + "' has no intent head");
    }
    if (index >= corpus->utterances.size()) {
      slu::throw_error(slu::ErrorKind::kDomain, "utterance index " + std::to_string(index) + " is out of range for " +
                                                    std::to_string(corpus->utterances.size()) + " utterances");
    }
    const std::vector<std::vector<std::string>> sentence{corpus->utterances[index].tokens};
    const slu::Prediction p = model->tagger.predict(sentence, beam_width).front();
    if (which == "slot") {
      *out = dup_string(slu::attention_csv(p.tokens, p.slots, p.slot_attention.weights));
    } else {
      const std::vector<std::string> label{*p.intent};
      *out = dup_string(slu::attention_csv(p.tokens, label, p.intent_attention.weights));
    }
  });
}

slu_status slu_crossval(const slu_config* config, slu_metrics_fn on_metrics, void* user, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    const auto& run = config->run;
    if (run.data.empty()) slu::throw_error(slu::ErrorKind::kConfig, "no corpus given (set 'data')");
    const auto corpus = load_any(run.data);
    const auto folds = slu::kfold_split(corpus.size(), run.folds, run.train.seed);

    std::vector<int> covered(corpus.size(), 0);
    for (const auto& f : folds) {
      for (auto i : f.test) ++covered[i];
    }
    for (int c : covered) {
      if (c != 1) slu::throw_error(slu::ErrorKind::kDomain, "cross-validation test folds do not partition the corpus");
    }

    std::string table = "fold\tslot_f1\tintent_error\n";
    double f1_sum = 0.0, err_sum = 0.0;
    bool has_f1 = false, has_err = false;
    for (std::size_t k = 0; k < folds.size(); ++k) {
      auto train = slu::select(corpus, folds[k].train);
      std::vector<slu::Utterance> dev;
      slu::hold_out_dev(train, dev, run.dev_fraction, slu::derive_seed(run.train.seed, k));
      log_message("fold " + std::to_string(k + 1) + " of " + std::to_string(folds.size()) + ": " +
                  std::to_string(train.size()) + " train, " + std::to_string(dev.size()) + " dev, " +
                  std::to_string(folds[k].test.size()) + " test");
      slu::TrainResult result = run_training(run, train, dev, on_metrics, user, nullptr);
      const slu::Tagger tagger = slu::Tagger::from_checkpoint(result.best);
      const auto test = slu::select(corpus, folds[k].test);
      const slu::EvalReport report = tagger.evaluate(test, run.model.beam_width);
      std::optional<double> f1;
      if (report.slots) f1 = report.slots->total.f1();
      if (f1) {
        f1_sum += *f1;
        has_f1 = true;
      }
      if (report.intent_error) {
        err_sum += *report.intent_error;
        has_err = true;
      }
      table += std::to_string(k + 1) + "\t" + fmt(f1) + "\t" + fmt(report.intent_error) + "\n";
    }
    const double n = static_cast<double>(folds.size());
    table += "mean\t" + fmt(has_f1 ? std::optional<double>(f1_sum / n) : std::nullopt) + "\t" +
             fmt(has_err ? std::optional<double>(err_sum / n) : std::nullopt) + "\n";
    *out = dup_string(table);
  });
}

}  // extern "C"
