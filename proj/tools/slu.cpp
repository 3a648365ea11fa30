// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the engine only through slu.h.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slu/slu.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CliError {
  int code;
  std::string message;
};

void check(slu_status status) {
  if (status == SLU_OK) return;
  throw CliError{status == SLU_E_CONFIG ? kExitUsage : kExitRuntime, slu_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  slu_string_free(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<slu_config, Deleter<slu_config, slu_config_free>>;
using Corpus = std::unique_ptr<slu_corpus, Deleter<slu_corpus, slu_corpus_free>>;
using Model = std::unique_ptr<slu_model, Deleter<slu_model, slu_model_free>>;
using Report = std::unique_ptr<slu_report, Deleter<slu_report, slu_report_free>>;
using Prediction = std::unique_ptr<slu_prediction, Deleter<slu_prediction, slu_prediction_free>>;

/// Flags shared by a subcommand; each maps onto one config key.
struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  bool print_config = false;
  std::map<std::string, std::optional<std::string>> values;

  void flag(const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option(flag, values[key], help);
  }

  Config resolve() {
    slu_config* raw = nullptr;
    check(slu_config_new(&raw));
    Config config(raw);
    if (!config_file.empty()) check(slu_config_load_file(config.get(), config_file.c_str()));
    for (const auto& [key, value] : values) {
      if (value) check(slu_config_set(config.get(), key.c_str(), value->c_str()));
    }
    return config;
  }
};

Command& add_command(std::vector<std::unique_ptr<Command>>& all, CLI::App& root, const std::string& name,
                     const std::string& help) {
  auto cmd = std::make_unique<Command>();
  cmd->app = root.add_subcommand(name, help);
  cmd->app->add_option("--config", cmd->config_file, "config file of `key = value` lines");
  cmd->app->add_flag("--print-config", cmd->print_config, "print the resolved configuration and exit");
  all.push_back(std::move(cmd));
  return *all.back();
}

void add_model_flags(Command& c) {
  c.flag("--arch", "arch", "encdec or birnn");
  c.flag("--aligned", "aligned", "encdec: feed aligned encoder states (true/false)");
  c.flag("--attention", "attention", "use attention (true/false)");
  c.flag("--task", "task", "slot, intent or joint");
  c.flag("--hidden", "hidden", "LSTM units per direction");
  c.flag("--embedding-dim", "embedding_dim", "word embedding size");
  c.flag("--label-embedding-dim", "label_embedding_dim", "previous-label embedding size");
  c.flag("--att-dim", "att_dim", "attention scorer size");
  c.flag("--dropout-keep", "dropout_keep", "dropout keep probability");
  c.flag("--slot-weight", "slot_weight", "slot loss weight");
  c.flag("--intent-weight", "intent_weight", "intent loss weight");
  c.flag("--init-scale", "init_scale", "uniform initialization range");
  c.flag("--beam", "beam", "beam width used for dev evaluation");
}

void add_train_flags(Command& c) {
  c.flag("--epochs", "epochs", "maximum epochs");
  c.flag("--seed", "seed", "random seed");
  c.flag("--batch-size", "batch_size", "utterances per update");
  c.flag("--max-grad-norm", "max_grad_norm", "gradient clipping norm");
  c.flag("--lr", "lr", "Adam learning rate");
  c.flag("--beta1", "beta1", "Adam beta1");
  c.flag("--beta2", "beta2", "Adam beta2");
  c.flag("--epsilon", "epsilon", "Adam epsilon");
  c.flag("--eval-every", "eval_every", "epochs between dev evaluations");
  c.flag("--patience", "patience", "evaluations without improvement before stopping");
  c.flag("--min-count", "min_count", "minimum token count for the vocabulary");
  c.flag("--dev-fraction", "dev_fraction", "share of train held out as dev when none is given");
}

std::string get(const Config& config, const char* key) {
  char* out = nullptr;
  check(slu_config_get(config.get(), key, &out));
  return take(out);
}

int parse_int(const std::string& s) { return std::stoi(s); }

void print_stderr(const char* message, void*) { std::fprintf(stderr, "%s\n", message); }

void print_stdout(const char* line, void*) {
  std::fprintf(stdout, "%s\n", line);
  std::fflush(stdout);
}

Model load_model(const std::string& path) {
  if (path.empty()) throw CliError{kExitUsage, "no checkpoint given (--ckpt)"};
  slu_model* raw = nullptr;
  check(slu_model_load(path.c_str(), &raw));
  return Model(raw);
}

Corpus load_corpus(const std::string& path) {
  if (path.empty()) throw CliError{kExitUsage, "no corpus given (--data)"};
  slu_corpus* raw = nullptr;
  check(slu_corpus_load(path.c_str(), &raw));
  return Corpus(raw);
}

int cmd_gen_data(const Config& config) {
  check(slu_generate_data(config.get()));
  std::fprintf(stderr, "wrote train.txt, dev.txt and test.txt to %s\n", get(config, "out").c_str());
  return 0;
}

int cmd_train(const Config& config) {
  check(slu_config_validate(config.get()));
  if (get(config, "out").empty()) std::fprintf(stderr, "warning: no --out given; the checkpoint is discarded\n");
  std::fprintf(stdout, "epoch\ttrain_loss\tdev_f1\tdev_intent_err\n");
  check(slu_train(config.get(), print_stdout, nullptr, nullptr));
  return 0;
}

int cmd_eval(const Config& config, const std::string& format) {
  Model model = load_model(get(config, "checkpoint"));
  Corpus corpus = load_corpus(get(config, "data"));
  slu_report* raw = nullptr;
  check(slu_model_evaluate(model.get(), corpus.get(), parse_int(get(config, "beam")), &raw));
  Report report(raw);
  char* text = nullptr;
  check(slu_report_format(report.get(), format == "table" ? 0 : 1, &text));
  std::fputs(take(text).c_str(), stdout);
  return 0;
}

void emit_prediction(const slu_model* model, const std::vector<std::string>& tokens, int beam) {
  std::vector<const char*> ptrs;
  for (const auto& t : tokens) ptrs.push_back(t.c_str());
  slu_prediction* raw = nullptr;
  check(slu_model_predict(model, ptrs.data(), ptrs.size(), beam, &raw));
  Prediction p(raw);
  const char* intent = slu_prediction_intent(p.get());
  std::string out = std::string("intent: ") + (intent ? intent : "n/a") + "\n";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const char* slot = slu_prediction_slot(p.get(), i);
    out += tokens[i] + "\t" + (slot ? slot : "O") + "\n";
  }
  std::fputs(out.c_str(), stdout);
}

int cmd_predict(const Config& config) {
  Model model = load_model(get(config, "checkpoint"));
  const int beam = parse_int(get(config, "beam"));
  std::vector<std::string> block;
  std::size_t line_number = 0, emitted = 0, empty_blocks = 0;

  auto flush = [&]() {
    if (emitted++) std::fputs("\n", stdout);
    emit_prediction(model.get(), block, beam);
    block.clear();
  };

  // A blank line ends a block; each further blank line before the next token
  // is an empty block.
  std::string line;
  while (std::getline(std::cin, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (block.empty()) {
        ++empty_blocks;
      } else {
        flush();
      }
      continue;
    }
    if (empty_blocks) {
      std::fprintf(stderr, "warning: skipping %zu empty block(s) before line %zu\n", empty_blocks, line_number);
      empty_blocks = 0;
    }
    // Corpus files can be fed directly: intent lines and gold labels are ignored.
    if (block.empty() && line.rfind("intent:", 0) == 0) continue;
    block.push_back(line.substr(0, line.find_first_of(" \t")));
  }
  if (!block.empty()) flush();
  return 0;
}

int cmd_xval(const Config& config) {
  check(slu_config_validate(config.get()));
  char* table = nullptr;
  check(slu_crossval(config.get(), print_stderr, nullptr, &table));
  std::fputs(take(table).c_str(), stdout);
  return 0;
}

int cmd_inspect(const Config& config, std::string head) {
  Model model = load_model(get(config, "checkpoint"));
  Corpus corpus = load_corpus(get(config, "data"));
  if (head.empty()) head = slu_model_has_slots(model.get()) ? "slot" : "intent";
  char* csv = nullptr;
  check(slu_model_attention_csv(model.get(), corpus.get(), std::stoul(get(config, "index")), head.c_str(),
                                parse_int(get(config, "beam")), &csv));
  const std::string text = take(csv);
  const std::string out = get(config, "out");
  if (out.empty() || out == "-") {
    std::fputs(text.c_str(), stdout);
    return 0;
  }
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file || !(file << text)) throw CliError{kExitRuntime, "cannot write '" + out + "'"};
  std::fprintf(stderr, "wrote %s attention of utterance %s to %s\n", head.c_str(), get(config, "index").c_str(),
               out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint intent detection and slot filling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", slu_version());
  std::vector<std::unique_ptr<Command>> commands;

  Command& gen = add_command(commands, app, "gen-data", "write a synthetic train/dev/test corpus");
  gen.flag("--out", "out", "output directory");
  gen.flag("--n-train", "n_train", "training utterances");
  gen.flag("--n-dev", "n_dev", "dev utterances");
  gen.flag("--n-test", "n_test", "test utterances");
  gen.flag("--seed", "seed", "random seed");
  gen.flag("--grammar", "grammar", "grammar file (default: built-in)");

  Command& train = add_command(commands, app, "train", "train a model and write the best checkpoint");
  train.flag("--data", "data", "corpus directory (train.txt, dev.txt) or training file");
  train.flag("--out", "out", "checkpoint to write");
  train.flag("--metrics-log", "metrics_log", "also write the metrics lines to this file");
  train.flag("--precision", "precision", "checkpoint precision: f32 or f64");
  add_model_flags(train);
  add_train_flags(train);

  std::string format = "kv";
  Command& eval = add_command(commands, app, "eval", "score a checkpoint on a corpus");
  eval.flag("--ckpt", "checkpoint", "checkpoint to evaluate");
  eval.flag("--data", "data", "corpus file or directory");
  eval.flag("--beam", "beam", "beam width (1 is greedy)");
  eval.app->add_option("--format", format, "kv (key=value lines) or table")->check(CLI::IsMember({"kv", "table"}));

  Command& predict = add_command(commands, app, "predict", "tag utterances read from stdin, one token per line");
  predict.flag("--ckpt", "checkpoint", "checkpoint to use");
  predict.flag("--beam", "beam", "beam width (1 is greedy)");

  Command& xval = add_command(commands, app, "xval", "k-fold cross-validation");
  xval.flag("--data", "data", "corpus file or directory");
  xval.flag("--k", "folds", "number of folds");
  add_model_flags(xval);
  add_train_flags(xval);

  std::string head;
  Command& inspect = add_command(commands, app, "inspect-attention", "write the attention weights of one utterance");
  inspect.flag("--ckpt", "checkpoint", "checkpoint to use");
  inspect.flag("--data", "data", "corpus file or directory");
  inspect.flag("--index", "index", "0-based utterance index");
  inspect.flag("--out", "out", "CSV file to write (default: stdout)");
  inspect.flag("--beam", "beam", "beam width (1 is greedy)");
  inspect.app->add_option("--head", head, "slot or intent (default: slot when the model tags slots)")
      ->check(CLI::IsMember({"slot", "intent"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  slu_set_log_handler(print_stderr, nullptr);
  try {
    for (auto& cmd : commands) {
      if (!cmd->app->parsed()) continue;
      Config config = cmd->resolve();
      if (cmd->print_config) {
        char* text = nullptr;
        check(slu_config_dump(config.get(), &text));
        std::fputs(take(text).c_str(), stdout);
        return 0;
      }
      const std::string name = cmd->app->get_name();
      if (name == "gen-data") return cmd_gen_data(config);
      if (name == "train") return cmd_train(config);
      if (name == "eval") return cmd_eval(config, format);
      if (name == "predict") return cmd_predict(config);
      if (name == "xval") return cmd_xval(config);
      if (name == "inspect-attention") return cmd_inspect(config, head);
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "slu: %s: %s\n", e.code == kExitUsage ? "usage error" : "error", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "slu: error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
