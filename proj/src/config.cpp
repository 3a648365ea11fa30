// SPDX-License-Identifier: Apache-2.0
#include "slu/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "slu/error.hpp"

namespace slu {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw_error(ErrorKind::kConfig, "invalid value '" + value + "' for '" + key + "': expected " + expected);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) bad_value(key, s, "a number");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    bad_value(key, s, "a non-negative integer");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, s, "true or false");
}

struct Field {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

Field size_field(const char* name, const char* doc, bool model, std::size_t RunConfig::*member) {
  return {{name, doc, model},
          [member](const RunConfig& c) { return std::to_string(c.*member); },
          [member, name](RunConfig& c, const std::string& v) { c.*member = parse_u64(name, v); }};
}

template <typename Get, typename Set>
Field field(const char* name, const char* doc, bool model, Get get, Set set) {
  return {{name, doc, model}, get, set};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(field(
        "arch", "encdec or birnn", true, [](const RunConfig& c) { return to_string(c.model.architecture); },
        [](RunConfig& c, const std::string& v) { c.model.architecture = parse_architecture(v); }));
    f.push_back(field(
        "aligned", "encdec: feed encoder state i to decoder step i", true,
        [](const RunConfig& c) { return std::string(c.model.aligned_inputs ? "true" : "false"); },
        [](RunConfig& c, const std::string& v) { c.model.aligned_inputs = parse_bool("aligned", v); }));
    f.push_back(field(
        "attention", "attend over encoder states", true,
        [](const RunConfig& c) { return std::string(c.model.attention ? "true" : "false"); },
        [](RunConfig& c, const std::string& v) { c.model.attention = parse_bool("attention", v); }));
    f.push_back(field(
        "task", "slot, intent or joint", true, [](const RunConfig& c) { return to_string(c.model.task); },
        [](RunConfig& c, const std::string& v) { c.model.task = parse_task(v); }));
    auto model_size = [&](const char* name, const char* doc, std::size_t ModelConfig::*member) {
      f.push_back(field(
          name, doc, true, [member](const RunConfig& c) { return std::to_string(c.model.*member); },
          [member, name](RunConfig& c, const std::string& v) { c.model.*member = parse_u64(name, v); }));
    };
    auto model_real = [&](const char* name, const char* doc, double ModelConfig::*member) {
      f.push_back(field(
          name, doc, true, [member](const RunConfig& c) { return fmt_double(c.model.*member); },
          [member, name](RunConfig& c, const std::string& v) { c.model.*member = parse_double(name, v); }));
    };
    model_size("hidden", "LSTM units per direction", &ModelConfig::hidden);
    model_size("embedding_dim", "word embedding size", &ModelConfig::embedding_dim);
    model_size("label_embedding_dim", "previous-label embedding size", &ModelConfig::label_embedding_dim);
    model_size("att_dim", "attention scorer size", &ModelConfig::att_dim);
    model_real("dropout_keep", "keep probability of dropout (1 disables it)", &ModelConfig::dropout_keep);
    f.push_back(field(
        "beam", "beam width for slot decoding (1 is greedy)", true,
        [](const RunConfig& c) { return std::to_string(c.model.beam_width); },
        [](RunConfig& c, const std::string& v) {
          const auto w = parse_u64("beam", v);
          if (w < 1 || w > 1024) bad_value("beam", v, "an integer in [1, 1024]");
          c.model.beam_width = static_cast<int>(w);
        }));
    model_real("slot_weight", "weight of the slot loss", &ModelConfig::slot_weight);
    model_real("intent_weight", "weight of the intent loss", &ModelConfig::intent_weight);
    model_real("init_scale", "parameters start uniform in [-s, s]", &ModelConfig::init_scale);

    auto train_size = [&](const char* name, const char* doc, std::size_t TrainConfig::*member) {
      f.push_back(field(
          name, doc, false, [member](const RunConfig& c) { return std::to_string(c.train.*member); },
          [member, name](RunConfig& c, const std::string& v) { c.train.*member = parse_u64(name, v); }));
    };
    auto adam_real = [&](const char* name, const char* doc, double AdamConfig::*member) {
      f.push_back(field(
          name, doc, false, [member](const RunConfig& c) { return fmt_double(c.train.adam.*member); },
          [member, name](RunConfig& c, const std::string& v) { c.train.adam.*member = parse_double(name, v); }));
    };
    train_size("batch_size", "utterances per update", &TrainConfig::batch_size);
    f.push_back(field(
        "max_grad_norm", "global gradient norm limit", false,
        [](const RunConfig& c) { return fmt_double(c.train.max_grad_norm); },
        [](RunConfig& c, const std::string& v) { c.train.max_grad_norm = parse_double("max_grad_norm", v); }));
    adam_real("lr", "Adam learning rate", &AdamConfig::lr);
    adam_real("beta1", "Adam first-moment decay", &AdamConfig::beta1);
    adam_real("beta2", "Adam second-moment decay", &AdamConfig::beta2);
    adam_real("epsilon", "Adam denominator offset", &AdamConfig::epsilon);
    train_size("epochs", "maximum training epochs", &TrainConfig::epochs);
    f.push_back(field(
        "seed", "seed for initialization, shuffling, dropout and data generation", false,
        [](const RunConfig& c) { return std::to_string(c.train.seed); },
        [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("seed", v); }));
    train_size("eval_every", "epochs between dev evaluations", &TrainConfig::eval_every);
    train_size("patience", "evaluations without improvement before stopping", &TrainConfig::patience);
    train_size("min_count", "rarer training tokens map to <unk>", &TrainConfig::min_count);

    auto path = [&](const char* name, const char* doc, std::string RunConfig::*member) {
      f.push_back(field(
          name, doc, false, [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& v) { c.*member = v; }));
    };
    path("data", "corpus directory or file", &RunConfig::data);
    path("checkpoint", "checkpoint to read", &RunConfig::checkpoint);
    path("out", "output path (directory for gen-data, file otherwise)", &RunConfig::out);
    path("grammar", "grammar file for gen-data (empty: built-in)", &RunConfig::grammar);
    path("metrics_log", "train: file that receives the metrics lines", &RunConfig::metrics_log);
    f.push_back(size_field("n_train", "gen-data: training utterances", false, &RunConfig::n_train));
    f.push_back(size_field("n_dev", "gen-data: dev utterances", false, &RunConfig::n_dev));
    f.push_back(size_field("n_test", "gen-data: test utterances", false, &RunConfig::n_test));
    f.push_back(field(
        "dev_fraction", "share of train held out when there is no dev.txt", false,
        [](const RunConfig& c) { return fmt_double(c.dev_fraction); },
        [](RunConfig& c, const std::string& v) {
          const double d = parse_double("dev_fraction", v);
          if (!(d > 0.0 && d < 1.0)) bad_value("dev_fraction", v, "a number in (0, 1)");
          c.dev_fraction = d;
        }));
    f.push_back(size_field("folds", "xval: number of folds", false, &RunConfig::folds));
    f.push_back(size_field("index", "inspect-attention: utterance index", false, &RunConfig::index));
    f.push_back(field(
        "precision", "checkpoint tensor precision: f32 or f64", false,
        [](const RunConfig& c) { return std::string(c.precision == Precision::kF32 ? "f32" : "f64"); },
        [](RunConfig& c, const std::string& v) {
          if (v == "f32") {
            c.precision = Precision::kF32;
          } else if (v == "f64") {
            c.precision = Precision::kF64;
          } else {
            bad_value("precision", v, "f32 or f64");
          }
        }));
    return f;
  }();
  return table;
}

const Field& find_field(const std::string& key) {
  std::string k = key;
  for (char& ch : k) {
    if (ch == '-') ch = '_';
  }
  for (const auto& f : fields()) {
    if (f.key.name == k) return f;
  }
  throw_error(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_option(RunConfig& config, const std::string& key, const std::string& value) {
  find_field(key).set(config, value);
}

std::string get_option(const RunConfig& config, const std::string& key) { return find_field(key).get(config); }

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw_error(ErrorKind::kConfig, source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      set_option(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw_error(ErrorKind::kConfig, source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::kIo, "cannot open config file '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_config_text(config, text, path);
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key.name + " = " + f.get(config) + "  # " + f.key.doc + "\n";
  return out;
}

std::string model_config_text(const ModelConfig& config) {
  RunConfig run;
  run.model = config;
  std::string out;
  for (const auto& f : fields()) {
    if (f.key.model) out += f.key.name + " = " + f.get(run) + "\n";
  }
  return out;
}

ModelConfig parse_model_config_text(const std::string& text, const std::string& source) {
  RunConfig run;
  apply_config_text(run, text, source);
  const RunConfig defaults;
  for (const auto& f : fields()) {
    if (!f.key.model && f.get(run) != f.get(defaults)) {
      throw_error(ErrorKind::kConfig, source + ": '" + f.key.name + "' is not a model setting");
    }
  }
  run.model.validate();
  return run.model;
}

}  // namespace slu
