// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "slu/model.hpp"
#include "slu/trainer.hpp"

namespace slu {

/// Every setting a command can take. Config files hold `key = value` lines
/// with `#` comments; see `dump_config` for the keys and their defaults.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  /// Corpus directory (train.txt, dev.txt, test.txt) or a single corpus file.
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string grammar;
  /// train: also write the metrics lines to this file.
  std::string metrics_log;

  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::size_t n_test = 500;
  /// Share of train held out as dev when a data directory has no dev.txt.
  double dev_fraction = 0.1;
  std::size_t folds = 10;
  std::size_t index = 0;
  /// Checkpoint tensor precision: f32 or f64.
  Precision precision = Precision::kF64;
};

struct ConfigKey {
  std::string name;
  std::string doc;
  /// Stored in checkpoints.
  bool model = false;
};

const std::vector<ConfigKey>& config_keys();

/// Throws kConfig for unknown keys or malformed values.
void set_option(RunConfig& config, const std::string& key, const std::string& value);
std::string get_option(const RunConfig& config, const std::string& key);

/// Applies `key = value` lines; blank lines and `#` comments are skipped.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source = "<config>");
void apply_config_file(RunConfig& config, const std::string& path);

/// All keys with their current values, readable by `apply_config_text`.
std::string dump_config(const RunConfig& config);

/// Model keys only; this is what checkpoints store.
std::string model_config_text(const ModelConfig& config);
ModelConfig parse_model_config_text(const std::string& text, const std::string& source = "<config>");

}  // namespace slu
