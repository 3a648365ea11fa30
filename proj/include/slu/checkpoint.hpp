// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "slu/data.hpp"
#include "slu/model.hpp"
#include "slu/optim.hpp"

namespace slu {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  Vocabularies vocab;
  ParamStore params;
  AdamState adam;
  /// Optimizer steps taken; equals adam.t.
  std::uint64_t step = 0;
};

/// Byte layout is described in docs/checkpoint-format.md.
std::string serialize_checkpoint(const Checkpoint& ckpt, Precision precision = Precision::kF64);
Checkpoint parse_checkpoint(std::string_view bytes, const std::string& source = "<checkpoint>");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt, Precision precision = Precision::kF64);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace slu
