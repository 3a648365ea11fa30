// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "slu/tensor.hpp"

namespace slu {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments keyed like the parameters they track.
struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::uint64_t t = 0;

  static AdamState for_params(const ParamStore& params);
};

double global_grad_norm(const ParamStore& params);

/// Rescales all gradients by max_norm / norm when the global norm exceeds
/// max_norm and returns the factor applied (1 otherwise). Throws kNumeric
/// naming the first parameter with a non-finite gradient.
double clip_gradients(ParamStore& params, double max_norm);

/// Bias-corrected Adam update, then zeroes the gradients.
void adam_step(ParamStore& params, AdamState& state, const AdamConfig& config);

}  // namespace slu
