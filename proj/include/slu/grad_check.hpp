// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slu/autograd.hpp"
#include "slu/tensor.hpp"

namespace slu {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Smallest denominator of the relative error. Gradients below it are
  /// compared absolutely, since differences of that size are rounding noise.
  double floor = 1e-8;
};

struct ParamGradError {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Builds a scalar loss over `params` on the graph it is handed. It must be
/// deterministic: it is evaluated once with recording and twice per scalar
/// parameter without.
using LossBuilder = std::function<Var(Graph&, ParamStore&)>;

/// Compares analytic gradients against central differences
/// (f(x + eps) - f(x - eps)) / 2eps for every scalar of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, floor). Throws
/// ErrorKind::kNumeric when the loss is not finite.
GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& options = {});

}  // namespace slu
