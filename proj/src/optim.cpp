// SPDX-License-Identifier: Apache-2.0
#include "slu/optim.hpp"

#include <cmath>

#include "slu/error.hpp"

namespace slu {

AdamState AdamState::for_params(const ParamStore& params) {
  AdamState s;
  for (const auto& [name, p] : params) {
    s.m.emplace(name, Tensor(p.shape()));
    s.v.emplace(name, Tensor(p.shape()));
  }
  return s;
}

double global_grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(ParamStore& params, double max_norm) {
  if (!(max_norm > 0.0)) throw_error(ErrorKind::kConfig, "max_grad_norm must be positive");
  for (const auto& [name, p] : params) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw_error(ErrorKind::kNumeric, "non-finite gradient in parameter '" + name + "'");
    }
  }
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (auto& [name, p] : params) {
    for (double& g : p.grad()) g *= scale;
  }
  return scale;
}

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& c) {
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, p] : params) {
    auto mit = state.m.find(name);
    auto vit = state.v.find(name);
    if (mit == state.m.end() || vit == state.v.end() || mit->second.size() != p.size()) {
      throw_error(ErrorKind::kDimension, "optimizer state does not match parameter '" + name + "'");
    }
    auto value = p.data();
    auto grad = p.grad();
    auto m = mit->second.data();
    auto v = vit->second.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      value[i] -= c.lr * (m[i] / correct1) / (std::sqrt(v[i] / correct2) + c.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace slu
