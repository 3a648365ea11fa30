// SPDX-License-Identifier: Apache-2.0
#include "slu/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "slu/error.hpp"

namespace slu {

namespace {

double evaluate(ParamStore& params, const LossBuilder& loss, const std::string& where) {
  Graph g(false);
  Var out = loss(g, params);
  const double v = g.value(out)(0, 0);
  if (!std::isfinite(v)) throw_error(ErrorKind::kNumeric, "grad_check: non-finite loss " + where);
  return v;
}

}  // namespace

GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& options) {
  params.zero_grad();
  {
    Graph g(true);
    Var out = loss(g, params);
    if (!std::isfinite(g.value(out)(0, 0))) {
      throw_error(ErrorKind::kNumeric, "grad_check: non-finite loss at the unperturbed point");
    }
    g.backward(out);
  }

  GradCheckReport report;
  for (auto& [name, tensor] : params) {
    ParamGradError entry;
    entry.name = name;
    auto data = tensor.data();
    auto grad = tensor.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      std::ostringstream where;
      where << "perturbing " << name << "[" << i << "]";
      data[i] = saved + options.epsilon;
      const double up = evaluate(params, loss, where.str());
      data[i] = saved - options.epsilon;
      const double down = evaluate(params, loss, where.str());
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      if (i == 0 || rel > entry.max_relative_error) {
        entry.max_relative_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.params.push_back(std::move(entry));
  }
  params.zero_grad();
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace slu
