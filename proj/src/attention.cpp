// SPDX-License-Identifier: Apache-2.0
#include "slu/attention.hpp"

#include <cmath>

#include "slu/error.hpp"

namespace slu {

AttentionParams AttentionParams::create(ParamStore& store, const std::string& name, std::size_t query_dim,
                                        std::size_t key_dim, std::size_t att_dim, Rng& rng, double init_scale) {
  if (att_dim < 1) throw_error(ErrorKind::kConfig, "attention dimension must be at least 1");
  init_uniform(store.add(name + ".ws", {query_dim, att_dim}), rng, init_scale);
  init_uniform(store.add(name + ".wh", {key_dim, att_dim}), rng, init_scale);
  init_uniform(store.add(name + ".v", {att_dim}), rng, init_scale);
  return AttentionParams{name, query_dim, key_dim, att_dim};
}

BoundAttention bind(ParamBinder& binder, const AttentionParams& params) {
  return BoundAttention{binder(params.name + ".ws"), binder(params.name + ".wh"), binder(params.name + ".v")};
}

AttentionMemory make_memory(Graph& g, const BoundAttention& att, std::span<const Var> values,
                            std::span<const int> lengths) {
  AttentionMemory memory;
  memory.values.assign(values.begin(), values.end());
  memory.keys.reserve(values.size());
  for (Var v : values) memory.keys.push_back(matmul(g, v, att.wh));
  memory.valid = Mat::Zero(static_cast<Eigen::Index>(lengths.size()), static_cast<Eigen::Index>(values.size()));
  for (std::size_t r = 0; r < lengths.size(); ++r) {
    for (std::size_t j = 0; j < values.size() && static_cast<int>(j) < lengths[r]; ++j) {
      memory.valid(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = 1.0;
    }
  }
  return memory;
}

void append_memory(Graph& g, const BoundAttention& att, AttentionMemory& memory, Var value) {
  memory.values.push_back(value);
  memory.keys.push_back(matmul(g, value, att.wh));
  Mat grown = Mat::Ones(g.rows(value), static_cast<Eigen::Index>(memory.values.size()));
  if (memory.valid.size() > 0) grown.leftCols(memory.valid.cols()) = memory.valid;
  memory.valid = std::move(grown);
}

double score(const ConstMatMap& query, const ConstMatMap& state, const ConstMatMap& ws, const ConstMatMap& wh,
             const ConstMatMap& v) {
  if (query.cols() != ws.rows() || state.cols() != wh.rows() || ws.cols() != wh.cols() || v.cols() != ws.cols()) {
    throw_error(ErrorKind::kDimension, "attention score: dimension mismatch");
  }
  Mat pre = query * ws + state * wh;
  return (pre.array().tanh().matrix() * v.transpose())(0, 0);
}

AttentionStep attend(Graph& g, const BoundAttention& att, Var query, const AttentionMemory& memory) {
  if (memory.steps() == 0) throw_error(ErrorKind::kDomain, "attend: empty memory");
  Var projected = matmul(g, query, att.ws);
  AttentionStep step;
  step.scores = additive_scores(g, projected, memory.keys, att.v);
  step.weights = softmax(g, step.scores, &memory.valid);
  step.context = weighted_sum(g, step.weights, memory.values);
  return step;
}

AttentionRecord record_row(const Graph& g, std::span<const AttentionStep> steps, std::size_t row, std::size_t length) {
  AttentionRecord rec;
  for (const auto& s : steps) {
    auto e = g.value(s.scores);
    auto a = g.value(s.weights);
    auto c = g.value(s.context);
    const auto r = static_cast<Eigen::Index>(row);
    const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(length), a.cols());
    std::vector<double> er(static_cast<std::size_t>(length), 0.0);
    std::vector<double> ar(static_cast<std::size_t>(length), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      er[j] = e(r, j);
      ar[j] = a(r, j);
    }
    rec.scores.push_back(std::move(er));
    rec.weights.push_back(std::move(ar));
    rec.contexts.emplace_back(c.row(r).begin(), c.row(r).end());
  }
  return rec;
}

}  // namespace slu
