// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "slu/autograd.hpp"
#include "slu/layers.hpp"

namespace slu {

/// Additive scorer e = v . tanh(s W_s + h W_h). Tensors: `<name>.ws`
/// [query_dim x att_dim], `<name>.wh` [key_dim x att_dim], `<name>.v` [att_dim].
struct AttentionParams {
  std::string name;
  std::size_t query_dim = 0;
  std::size_t key_dim = 0;
  std::size_t att_dim = 0;

  static AttentionParams create(ParamStore& store, const std::string& name, std::size_t query_dim,
                                std::size_t key_dim, std::size_t att_dim, Rng& rng, double init_scale);
};

struct BoundAttention {
  Var ws, wh, v;
};

BoundAttention bind(ParamBinder& binder, const AttentionParams& params);

/// Encoder states an attention head reads from, with their key projections
/// computed once. `valid(r, j)` is 1 where state j exists for row r.
struct AttentionMemory {
  std::vector<Var> values;
  std::vector<Var> keys;
  Mat valid;

  std::size_t steps() const { return values.size(); }
};

AttentionMemory make_memory(Graph& g, const BoundAttention& att, std::span<const Var> values,
                            std::span<const int> lengths);
/// Appends one state to a memory whose rows are all valid.
void append_memory(Graph& g, const BoundAttention& att, AttentionMemory& memory, Var value);

/// One attention read: scores e [rows x T], weights alpha [rows x T], context c [rows x key_dim].
struct AttentionStep {
  Var scores;
  Var weights;
  Var context;
};

/// Scalar score of one (query, key) pair.
double score(const ConstMatMap& query, const ConstMatMap& state, const ConstMatMap& ws, const ConstMatMap& wh,
             const ConstMatMap& v);

/// alpha = softmax(e) over the valid states; c = sum_j alpha_j h_j.
/// `query` may be a single row shared by all memory rows.
AttentionStep attend(Graph& g, const BoundAttention& att, Var query, const AttentionMemory& memory);

/// Plain-value copy of the attention reads of one row, for inspection.
struct AttentionRecord {
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> contexts;

  std::size_t steps() const { return weights.size(); }
};

/// Extracts row `row` of each step, keeping the first `length` columns.
AttentionRecord record_row(const Graph& g, std::span<const AttentionStep> steps, std::size_t row, std::size_t length);

}  // namespace slu
