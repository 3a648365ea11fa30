// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "slu/autograd.hpp"
#include "slu/layers.hpp"

namespace slu {

/// Step-major token ids for a batch: `steps[t][r]` is the id of row r at
/// position t. Rows shorter than the batch are padded; `lengths[r]` is the
/// real length of row r.
struct TokenBatch {
  std::vector<std::vector<int>> steps;
  std::vector<int> lengths;

  std::size_t rows() const { return lengths.size(); }
  std::size_t max_len() const { return steps.size(); }
  /// 1.0 where position t is inside row r.
  std::vector<double> valid_at(std::size_t t) const;
  bool ragged() const;
};

/// Bidirectional encoder output. states[i] = [forward[i] ; backward[i]],
/// each [rows x 2H].
struct EncoderStates {
  std::vector<Var> states;
  std::vector<Var> forward;
  std::vector<Var> backward;
  /// Forward state at each row's last real position.
  Var final_forward;
  /// Backward state after reading the whole row right to left (position 0).
  Var final_backward;
};

struct EncoderParams {
  EmbeddingTable embedding;
  LstmParams forward;
  LstmParams backward;
};

/// Runs an LSTM right to left over `inputs`. Rows keep a zero state until
/// their first real token, so padding never leaks into real positions.
std::vector<Var> run_backward_lstm(Graph& g, const BoundLstm& lstm, std::span<const Var> inputs, const TokenBatch& batch);

/// Runs an LSTM left to right. Past a row's end its state is held, so the
/// last output equals the state at the final real token.
std::vector<Var> run_forward_lstm(Graph& g, const BoundLstm& lstm, std::span<const Var> inputs, const TokenBatch& batch);

/// Embeds every step (with dropout on the embeddings) and runs both
/// directions. Empty batches raise kDomain.
EncoderStates encode(Graph& g, ParamBinder& binder, const EncoderParams& params, const TokenBatch& batch,
                     Dropout& dropout);

/// Embedded (and dropped-out) inputs for each step.
std::vector<Var> embed_steps(Graph& g, Var table, const TokenBatch& batch, Dropout& dropout);

/// s_0 = tanh(final_backward W + b); the decoder cell starts at zero.
LstmState initial_decoder_state(Graph& g, ParamBinder& binder, const DenseParams& projection,
                                const EncoderStates& states);

}  // namespace slu
