// SPDX-License-Identifier: Apache-2.0
#include "slu/encoder.hpp"

#include <algorithm>

#include "slu/error.hpp"

namespace slu {

std::vector<double> TokenBatch::valid_at(std::size_t t) const {
  std::vector<double> out(lengths.size());
  for (std::size_t r = 0; r < lengths.size(); ++r) out[r] = static_cast<int>(t) < lengths[r] ? 1.0 : 0.0;
  return out;
}

bool TokenBatch::ragged() const {
  return std::any_of(lengths.begin(), lengths.end(), [&](int len) { return static_cast<std::size_t>(len) != steps.size(); });
}

std::vector<Var> run_backward_lstm(Graph& g, const BoundLstm& lstm, std::span<const Var> inputs, const TokenBatch& batch) {
  const std::size_t steps = inputs.size();
  std::vector<Var> out(steps);
  LstmState state = lstm_zero_state(g, batch.rows(), lstm.hidden);
  const bool ragged = batch.ragged();
  for (std::size_t k = steps; k-- > 0;) {
    LstmState next = lstm_step(g, lstm, inputs[k], state);
    if (ragged) {
      auto keep = batch.valid_at(k);
      next.h = blend_rows(g, next.h, state.h, keep);
      next.c = blend_rows(g, next.c, state.c, keep);
    }
    state = next;
    out[k] = state.h;
  }
  return out;
}

std::vector<Var> run_forward_lstm(Graph& g, const BoundLstm& lstm, std::span<const Var> inputs, const TokenBatch& batch) {
  std::vector<Var> out(inputs.size());
  LstmState state = lstm_zero_state(g, batch.rows(), lstm.hidden);
  const bool ragged = batch.ragged();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    LstmState next = lstm_step(g, lstm, inputs[k], state);
    if (ragged) {
      auto keep = batch.valid_at(k);
      next.h = blend_rows(g, next.h, state.h, keep);
      next.c = blend_rows(g, next.c, state.c, keep);
    }
    state = next;
    out[k] = state.h;
  }
  return out;
}

std::vector<Var> embed_steps(Graph& g, Var table, const TokenBatch& batch, Dropout& dropout) {
  std::vector<Var> out;
  out.reserve(batch.max_len());
  for (const auto& ids : batch.steps) out.push_back(dropout.apply(g, embed(g, table, ids), "embedding"));
  return out;
}

EncoderStates encode(Graph& g, ParamBinder& binder, const EncoderParams& params, const TokenBatch& batch,
                     Dropout& dropout) {
  if (batch.max_len() == 0 || batch.rows() == 0) throw_error(ErrorKind::kDomain, "encode: empty sequence");
  Var table = binder(params.embedding.name);
  auto inputs = embed_steps(g, table, batch, dropout);
  BoundLstm fw = bind(binder, params.forward);
  BoundLstm bw = bind(binder, params.backward);

  EncoderStates out;
  out.backward = run_backward_lstm(g, bw, inputs, batch);
  out.forward = run_forward_lstm(g, fw, inputs, batch);
  out.states.reserve(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) out.states.push_back(concat(g, {out.forward[k], out.backward[k]}));
  out.final_forward = out.forward.back();
  out.final_backward = out.backward.front();
  return out;
}

LstmState initial_decoder_state(Graph& g, ParamBinder& binder, const DenseParams& projection,
                                const EncoderStates& states) {
  Var s0 = feed_forward(g, binder, projection, states.final_backward, Activation::kTanh);
  Var c0 = g.constant(Mat::Zero(g.rows(s0), g.cols(s0)));
  return {s0, c0};
}

}  // namespace slu
