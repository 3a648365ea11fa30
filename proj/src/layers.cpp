// SPDX-License-Identifier: Apache-2.0
#include "slu/layers.hpp"

#include <algorithm>

#include "slu/error.hpp"

namespace slu {

Var ParamBinder::operator()(const std::string& name) {
  if (mutable_) return graph_.param(mutable_->at(name));
  return graph_.param(store_.at(name));
}

void init_uniform(Tensor& t, Rng& rng, double scale) {
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
}

LstmParams LstmParams::create(ParamStore& store, const std::string& name, std::size_t input_dim, std::size_t hidden,
                              Rng& rng, double init_scale) {
  LstmParams p{name, input_dim, hidden};
  init_uniform(store.add(name + ".wx", {input_dim, 4 * hidden}), rng, init_scale);
  init_uniform(store.add(name + ".wh", {hidden, 4 * hidden}), rng, init_scale);
  Tensor& b = store.add(name + ".b", {4 * hidden});
  init_uniform(b, rng, init_scale);
  for (std::size_t k = 0; k < hidden; ++k) b[kGateForget * hidden + k] = 1.0;
  return p;
}

BoundLstm bind(ParamBinder& binder, const LstmParams& params) {
  return BoundLstm{binder(params.name + ".wx"), binder(params.name + ".wh"), binder(params.name + ".b"),
                   params.input_dim, params.hidden};
}

LstmState lstm_step(Graph& g, const BoundLstm& lstm, Var x, const LstmState& prev) {
  if (static_cast<std::size_t>(g.cols(x)) != lstm.input_dim) {
    throw_error(ErrorKind::kDimension, "lstm_step: input has " + std::to_string(g.cols(x)) + " columns, expected " +
                                           std::to_string(lstm.input_dim));
  }
  if (static_cast<std::size_t>(g.cols(prev.h)) != lstm.hidden || static_cast<std::size_t>(g.cols(prev.c)) != lstm.hidden) {
    throw_error(ErrorKind::kDimension, "lstm_step: state width does not match hidden size " + std::to_string(lstm.hidden));
  }
  Var gates = add(g, add(g, matmul(g, x, lstm.wx), matmul(g, prev.h, lstm.wh)), lstm.b);
  Var c = lstm_cell_state(g, gates, prev.c);
  Var h = lstm_hidden(g, gates, c);
  return {h, c};
}

LstmState lstm_zero_state(Graph& g, std::size_t rows, std::size_t hidden) {
  Var zero = g.constant(Mat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hidden)));
  return {zero, zero};
}

EmbeddingTable EmbeddingTable::create(ParamStore& store, const std::string& name, std::size_t vocab_size,
                                      std::size_t dim, Rng& rng, double init_scale) {
  init_uniform(store.add(name, {vocab_size, dim}), rng, init_scale);
  return EmbeddingTable{name, vocab_size, dim};
}

Var embed(Graph& g, Var table, std::span<const int> ids) { return gather_rows(g, table, ids); }

DenseParams DenseParams::create(ParamStore& store, const std::string& name, std::size_t input_dim,
                                std::size_t output_dim, Rng& rng, double init_scale) {
  init_uniform(store.add(name + ".w", {input_dim, output_dim}), rng, init_scale);
  init_uniform(store.add(name + ".b", {output_dim}), rng, init_scale);
  return DenseParams{name, input_dim, output_dim};
}

Var feed_forward(Graph& g, Var x, Var weight, Var bias, Activation activation) {
  Var out = add(g, matmul(g, x, weight), bias);
  return activation == Activation::kTanh ? tanh(g, out) : out;
}

Var feed_forward(Graph& g, ParamBinder& binder, const DenseParams& dense, Var x, Activation activation) {
  return feed_forward(g, x, binder(dense.name + ".w"), binder(dense.name + ".b"), activation);
}

DropoutMask DropoutMask::sample(Eigen::Index rows, Eigen::Index cols, double keep, Mode mode, Rng& rng) {
  if (!(keep > 0.0 && keep <= 1.0)) throw_error(ErrorKind::kConfig, "dropout keep probability must be in (0, 1]");
  DropoutMask m;
  m.keep = keep;
  m.mode = mode;
  if (mode == Mode::kTrain) {
    m.mask.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m.mask(r, c) = rng.bernoulli(keep) ? 1.0 : 0.0;
    }
  }
  return m;
}

Var dropout_apply(Graph& g, Var x, const DropoutMask& mask) {
  if (mask.mode == Mode::kEval || mask.keep >= 1.0) return x;
  return mul_constant(g, x, mask.mask / mask.keep);
}

Var Dropout::apply(Graph& g, Var x, const std::string& site) {
  sites_.push_back(site);
  if (!active()) return x;
  return dropout_apply(g, x, DropoutMask::sample(g.rows(x), g.cols(x), keep_, Mode::kTrain, *rng_));
}

}  // namespace slu
