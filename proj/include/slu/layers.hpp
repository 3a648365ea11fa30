// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "slu/autograd.hpp"
#include "slu/tensor.hpp"

namespace slu {

/// Binds named tensors of a ParamStore onto a graph. A binder over a const
/// store yields read-only parameters.
class ParamBinder {
 public:
  ParamBinder(Graph& g, ParamStore& store) : graph_(g), mutable_(&store), store_(store) {}
  ParamBinder(Graph& g, const ParamStore& store) : graph_(g), store_(store) {}

  Var operator()(const std::string& name);
  Graph& graph() { return graph_; }

 private:
  Graph& graph_;
  ParamStore* mutable_ = nullptr;
  const ParamStore& store_;
};

/// Fills with uniform(-scale, scale).
void init_uniform(Tensor& t, Rng& rng, double scale);

// LSTM gate order inside the 4H axis.
inline constexpr std::size_t kGateInput = 0;
inline constexpr std::size_t kGateForget = 1;
inline constexpr std::size_t kGateOutput = 2;
inline constexpr std::size_t kGateCandidate = 3;

/// Names and sizes of one LSTM's parameters: `<name>.wx` [input x 4H],
/// `<name>.wh` [H x 4H] and `<name>.b` [4H].
struct LstmParams {
  std::string name;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;

  /// Registers the tensors. Every value is uniform(-scale, scale) except the
  /// forget-gate bias slice, which starts at exactly 1.
  static LstmParams create(ParamStore& store, const std::string& name, std::size_t input_dim, std::size_t hidden,
                           Rng& rng, double init_scale);
};

struct BoundLstm {
  Var wx, wh, b;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
};

BoundLstm bind(ParamBinder& binder, const LstmParams& params);

struct LstmState {
  Var h, c;
};

/// One step over a batch of rows: gates = x Wx + h Wh + b, then
/// c = f*c_prev + i*g and h = o*tanh(c).
LstmState lstm_step(Graph& g, const BoundLstm& lstm, Var x, const LstmState& prev);

/// Zero (h, c) for `rows` rows.
LstmState lstm_zero_state(Graph& g, std::size_t rows, std::size_t hidden);

struct EmbeddingTable {
  std::string name;
  std::size_t vocab_size = 0;
  std::size_t dim = 0;

  static EmbeddingTable create(ParamStore& store, const std::string& name, std::size_t vocab_size, std::size_t dim,
                               Rng& rng, double init_scale);
};

/// Row i of the result is table row ids[i]. Out-of-range ids raise kDomain.
Var embed(Graph& g, Var table, std::span<const int> ids);

/// A dense layer `<name>.w` [in x out], `<name>.b` [out].
struct DenseParams {
  std::string name;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;

  static DenseParams create(ParamStore& store, const std::string& name, std::size_t input_dim,
                            std::size_t output_dim, Rng& rng, double init_scale);
};

enum class Activation { kNone, kTanh };

/// activation(x W + b).
Var feed_forward(Graph& g, Var x, Var weight, Var bias, Activation activation);
Var feed_forward(Graph& g, ParamBinder& binder, const DenseParams& dense, Var x, Activation activation);

enum class Mode { kTrain, kEval };

/// Inverted dropout: surviving entries are scaled by 1/keep so evaluation
/// is the identity.
struct DropoutMask {
  Mat mask;
  double keep = 0.5;
  Mode mode = Mode::kEval;

  static DropoutMask sample(Eigen::Index rows, Eigen::Index cols, double keep, Mode mode, Rng& rng);
};

Var dropout_apply(Graph& g, Var x, const DropoutMask& mask);

/// Dropout source used by the models. Without an Rng (or with keep == 1) it
/// passes values through. Every call site name is recorded so tests can see
/// where dropout was applied.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double keep, Rng* rng) : keep_(keep), rng_(rng) {}

  Var apply(Graph& g, Var x, const std::string& site);
  bool active() const { return rng_ != nullptr && keep_ < 1.0; }
  const std::vector<std::string>& sites() const { return sites_; }

 private:
  double keep_ = 1.0;
  Rng* rng_ = nullptr;
  std::vector<std::string> sites_;
};

}  // namespace slu
