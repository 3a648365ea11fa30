// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "slu/tensor.hpp"

namespace slu {

/// Handle to a value recorded on a Graph.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Every value is a row-major matrix; batched operations
/// keep one utterance per row.
///
/// A graph built with `record == false` only computes values, which is what
/// inference uses. Parameters are bound by reference: their values are read
/// in place and their gradients accumulate straight into the owning Tensor.
class Graph {
 public:
  using Backprop = std::function<void(Graph&, Var self)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Mat value);
  /// Leaf with its own gradient buffer.
  Var input(Mat value);
  Var param(Tensor& tensor);
  /// Parameter bound read-only: no gradient flows into it.
  Var param(const Tensor& tensor);

  ConstMatMap value(Var v) const;
  Eigen::Index rows(Var v) const { return nodes_[v.id].rows; }
  Eigen::Index cols(Var v) const { return nodes_[v.id].cols; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer of `v`, zero-initialised on first access.
  MatMap grad(Var v);

  /// Seeds d(loss)/d(loss) = 1 and runs the tape backwards. `loss` must be 1x1.
  void backward(Var loss);

  /// Appends a computed node. `backprop` is dropped unless the graph records
  /// and at least one input needs a gradient.
  Var emit(Mat value, std::initializer_list<Var> inputs, Backprop backprop);
  Var emit(Mat value, std::span<const Var> inputs, Backprop backprop);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const double* external_value = nullptr;
    double* external_grad = nullptr;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Mat grad;
    bool grad_touched = false;
    bool requires_grad = false;
    Backprop backprop;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool record_;
};

// Primitive differentiable operations. Shape mismatches raise
// ErrorKind::kDimension naming both shapes.

Var matmul(Graph& g, Var a, Var b);
/// Elementwise sum; `b` may also be a single row broadcast over `a`'s rows.
Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
/// Elementwise product with a constant matrix of the same shape.
Var mul_constant(Graph& g, Var a, const Mat& factor);
Var sigmoid(Graph& g, Var a);
Var tanh(Graph& g, Var a);
Var concat(Graph& g, std::span<const Var> parts);
Var concat(Graph& g, std::initializer_list<Var> parts);
Var slice_cols(Graph& g, Var a, Eigen::Index start, Eigen::Index count);
/// Row i of the result is row `indices[i]` of `a`; gradients scatter-add.
Var gather_rows(Graph& g, Var a, std::span<const int> indices);
Var sum(Graph& g, Var a);

/// Row-wise softmax with max subtraction. When `mask` is given (same shape,
/// entries 0 or 1), masked-out logits get probability exactly 0.
Var softmax(Graph& g, Var logits, const Mat* mask = nullptr);

/// Sum over rows of -log p[r, target[r]]; rows with a negative target are
/// skipped.
Var cross_entropy(Graph& g, Var probabilities, std::span<const int> targets);

/// Fused softmax + cross-entropy: sum over rows of
/// weight[r] * -log softmax(logits[r])[target[r]]. Backward is
/// weight * (p - onehot). Rows with a negative target are skipped.
Var softmax_cross_entropy(Graph& g, Var logits, std::span<const int> targets,
                          std::span<const double> row_weights);

/// Row r is `fresh[r]` where keep[r] != 0 and `old[r]` otherwise.
Var blend_rows(Graph& g, Var fresh, Var old, std::span<const double> keep);

/// LSTM pointwise stage. `gates` is [rows x 4H] in the order (i, f, o, g).
/// c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g)
Var lstm_cell_state(Graph& g, Var gates, Var c_prev);
/// h = sigmoid(o) * tanh(c)
Var lstm_hidden(Graph& g, Var gates, Var c);

/// Additive attention scores: e[r, j] = sum_k v[k] * tanh(query[r, k] + keys[j][r, k]).
/// `query` may have one row, broadcast over the rows of the keys. `v` is 1 x A.
Var additive_scores(Graph& g, Var query, std::span<const Var> keys, Var v);

/// out[r] = sum_j weights[r, j] * values[j][r].
Var weighted_sum(Graph& g, Var weights, std::span<const Var> values);

/// Index of the largest entry of each row; the lowest index wins ties.
std::vector<int> argmax_rows(const ConstMatMap& m);

}  // namespace slu
