// SPDX-License-Identifier: Apache-2.0
#include "slu/autograd.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "slu/error.hpp"

namespace slu {

namespace {

std::string dims(Eigen::Index r, Eigen::Index c) { return "[" + std::to_string(r) + "x" + std::to_string(c) + "]"; }

std::string dims(const Graph& g, Var v) { return dims(g.rows(v), g.cols(v)); }

[[noreturn]] void mismatch(const char* op, const Graph& g, Var a, Var b) {
  throw_error(ErrorKind::kDimension, std::string(op) + ": shape mismatch " + dims(g, a) + " vs " + dims(g, b));
}

void require_same_shape(const char* op, const Graph& g, Var a, Var b) {
  if (g.rows(a) != g.rows(b) || g.cols(a) != g.cols(b)) mismatch(op, g, a, b);
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Graph::push(Node node) {
  if (nodes_.size() >= static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw_error(ErrorKind::kDomain, "graph node limit exceeded");
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Mat value) {
  Node n;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::input(Mat value) {
  Node n;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  n.requires_grad = record_;
  return push(std::move(n));
}

Var Graph::param(Tensor& tensor) {
  Node n;
  n.rows = static_cast<Eigen::Index>(tensor.rows());
  n.cols = static_cast<Eigen::Index>(tensor.cols());
  n.external_value = tensor.data().data();
  if (record_) {
    n.external_grad = tensor.grad().data();
    n.requires_grad = true;
  }
  return push(std::move(n));
}

Var Graph::param(const Tensor& tensor) {
  Node n;
  n.rows = static_cast<Eigen::Index>(tensor.rows());
  n.cols = static_cast<Eigen::Index>(tensor.cols());
  n.external_value = tensor.data().data();
  return push(std::move(n));
}

ConstMatMap Graph::value(Var v) const {
  const Node& n = nodes_[v.id];
  return ConstMatMap(n.external_value ? n.external_value : n.value.data(), n.rows, n.cols);
}

MatMap Graph::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.external_grad) return MatMap(n.external_grad, n.rows, n.cols);
  if (!n.grad_touched) {
    n.grad = Mat::Zero(n.rows, n.cols);
    n.grad_touched = true;
  }
  return MatMap(n.grad.data(), n.rows, n.cols);
}

void Graph::backward(Var loss) {
  if (!record_) throw_error(ErrorKind::kDomain, "backward on a graph that does not record");
  if (rows(loss) != 1 || cols(loss) != 1) {
    throw_error(ErrorKind::kDimension, "backward expects a 1x1 loss, got " + dims(*this, loss));
  }
  grad(loss)(0, 0) += 1.0;
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backprop && n.grad_touched) {
      // The closure may append gradient buffers to other nodes but never
      // new nodes, so `n` stays valid.
      n.backprop(*this, Var{i});
    }
  }
}

Var Graph::emit(Mat value, std::initializer_list<Var> inputs, Backprop backprop) {
  return emit(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backprop));
}

Var Graph::emit(Mat value, std::span<const Var> inputs, Backprop backprop) {
  Node n;
  n.rows = value.rows();
  n.cols = value.cols();
  n.value = std::move(value);
  if (record_) {
    for (Var in : inputs) {
      if (nodes_[in.id].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backprop = std::move(backprop);
  }
  return push(std::move(n));
}

Var matmul(Graph& g, Var a, Var b) {
  if (g.cols(a) != g.rows(b)) mismatch("matmul", g, a, b);
  Mat out = g.value(a) * g.value(b);
  return g.emit(std::move(out), {a, b}, [a, b](Graph& g, Var self) {
    Mat dout = g.grad(self);
    if (g.requires_grad(a)) g.grad(a).noalias() += dout * g.value(b).transpose();
    if (g.requires_grad(b)) g.grad(b).noalias() += g.value(a).transpose() * dout;
  });
}

Var add(Graph& g, Var a, Var b) {
  const bool broadcast = g.rows(b) == 1 && g.rows(a) != 1;
  if (g.cols(a) != g.cols(b) || (!broadcast && g.rows(a) != g.rows(b))) mismatch("add", g, a, b);
  Mat out = g.value(a);
  if (broadcast) {
    out.rowwise() += g.value(b).row(0);
  } else {
    out += g.value(b);
  }
  return g.emit(std::move(out), {a, b}, [a, b, broadcast](Graph& g, Var self) {
    Mat dout = g.grad(self);
    if (g.requires_grad(a)) g.grad(a) += dout;
    if (g.requires_grad(b)) {
      if (broadcast) {
        g.grad(b).row(0) += dout.colwise().sum();
      } else {
        g.grad(b) += dout;
      }
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  require_same_shape("mul", g, a, b);
  Mat out = g.value(a).cwiseProduct(g.value(b));
  return g.emit(std::move(out), {a, b}, [a, b](Graph& g, Var self) {
    Mat dout = g.grad(self);
    if (g.requires_grad(a)) g.grad(a) += dout.cwiseProduct(g.value(b));
    if (g.requires_grad(b)) g.grad(b) += dout.cwiseProduct(g.value(a));
  });
}

Var mul_constant(Graph& g, Var a, const Mat& factor) {
  if (g.rows(a) != factor.rows() || g.cols(a) != factor.cols()) {
    throw_error(ErrorKind::kDimension,
                "mul_constant: shape mismatch " + dims(g, a) + " vs " + dims(factor.rows(), factor.cols()));
  }
  Mat out = g.value(a).cwiseProduct(factor);
  return g.emit(std::move(out), {a}, [a, factor](Graph& g, Var self) {
    g.grad(a) += g.grad(self).cwiseProduct(factor);
  });
}

Var sigmoid(Graph& g, Var a) {
  Mat out = g.value(a).unaryExpr([](double x) { return sigmoid_scalar(x); });
  return g.emit(std::move(out), {a}, [a](Graph& g, Var self) {
    auto y = g.value(self);
    g.grad(a).array() += g.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var tanh(Graph& g, Var a) {
  Mat out = g.value(a).array().tanh().matrix();
  return g.emit(std::move(out), {a}, [a](Graph& g, Var self) {
    auto y = g.value(self);
    g.grad(a).array() += g.grad(self).array() * (1.0 - y.array().square());
  });
}

Var concat(Graph& g, std::initializer_list<Var> parts) {
  return concat(g, std::span<const Var>(parts.begin(), parts.size()));
}

Var concat(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw_error(ErrorKind::kDimension, "concat: no inputs");
  const Eigen::Index rows = g.rows(parts[0]);
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (g.rows(p) != rows) mismatch("concat", g, parts[0], p);
    cols += g.cols(p);
  }
  Mat out(rows, cols);
  std::vector<Eigen::Index> offsets;
  offsets.reserve(parts.size());
  Eigen::Index at = 0;
  for (Var p : parts) {
    offsets.push_back(at);
    out.middleCols(at, g.cols(p)) = g.value(p);
    at += g.cols(p);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.emit(std::move(out), parts, [inputs, offsets](Graph& g, Var self) {
    auto dout = g.grad(self);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (g.requires_grad(inputs[k])) g.grad(inputs[k]) += dout.middleCols(offsets[k], g.cols(inputs[k]));
    }
  });
}

Var slice_cols(Graph& g, Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > g.cols(a)) {
    throw_error(ErrorKind::kDimension, "slice_cols: columns [" + std::to_string(start) + ", " +
                                           std::to_string(start + count) + ") out of range for " + dims(g, a));
  }
  Mat out = g.value(a).middleCols(start, count);
  return g.emit(std::move(out), {a}, [a, start, count](Graph& g, Var self) {
    g.grad(a).middleCols(start, count) += g.grad(self);
  });
}

Var gather_rows(Graph& g, Var a, std::span<const int> indices) {
  if (indices.empty()) throw_error(ErrorKind::kDimension, "gather_rows: no indices");
  auto src = g.value(a);
  Mat out(static_cast<Eigen::Index>(indices.size()), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= src.rows()) {
      throw_error(ErrorKind::kDomain, "gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                                          std::to_string(src.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(i)) = src.row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return g.emit(std::move(out), {a}, [a, idx = std::move(idx)](Graph& g, Var self) {
    auto dout = g.grad(self);
    auto da = g.grad(a);
    for (std::size_t i = 0; i < idx.size(); ++i) da.row(idx[i]) += dout.row(static_cast<Eigen::Index>(i));
  });
}

Var sum(Graph& g, Var a) {
  Mat out(1, 1);
  out(0, 0) = g.value(a).sum();
  return g.emit(std::move(out), {a}, [a](Graph& g, Var self) { g.grad(a).array() += g.grad(self)(0, 0); });
}

Var softmax(Graph& g, Var logits, const Mat* mask) {
  auto z = g.value(logits);
  if (z.cols() < 1) throw_error(ErrorKind::kDomain, "softmax: empty input");
  if (mask && (mask->rows() != z.rows() || mask->cols() != z.cols())) {
    throw_error(ErrorKind::kDimension,
                "softmax: mask shape " + dims(mask->rows(), mask->cols()) + " vs logits " + dims(g, logits));
  }
  Mat out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      if (!mask || (*mask)(r, c) != 0.0) top = std::max(top, z(r, c));
    }
    if (!std::isfinite(top)) throw_error(ErrorKind::kDomain, "softmax: row " + std::to_string(r) + " has no finite logit");
    double total = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double e = (!mask || (*mask)(r, c) != 0.0) ? std::exp(z(r, c) - top) : 0.0;
      out(r, c) = e;
      total += e;
    }
    out.row(r) /= total;
  }
  return g.emit(std::move(out), {logits}, [logits](Graph& g, Var self) {
    auto p = g.value(self);
    auto dp = g.grad(self);
    Eigen::VectorXd dot = (dp.cwiseProduct(p)).rowwise().sum();
    Mat dz = p.cwiseProduct(dp - dot.replicate(1, p.cols()));
    g.grad(logits) += dz;
  });
}

Var cross_entropy(Graph& g, Var probabilities, std::span<const int> targets) {
  auto p = g.value(probabilities);
  if (static_cast<Eigen::Index>(targets.size()) != p.rows()) {
    throw_error(ErrorKind::kDimension, "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                           dims(g, probabilities));
  }
  Mat out = Mat::Zero(1, 1);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const int t = targets[r];
    if (t < 0) continue;
    if (t >= p.cols()) {
      throw_error(ErrorKind::kDomain, "cross_entropy: target " + std::to_string(t) + " out of range for " +
                                          std::to_string(p.cols()) + " classes");
    }
    out(0, 0) -= std::log(p(r, t));
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  return g.emit(std::move(out), {probabilities}, [probabilities, tgt = std::move(tgt)](Graph& g, Var self) {
    const double d = g.grad(self)(0, 0);
    auto p = g.value(probabilities);
    auto dp = g.grad(probabilities);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      if (tgt[r] >= 0) dp(r, tgt[r]) -= d / p(r, tgt[r]);
    }
  });
}

Var softmax_cross_entropy(Graph& g, Var logits, std::span<const int> targets, std::span<const double> row_weights) {
  auto z = g.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows() || row_weights.size() != targets.size()) {
    throw_error(ErrorKind::kDimension, "softmax_cross_entropy: " + std::to_string(targets.size()) + " targets and " +
                                           std::to_string(row_weights.size()) + " weights for " + dims(g, logits));
  }
  Mat probs(z.rows(), z.cols());
  Mat out = Mat::Zero(1, 1);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double top = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - top).exp().matrix();
    const double total = probs.row(r).sum();
    probs.row(r) /= total;
    const int t = targets[r];
    if (t < 0) continue;
    if (t >= z.cols()) {
      throw_error(ErrorKind::kDomain, "softmax_cross_entropy: target " + std::to_string(t) + " out of range for " +
                                          std::to_string(z.cols()) + " classes");
    }
    const double log_sum = top + std::log(total);
    out(0, 0) += row_weights[r] * (log_sum - z(r, t));
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<double> w(row_weights.begin(), row_weights.end());
  return g.emit(std::move(out), {logits},
                [logits, probs = std::move(probs), tgt = std::move(tgt), w = std::move(w)](Graph& g, Var self) {
                  const double d = g.grad(self)(0, 0);
                  auto dz = g.grad(logits);
                  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                    if (tgt[r] < 0) continue;
                    const double scale = d * w[r];
                    dz.row(r) += scale * probs.row(r);
                    dz(r, tgt[r]) -= scale;
                  }
                });
}

Var blend_rows(Graph& g, Var fresh, Var old, std::span<const double> keep) {
  require_same_shape("blend_rows", g, fresh, old);
  if (static_cast<Eigen::Index>(keep.size()) != g.rows(fresh)) {
    throw_error(ErrorKind::kDimension, "blend_rows: " + std::to_string(keep.size()) + " flags for " + dims(g, fresh));
  }
  Mat out = g.value(old);
  auto f = g.value(fresh);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (keep[r] != 0.0) out.row(r) = f.row(r);
  }
  std::vector<double> k(keep.begin(), keep.end());
  return g.emit(std::move(out), {fresh, old}, [fresh, old, k = std::move(k)](Graph& g, Var self) {
    auto dout = g.grad(self);
    for (Eigen::Index r = 0; r < dout.rows(); ++r) {
      Var target = k[r] != 0.0 ? fresh : old;
      if (g.requires_grad(target)) g.grad(target).row(r) += dout.row(r);
    }
  });
}

Var lstm_cell_state(Graph& g, Var gates, Var c_prev) {
  const Eigen::Index h = g.cols(c_prev);
  if (g.cols(gates) != 4 * h || g.rows(gates) != g.rows(c_prev)) mismatch("lstm_cell_state", g, gates, c_prev);
  auto z = g.value(gates);
  auto cp = g.value(c_prev);
  Mat out(cp.rows(), h);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index k = 0; k < h; ++k) {
      const double i = sigmoid_scalar(z(r, k));
      const double f = sigmoid_scalar(z(r, h + k));
      const double cand = std::tanh(z(r, 3 * h + k));
      out(r, k) = f * cp(r, k) + i * cand;
    }
  }
  return g.emit(std::move(out), {gates, c_prev}, [gates, c_prev, h](Graph& g, Var self) {
    auto z = g.value(gates);
    auto cp = g.value(c_prev);
    Mat dc = g.grad(self);
    const bool want_gates = g.requires_grad(gates);
    const bool want_prev = g.requires_grad(c_prev);
    Mat dz;
    if (want_gates) dz = Mat::Zero(z.rows(), z.cols());
    Mat dcp;
    if (want_prev) dcp = Mat::Zero(cp.rows(), cp.cols());
    for (Eigen::Index r = 0; r < dc.rows(); ++r) {
      for (Eigen::Index k = 0; k < h; ++k) {
        const double i = sigmoid_scalar(z(r, k));
        const double f = sigmoid_scalar(z(r, h + k));
        const double cand = std::tanh(z(r, 3 * h + k));
        const double d = dc(r, k);
        if (want_prev) dcp(r, k) = d * f;
        if (want_gates) {
          dz(r, k) = d * cand * i * (1.0 - i);
          dz(r, h + k) = d * cp(r, k) * f * (1.0 - f);
          dz(r, 3 * h + k) = d * i * (1.0 - cand * cand);
        }
      }
    }
    if (want_gates) g.grad(gates) += dz;
    if (want_prev) g.grad(c_prev) += dcp;
  });
}

Var lstm_hidden(Graph& g, Var gates, Var c) {
  const Eigen::Index h = g.cols(c);
  if (g.cols(gates) != 4 * h || g.rows(gates) != g.rows(c)) mismatch("lstm_hidden", g, gates, c);
  auto z = g.value(gates);
  auto cv = g.value(c);
  Mat out(cv.rows(), h);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index k = 0; k < h; ++k) out(r, k) = sigmoid_scalar(z(r, 2 * h + k)) * std::tanh(cv(r, k));
  }
  return g.emit(std::move(out), {gates, c}, [gates, c, h](Graph& g, Var self) {
    auto z = g.value(gates);
    auto cv = g.value(c);
    Mat dh = g.grad(self);
    const bool want_gates = g.requires_grad(gates);
    const bool want_c = g.requires_grad(c);
    Mat dz_o(dh.rows(), h);
    Mat dc(dh.rows(), h);
    for (Eigen::Index r = 0; r < dh.rows(); ++r) {
      for (Eigen::Index k = 0; k < h; ++k) {
        const double o = sigmoid_scalar(z(r, 2 * h + k));
        const double tc = std::tanh(cv(r, k));
        dz_o(r, k) = dh(r, k) * tc * o * (1.0 - o);
        dc(r, k) = dh(r, k) * o * (1.0 - tc * tc);
      }
    }
    if (want_gates) g.grad(gates).middleCols(2 * h, h) += dz_o;
    if (want_c) g.grad(c) += dc;
  });
}

Var additive_scores(Graph& g, Var query, std::span<const Var> keys, Var v) {
  if (keys.empty()) throw_error(ErrorKind::kDimension, "additive_scores: no keys");
  const Eigen::Index rows = g.rows(keys[0]);
  const Eigen::Index att = g.cols(keys[0]);
  if (g.cols(query) != att || (g.rows(query) != 1 && g.rows(query) != rows)) {
    mismatch("additive_scores", g, query, keys[0]);
  }
  if (g.rows(v) != 1 || g.cols(v) != att) mismatch("additive_scores", g, v, keys[0]);
  for (Var k : keys) {
    if (g.rows(k) != rows || g.cols(k) != att) mismatch("additive_scores", g, keys[0], k);
  }
  const bool broadcast = g.rows(query) == 1 && rows != 1;
  auto q = g.value(query);
  auto vv = g.value(v);
  Mat out(rows, static_cast<Eigen::Index>(keys.size()));
  for (std::size_t j = 0; j < keys.size(); ++j) {
    Mat pre = g.value(keys[j]);
    if (broadcast) {
      pre.rowwise() += q.row(0);
    } else {
      pre += q;
    }
    out.col(static_cast<Eigen::Index>(j)) = pre.array().tanh().matrix() * vv.transpose();
  }
  std::vector<Var> inputs{query, v};
  inputs.insert(inputs.end(), keys.begin(), keys.end());
  std::vector<Var> key_list(keys.begin(), keys.end());
  return g.emit(std::move(out), inputs, [query, v, key_list, broadcast](Graph& g, Var self) {
    auto de = g.grad(self);
    auto q = g.value(query);
    auto vv = g.value(v);
    const Eigen::Index att = vv.cols();
    Mat dq = Mat::Zero(q.rows(), att);
    Mat dv = Mat::Zero(1, att);
    for (std::size_t j = 0; j < key_list.size(); ++j) {
      Mat act = g.value(key_list[j]);
      if (broadcast) {
        act.rowwise() += q.row(0);
      } else {
        act += q;
      }
      act = act.array().tanh().matrix();
      Eigen::VectorXd dcol = de.col(static_cast<Eigen::Index>(j));
      dv.noalias() += dcol.transpose() * act;
      Mat dpre = (dcol * vv).cwiseProduct((1.0 - act.array().square()).matrix());
      if (g.requires_grad(key_list[j])) g.grad(key_list[j]) += dpre;
      if (broadcast) {
        dq.row(0) += dpre.colwise().sum();
      } else {
        dq += dpre;
      }
    }
    if (g.requires_grad(query)) g.grad(query) += dq;
    if (g.requires_grad(v)) g.grad(v) += dv;
  });
}

Var weighted_sum(Graph& g, Var weights, std::span<const Var> values) {
  if (values.empty()) throw_error(ErrorKind::kDimension, "weighted_sum: no values");
  if (g.cols(weights) != static_cast<Eigen::Index>(values.size())) {
    throw_error(ErrorKind::kDimension, "weighted_sum: " + dims(g, weights) + " weights for " +
                                           std::to_string(values.size()) + " values");
  }
  const Eigen::Index rows = g.rows(values[0]);
  const Eigen::Index dim = g.cols(values[0]);
  if (g.rows(weights) != rows) mismatch("weighted_sum", g, weights, values[0]);
  for (Var val : values) {
    if (g.rows(val) != rows || g.cols(val) != dim) mismatch("weighted_sum", g, values[0], val);
  }
  auto w = g.value(weights);
  Mat out = Mat::Zero(rows, dim);
  for (std::size_t j = 0; j < values.size(); ++j) {
    out += w.col(static_cast<Eigen::Index>(j)).asDiagonal() * g.value(values[j]);
  }
  std::vector<Var> inputs{weights};
  inputs.insert(inputs.end(), values.begin(), values.end());
  std::vector<Var> value_list(values.begin(), values.end());
  return g.emit(std::move(out), inputs, [weights, value_list](Graph& g, Var self) {
    auto dout = g.grad(self);
    auto w = g.value(weights);
    const bool want_w = g.requires_grad(weights);
    Mat dw;
    if (want_w) dw = Mat::Zero(w.rows(), w.cols());
    for (std::size_t j = 0; j < value_list.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      if (g.requires_grad(value_list[j])) g.grad(value_list[j]) += w.col(col).asDiagonal() * dout;
      if (want_w) dw.col(col) = dout.cwiseProduct(g.value(value_list[j])).rowwise().sum();
    }
    if (want_w) g.grad(weights) += dw;
  });
}

std::vector<int> argmax_rows(const ConstMatMap& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c) {
      if (m(r, c) > m(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace slu
