// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace slu {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

enum class Precision : std::uint8_t { kF32 = 0, kF64 = 1 };

std::string shape_string(const std::vector<std::size_t>& shape);

/// Dense row-major array with a gradient buffer of the same length.
///
/// Any tensor can be viewed as a matrix whose column count is the last
/// dimension and whose row count is the product of the leading ones; a
/// rank-1 tensor of length n is a 1 x n row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  MatMap matrix();
  ConstMatMap matrix() const;
  MatMap grad_matrix();
  ConstMatMap grad_matrix() const;

  void zero_grad();
  bool all_finite() const;

 private:
  // Aligned like Eigen's own storage, so vectorized reductions over a
  // parameter sum in the same order wherever the buffer lands.
  using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

  std::vector<std::size_t> shape_;
  Buffer data_;
  Buffer grad_;
};

/// Named trainable tensors. Iteration order is lexicographic by name, which
/// fixes the order of every reduction over parameters.
class ParamStore {
 public:
  Tensor& add(const std::string& name, std::vector<std::size_t> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

 private:
  std::map<std::string, Tensor> tensors_;
};

/// The one source of randomness. The integer-to-real conversions are
/// written out so sequences are identical on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace slu
