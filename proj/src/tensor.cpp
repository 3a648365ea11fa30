// SPDX-License-Identifier: Apache-2.0
#include "slu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <numeric>
#include <sstream>

#include "slu/error.hpp"

namespace slu {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw_error(ErrorKind::kDimension, "tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw_error(ErrorKind::kDimension, "tensor dimensions must be positive, got " + shape_string(shape));
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)),
      data_(checked_product(shape_), fill),
      grad_(data_.size(), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (checked_product(shape_) != data_.size()) {
    throw_error(ErrorKind::kDimension, "tensor shape " + shape_string(shape_) + " does not match " +
                                           std::to_string(data_.size()) + " values");
  }
  grad_.assign(data_.size(), 0.0);
}

std::size_t Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

std::size_t Tensor::rows() const { return shape_.empty() ? 0 : data_.size() / shape_.back(); }

MatMap Tensor::matrix() {
  return MatMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

ConstMatMap Tensor::matrix() const {
  return ConstMatMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

MatMap Tensor::grad_matrix() {
  return MatMap(grad_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

ConstMatMap Tensor::grad_matrix() const {
  return ConstMatMap(grad_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); }) &&
         std::all_of(grad_.begin(), grad_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  auto [it, inserted] = tensors_.emplace(name, Tensor(std::move(shape)));
  if (!inserted) throw_error(ErrorKind::kConfig, "duplicate parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw_error(ErrorKind::kConfig, "unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw_error(ErrorKind::kConfig, "unknown parameter '" + name + "'");
  return it->second;
}

bool ParamStore::contains(const std::string& name) const { return tensors_.count(name) != 0; }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw_error(ErrorKind::kDomain, "Rng::below requires n > 0");
  // Rejection keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

}  // namespace slu
