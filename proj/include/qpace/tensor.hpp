#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "qpace/errors.hpp"

namespace qpace {

/// Dense row-major tensor of doubles. Shape is dynamic; storage is flat.
/// Arithmetic here is deliberately minimal: shaped storage, indexing, and
/// a few fixed-order reductions. Reductions always run left to right over
/// the flat buffer so results are bit-stable across runs.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(numel_of(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != numel_of(shape_)) {
      throw ContractError("tensor value count " + std::to_string(values_.size()) +
                          " does not match shape product " + std::to_string(numel_of(shape_)));
    }
  }

  static Tensor full(std::vector<std::size_t> shape, double fill) {
    Tensor t(std::move(shape));
    for (double& v : t.values_) v = fill;
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(std::initializer_list<std::size_t> idx) { return values_[flat_index(idx)]; }
  double at(std::initializer_list<std::size_t> idx) const { return values_[flat_index(idx)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void require_finite(const char* context) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw ContractError(std::string(context) + ": non-finite value at flat index " +
                            std::to_string(i));
      }
    }
  }

  /// Left-to-right sum over the flat buffer.
  double sum() const {
    double acc = 0.0;
    for (double v : values_) acc += v;
    return acc;
  }

  double mean() const {
    if (values_.empty()) throw ContractError("mean of empty tensor");
    return sum() / static_cast<double>(values_.size());
  }

  double max() const {
    if (values_.empty()) throw ContractError("max of empty tensor");
    double m = values_[0];
    for (double v : values_) m = v > m ? v : m;
    return m;
  }

  std::size_t flat_index(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) {
      throw ContractError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                          std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      flat = flat * shape_[axis] + i;
      ++axis;
    }
    return flat;
  }

  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(context) + ": shape mismatch");
  }
}

inline std::string shape_string(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape()[i]);
  }
  return s + "]";
}

}  // namespace qpace
