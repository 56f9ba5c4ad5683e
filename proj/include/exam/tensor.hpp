// SPDX-License-Identifier: Apache-2.0
/**
 * @file   tensor.hpp
 * @brief  Dense row-major tensor with an optional gradient buffer.
 *
 * A Tensor is a cheap handle to shared storage. Copies alias; use clone() for
 * an independent buffer. Every tensor is viewed as a matrix of rows() x cols()
 * where rows() is the leading dimension and cols() the product of the rest.
 */
#ifndef EXAM_TENSOR_HPP
#define EXAM_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace exam {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape &shape);
std::size_t shape_size(const Shape &shape);

/// Raised when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on an out-of-range id or axis.
class IndexError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

template <typename T> class Tensor {
public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  /// Builds a 2-D tensor from nested rows; all rows must share a length.
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows);
  static Tensor row_vector(std::vector<T> values);
  static Tensor identity(std::size_t n);
  static Tensor uniform(Shape shape, T low, T high, std::mt19937_64 &rng);
  /// Glorot-uniform on a fan_in x fan_out matrix.
  static Tensor glorot(std::size_t fan_in, std::size_t fan_out,
                       std::mt19937_64 &rng);

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape &shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t size() const { return storage_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<T> data() { return storage_->data; }
  std::span<const T> data() const { return storage_->data; }
  T &at(std::size_t r, std::size_t c) { return storage_->data[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const {
    return storage_->data[r * cols() + c];
  }
  T item() const;

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool flag) { storage_->requires_grad = flag; }

  bool has_grad() const { return !storage_->grad.empty(); }
  /// Allocates a zeroed gradient buffer on first use.
  std::span<T> grad();
  std::span<const T> grad() const { return storage_->grad; }
  void zero_grad();

  /// Lookup tables record which rows received gradient so that zeroing,
  /// clipping and optimizer updates can skip untouched rows.
  void set_row_sparse(bool flag);
  bool row_sparse() const { return storage_->row_sparse; }
  void mark_row(std::size_t row);
  std::span<const std::size_t> touched_rows() const {
    return storage_->touched;
  }

  /// Deep copy of shape and data; the copy has no gradient.
  Tensor clone() const;
  /// Overwrites data from another tensor of the same shape.
  void assign(const Tensor &other);

  bool same_storage(const Tensor &other) const noexcept {
    return storage_ == other.storage_;
  }

private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool row_sparse = false;
    std::vector<std::uint8_t> row_flag;
    std::vector<std::size_t> touched;
  };

  std::shared_ptr<Storage> storage_;
};

/// Converts between precisions, preserving shape and requires_grad.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From> &source) {
  std::vector<To> values(source.data().begin(), source.data().end());
  return Tensor<To>(source.shape(), std::move(values), source.requires_grad());
}

extern template class Tensor<float>;
extern template class Tensor<double>;

} // namespace exam

#endif // EXAM_TENSOR_HPP
