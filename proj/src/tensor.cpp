// SPDX-License-Identifier: Apache-2.0
#include "exam/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace exam {

std::string shape_to_string(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void check_shape(const Shape &shape) {
  if (shape.empty())
    throw DimensionError("tensor shape must have rank >= 1");
  for (auto d : shape)
    if (d == 0)
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_to_string(shape));
}

} // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  check_shape(shape);
  storage_->data.assign(shape_size(shape), fill);
  storage_->shape = std::move(shape);
  storage_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  check_shape(shape);
  if (shape_size(shape) != data.size())
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_size(shape)) +
                         " elements, got " + std::to_string(data.size()));
  storage_->shape = std::move(shape);
  storage_->data = std::move(data);
  storage_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>
Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
  if (rows.size() == 0)
    throw DimensionError("matrix needs at least one row");
  const std::size_t width = rows.begin()->size();
  std::vector<T> values;
  values.reserve(rows.size() * width);
  for (const auto &row : rows) {
    if (row.size() != width)
      throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), width}, std::move(values));
}

template <typename T> Tensor<T> Tensor<T>::row_vector(std::vector<T> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

template <typename T> Tensor<T> Tensor<T>::identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    out.at(i, i) = T(1);
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Shape shape, T low, T high,
                             std::mt19937_64 &rng) {
  Tensor out(std::move(shape));
  std::uniform_real_distribution<double> dist(low, high);
  for (auto &x : out.data())
    x = static_cast<T>(dist(rng));
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::glorot(std::size_t fan_in, std::size_t fan_out,
                            std::mt19937_64 &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform({fan_in, fan_out}, static_cast<T>(-limit),
                 static_cast<T>(limit), rng);
}

template <typename T> std::size_t Tensor<T>::rows() const {
  return storage_->shape.size() >= 2 ? storage_->shape[0] : 1;
}

template <typename T> std::size_t Tensor<T>::cols() const {
  return size() / rows();
}

template <typename T> T Tensor<T>::item() const {
  if (size() != 1)
    throw DimensionError("item() on tensor of shape " +
                         shape_to_string(shape()));
  return storage_->data[0];
}

template <typename T> std::span<T> Tensor<T>::grad() {
  if (storage_->grad.empty())
    storage_->grad.assign(storage_->data.size(), T(0));
  return storage_->grad;
}

template <typename T> void Tensor<T>::zero_grad() {
  auto &s = *storage_;
  if (s.grad.empty())
    return;
  if (s.row_sparse) {
    const std::size_t width = cols();
    for (auto r : s.touched) {
      std::fill_n(s.grad.begin() + r * width, width, T(0));
      s.row_flag[r] = 0;
    }
    s.touched.clear();
  } else {
    std::fill(s.grad.begin(), s.grad.end(), T(0));
  }
}

template <typename T> void Tensor<T>::set_row_sparse(bool flag) {
  storage_->row_sparse = flag;
  storage_->row_flag.assign(flag ? rows() : 0, 0);
  storage_->touched.clear();
}

template <typename T> void Tensor<T>::mark_row(std::size_t row) {
  auto &s = *storage_;
  if (!s.row_sparse || s.row_flag[row])
    return;
  s.row_flag[row] = 1;
  s.touched.push_back(row);
}

template <typename T> Tensor<T> Tensor<T>::clone() const {
  return Tensor(shape(), storage_->data, false);
}

template <typename T> void Tensor<T>::assign(const Tensor &other) {
  if (other.shape() != shape())
    throw DimensionError("assign: shape " + shape_to_string(other.shape()) +
                         " into " + shape_to_string(shape()));
  std::copy(other.data().begin(), other.data().end(),
            storage_->data.begin());
}

template class Tensor<float>;
template class Tensor<double>;

} // namespace exam
