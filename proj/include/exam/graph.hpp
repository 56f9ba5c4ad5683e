// SPDX-License-Identifier: Apache-2.0
/**
 * @file   graph.hpp
 * @brief  Define-by-run reverse-mode differentiation over Tensor.
 *
 * Every op executes eagerly and, when any input requires a gradient, appends a
 * node holding its backward rule. backward() walks the nodes once in reverse
 * insertion order, which is a topological order by construction. A graph is
 * rebuilt per forward pass and must not be shared between threads.
 */
#ifndef EXAM_GRAPH_HPP
#define EXAM_GRAPH_HPP

#include "exam/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace exam {

enum class UnaryOp { sigmoid, tanh, relu, log, negate };
enum class BinaryOp { add, sub, mul };
enum class Reduction { mean_rows, sum, max_over_axis };

/// Lower clamp applied inside log so that losses stay finite.
inline constexpr double kLogEpsilon = 1e-12;

enum class GradMode { enabled, disabled };

template <typename T> class Graph {
public:
  using BackwardFn = std::function<void()>;

  explicit Graph(GradMode mode = GradMode::enabled) : mode_(mode) {}

  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  bool recording() const noexcept { return mode_ == GradMode::enabled; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Registers `out` as computed from `inputs`. The backward rule reads the
  /// gradient of `out` and accumulates into whichever inputs require one.
  /// Custom ops outside this file use this entry point.
  Tensor<T> record(Tensor<T> out, std::initializer_list<Tensor<T>> inputs,
                   BackwardFn backward);

  /// Seeds d(root) = seed and propagates to every leaf that requires grad.
  void backward(Tensor<T> root, T seed = T(1));
  void clear() { nodes_.clear(); }

  // Linear algebra.
  Tensor<T> matmul(const Tensor<T> &a, const Tensor<T> &b);
  Tensor<T> transpose(const Tensor<T> &a);

  // Element-wise. Binary ops accept equal shapes, or a 1 x cols right operand
  // broadcast over the rows of the left one.
  Tensor<T> unary(UnaryOp op, const Tensor<T> &a);
  Tensor<T> binary(BinaryOp op, const Tensor<T> &a, const Tensor<T> &b);
  Tensor<T> add(const Tensor<T> &a, const Tensor<T> &b) {
    return binary(BinaryOp::add, a, b);
  }
  Tensor<T> sub(const Tensor<T> &a, const Tensor<T> &b) {
    return binary(BinaryOp::sub, a, b);
  }
  Tensor<T> mul(const Tensor<T> &a, const Tensor<T> &b) {
    return binary(BinaryOp::mul, a, b);
  }
  Tensor<T> sigmoid(const Tensor<T> &a) { return unary(UnaryOp::sigmoid, a); }
  Tensor<T> tanh(const Tensor<T> &a) { return unary(UnaryOp::tanh, a); }
  Tensor<T> relu(const Tensor<T> &a) { return unary(UnaryOp::relu, a); }
  Tensor<T> log(const Tensor<T> &a) { return unary(UnaryOp::log, a); }
  Tensor<T> negate(const Tensor<T> &a) { return unary(UnaryOp::negate, a); }
  Tensor<T> scale(const Tensor<T> &a, T factor);
  /// 1 - a, used by the recurrent update gate.
  Tensor<T> one_minus(const Tensor<T> &a);

  // Reductions. mean_rows -> 1 x cols, sum -> 1 x 1,
  // max_over_axis(0) -> 1 x cols, max_over_axis(1) -> rows x 1.
  // Max routes the gradient to the first maximal entry.
  Tensor<T> reduce(Reduction op, const Tensor<T> &a, std::size_t axis = 0);
  Tensor<T> mean_rows(const Tensor<T> &a) {
    return reduce(Reduction::mean_rows, a);
  }
  Tensor<T> sum(const Tensor<T> &a) { return reduce(Reduction::sum, a); }
  Tensor<T> max_over_axis(const Tensor<T> &a, std::size_t axis) {
    return reduce(Reduction::max_over_axis, a, axis);
  }

  /// Gathers table rows; the result is ids.size() x table.cols().
  Tensor<T> embedding_lookup(const Tensor<T> &table,
                             std::span<const std::int32_t> ids);

  // Shape plumbing.
  Tensor<T> row(const Tensor<T> &a, std::size_t index);
  Tensor<T> stack_rows(const std::vector<Tensor<T>> &rows);
  Tensor<T> concat_cols(const Tensor<T> &a, const Tensor<T> &b);

  /// Row-wise softmax with max subtraction.
  Tensor<T> softmax_row(const Tensor<T> &logits);

  /// -log softmax(logits)[label] for a 1 x c row; gradient p - onehot.
  Tensor<T> softmax_cross_entropy(const Tensor<T> &logits, std::size_t label);
  /// Summed binary cross-entropy of sigmoid(logits) against 0/1 targets,
  /// evaluated in the overflow-free softplus form; gradient sigmoid - target.
  Tensor<T> sigmoid_cross_entropy(const Tensor<T> &logits,
                                  std::span<const T> targets);

private:
  struct Node {
    Tensor<T> output;
    BackwardFn backward;
  };

  GradMode mode_;
  std::vector<Node> nodes_;
};

/// Gradient buffer of an input about to receive a dense update. Row-sparse
/// tensors get every row marked since all of them may change.
template <typename T> std::span<T> dense_grad(const Tensor<T> &handle) {
  Tensor<T> t = handle;
  if (t.row_sparse())
    for (std::size_t r = 0; r < t.rows(); ++r)
      t.mark_row(r);
  return t.grad();
}

extern template class Graph<float>;
extern template class Graph<double>;

} // namespace exam

#endif // EXAM_GRAPH_HPP
