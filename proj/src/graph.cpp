// SPDX-License-Identifier: Apache-2.0
#include "exam/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace exam {

namespace {

template <typename T> T sigmoid_scalar(T x) {
  if (x >= T(0))
    return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

std::string pair_shapes(const Shape &a, const Shape &b) {
  return shape_to_string(a) + " and " + shape_to_string(b);
}

} // namespace

template <typename T>
Tensor<T> Graph<T>::record(Tensor<T> out,
                           std::initializer_list<Tensor<T>> inputs,
                           BackwardFn backward) {
  const bool needs = recording() &&
                     std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T> &t) {
                                   return t.requires_grad();
                                 });
  out.set_requires_grad(needs);
  if (needs)
    nodes_.push_back(Node{out, std::move(backward)});
  return out;
}

template <typename T> void Graph<T>::backward(Tensor<T> root, T seed) {
  if (!root.requires_grad())
    return;
  for (auto &g : root.grad())
    g += seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad())
      continue;
    it->backward();
  }
}

template <typename T>
Tensor<T> Graph<T>::matmul(const Tensor<T> &a, const Tensor<T> &b) {
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  if (k != b.rows())
    throw DimensionError("matmul: inner dimensions differ for " +
                         pair_shapes(a.shape(), b.shape()));
  Tensor<T> out({m, p});
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t q = 0; q < k; ++q) {
      const T aiq = ad[i * k + q];
      if (aiq == T(0))
        continue;
      const T *brow = &bd[q * p];
      T *orow = &od[i * p];
      for (std::size_t j = 0; j < p; ++j)
        orow[j] += aiq * brow[j];
    }
  return record(out, {a, b}, [a, b, out, m, k, p]() mutable {
    auto go = out.grad();
    if (a.requires_grad()) {
      auto ga = dense_grad(a);
      auto bd = b.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t q = 0; q < k; ++q) {
          T acc = T(0);
          for (std::size_t j = 0; j < p; ++j)
            acc += go[i * p + j] * bd[q * p + j];
          ga[i * k + q] += acc;
        }
    }
    if (b.requires_grad()) {
      auto gb = dense_grad(b);
      auto ad = a.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t q = 0; q < k; ++q) {
          const T aiq = ad[i * k + q];
          if (aiq == T(0))
            continue;
          for (std::size_t j = 0; j < p; ++j)
            gb[q * p + j] += aiq * go[i * p + j];
        }
    }
  });
}

template <typename T> Tensor<T> Graph<T>::transpose(const Tensor<T> &a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.at(j, i) = a.at(i, j);
  return record(out, {a}, [a, out, m, n]() mutable {
    auto go = out.grad();
    auto ga = dense_grad(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        ga[i * n + j] += go[j * m + i];
  });
}

template <typename T>
Tensor<T> Graph<T>::unary(UnaryOp op, const Tensor<T> &a) {
  Tensor<T> out(a.shape());
  auto ad = a.data();
  auto od = out.data();
  const T eps = static_cast<T>(kLogEpsilon);
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const T x = ad[i];
    switch (op) {
    case UnaryOp::sigmoid:
      od[i] = sigmoid_scalar(x);
      break;
    case UnaryOp::tanh:
      od[i] = std::tanh(x);
      break;
    case UnaryOp::relu:
      od[i] = x > T(0) ? x : T(0);
      break;
    case UnaryOp::log:
      od[i] = std::log(std::max(x, eps));
      break;
    case UnaryOp::negate:
      od[i] = -x;
      break;
    }
  }
  return record(out, {a}, [op, a, out, eps]() mutable {
    auto go = out.grad();
    auto ga = dense_grad(a);
    auto ad = a.data();
    auto od = out.data();
    for (std::size_t i = 0; i < go.size(); ++i) {
      T d = T(0);
      switch (op) {
      case UnaryOp::sigmoid:
        d = od[i] * (T(1) - od[i]);
        break;
      case UnaryOp::tanh:
        d = T(1) - od[i] * od[i];
        break;
      case UnaryOp::relu:
        d = ad[i] > T(0) ? T(1) : T(0);
        break;
      case UnaryOp::log:
        d = ad[i] > eps ? T(1) / ad[i] : T(0);
        break;
      case UnaryOp::negate:
        d = T(-1);
        break;
      }
      ga[i] += go[i] * d;
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::binary(BinaryOp op, const Tensor<T> &a,
                           const Tensor<T> &b) {
  const bool broadcast = a.shape() != b.shape();
  if (broadcast && !(b.rows() == 1 && b.cols() == a.cols() && b.rank() == 2))
    throw DimensionError("element-wise op needs equal shapes or a row "
                         "vector right operand, got " +
                         pair_shapes(a.shape(), b.shape()));
  const std::size_t width = a.cols();
  Tensor<T> out(a.shape());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const T y = bd[broadcast ? i % width : i];
    switch (op) {
    case BinaryOp::add:
      od[i] = ad[i] + y;
      break;
    case BinaryOp::sub:
      od[i] = ad[i] - y;
      break;
    case BinaryOp::mul:
      od[i] = ad[i] * y;
      break;
    }
  }
  return record(out, {a, b}, [op, a, b, out, broadcast, width]() mutable {
    auto go = out.grad();
    auto ad = a.data();
    auto bd = b.data();
    if (a.requires_grad()) {
      auto ga = dense_grad(a);
      for (std::size_t i = 0; i < go.size(); ++i)
        ga[i] += op == BinaryOp::mul ? go[i] * bd[broadcast ? i % width : i]
                                     : go[i];
    }
    if (b.requires_grad()) {
      auto gb = dense_grad(b);
      for (std::size_t i = 0; i < go.size(); ++i) {
        const std::size_t j = broadcast ? i % width : i;
        switch (op) {
        case BinaryOp::add:
          gb[j] += go[i];
          break;
        case BinaryOp::sub:
          gb[j] -= go[i];
          break;
        case BinaryOp::mul:
          gb[j] += go[i] * ad[i];
          break;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::scale(const Tensor<T> &a, T factor) {
  Tensor<T> out(a.shape());
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < ad.size(); ++i)
    od[i] = ad[i] * factor;
  return record(out, {a}, [a, out, factor]() mutable {
    auto go = out.grad();
    auto ga = dense_grad(a);
    for (std::size_t i = 0; i < go.size(); ++i)
      ga[i] += go[i] * factor;
  });
}

template <typename T> Tensor<T> Graph<T>::one_minus(const Tensor<T> &a) {
  Tensor<T> out(a.shape());
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < ad.size(); ++i)
    od[i] = T(1) - ad[i];
  return record(out, {a}, [a, out]() mutable {
    auto go = out.grad();
    auto ga = dense_grad(a);
    for (std::size_t i = 0; i < go.size(); ++i)
      ga[i] -= go[i];
  });
}

template <typename T>
Tensor<T> Graph<T>::reduce(Reduction op, const Tensor<T> &a,
                           std::size_t axis) {
  const std::size_t m = a.rows(), n = a.cols();
  switch (op) {
  case Reduction::mean_rows: {
    Tensor<T> out({1, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out.at(0, j) += a.at(i, j);
    const T inv = T(1) / static_cast<T>(m);
    for (auto &x : out.data())
      x *= inv;
    return record(out, {a}, [a, out, m, n, inv]() mutable {
      auto go = out.grad();
      auto ga = dense_grad(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          ga[i * n + j] += go[j] * inv;
    });
  }
  case Reduction::sum: {
    T total = T(0);
    for (auto x : a.data())
      total += x;
    Tensor<T> out({1, 1}, total);
    return record(out, {a}, [a, out]() mutable {
      const T g = out.grad()[0];
      for (auto &x : dense_grad(a))
        x += g;
    });
  }
  case Reduction::max_over_axis: {
    if (axis > 1 || axis >= std::max<std::size_t>(a.rank(), 2))
      throw IndexError("max_over_axis: axis " + std::to_string(axis) +
                       " out of range for " + shape_to_string(a.shape()));
    const std::size_t outer = axis == 0 ? n : m;
    const std::size_t inner = axis == 0 ? m : n;
    Tensor<T> out(axis == 0 ? Shape{1, n} : Shape{m, 1});
    std::vector<std::size_t> winner(outer);
    for (std::size_t o = 0; o < outer; ++o) {
      std::size_t best = 0;
      T best_value = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < inner; ++i) {
        const T v = axis == 0 ? a.at(i, o) : a.at(o, i);
        if (v > best_value || i == 0) {
          best_value = v;
          best = i;
        }
      }
      winner[o] = best;
      out.data()[o] = best_value;
    }
    return record(out, {a}, [a, out, winner, axis, n]() mutable {
      auto go = out.grad();
      auto ga = dense_grad(a);
      for (std::size_t o = 0; o < winner.size(); ++o) {
        const std::size_t idx =
            axis == 0 ? winner[o] * n + o : o * n + winner[o];
        ga[idx] += go[o];
      }
    });
  }
  }
  throw std::logic_error("unknown reduction");
}

template <typename T>
Tensor<T> Graph<T>::embedding_lookup(const Tensor<T> &table,
                                     std::span<const std::int32_t> ids) {
  if (ids.empty())
    throw DimensionError("embedding_lookup: empty id list");
  const std::size_t v = table.rows(), width = table.cols();
  for (auto id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw IndexError("embedding_lookup: id " + std::to_string(id) +
                       " outside table of " + std::to_string(v) + " rows");
  Tensor<T> out({ids.size(), width});
  auto td = table.data();
  auto od = out.data();
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(td.begin() + static_cast<std::size_t>(ids[r]) * width, width,
                od.begin() + r * width);
  std::vector<std::int32_t> kept(ids.begin(), ids.end());
  return record(out, {table}, [table = table, out, kept, width]() mutable {
    auto go = out.grad();
    auto gt = table.grad();
    for (std::size_t r = 0; r < kept.size(); ++r) {
      const auto row = static_cast<std::size_t>(kept[r]);
      table.mark_row(row);
      for (std::size_t j = 0; j < width; ++j)
        gt[row * width + j] += go[r * width + j];
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::row(const Tensor<T> &a, std::size_t index) {
  if (index >= a.rows())
    throw IndexError("row " + std::to_string(index) + " of " +
                     shape_to_string(a.shape()));
  const std::size_t width = a.cols();
  Tensor<T> out({1, width});
  std::copy_n(a.data().begin() + index * width, width, out.data().begin());
  return record(out, {a}, [a = a, out, index, width]() mutable {
    auto go = out.grad();
    auto ga = a.grad();
    if (a.row_sparse())
      a.mark_row(index);
    for (std::size_t j = 0; j < width; ++j)
      ga[index * width + j] += go[j];
  });
}

template <typename T>
Tensor<T> Graph<T>::stack_rows(const std::vector<Tensor<T>> &rows) {
  if (rows.empty())
    throw DimensionError("stack_rows: no rows");
  const std::size_t width = rows.front().size();
  for (const auto &r : rows)
    if (r.size() != width)
      throw DimensionError("stack_rows: rows differ in width");
  Tensor<T> out({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(rows[i].data().begin(), width,
                out.data().begin() + i * width);
  const bool any = std::any_of(rows.begin(), rows.end(), [](const auto &r) {
    return r.requires_grad();
  });
  if (!recording() || !any)
    return out;
  out.set_requires_grad(true);
  nodes_.push_back(Node{out, [rows, out, width]() mutable {
                          auto go = out.grad();
                          for (std::size_t i = 0; i < rows.size(); ++i) {
                            if (!rows[i].requires_grad())
                              continue;
                            auto gr = dense_grad(rows[i]);
                            for (std::size_t j = 0; j < width; ++j)
                              gr[j] += go[i * width + j];
                          }
                        }});
  return out;
}

template <typename T>
Tensor<T> Graph<T>::concat_cols(const Tensor<T> &a, const Tensor<T> &b) {
  if (a.rows() != b.rows())
    throw DimensionError("concat_cols: row counts differ for " +
                         pair_shapes(a.shape(), b.shape()));
  const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
  Tensor<T> out({m, p + q});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      out.at(i, j) = a.at(i, j);
    for (std::size_t j = 0; j < q; ++j)
      out.at(i, p + j) = b.at(i, j);
  }
  return record(out, {a, b}, [a, b, out, m, p, q]() mutable {
    auto go = out.grad();
    if (a.requires_grad()) {
      auto ga = dense_grad(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j)
          ga[i * p + j] += go[i * (p + q) + j];
    }
    if (b.requires_grad()) {
      auto gb = dense_grad(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j)
          gb[i * q + j] += go[i * (p + q) + p + j];
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::softmax_row(const Tensor<T> &logits) {
  const std::size_t m = logits.rows(), n = logits.cols();
  Tensor<T> out(logits.shape());
  for (std::size_t i = 0; i < m; ++i) {
    T top = logits.at(i, 0);
    for (std::size_t j = 1; j < n; ++j)
      top = std::max(top, logits.at(i, j));
    T total = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      out.at(i, j) = std::exp(logits.at(i, j) - top);
      total += out.at(i, j);
    }
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) /= total;
  }
  return record(out, {logits}, [logits, out, m, n]() mutable {
    auto go = out.grad();
    auto gl = dense_grad(logits);
    auto y = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < n; ++j)
        dot += go[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gl[i * n + j] += y[i * n + j] * (go[i * n + j] - dot);
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::softmax_cross_entropy(const Tensor<T> &logits,
                                          std::size_t label) {
  if (logits.rows() != 1)
    throw DimensionError("softmax_cross_entropy expects a 1 x c row, got " +
                         shape_to_string(logits.shape()));
  const std::size_t c = logits.cols();
  if (label >= c)
    throw IndexError("label " + std::to_string(label) + " outside " +
                     std::to_string(c) + " classes");
  auto x = logits.data();
  const T top = *std::max_element(x.begin(), x.end());
  std::vector<T> p(c);
  T total = T(0);
  for (std::size_t j = 0; j < c; ++j) {
    p[j] = std::exp(x[j] - top);
    total += p[j];
  }
  for (auto &v : p)
    v /= total;
  const T loss =
      -std::log(std::max(p[label], static_cast<T>(kLogEpsilon)));
  Tensor<T> out({1, 1}, loss);
  return record(out, {logits}, [logits, out, p, label]() mutable {
    const T g = out.grad()[0];
    auto gl = dense_grad(logits);
    for (std::size_t j = 0; j < p.size(); ++j)
      gl[j] += g * (p[j] - (j == label ? T(1) : T(0)));
  });
}

template <typename T>
Tensor<T> Graph<T>::sigmoid_cross_entropy(const Tensor<T> &logits,
                                          std::span<const T> targets) {
  if (logits.size() != targets.size())
    throw DimensionError("sigmoid_cross_entropy: " +
                         std::to_string(targets.size()) + " targets for " +
                         shape_to_string(logits.shape()));
  auto x = logits.data();
  T loss = T(0);
  for (std::size_t j = 0; j < x.size(); ++j)
    loss += std::max(x[j], T(0)) - x[j] * targets[j] +
            std::log1p(std::exp(-std::abs(x[j])));
  Tensor<T> out({1, 1}, loss);
  std::vector<T> kept(targets.begin(), targets.end());
  return record(out, {logits}, [logits, out, kept]() mutable {
    const T g = out.grad()[0];
    auto gl = dense_grad(logits);
    auto x = logits.data();
    for (std::size_t j = 0; j < kept.size(); ++j)
      gl[j] += g * (sigmoid_scalar(x[j]) - kept[j]);
  });
}

template class Graph<float>;
template class Graph<double>;

} // namespace exam
