// SPDX-License-Identifier: Apache-2.0
#include "exam/encoders.hpp"

#include "exam/text_data.hpp"

#include <limits>
#include <string>
#include <vector>

namespace exam {

std::string to_string(EncoderKind kind) {
  switch (kind) {
  case EncoderKind::region:
    return "region";
  case EncoderKind::gru:
    return "gru";
  case EncoderKind::embed_only:
    return "embed_only";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "region")
    return EncoderKind::region;
  if (name == "gru")
    return EncoderKind::gru;
  if (name == "embed_only")
    return EncoderKind::embed_only;
  throw ConfigError("unknown encoder '" + std::string(name) + "'");
}

std::string to_string(GruVariant variant) {
  return variant == GruVariant::standard ? "standard" : "as_printed";
}

GruVariant parse_gru_variant(std::string_view name) {
  if (name == "standard")
    return GruVariant::standard;
  if (name == "as_printed")
    return GruVariant::as_printed;
  throw ConfigError("unknown gru_variant '" + std::string(name) + "'");
}

template <typename T>
Tensor<T> make_embedding_table(std::size_t vocab, std::size_t dim,
                               std::mt19937_64 &rng) {
  const auto r = static_cast<T>(kEmbeddingInitRange);
  auto table = Tensor<T>::uniform({vocab, dim}, -r, r, rng);
  table.set_requires_grad(true);
  table.set_row_sparse(true);
  return table;
}

template <typename T>
GruParams<T> GruParams<T>::init(std::size_t input, std::size_t hidden,
                                std::mt19937_64 &rng, GruVariant variant) {
  GruParams p;
  p.update = Tensor<T>::glorot(hidden + input, hidden, rng);
  p.reset = Tensor<T>::glorot(hidden + input, hidden, rng);
  p.candidate = Tensor<T>::glorot(hidden + input, hidden, rng);
  for (auto *m : {&p.update, &p.reset, &p.candidate})
    m->set_requires_grad(true);
  p.variant = variant;
  return p;
}

template <typename T>
RegionParams<T> RegionParams<T>::init(std::size_t vocab, std::size_t dim,
                                      std::size_t radius,
                                      std::mt19937_64 &rng) {
  RegionParams p;
  p.radius = radius;
  p.embedding = make_embedding_table<T>(vocab, dim, rng);
  const auto r = static_cast<T>(kEmbeddingInitRange);
  p.context = Tensor<T>::uniform({vocab, 2 * radius + 1, dim}, -r, r, rng);
  p.context.set_requires_grad(true);
  p.context.set_row_sparse(true);
  return p;
}

template <typename T>
Tensor<T> gru_encode(Graph<T> &graph, std::span<const std::int32_t> ids,
                     const GruParams<T> &params, const Tensor<T> &embeddings) {
  const std::size_t hidden = params.hidden();
  if (embeddings.cols() != params.input())
    throw DimensionError("gru_encode: embeddings are " +
                         shape_to_string(embeddings.shape()) +
                         " but gates expect input width " +
                         std::to_string(params.input()));
  const Tensor<T> inputs = graph.embedding_lookup(embeddings, ids);
  Tensor<T> state({1, hidden});
  std::vector<Tensor<T>> states;
  states.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor<T> x = graph.row(inputs, i);
    const Tensor<T> joint = graph.concat_cols(state, x);
    const Tensor<T> z = graph.sigmoid(graph.matmul(joint, params.update));
    Tensor<T> candidate;
    if (params.variant == GruVariant::standard) {
      const Tensor<T> r = graph.sigmoid(graph.matmul(joint, params.reset));
      const Tensor<T> gated = graph.concat_cols(graph.mul(r, state), x);
      candidate = graph.tanh(graph.matmul(gated, params.candidate));
    } else {
      candidate = graph.tanh(graph.matmul(joint, params.reset));
    }
    state = graph.add(graph.mul(graph.one_minus(z), state),
                      graph.mul(z, candidate));
    states.push_back(state);
  }
  return graph.stack_rows(states);
}

template <typename T>
Tensor<T> region_encode(Graph<T> &graph, std::span<const std::int32_t> ids,
                        const RegionParams<T> &params) {
  const Tensor<T> &emb = params.embedding;
  const Tensor<T> &ctx = params.context;
  const std::size_t k = emb.cols();
  const std::size_t span = 2 * params.radius + 1;
  const std::size_t v = emb.rows();
  if (ctx.rows() != v || ctx.cols() != span * k)
    throw DimensionError("region_encode: context tensor " +
                         shape_to_string(ctx.shape()) +
                         " does not match embedding " +
                         shape_to_string(emb.shape()) + " with radius " +
                         std::to_string(params.radius));
  if (ids.empty())
    throw DimensionError("region_encode: empty id list");
  for (auto id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw IndexError("region_encode: id " + std::to_string(id) +
                       " outside vocabulary of " + std::to_string(v));

  const std::size_t n = ids.size();
  const auto s = static_cast<std::ptrdiff_t>(params.radius);
  Tensor<T> out({n, k});
  // Winning window slot per (position, dimension) for the backward pass.
  std::vector<std::uint32_t> winner(n * k,
                                   static_cast<std::uint32_t>(s));
  auto ed = emb.data();
  auto cd = ctx.data();
  auto od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t w = static_cast<std::size_t>(ids[i]);
    T *row = &od[i * k];
    std::fill_n(row, k, -std::numeric_limits<T>::infinity());
    for (std::ptrdiff_t t = -s; t <= s; ++t) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(i) + t;
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(n))
        continue;
      const std::size_t slot = static_cast<std::size_t>(t + s);
      const T *weights = &cd[(w * span + slot) * k];
      const T *word = &ed[static_cast<std::size_t>(ids[pos]) * k];
      for (std::size_t d = 0; d < k; ++d) {
        const T value = weights[d] * word[d];
        if (value > row[d]) {
          row[d] = value;
          winner[i * k + d] = static_cast<std::uint32_t>(slot);
        }
      }
    }
  }

  std::vector<std::int32_t> kept(ids.begin(), ids.end());
  Tensor<T> e = emb;
  Tensor<T> u = ctx;
  return graph.record(
      out, {emb, ctx},
      [e, u, out, kept, winner, k, span, s]() mutable {
        auto go = out.grad();
        auto ed = e.data();
        auto cd = u.data();
        const bool want_e = e.requires_grad();
        const bool want_u = u.requires_grad();
        std::span<T> ge = want_e ? e.grad() : std::span<T>{};
        std::span<T> gu = want_u ? u.grad() : std::span<T>{};
        for (std::size_t i = 0; i < kept.size(); ++i) {
          const std::size_t w = static_cast<std::size_t>(kept[i]);
          if (want_u)
            u.mark_row(w);
          for (std::size_t d = 0; d < k; ++d) {
            const T g = go[i * k + d];
            if (g == T(0))
              continue;
            const std::size_t slot = winner[i * k + d];
            const std::size_t pos =
                i + slot - static_cast<std::size_t>(s);
            const std::size_t other = static_cast<std::size_t>(kept[pos]);
            if (want_u)
              gu[(w * span + slot) * k + d] += g * ed[other * k + d];
            if (want_e) {
              e.mark_row(other);
              ge[other * k + d] += g * cd[(w * span + slot) * k + d];
            }
          }
        }
      });
}

template struct GruParams<float>;
template struct GruParams<double>;
template struct RegionParams<float>;
template struct RegionParams<double>;
template Tensor<float> make_embedding_table<float>(std::size_t, std::size_t,
                                                   std::mt19937_64 &);
template Tensor<double> make_embedding_table<double>(std::size_t, std::size_t,
                                                     std::mt19937_64 &);
template Tensor<float> gru_encode(Graph<float> &, std::span<const std::int32_t>,
                                  const GruParams<float> &,
                                  const Tensor<float> &);
template Tensor<double> gru_encode(Graph<double> &,
                                   std::span<const std::int32_t>,
                                   const GruParams<double> &,
                                   const Tensor<double> &);
template Tensor<float> region_encode(Graph<float> &,
                                     std::span<const std::int32_t>,
                                     const RegionParams<float> &);
template Tensor<double> region_encode(Graph<double> &,
                                      std::span<const std::int32_t>,
                                      const RegionParams<double> &);

} // namespace exam
