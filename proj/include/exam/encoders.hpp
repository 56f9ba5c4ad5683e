// SPDX-License-Identifier: Apache-2.0
/**
 * @file   encoders.hpp
 * @brief  Word-level encoders mapping n token ids to an n x k matrix H.
 *
 * Row t of H depends only on the context each encoder allows: tokens up to t
 * for the GRU, tokens within [t - s, t + s] for region embedding, token t
 * alone for the plain embedding.
 */
#ifndef EXAM_ENCODERS_HPP
#define EXAM_ENCODERS_HPP

#include "exam/graph.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace exam {

enum class EncoderKind { region, gru, embed_only };
std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

/// `as_printed` drops the reset gate and feeds the reset matrix into the
/// candidate state, reproducing a published variant of the cell.
enum class GruVariant { standard, as_printed };
std::string to_string(GruVariant variant);
GruVariant parse_gru_variant(std::string_view name);

/// Uniform range for embedding tables and region context weights.
inline constexpr double kEmbeddingInitRange = 0.05;

/// Gate matrices act on the row vector [h_{t-1}, e_t] and are each
/// (hidden + input) x hidden. No biases. The initial state is zero.
template <typename T> struct GruParams {
  Tensor<T> update;
  Tensor<T> reset;
  Tensor<T> candidate;
  GruVariant variant = GruVariant::standard;

  std::size_t hidden() const { return update.cols(); }
  std::size_t input() const { return update.rows() - update.cols(); }

  static GruParams init(std::size_t input, std::size_t hidden,
                        std::mt19937_64 &rng,
                        GruVariant variant = GruVariant::standard);
};

/// E is v x k. U is v x (2s+1) x k; U[w] is the context matrix K_w whose
/// row s + t weights the embedding of the word t positions away.
template <typename T> struct RegionParams {
  Tensor<T> embedding;
  Tensor<T> context;
  std::size_t radius = 0;

  std::size_t width() const { return embedding.cols(); }

  static RegionParams init(std::size_t vocab, std::size_t dim,
                           std::size_t radius, std::mt19937_64 &rng);
};

template <typename T>
Tensor<T> gru_encode(Graph<T> &graph, std::span<const std::int32_t> ids,
                     const GruParams<T> &params, const Tensor<T> &embeddings);

/// Element-wise max over the in-range context-aware vectors
/// K_{w_i, t} * e_{w_{i+t}}. Positions outside the sequence are skipped.
template <typename T>
Tensor<T> region_encode(Graph<T> &graph, std::span<const std::int32_t> ids,
                        const RegionParams<T> &params);

template <typename T>
Tensor<T> embed_only(Graph<T> &graph, std::span<const std::int32_t> ids,
                     const Tensor<T> &embeddings) {
  return graph.embedding_lookup(embeddings, ids);
}

/// Embedding table initialised uniformly in +-kEmbeddingInitRange, marked
/// row-sparse and trainable.
template <typename T>
Tensor<T> make_embedding_table(std::size_t vocab, std::size_t dim,
                               std::mt19937_64 &rng);

} // namespace exam

#endif // EXAM_ENCODERS_HPP
