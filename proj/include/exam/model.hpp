// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model.hpp
 * @brief  Interaction and aggregation layers, the assembled classifier and
 *         the two encoding-based baselines.
 *
 * The interaction layer scores every (class, word) pair with a dot product
 * between a trainable class representation and the word's encoder output,
 * giving a c x n matrix I = T H^T. A two-layer MLP shared by all classes maps
 * each row of I to one logit.
 */
#ifndef EXAM_MODEL_HPP
#define EXAM_MODEL_HPP

#include "exam/encoders.hpp"
#include "exam/graph.hpp"
#include "exam/text_data.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace exam {

enum class ModelKind { exam, fasttext, encoder_only };
std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Raised when an operation does not apply to the model kind at hand.
class UnsupportedOperation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

struct ModelConfig {
  Task task = Task::multiclass;
  ModelKind kind = ModelKind::exam;
  EncoderKind encoder = EncoderKind::region;
  GruVariant gru_variant = GruVariant::standard;

  std::size_t vocab_size = 0;
  std::size_t num_classes = 0;
  std::size_t embed_dim = 128;   ///< k
  std::size_t seq_len = 64;      ///< n
  std::size_t region_radius = 3; ///< s; region size is 2s+1
  std::size_t gru_hidden = 0;    ///< 0 means embed_dim
  std::size_t agg_hidden = 0;    ///< 0 means 2n

  bool mask_padding_interactions = false;
  double dropout = 0.0; ///< applied to H while training

  std::size_t encoder_width() const;
  std::size_t aggregation_hidden() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

template <typename T> struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// W1 is n x h, b is 1 x h, W2 is h x 1; one set shared by every class.
template <typename T> struct AggregationParams {
  Tensor<T> w1;
  Tensor<T> bias;
  Tensor<T> w2;
};

/// I = T H^T, so I[s][t] = <T_s, H_t>.
template <typename T>
Tensor<T> interact(Graph<T> &graph, const Tensor<T> &words,
                   const Tensor<T> &classes);

/// o^s = ReLU(I_s W1 + b) W2 for every class row s; returns 1 x c logits.
template <typename T>
Tensor<T> aggregate(Graph<T> &graph, const Tensor<T> &interaction,
                    const AggregationParams<T> &params);

/// Mean-pooled embeddings through a dense layer: f W + b.
template <typename T>
Tensor<T> fasttext_forward(Graph<T> &graph, std::span<const std::int32_t> ids,
                           const Tensor<T> &embeddings, const Tensor<T> &fc,
                           const Tensor<T> &bias);

/// Interaction with class matrix `classes` (c x k), aggregated by averaging
/// each row of I over the n positions, plus bias. With classes = fc^T this
/// computes the same logits as fasttext_forward.
template <typename T>
Tensor<T> exam_average_aggregation_forward(Graph<T> &graph,
                                           std::span<const std::int32_t> ids,
                                           const Tensor<T> &embeddings,
                                           const Tensor<T> &classes,
                                           const Tensor<T> &bias);

/// Column-wise max over H followed by a dense layer, without interaction.
template <typename T>
Tensor<T> encoder_only_forward(Graph<T> &graph, const Tensor<T> &words,
                               const Tensor<T> &fc, const Tensor<T> &bias);

struct InteractionRecord {
  std::vector<std::vector<double>> matrix; ///< c rows of n scores
  std::vector<std::string> tokens;
  std::vector<std::string> class_names;
  std::vector<bool> padding_mask;

  std::string to_json() const;
  static InteractionRecord from_json(std::string_view text);
};

template <typename T> class Model {
public:
  Model(ModelConfig config, std::uint64_t seed);

  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;
  Model(Model &&) noexcept = default;
  Model &operator=(Model &&) noexcept = default;

  const ModelConfig &config() const { return config_; }

  /// Declaration order; checkpoints follow it.
  std::vector<NamedTensor<T>> &parameters() { return params_; }
  const std::vector<NamedTensor<T>> &parameters() const { return params_; }
  const Tensor<T> &parameter(std::string_view name) const;

  Tensor<T> encode(Graph<T> &graph, std::span<const std::int32_t> ids) const;
  /// c x n interaction matrix. Only EXAM models have one.
  Tensor<T> interaction(Graph<T> &graph,
                        std::span<const std::int32_t> ids) const;
  /// 1 x c logits. A non-null rng enables dropout on H.
  Tensor<T> logits(Graph<T> &graph, std::span<const std::int32_t> ids,
                   std::mt19937_64 *dropout_rng = nullptr) const;
  /// Softmax for multi-class, element-wise sigmoid for multi-label.
  Tensor<T> probabilities(Graph<T> &graph,
                          std::span<const std::int32_t> ids) const;
  /// Probabilities computed without recording a graph.
  std::vector<T> predict(std::span<const std::int32_t> ids) const;

  /// Snapshot / restore of every parameter value, used for best-epoch keeping.
  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>> &values);

private:
  void add(std::string name, Tensor<T> tensor);
  const Tensor<T> &embeddings() const;
  AggregationParams<T> aggregation() const;

  ModelConfig config_;
  std::vector<NamedTensor<T>> params_;
  std::optional<GruParams<T>> gru_;
  std::optional<RegionParams<T>> region_;
};

/// Interaction matrix of one instance with tokens and class names attached.
/// Throws UnsupportedOperation for non-EXAM models.
template <typename T>
InteractionRecord export_interaction(const Instance &instance,
                                     const Model<T> &model,
                                     std::span<const std::string> class_names);

} // namespace exam

#endif // EXAM_MODEL_HPP
