// SPDX-License-Identifier: Apache-2.0
#include "exam/model.hpp"

#include <json.hpp>

#include <algorithm>

namespace exam {

std::string to_string(ModelKind kind) {
  switch (kind) {
  case ModelKind::exam:
    return "exam";
  case ModelKind::fasttext:
    return "fasttext";
  case ModelKind::encoder_only:
    return "encoder_only";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "exam")
    return ModelKind::exam;
  if (name == "fasttext")
    return ModelKind::fasttext;
  if (name == "encoder_only")
    return ModelKind::encoder_only;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

std::size_t ModelConfig::encoder_width() const {
  if (encoder == EncoderKind::gru)
    return gru_hidden ? gru_hidden : embed_dim;
  return embed_dim;
}

std::size_t ModelConfig::aggregation_hidden() const {
  return agg_hidden ? agg_hidden : 2 * seq_len;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char *field) {
    if (v == 0)
      throw ConfigError(std::string(field) + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(embed_dim, "embed_dim");
  positive(seq_len, "seq_len");
  if (num_classes < 2)
    throw ConfigError("num_classes must be >= 2");
  if (kind == ModelKind::fasttext && encoder != EncoderKind::embed_only)
    throw ConfigError("encoder: fasttext requires embed_only, got " +
                      to_string(encoder));
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout must lie in [0, 1)");
}

template <typename T>
Tensor<T> interact(Graph<T> &graph, const Tensor<T> &words,
                   const Tensor<T> &classes) {
  if (words.cols() != classes.cols())
    throw DimensionError("interact: word width " +
                         std::to_string(words.cols()) +
                         " differs from class width " +
                         std::to_string(classes.cols()) + " (" +
                         shape_to_string(words.shape()) + " vs " +
                         shape_to_string(classes.shape()) + ")");
  return graph.matmul(classes, graph.transpose(words));
}

template <typename T>
Tensor<T> aggregate(Graph<T> &graph, const Tensor<T> &interaction,
                    const AggregationParams<T> &params) {
  if (interaction.cols() != params.w1.rows())
    throw DimensionError("aggregate: interaction has " +
                         std::to_string(interaction.cols()) +
                         " columns but W1 expects " +
                         std::to_string(params.w1.rows()));
  const Tensor<T> hidden = graph.relu(
      graph.add(graph.matmul(interaction, params.w1), params.bias));
  return graph.transpose(graph.matmul(hidden, params.w2));
}

template <typename T>
Tensor<T> fasttext_forward(Graph<T> &graph, std::span<const std::int32_t> ids,
                           const Tensor<T> &embeddings, const Tensor<T> &fc,
                           const Tensor<T> &bias) {
  const Tensor<T> pooled = graph.mean_rows(embed_only(graph, ids, embeddings));
  return graph.add(graph.matmul(pooled, fc), bias);
}

template <typename T>
Tensor<T> exam_average_aggregation_forward(Graph<T> &graph,
                                           std::span<const std::int32_t> ids,
                                           const Tensor<T> &embeddings,
                                           const Tensor<T> &classes,
                                           const Tensor<T> &bias) {
  const Tensor<T> words = embed_only(graph, ids, embeddings);
  const Tensor<T> scores = interact(graph, words, classes);
  return graph.add(graph.mean_rows(graph.transpose(scores)), bias);
}

template <typename T>
Tensor<T> encoder_only_forward(Graph<T> &graph, const Tensor<T> &words,
                               const Tensor<T> &fc, const Tensor<T> &bias) {
  const Tensor<T> pooled = graph.max_over_axis(words, 0);
  return graph.add(graph.matmul(pooled, fc), bias);
}

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t v = config_.vocab_size;
  const std::size_t k = config_.embed_dim;
  const std::size_t c = config_.num_classes;
  const std::size_t width = config_.encoder_width();

  switch (config_.encoder) {
  case EncoderKind::region:
    region_ = RegionParams<T>::init(v, k, config_.region_radius, rng);
    add("embedding", region_->embedding);
    add("region_context", region_->context);
    break;
  case EncoderKind::gru:
    add("embedding", make_embedding_table<T>(v, k, rng));
    gru_ = GruParams<T>::init(k, width, rng, config_.gru_variant);
    add("gru_update", gru_->update);
    add("gru_reset", gru_->reset);
    add("gru_candidate", gru_->candidate);
    break;
  case EncoderKind::embed_only:
    add("embedding", make_embedding_table<T>(v, k, rng));
    break;
  }

  auto trainable = [](Tensor<T> t) {
    t.set_requires_grad(true);
    return t;
  };
  if (config_.kind == ModelKind::exam) {
    const std::size_t n = config_.seq_len;
    const std::size_t h = config_.aggregation_hidden();
    add("class_repr", trainable(Tensor<T>::glorot(c, width, rng)));
    add("agg_w1", trainable(Tensor<T>::glorot(n, h, rng)));
    add("agg_b", trainable(Tensor<T>({1, h})));
    add("agg_w2", trainable(Tensor<T>::glorot(h, 1, rng)));
  } else {
    add("fc_w", trainable(Tensor<T>::glorot(width, c, rng)));
    add("fc_b", trainable(Tensor<T>({1, c})));
  }
}

template <typename T> void Model<T>::add(std::string name, Tensor<T> tensor) {
  params_.push_back({std::move(name), std::move(tensor)});
}

template <typename T>
const Tensor<T> &Model<T>::parameter(std::string_view name) const {
  for (const auto &p : params_)
    if (p.name == name)
      return p.tensor;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename T> const Tensor<T> &Model<T>::embeddings() const {
  return params_.front().tensor;
}

template <typename T> AggregationParams<T> Model<T>::aggregation() const {
  return {parameter("agg_w1"), parameter("agg_b"), parameter("agg_w2")};
}

template <typename T>
Tensor<T> Model<T>::encode(Graph<T> &graph,
                           std::span<const std::int32_t> ids) const {
  if (ids.size() != config_.seq_len)
    throw DimensionError("model expects " + std::to_string(config_.seq_len) +
                         " ids, got " + std::to_string(ids.size()));
  switch (config_.encoder) {
  case EncoderKind::region:
    return region_encode(graph, ids, *region_);
  case EncoderKind::gru:
    return gru_encode(graph, ids, *gru_, embeddings());
  case EncoderKind::embed_only:
    return embed_only(graph, ids, embeddings());
  }
  throw std::logic_error("unknown encoder");
}

namespace {

template <typename T>
Tensor<T> padding_mask_row(std::span<const std::int32_t> ids) {
  Tensor<T> mask({1, ids.size()});
  for (std::size_t t = 0; t < ids.size(); ++t)
    mask.at(0, t) = ids[t] == Vocabulary::kPadId ? T(0) : T(1);
  return mask;
}

} // namespace

template <typename T>
Tensor<T> Model<T>::interaction(Graph<T> &graph,
                                std::span<const std::int32_t> ids) const {
  if (config_.kind != ModelKind::exam)
    throw UnsupportedOperation("interaction matrix is only defined for exam "
                               "models, not " +
                               to_string(config_.kind));
  return interact(graph, encode(graph, ids), parameter("class_repr"));
}

template <typename T>
Tensor<T> Model<T>::logits(Graph<T> &graph, std::span<const std::int32_t> ids,
                           std::mt19937_64 *dropout_rng) const {
  if (config_.kind == ModelKind::fasttext)
    return fasttext_forward(graph, ids, embeddings(), parameter("fc_w"),
                            parameter("fc_b"));

  Tensor<T> words = encode(graph, ids);
  if (dropout_rng && config_.dropout > 0.0) {
    const double keep = 1.0 - config_.dropout;
    std::bernoulli_distribution coin(keep);
    Tensor<T> mask(words.shape());
    for (auto &m : mask.data())
      m = coin(*dropout_rng) ? static_cast<T>(1.0 / keep) : T(0);
    words = graph.mul(words, mask);
  }
  if (config_.kind == ModelKind::encoder_only)
    return encoder_only_forward(graph, words, parameter("fc_w"),
                                parameter("fc_b"));

  Tensor<T> scores = interact(graph, words, parameter("class_repr"));
  if (config_.mask_padding_interactions)
    scores = graph.mul(scores, padding_mask_row<T>(ids));
  return aggregate(graph, scores, aggregation());
}

template <typename T>
Tensor<T> Model<T>::probabilities(Graph<T> &graph,
                                  std::span<const std::int32_t> ids) const {
  const Tensor<T> out = logits(graph, ids);
  return config_.task == Task::multiclass ? graph.softmax_row(out)
                                          : graph.sigmoid(out);
}

template <typename T>
std::vector<T> Model<T>::predict(std::span<const std::int32_t> ids) const {
  Graph<T> graph(GradMode::disabled);
  const Tensor<T> p = probabilities(graph, ids);
  return {p.data().begin(), p.data().end()};
}

template <typename T>
std::vector<std::vector<T>> Model<T>::snapshot() const {
  std::vector<std::vector<T>> values;
  values.reserve(params_.size());
  for (const auto &p : params_)
    values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return values;
}

template <typename T>
void Model<T>::restore(const std::vector<std::vector<T>> &values) {
  if (values.size() != params_.size())
    throw DimensionError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].tensor.data();
    if (values[i].size() != dst.size())
      throw DimensionError("restore: size mismatch for " + params_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

template <typename T>
InteractionRecord export_interaction(const Instance &instance,
                                     const Model<T> &model,
                                     std::span<const std::string> class_names) {
  const auto &cfg = model.config();
  if (cfg.kind != ModelKind::exam)
    throw UnsupportedOperation("export_interaction needs an exam model, got " +
                               to_string(cfg.kind));
  Graph<T> graph(GradMode::disabled);
  const Tensor<T> scores = model.interaction(graph, instance.ids);
  InteractionRecord rec;
  rec.matrix.assign(scores.rows(), std::vector<double>(scores.cols()));
  for (std::size_t s = 0; s < scores.rows(); ++s)
    for (std::size_t t = 0; t < scores.cols(); ++t)
      rec.matrix[s][t] = static_cast<double>(scores.at(s, t));
  rec.tokens = instance.tokens;
  rec.padding_mask.resize(instance.ids.size());
  for (std::size_t t = 0; t < instance.ids.size(); ++t)
    rec.padding_mask[t] = instance.is_padding(t);
  for (std::size_t s = 0; s < cfg.num_classes; ++s)
    rec.class_names.push_back(s < class_names.size() ? class_names[s]
                                                     : std::to_string(s));
  return rec;
}

std::string InteractionRecord::to_json() const {
  nlohmann::ordered_json j;
  j["class_names"] = class_names;
  j["tokens"] = tokens;
  j["padding_mask"] = padding_mask;
  j["matrix"] = matrix;
  return j.dump(2);
}

InteractionRecord InteractionRecord::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  InteractionRecord rec;
  rec.class_names = j.at("class_names").get<std::vector<std::string>>();
  rec.tokens = j.at("tokens").get<std::vector<std::string>>();
  rec.padding_mask = j.at("padding_mask").get<std::vector<bool>>();
  rec.matrix = j.at("matrix").get<std::vector<std::vector<double>>>();
  return rec;
}

#define EXAM_INSTANTIATE(T)                                                    \
  template Tensor<T> interact(Graph<T> &, const Tensor<T> &,                  \
                              const Tensor<T> &);                             \
  template Tensor<T> aggregate(Graph<T> &, const Tensor<T> &,                 \
                               const AggregationParams<T> &);                 \
  template Tensor<T> fasttext_forward(Graph<T> &,                             \
                                      std::span<const std::int32_t>,          \
                                      const Tensor<T> &, const Tensor<T> &,   \
                                      const Tensor<T> &);                     \
  template Tensor<T> exam_average_aggregation_forward(                        \
      Graph<T> &, std::span<const std::int32_t>, const Tensor<T> &,           \
      const Tensor<T> &, const Tensor<T> &);                                  \
  template Tensor<T> encoder_only_forward(Graph<T> &, const Tensor<T> &,      \
                                          const Tensor<T> &,                  \
                                          const Tensor<T> &);                 \
  template class Model<T>;                                                    \
  template InteractionRecord export_interaction(                              \
      const Instance &, const Model<T> &, std::span<const std::string>);

EXAM_INSTANTIATE(float)
EXAM_INSTANTIATE(double)

#undef EXAM_INSTANTIATE

} // namespace exam
