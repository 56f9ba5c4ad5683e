// SPDX-License-Identifier: Apache-2.0
#include "exam/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace exam {

double cross_entropy_loss(std::span<const double> probabilities,
                          std::int32_t label) {
  const auto idx = static_cast<std::size_t>(label);
  if (label < 0 || idx >= probabilities.size())
    throw IndexError("label " + std::to_string(label) + " outside " +
                     std::to_string(probabilities.size()) + " classes");
  return -std::log(std::max(probabilities[idx], kLogEpsilon));
}

double cross_entropy_loss(const std::vector<std::vector<double>> &batch,
                          std::span<const std::int32_t> labels) {
  if (batch.size() != labels.size() || batch.empty())
    throw DimensionError("cross_entropy_loss: batch of " +
                         std::to_string(batch.size()) + " with " +
                         std::to_string(labels.size()) + " labels");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    total += cross_entropy_loss(batch[i], labels[i]);
  return total / static_cast<double>(batch.size());
}

double binary_loss(std::span<const double> probabilities,
                   const LabelSet &labels) {
  double total = 0.0;
  for (std::size_t j = 0; j < probabilities.size(); ++j) {
    const bool on = std::binary_search(labels.begin(), labels.end(),
                                       static_cast<std::int32_t>(j));
    const double p = on ? probabilities[j] : 1.0 - probabilities[j];
    total -= std::log(std::max(p, kLogEpsilon));
  }
  return total;
}

namespace {

/// Visits gradient entries that may be non-zero: every entry of a dense
/// tensor, only the touched rows of a row-sparse one.
template <typename T, typename Fn>
void for_each_active_grad(Tensor<T> &t, Fn &&fn) {
  if (!t.has_grad())
    return;
  auto grad = t.grad();
  if (!t.row_sparse()) {
    for (auto &g : grad)
      fn(g);
    return;
  }
  const std::size_t width = t.cols();
  for (auto r : t.touched_rows())
    for (std::size_t j = r * width; j < (r + 1) * width; ++j)
      fn(grad[j]);
}

} // namespace

template <typename T> void Adam<T>::step(std::span<NamedTensor<T>> params) {
  if (first_.empty()) {
    for (const auto &p : params) {
      first_.emplace_back(p.tensor.size(), 0.0);
      second_.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (first_.size() != params.size())
    throw DimensionError("Adam: parameter list changed between steps");

  for (auto &p : params)
    for_each_active_grad(p.tensor, [&](T &g) {
      if (!std::isfinite(static_cast<double>(g)))
        throw NonFiniteGradient("non-finite gradient in parameter '" + p.name +
                                "'");
    });

  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = options_.learning_rate;
  const double eps = options_.epsilon;
  const double decay = options_.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> &t = params[i].tensor;
    if (!t.has_grad())
      continue;
    auto data = t.data();
    auto grad = t.grad();
    auto &m = first_[i];
    auto &v = second_[i];
    auto update = [&](std::size_t j) {
      const double g = static_cast<double>(grad[j]) +
                       decay * static_cast<double>(data[j]);
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double mhat = m[j] / correction1;
      const double vhat = v[j] / correction2;
      data[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
    };
    if (t.row_sparse()) {
      const std::size_t width = t.cols();
      for (auto r : t.touched_rows())
        for (std::size_t j = r * width; j < (r + 1) * width; ++j)
          update(j);
    } else {
      for (std::size_t j = 0; j < data.size(); ++j)
        update(j);
    }
    t.zero_grad();
  }
}

template <typename T>
double clip_global_norm(std::span<NamedTensor<T>> params, double max_norm) {
  double sq = 0.0;
  for (auto &p : params)
    for_each_active_grad(p.tensor, [&](T &g) {
      sq += static_cast<double>(g) * static_cast<double>(g);
    });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto factor = static_cast<T>(max_norm / norm);
    for (auto &p : params)
      for_each_active_grad(p.tensor, [&](T &g) { g *= factor; });
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double clip_global_norm(std::span<NamedTensor<float>>, double);
template double clip_global_norm(std::span<NamedTensor<double>>, double);

std::string to_string(StopReason reason) {
  switch (reason) {
  case StopReason::max_epochs:
    return "max_epochs";
  case StopReason::early_stopping:
    return "early_stopping";
  case StopReason::non_finite:
    return "non_finite";
  }
  return "?";
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = nlohmann::json::array();
  for (const auto &e : epochs)
    j["epochs"].push_back(nlohmann::ordered_json{
        {"epoch", e.epoch},
        {"train_loss", e.train_loss},
        {"validation_metric", e.validation_metric},
        {"seconds", e.seconds}});
  j["best_epoch"] = best_epoch;
  j["best_metric"] = best_metric;
  j["best_checkpoint"] = best_checkpoint;
  j["stop_reason"] = to_string(stop_reason);
  if (!message.empty())
    j["message"] = message;
  return j.dump(2);
}

template <typename T>
Tensor<T> instance_loss(Graph<T> &graph, const Model<T> &model,
                        const Instance &instance,
                        std::mt19937_64 *dropout_rng) {
  const Tensor<T> logits = model.logits(graph, instance.ids, dropout_rng);
  if (model.config().task == Task::multiclass) {
    if (!std::holds_alternative<std::int32_t>(instance.label))
      throw std::invalid_argument("multi-class model given a label set");
    return graph.softmax_cross_entropy(
        logits, static_cast<std::size_t>(instance.class_index()));
  }
  if (!std::holds_alternative<LabelSet>(instance.label))
    throw std::invalid_argument("multi-label model given a class index");
  std::vector<T> targets(model.config().num_classes, T(0));
  for (auto id : instance.label_set())
    targets.at(static_cast<std::size_t>(id)) = T(1);
  return graph.sigmoid_cross_entropy(logits, std::span<const T>(targets));
}

template Tensor<float> instance_loss(Graph<float> &, const Model<float> &,
                                     const Instance &, std::mt19937_64 *);
template Tensor<double> instance_loss(Graph<double> &, const Model<double> &,
                                      const Instance &, std::mt19937_64 *);

EvalSummary evaluate(const Model<float> &model,
                     std::span<const Instance> instances, LogBase log_base) {
  if (model.config().task == Task::multiclass) {
    std::vector<std::int32_t> predicted, truth;
    predicted.reserve(instances.size());
    truth.reserve(instances.size());
    for (const auto &inst : instances) {
      const auto p = model.predict(inst.ids);
      predicted.push_back(static_cast<std::int32_t>(
          std::max_element(p.begin(), p.end()) - p.begin()));
      truth.push_back(inst.class_index());
    }
    return summarize_multiclass(predicted, truth);
  }
  std::vector<RankedPrediction> ranked;
  ranked.reserve(instances.size());
  for (const auto &inst : instances) {
    const auto p = model.predict(inst.ids);
    const std::vector<double> scores(p.begin(), p.end());
    ranked.push_back(RankedPrediction::from_scores(scores, inst.label_set()));
  }
  return summarize_multilabel(ranked, log_base);
}

TrainReport train(Model<float> &model, const DatasetSplit &split,
                  const TrainOptions &options, ImprovementHook on_improve) {
  if (split.train.empty())
    throw ConfigError("training split is empty");
  if (options.batch_size < 1)
    throw ConfigError("batch_size must be >= 1");
  using clock = std::chrono::steady_clock;

  AdamOptions adam_options;
  adam_options.learning_rate = options.learning_rate;
  adam_options.weight_decay = options.weight_decay;
  Adam<float> adam(adam_options);
  std::mt19937_64 dropout_rng(options.seed ^ 0x5bd1e995ULL);
  auto &params = model.parameters();
  const std::span<const Instance> scored =
      split.validation.empty() ? std::span<const Instance>(split.train)
                               : std::span<const Instance>(split.validation);

  TrainReport report;
  auto best_values = model.snapshot();
  bool have_best = false;
  std::size_t bad_epochs = 0;
  report.stop_reason = StopReason::max_epochs;

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    const auto started = clock::now();
    double loss_sum = 0.0;
    bool diverged = false;
    const auto batches = epoch_batches(split.train.size(), options.batch_size,
                                       options.seed, epoch);
    for (const auto &batch : batches) {
      const float scale = 1.0f / static_cast<float>(batch.size());
      double batch_loss = 0.0;
      for (auto idx : batch) {
        Graph<float> graph;
        const Tensor<float> loss = instance_loss(
            graph, model, split.train[idx],
            model.config().dropout > 0.0 ? &dropout_rng : nullptr);
        batch_loss += loss.item();
        graph.backward(loss, scale);
      }
      if (!std::isfinite(batch_loss)) {
        diverged = true;
        report.message = "non-finite loss in epoch " + std::to_string(epoch);
        break;
      }
      loss_sum += batch_loss;
      if (options.grad_clip > 0.0)
        clip_global_norm(std::span<NamedTensor<float>>(params),
                         options.grad_clip);
      try {
        adam.step(params);
      } catch (const NonFiniteGradient &e) {
        diverged = true;
        report.message = e.what();
        break;
      }
    }
    if (diverged) {
      zero_grads(std::span<NamedTensor<float>>(params));
      model.restore(best_values);
      report.stop_reason = StopReason::non_finite;
      break;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(split.train.size());
    record.validation_metric = evaluate(model, scored, options.log_base).primary();
    record.seconds =
        std::chrono::duration<double>(clock::now() - started).count();
    report.epochs.push_back(record);
    if (options.log)
      *options.log << "epoch " << epoch << " loss " << record.train_loss
                   << " validation " << record.validation_metric << " ("
                   << record.seconds << " s)\n";

    if (!have_best || record.validation_metric > report.best_metric) {
      have_best = true;
      bad_epochs = 0;
      report.best_epoch = epoch;
      report.best_metric = record.validation_metric;
      best_values = model.snapshot();
      if (on_improve)
        report.best_checkpoint = on_improve(model, record);
    } else if (++bad_epochs > options.patience) {
      report.stop_reason = StopReason::early_stopping;
      break;
    }
  }
  model.restore(best_values);
  return report;
}

} // namespace exam
