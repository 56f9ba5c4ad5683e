// SPDX-License-Identifier: Apache-2.0
/**
 * @file   training.hpp
 * @brief  Losses, Adam, and the epoch loop with validation early stopping.
 */
#ifndef EXAM_TRAINING_HPP
#define EXAM_TRAINING_HPP

#include "exam/metrics.hpp"
#include "exam/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace exam {

/// -log p[label], with p clamped below at kLogEpsilon.
double cross_entropy_loss(std::span<const double> probabilities,
                          std::int32_t label);
/// Mean of cross_entropy_loss over rows of a batch.
double cross_entropy_loss(const std::vector<std::vector<double>> &batch,
                          std::span<const std::int32_t> labels);
/// -sum_j [l_j log p_j + (1 - l_j) log(1 - p_j)] over the c classes.
double binary_loss(std::span<const double> probabilities,
                   const LabelSet &labels);

class NonFiniteGradient : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0; ///< L2 coefficient added to the gradient
};

/// Adam with bias correction. Row-sparse tensors are updated lazily: only
/// rows that received gradient this step have their moments advanced.
template <typename T> class Adam {
public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// A non-finite gradient aborts before any parameter changes.
  void step(std::span<NamedTensor<T>> params);
  std::uint64_t steps() const noexcept { return steps_; }
  const AdamOptions &options() const noexcept { return options_; }

private:
  AdamOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// Rescales gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename T>
double clip_global_norm(std::span<NamedTensor<T>> params, double max_norm);

template <typename T> void zero_grads(std::span<NamedTensor<T>> params) {
  for (auto &p : params)
    p.tensor.zero_grad();
}

enum class StopReason { max_epochs, early_stopping, non_finite };
std::string to_string(StopReason reason);

struct TrainOptions {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  double grad_clip = 0.0; ///< 0 disables clipping
  double weight_decay = 0.0;
  LogBase log_base = LogBase::natural;
  std::ostream *log = nullptr;
};

struct EpochRecord {
  std::size_t epoch = 0; ///< 1-based
  double train_loss = 0.0;
  double validation_metric = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::string best_checkpoint;
  StopReason stop_reason = StopReason::max_epochs;
  std::string message;

  std::string to_json() const;
};

/// Invoked whenever the validation metric improves; returns where the
/// checkpoint was written (may be empty).
using ImprovementHook =
    std::function<std::string(const Model<float> &, const EpochRecord &)>;

/// Trains on split.train, scoring split.validation after each epoch with
/// accuracy (multi-class) or f1 (multi-label). Leaves the model holding the
/// best-scoring parameters.
TrainReport train(Model<float> &model, const DatasetSplit &split,
                  const TrainOptions &options, ImprovementHook on_improve = {});

EvalSummary evaluate(const Model<float> &model,
                     std::span<const Instance> instances,
                     LogBase log_base = LogBase::natural);

/// Loss of one instance recorded on `graph`, matching the model's task.
template <typename T>
Tensor<T> instance_loss(Graph<T> &graph, const Model<T> &model,
                        const Instance &instance,
                        std::mt19937_64 *dropout_rng = nullptr);

} // namespace exam

#endif // EXAM_TRAINING_HPP
