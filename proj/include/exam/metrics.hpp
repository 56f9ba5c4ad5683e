// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.hpp
 * @brief  Accuracy for multi-class runs; rank-weighted precision, recall@5
 *         and their combined score for multi-label runs.
 */
#ifndef EXAM_METRICS_HPP
#define EXAM_METRICS_HPP

#include "exam/text_data.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace exam {

/// Metric requested on input for which it has no value (e.g. no instances).
class UndefinedMetric : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

inline constexpr std::size_t kTopK = 5;

enum class LogBase { natural, two };
LogBase parse_log_base(std::string_view name);
std::string to_string(LogBase base);

struct RankedPrediction {
  std::vector<std::int32_t> top; ///< min(5, c) distinct ids, best first
  LabelSet truth;

  /// Orders classes by descending probability, ties by ascending id.
  static RankedPrediction from_scores(std::span<const double> scores,
                                      LabelSet truth);
};

double accuracy(std::span<const std::int32_t> predictions,
                std::span<const std::int32_t> truths);

/// Sum over pos = 1..5 of Precision@pos / log(pos + 1).
double weighted_precision(const RankedPrediction &pred,
                          LogBase base = LogBase::natural);
double recall_at_5(const RankedPrediction &pred);
/// precision * recall / (precision + recall); 0 when both are 0.
double f1(double precision, double recall);

struct EvalSummary {
  Task task = Task::multiclass;
  std::size_t count = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall_at_5 = 0.0;
  double f1 = 0.0;

  /// The headline number: accuracy or f1.
  double primary() const { return task == Task::multiclass ? accuracy : f1; }
  /// JSON with six decimals, keys per task.
  std::string to_json() const;
};

/// Dataset scores: precision and recall are instance means, combined by f1.
EvalSummary summarize_multilabel(std::span<const RankedPrediction> preds,
                                 LogBase base = LogBase::natural);
EvalSummary summarize_multiclass(std::span<const std::int32_t> predictions,
                                 std::span<const std::int32_t> truths);

} // namespace exam

#endif // EXAM_METRICS_HPP
