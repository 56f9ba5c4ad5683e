// SPDX-License-Identifier: Apache-2.0
#include "exam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace exam {

LogBase parse_log_base(std::string_view name) {
  if (name == "e")
    return LogBase::natural;
  if (name == "2")
    return LogBase::two;
  throw ConfigError("precision_log_base must be \"e\" or \"2\", got '" +
                    std::string(name) + "'");
}

std::string to_string(LogBase base) {
  return base == LogBase::natural ? "e" : "2";
}

RankedPrediction RankedPrediction::from_scores(std::span<const double> scores,
                                               LabelSet truth) {
  std::vector<std::int32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(kTopK, scores.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k),
                    order.end(), [&](std::int32_t a, std::int32_t b) {
                      const double sa = scores[static_cast<std::size_t>(a)];
                      const double sb = scores[static_cast<std::size_t>(b)];
                      return sa != sb ? sa > sb : a < b;
                    });
  order.resize(k);
  return {std::move(order), std::move(truth)};
}

double accuracy(std::span<const std::int32_t> predictions,
                std::span<const std::int32_t> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("accuracy: " +
                                std::to_string(predictions.size()) +
                                " predictions for " +
                                std::to_string(truths.size()) + " labels");
  if (predictions.empty())
    throw UndefinedMetric("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    hits += predictions[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

namespace {

bool relevant(const LabelSet &truth, std::int32_t id) {
  return std::binary_search(truth.begin(), truth.end(), id);
}

} // namespace

double weighted_precision(const RankedPrediction &pred, LogBase base) {
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t pos = 1; pos <= pred.top.size(); ++pos) {
    hits += relevant(pred.truth, pred.top[pos - 1]);
    const double at_pos = static_cast<double>(hits) / static_cast<double>(pos);
    const double denom = base == LogBase::natural
                             ? std::log(static_cast<double>(pos + 1))
                             : std::log2(static_cast<double>(pos + 1));
    total += at_pos / denom;
  }
  return total;
}

double recall_at_5(const RankedPrediction &pred) {
  if (pred.truth.empty())
    throw UndefinedMetric("recall@5 with an empty label set");
  std::size_t hits = 0;
  for (auto id : pred.top)
    hits += relevant(pred.truth, id);
  return static_cast<double>(hits) / static_cast<double>(pred.truth.size());
}

double f1(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? precision * recall / sum : 0.0;
}

std::string EvalSummary::to_json() const {
  char buf[256];
  if (task == Task::multiclass)
    std::snprintf(buf, sizeof buf,
                  "{\"task\": \"multiclass\", \"count\": %zu, "
                  "\"accuracy\": %.6f}",
                  count, accuracy);
  else
    std::snprintf(buf, sizeof buf,
                  "{\"task\": \"multilabel\", \"count\": %zu, "
                  "\"precision\": %.6f, \"recall_at_5\": %.6f, \"f1\": %.6f}",
                  count, precision, recall_at_5, f1);
  return buf;
}

EvalSummary summarize_multilabel(std::span<const RankedPrediction> preds,
                                 LogBase base) {
  if (preds.empty())
    throw UndefinedMetric("multi-label metrics of an empty set");
  EvalSummary s;
  s.task = Task::multilabel;
  s.count = preds.size();
  for (const auto &p : preds) {
    s.precision += weighted_precision(p, base);
    s.recall_at_5 += recall_at_5(p);
  }
  s.precision /= static_cast<double>(preds.size());
  s.recall_at_5 /= static_cast<double>(preds.size());
  s.f1 = f1(s.precision, s.recall_at_5);
  return s;
}

EvalSummary summarize_multiclass(std::span<const std::int32_t> predictions,
                                 std::span<const std::int32_t> truths) {
  EvalSummary s;
  s.task = Task::multiclass;
  s.count = predictions.size();
  s.accuracy = accuracy(predictions, truths);
  return s;
}

} // namespace exam
