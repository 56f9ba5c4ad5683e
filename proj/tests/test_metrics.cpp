// SPDX-License-Identifier: Apache-2.0
#include "exam/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

#include <cmath>
#include <json.hpp>

using namespace exam;

namespace {

double all_relevant_closed_form() {
  return 1 / std::log(2.0) + 1 / std::log(3.0) + 1 / std::log(4.0) +
         1 / std::log(5.0) + 1 / std::log(6.0);
}

RankedPrediction ranked(std::vector<std::int32_t> top, LabelSet truth) {
  return RankedPrediction{std::move(top), std::move(truth)};
}

} // namespace

TEST(Accuracy, Basics) {
  const std::vector<std::int32_t> t{0, 1, 2, 3};
  EXPECT_EQ(accuracy(t, t), 1.0);
  const std::vector<std::int32_t> none{1, 2, 3, 0};
  EXPECT_EQ(accuracy(none, t), 0.0);
  const std::vector<std::int32_t> three{0, 1, 2, 0};
  EXPECT_EQ(accuracy(three, t), 0.75);
}

TEST(Accuracy, EmptyIsUndefined) {
  EXPECT_THROW(accuracy({}, {}), UndefinedMetric);
}

TEST(WeightedPrecision, AllRelevantClosedForm) {
  EXPECT_NEAR(weighted_precision(ranked({4, 1, 7, 0, 2}, {0, 1, 2, 4, 7, 9})),
              all_relevant_closed_form(), 1e-12);
}

TEST(WeightedPrecision, NoHits) {
  EXPECT_EQ(weighted_precision(ranked({4, 1, 7, 0, 2}, {3})), 0.0);
}

TEST(WeightedPrecision, TwoOfFiveExample) {
  // truth {A, B}, ranking [A, X, B, Y, Z]
  const double expected = 1 / std::log(2.0) + 0.5 / std::log(3.0) +
                          (2.0 / 3.0) / std::log(4.0) + 0.5 / std::log(5.0) +
                          0.4 / std::log(6.0);
  EXPECT_NEAR(weighted_precision(ranked({0, 5, 1, 6, 7}, {0, 1})), expected,
              1e-12);
}

TEST(WeightedPrecision, BaseTwo) {
  const double expected = 1 / std::log2(2.0) + 1 / std::log2(3.0) +
                          1 / std::log2(4.0) + 1 / std::log2(5.0) +
                          1 / std::log2(6.0);
  EXPECT_NEAR(weighted_precision(ranked({0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}),
                                 LogBase::two),
              expected, 1e-12);
}

TEST(WeightedPrecision, PromotingRelevantTagNeverHurts) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int32_t> top{0, 1, 2, 3, 4};
    std::shuffle(top.begin(), top.end(), rng);
    LabelSet truth;
    for (std::int32_t c = 0; c < 5; ++c)
      if (rng() % 2)
        truth.push_back(c);
    for (std::size_t pos = 1; pos < 5; ++pos) {
      if (!std::binary_search(truth.begin(), truth.end(), top[pos]) ||
          std::binary_search(truth.begin(), truth.end(), top[pos - 1]))
        continue;
      auto better = top;
      std::swap(better[pos], better[pos - 1]);
      EXPECT_GE(weighted_precision(ranked(better, truth)),
                weighted_precision(ranked(top, truth)));
    }
  }
}

TEST(Recall, Examples) {
  EXPECT_EQ(recall_at_5(ranked({0, 9, 1, 8, 7}, {0, 1})), 1.0);
  EXPECT_NEAR(recall_at_5(ranked({0, 9, 5, 8, 7}, {0, 1, 2})), 1.0 / 3.0,
              1e-15);
  EXPECT_EQ(recall_at_5(ranked({3, 9, 5, 8, 7}, {0, 1})), 0.0);
}

TEST(Recall, EmptyTruthIsUndefined) {
  EXPECT_THROW(recall_at_5(ranked({0, 1, 2, 3, 4}, {})), UndefinedMetric);
}

TEST(F1, PrintedFormula) {
  EXPECT_DOUBLE_EQ(f1(0.8, 0.8), 0.4);
  EXPECT_EQ(f1(1.3, 0.0), 0.0);
  EXPECT_EQ(f1(0.0, 0.0), 0.0);
  EXPECT_NEAR(f1(1.3, 0.55), 1.3 * 0.55 / 1.85, 1e-15);
  EXPECT_NEAR(f1(1.3, 0.55), 0.3865, 1e-4);
}

TEST(Ranking, TiesByAscendingId) {
  const std::vector<double> scores{0.1, 0.3, 0.3, 0.05, 0.3, 0.2, 0.0};
  const auto r = RankedPrediction::from_scores(scores, {1});
  EXPECT_EQ(r.top, (std::vector<std::int32_t>{1, 2, 4, 5, 0}));
}

TEST(Ranking, FewerClassesThanFive) {
  const std::vector<double> scores{0.2, 0.7, 0.1};
  EXPECT_EQ(RankedPrediction::from_scores(scores, {0}).top,
            (std::vector<std::int32_t>{1, 0, 2}));
}

TEST(Summary, MultilabelCombinesInstanceMeans) {
  const std::vector<RankedPrediction> preds{ranked({0, 5, 1, 6, 7}, {0, 1}),
                                            ranked({3, 9, 5, 8, 7}, {0, 1})};
  const auto s = summarize_multilabel(preds);
  const double p = (weighted_precision(preds[0]) + 0.0) / 2;
  const double r = (1.0 + 0.0) / 2;
  EXPECT_EQ(s.count, 2u);
  EXPECT_NEAR(s.precision, p, 1e-15);
  EXPECT_NEAR(s.recall_at_5, r, 1e-15);
  EXPECT_NEAR(s.f1, p * r / (p + r), 1e-15);
  EXPECT_EQ(s.primary(), s.f1);
}

TEST(Summary, InstanceOrderIrrelevant) {
  std::vector<RankedPrediction> preds{ranked({0, 5, 1, 6, 7}, {0, 1}),
                                      ranked({3, 9, 5, 8, 7}, {0, 3, 4}),
                                      ranked({2, 1, 0, 4, 3}, {2})};
  const auto a = summarize_multilabel(preds);
  std::reverse(preds.begin(), preds.end());
  const auto b = summarize_multilabel(preds);
  EXPECT_NEAR(a.f1, b.f1, 1e-15);
}

TEST(Summary, JsonKeysAndSixDecimals) {
  const std::vector<std::int32_t> p{0, 1, 1}, t{0, 1, 0};
  const auto mc = summarize_multiclass(p, t);
  const auto text = mc.to_json();
  EXPECT_NE(text.find("0.666667"), std::string::npos) << text;
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.at("task"), "multiclass");
  EXPECT_EQ(j.at("count"), 3);
  EXPECT_FALSE(j.contains("f1"));

  const std::vector<RankedPrediction> preds{ranked({0, 1, 2, 3, 4}, {0})};
  const auto ml = nlohmann::json::parse(summarize_multilabel(preds).to_json());
  EXPECT_TRUE(ml.contains("precision"));
  EXPECT_TRUE(ml.contains("recall_at_5"));
  EXPECT_TRUE(ml.contains("f1"));
  EXPECT_FALSE(ml.contains("accuracy"));
}

TEST(Summary, Bounds) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> scores(12);
    for (auto &s : scores)
      s = std::uniform_real_distribution<double>(0, 1)(rng);
    LabelSet truth;
    for (std::int32_t c = 0; c < 12; ++c)
      if (rng() % 4 == 0 && truth.size() < 5)
        truth.push_back(c);
    if (truth.empty())
      truth.push_back(0);
    const auto pred = RankedPrediction::from_scores(scores, truth);
    const double wp = weighted_precision(pred);
    EXPECT_GE(wp, 0.0);
    EXPECT_LE(wp, all_relevant_closed_form() + 1e-12);
    EXPECT_GE(recall_at_5(pred), 0.0);
    EXPECT_LE(recall_at_5(pred), 1.0);
  }
}
