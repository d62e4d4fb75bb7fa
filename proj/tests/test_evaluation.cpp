#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "radtriage/errors.hpp"
#include "radtriage/evaluation.hpp"

using namespace radtriage;

namespace {

// Pairwise count: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auroc(const std::vector<double>& p, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      wins += p[i] > p[j] ? 1.0 : (p[i] == p[j] ? 0.5 : 0.0);
    }
  return wins / pairs;
}

Prediction pred(const std::string& patient, Anatomy a, double prob, int label) {
  return make_prediction(StudyKey{patient, a, "study1"}, {prob}, label, 0.5);
}

}  // namespace

TEST(Aggregate, MeanOfViews) {
  const std::vector<double> v{0.2, 0.4, 0.9};
  EXPECT_DOUBLE_EQ(aggregate_study(v), 0.5);
  EXPECT_THROW(aggregate_study(std::vector<double>{}), InputError);
  EXPECT_THROW(aggregate_study(std::vector<double>{0.5, 1.2}), InputError);
}

TEST(PointMetrics, WorkedExample) {
  const std::vector<double> p{0.9, 0.4, 0.6, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  const auto m = confusion_and_point_metrics(p, y, 0.5);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
}

TEST(PointMetrics, ThresholdIsInclusive) {
  const std::vector<double> p{0.5};
  const std::vector<int> y{1};
  EXPECT_EQ(confusion_and_point_metrics(p, y, 0.5).tp, 1u);
}

TEST(PointMetrics, DegenerateRatiosAreZero) {
  const std::vector<double> p{0.1, 0.2};
  const std::vector<int> y{0, 0};
  const auto m = confusion_and_point_metrics(p, y, 0.5);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.accuracy, 1.0);
}

TEST(PointMetrics, RejectsBadInput) {
  const std::vector<double> p{0.1, 0.2};
  EXPECT_THROW(confusion_and_point_metrics(p, std::vector<int>{1}, 0.5), InputError);
  EXPECT_THROW(confusion_and_point_metrics(p, std::vector<int>{1, 2}, 0.5), LabelError);
  EXPECT_THROW(confusion_and_point_metrics(std::vector<double>{}, std::vector<int>{}, 0.5), InputError);
}

TEST(Auroc, WorkedExample) {
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
}

TEST(Auroc, ConstantScoresGiveHalf) {
  const std::vector<double> p(6, 0.3);
  const std::vector<int> y{0, 1, 0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(auroc(p, y), 0.5);
  EXPECT_EQ(select_threshold(p, y).threshold, 0.0);
}

TEST(Auroc, SingleClassIsUndefined) {
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetricError);
}

TEST(Auroc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + gen() % 40;
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<double>(gen() % 7) / 6.0;  // coarse grid forces ties
      y[i] = static_cast<int>(gen() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(auroc(p, y), pairwise_auroc(p, y), 1e-12);
  }
}

TEST(Auroc, InvariantUnderMonotoneMaps) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> p(30), cube(30), sig(30);
  std::vector<int> y(30), flipped(30);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(gen);
    cube[i] = p[i] * p[i] * p[i];
    sig[i] = 1.0 / (1.0 + std::exp(-5.0 * p[i]));
    y[i] = static_cast<int>(i % 3 == 0);
    flipped[i] = 1 - y[i];
  }
  const double a = auroc(p, y);
  EXPECT_NEAR(auroc(cube, y), a, 1e-12);
  EXPECT_NEAR(auroc(sig, y), a, 1e-12);
  EXPECT_NEAR(auroc(p, flipped) + a, 1.0, 1e-12);
}

TEST(Threshold, YoudenOnSeparableSet) {
  const std::vector<double> p{0.1, 0.2, 0.7, 0.9};
  const std::vector<int> y{0, 0, 1, 1};
  const auto t = select_threshold(p, y);
  EXPECT_DOUBLE_EQ(t.threshold, 0.45);
  EXPECT_DOUBLE_EQ(t.youden_j, 1.0);
}

TEST(Threshold, DominatesFineGrid) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> p(25);
    std::vector<int> y(25);
    for (std::size_t i = 0; i < p.size(); ++i) {
      y[i] = static_cast<int>(gen() % 2);
      p[i] = std::clamp(u(gen) * 0.7 + 0.3 * y[i], 0.0, 1.0);
    }
    y[0] = 0;
    y[1] = 1;
    const auto best = select_threshold(p, y);
    for (int k = 0; k <= 1000; ++k) EXPECT_GE(best.youden_j + 1e-12, youden_j(p, y, k / 1000.0));
  }
}

TEST(Report, PerAnatomyOverallMacro) {
  std::vector<Prediction> preds{
      pred("p1", Anatomy::elbow, 0.9, 1), pred("p2", Anatomy::elbow, 0.2, 0),
      pred("p3", Anatomy::elbow, 0.6, 0), pred("p4", Anatomy::hand, 0.7, 1),
      pred("p5", Anatomy::hand, 0.4, 1),  pred("p6", Anatomy::wrist, 0.8, 1),
  };
  const auto r = build_report(preds, 0.5);
  ASSERT_EQ(r.anatomy_rows.size(), 3u);
  EXPECT_EQ(r.anatomy_rows[0].name, "elbow");
  EXPECT_EQ(r.anatomy_rows[1].name, "hand");
  EXPECT_EQ(r.anatomy_rows[2].name, "wrist");

  // elbow: tp 1, fp 1, tn 1 -> acc 2/3, prec 1/2, rec 1, f1 2/3, auroc 1
  const auto& e = r.anatomy_rows[0];
  EXPECT_NEAR(e.metrics.accuracy, 2.0 / 3, 1e-12);
  EXPECT_NEAR(e.metrics.precision, 0.5, 1e-12);
  EXPECT_NEAR(e.metrics.recall, 1.0, 1e-12);
  EXPECT_NEAR(e.metrics.f1, 2.0 / 3, 1e-12);
  EXPECT_NEAR(*e.auroc, 1.0, 1e-12);
  // hand: tp 1, fn 1 -> acc 1/2, prec 1, rec 1/2, f1 2/3, one class
  const auto& h = r.anatomy_rows[1];
  EXPECT_NEAR(h.metrics.accuracy, 0.5, 1e-12);
  EXPECT_NEAR(h.metrics.f1, 2.0 / 3, 1e-12);
  EXPECT_FALSE(h.auroc.has_value());

  // overall: tp 3, fp 1, tn 1, fn 1
  EXPECT_EQ(r.overall.metrics.tp, 3u);
  EXPECT_NEAR(r.overall.metrics.accuracy, 4.0 / 6, 1e-12);
  EXPECT_NEAR(*r.overall.auroc, pairwise_auroc({0.9, 0.2, 0.6, 0.7, 0.4, 0.8}, {1, 0, 0, 1, 1, 1}), 1e-12);

  // macro: plain mean of rows, AUROC undefined because hand has one class
  EXPECT_NEAR(r.macro.metrics.accuracy, (2.0 / 3 + 0.5 + 1.0) / 3, 1e-12);
  EXPECT_NEAR(r.macro.metrics.f1, (2.0 / 3 + 2.0 / 3 + 1.0) / 3, 1e-12);
  EXPECT_FALSE(r.macro.auroc.has_value());

  // negative class: tn 1, fn 1, fp 1 -> f1 1/2; positive f1 = 3/4
  EXPECT_NEAR(r.binary_macro_f1, 0.5 * (0.75 + 0.5), 1e-12);
}

TEST(Report, IgnoresStoredVerdicts) {
  std::vector<Prediction> preds{pred("a", Anatomy::wrist, 0.3, 1), pred("b", Anatomy::wrist, 0.1, 0)};
  const auto r = build_report(preds, 0.2);
  EXPECT_EQ(r.overall.metrics.tp, 1u);
  EXPECT_EQ(r.overall.metrics.tn, 1u);
}

TEST(Report, CsvAndTableRendering) {
  MetricsReport r;
  ReportRow wrist{"wrist", 10, {}, std::nullopt};
  wrist.metrics.accuracy = 0.5;
  r.anatomy_rows.push_back(wrist);
  r.overall.name = "overall";
  r.overall.metrics.accuracy = 0.92;
  r.overall.metrics.precision = 0.91;
  r.overall.metrics.recall = 0.91;
  r.overall.metrics.f1 = 0.91;
  r.overall.auroc = 0.95;
  r.macro = r.overall;
  r.macro.name = "macro";
  r.threshold = 0.4;
  r.binary_macro_f1 = 0.9;

  const auto csv = render_report_csv(r);
  EXPECT_EQ(csv,
            "anatomy,accuracy,precision,recall,f1,auroc\n"
            "wrist,0.500000,0.000000,0.000000,0.000000,NA\n"
            "overall,0.920000,0.910000,0.910000,0.910000,0.950000\n"
            "macro,0.920000,0.910000,0.910000,0.910000,0.950000\n");

  const auto table = render_report_table(r);
  EXPECT_NE(table.find("Anatomy     Accuracy  Precision  Recall  F1-Score  AUROC"), std::string::npos);
  EXPECT_NE(table.find("Overall         0.92       0.91    0.91      0.91   0.95"), std::string::npos);
  EXPECT_NE(table.find("Wrist           0.50       0.00    0.00      0.00      -"), std::string::npos);
  EXPECT_NE(table.find("threshold 0.400000, binary macro-F1 0.9000"), std::string::npos);
}

TEST(Report, PredictionsCsv) {
  std::vector<Prediction> preds{make_prediction(StudyKey{"patient00001", Anatomy::elbow, "study2"}, {0.25, 0.5}, 1, 0.5)};
  EXPECT_EQ(render_predictions_csv(preds),
            "patient_id,study_id,anatomy,prob,label\npatient00001,study2,elbow,0.375000000,1\n");
  EXPECT_EQ(preds[0].verdict, 0);
}

TEST(Report, SingleAnatomyOverallEqualsRow) {
  std::vector<Prediction> preds{pred("a", Anatomy::hand, 0.7, 1), pred("b", Anatomy::hand, 0.6, 0),
                                pred("c", Anatomy::hand, 0.2, 0), pred("d", Anatomy::hand, 0.4, 1)};
  const auto r = build_report(preds, 0.5);
  ASSERT_EQ(r.anatomy_rows.size(), 1u);
  const auto& row = r.anatomy_rows[0];
  EXPECT_EQ(row.metrics.tp, r.overall.metrics.tp);
  EXPECT_EQ(row.metrics.fp, r.overall.metrics.fp);
  EXPECT_EQ(row.metrics.f1, r.overall.metrics.f1);
  EXPECT_EQ(row.auroc, r.overall.auroc);
  EXPECT_EQ(r.macro.auroc, r.overall.auroc);
}
