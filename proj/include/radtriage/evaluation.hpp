#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radtriage/dataset.hpp"

namespace radtriage {

/// Arithmetic mean of per-view probabilities. InputError on an empty list or
/// a value outside [0, 1].
double aggregate_study(std::span<const double> view_probs);

struct PointMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when nothing is predicted positive
  double recall = 0.0;     // 0 when there are no positives
  double f1 = 0.0;         // 0 when precision + recall == 0
};

/// Verdict is prob >= threshold. InputError on length mismatch or empty input.
PointMetrics confusion_and_point_metrics(std::span<const double> probs, std::span<const int> labels,
                                         double threshold);

/// Mann-Whitney AUROC with average ranks for ties. UndefinedMetricError if
/// either class is absent.
double auroc(std::span<const double> probs, std::span<const int> labels);

/// sensitivity + specificity - 1 at the given threshold.
double youden_j(std::span<const double> probs, std::span<const int> labels, double threshold);

struct ThresholdChoice {
  double threshold = 0.5;
  double youden_j = 0.0;
};

/// Scans 0, the midpoints between adjacent distinct scores, and 1; keeps the
/// first (lowest) candidate with the largest Youden J.
ThresholdChoice select_threshold(std::span<const double> probs, std::span<const int> labels);

struct Prediction {
  StudyKey key;
  std::vector<double> view_probs;
  double probability = 0.0;  // aggregated
  int verdict = 0;
  int label = 0;
};

/// Aggregates views and applies the inclusive threshold.
Prediction make_prediction(StudyKey key, std::vector<double> view_probs, int label, double threshold);

struct ReportRow {
  std::string name;
  std::size_t studies = 0;
  PointMetrics metrics;
  std::optional<double> auroc;  // empty when the bucket holds a single class
};

struct MetricsReport {
  std::vector<ReportRow> anatomy_rows;  // fixed anatomy order, present buckets only
  ReportRow overall;                    // pooled over every study
  ReportRow macro;                      // unweighted mean of anatomy rows
  double threshold = 0.5;
  double binary_macro_f1 = 0.0;         // mean of per-class F1 on the pooled set
};

/// Verdicts are recomputed from `threshold`; the stored verdicts are ignored.
MetricsReport build_report(const std::vector<Prediction>& predictions, double threshold);

/// Header `anatomy,accuracy,precision,recall,f1,auroc`; undefined AUROC as NA.
std::string render_report_csv(const MetricsReport& report);
/// Aligned table: Anatomy, Accuracy, Precision, Recall, F1-Score, AUROC.
std::string render_report_table(const MetricsReport& report);
/// `patient_id,study_id,anatomy,prob,label` with header.
std::string render_predictions_csv(const std::vector<Prediction>& predictions);

}  // namespace radtriage
