#include "radtriage/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "radtriage/errors.hpp"

namespace radtriage {

double aggregate_study(std::span<const double> view_probs) {
  if (view_probs.empty()) throw InputError("aggregate_study: no views");
  double acc = 0.0;
  for (double p : view_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("aggregate_study: probability outside [0, 1]");
    acc += p;
  }
  return acc / static_cast<double>(view_probs.size());
}

namespace {

void check_pair(std::span<const double> probs, std::span<const int> labels, const char* who) {
  if (probs.size() != labels.size()) throw InputError(std::string(who) + ": length mismatch");
  if (probs.empty()) throw InputError(std::string(who) + ": empty input");
  for (int y : labels) {
    if (y != 0 && y != 1) throw LabelError(std::string(who) + ": labels must be 0 or 1");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

}  // namespace

PointMetrics confusion_and_point_metrics(std::span<const double> probs, std::span<const int> labels,
                                         double threshold) {
  check_pair(probs, labels, "confusion_and_point_metrics");
  PointMetrics m;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    if (labels[i] == 1) (predicted ? m.tp : m.fn)++;
    else (predicted ? m.fp : m.tn)++;
  }
  const auto total = static_cast<double>(probs.size());
  m.accuracy = static_cast<double>(m.tp + m.tn) / total;
  m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

double auroc(std::span<const double> probs, std::span<const int> labels) {
  check_pair(probs, labels, "auroc");
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("auroc: needs both classes");

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  // Ranks are 1-based; tied runs share their average. Work with doubled
  // ranks so the sums stay integral.
  std::uint64_t pos_rank_x2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && probs[order[j]] == probs[order[i]]) ++j;
    const std::uint64_t avg_x2 = (i + 1) + j;  // (first + last) rank
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_x2 += avg_x2;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  const double u = static_cast<double>(pos_rank_x2) / 2.0 - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

double youden_j(std::span<const double> probs, std::span<const int> labels, double threshold) {
  check_pair(probs, labels, "youden_j");
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("youden_j: needs both classes");
  const auto m = confusion_and_point_metrics(probs, labels, threshold);
  return static_cast<double>(m.tp) / static_cast<double>(n_pos) +
         static_cast<double>(m.tn) / static_cast<double>(n_neg) - 1.0;
}

ThresholdChoice select_threshold(std::span<const double> probs, std::span<const int> labels) {
  check_pair(probs, labels, "select_threshold");
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("select_threshold: needs both classes");

  const std::set<double> distinct(probs.begin(), probs.end());
  const std::vector<double> sorted(distinct.begin(), distinct.end());
  std::vector<double> candidates{0.0};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end());

  ThresholdChoice best{candidates.front(), youden_j(probs, labels, candidates.front())};
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double j = youden_j(probs, labels, candidates[i]);
    if (j > best.youden_j) best = {candidates[i], j};
  }
  return best;
}

Prediction make_prediction(StudyKey key, std::vector<double> view_probs, int label, double threshold) {
  Prediction p;
  p.key = std::move(key);
  p.probability = aggregate_study(view_probs);
  p.view_probs = std::move(view_probs);
  p.verdict = p.probability >= threshold ? 1 : 0;
  p.label = label;
  return p;
}

namespace {

ReportRow make_row(std::string name, const std::vector<const Prediction*>& preds, double threshold) {
  std::vector<double> probs;
  std::vector<int> labels;
  for (const auto* p : preds) {
    probs.push_back(p->probability);
    labels.push_back(p->label);
  }
  ReportRow row;
  row.name = std::move(name);
  row.studies = preds.size();
  row.metrics = confusion_and_point_metrics(probs, labels, threshold);
  try {
    row.auroc = auroc(probs, labels);
  } catch (const UndefinedMetricError&) {
    row.auroc.reset();
  }
  return row;
}

}  // namespace

MetricsReport build_report(const std::vector<Prediction>& predictions, double threshold) {
  if (predictions.empty()) throw InputError("build_report: no predictions");
  MetricsReport report;
  report.threshold = threshold;

  std::vector<const Prediction*> all;
  for (const auto& p : predictions) all.push_back(&p);
  for (Anatomy a : kAnatomies) {
    std::vector<const Prediction*> bucket;
    for (const auto* p : all) {
      if (p->key.anatomy == a) bucket.push_back(p);
    }
    if (!bucket.empty()) report.anatomy_rows.push_back(make_row(std::string(anatomy_name(a)), bucket, threshold));
  }
  report.overall = make_row("overall", all, threshold);

  auto& macro = report.macro;
  macro.name = "macro";
  macro.studies = all.size();
  const auto rows = static_cast<double>(report.anatomy_rows.size());
  double auroc_sum = 0.0;
  std::size_t auroc_rows = 0;
  for (const auto& r : report.anatomy_rows) {
    macro.metrics.accuracy += r.metrics.accuracy / rows;
    macro.metrics.precision += r.metrics.precision / rows;
    macro.metrics.recall += r.metrics.recall / rows;
    macro.metrics.f1 += r.metrics.f1 / rows;
    if (r.auroc) {
      auroc_sum += *r.auroc;
      ++auroc_rows;
    }
  }
  // an anatomy without a defined AUROC would bias the mean; surface it as undefined
  if (auroc_rows == report.anatomy_rows.size()) macro.auroc = auroc_sum / static_cast<double>(auroc_rows);

  // per-class F1 averaged over {abnormal, normal}
  std::vector<double> probs, flipped_probs;
  std::vector<int> labels, flipped_labels;
  for (const auto* p : all) {
    probs.push_back(p->probability);
    labels.push_back(p->label);
  }
  const auto pos = confusion_and_point_metrics(probs, labels, threshold);
  const double prec_neg = pos.tn + pos.fn ? static_cast<double>(pos.tn) / static_cast<double>(pos.tn + pos.fn) : 0.0;
  const double rec_neg = pos.tn + pos.fp ? static_cast<double>(pos.tn) / static_cast<double>(pos.tn + pos.fp) : 0.0;
  const double f1_neg = prec_neg + rec_neg > 0.0 ? 2.0 * prec_neg * rec_neg / (prec_neg + rec_neg) : 0.0;
  report.binary_macro_f1 = 0.5 * (pos.f1 + f1_neg);
  return report;
}

}  // namespace radtriage
