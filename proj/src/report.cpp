#include <cstdio>
#include <sstream>

#include "radtriage/evaluation.hpp"

namespace radtriage {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string title_case(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::vector<const ReportRow*> ordered_rows(const MetricsReport& r) {
  std::vector<const ReportRow*> rows;
  for (const auto& row : r.anatomy_rows) rows.push_back(&row);
  rows.push_back(&r.overall);
  rows.push_back(&r.macro);
  return rows;
}

}  // namespace

std::string render_report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "anatomy,accuracy,precision,recall,f1,auroc\n";
  for (const auto* row : ordered_rows(report)) {
    const auto& m = row->metrics;
    out << row->name << ',' << fixed(m.accuracy, 6) << ',' << fixed(m.precision, 6) << ','
        << fixed(m.recall, 6) << ',' << fixed(m.f1, 6) << ','
        << (row->auroc ? fixed(*row->auroc, 6) : std::string("NA")) << '\n';
  }
  return out.str();
}

std::string render_report_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %9s %10s %7s %9s %6s\n", "Anatomy", "Accuracy", "Precision",
                "Recall", "F1-Score", "AUROC");
  out << line;
  for (const auto* row : ordered_rows(report)) {
    const auto& m = row->metrics;
    const std::string auc = row->auroc ? fixed(*row->auroc, 2) : "-";
    std::snprintf(line, sizeof line, "%-10s %9s %10s %7s %9s %6s\n", title_case(row->name).c_str(),
                  fixed(m.accuracy, 2).c_str(), fixed(m.precision, 2).c_str(), fixed(m.recall, 2).c_str(),
                  fixed(m.f1, 2).c_str(), auc.c_str());
    out << line;
  }
  out << "threshold " << fixed(report.threshold, 6) << ", binary macro-F1 " << fixed(report.binary_macro_f1, 4)
      << '\n';
  return out.str();
}

std::string render_predictions_csv(const std::vector<Prediction>& predictions) {
  std::ostringstream out;
  out << "patient_id,study_id,anatomy,prob,label\n";
  for (const auto& p : predictions) {
    out << p.key.patient_id << ',' << p.key.study_id << ',' << anatomy_name(p.key.anatomy) << ','
        << fixed(p.probability, 9) << ',' << p.label << '\n';
  }
  return out.str();
}

}  // namespace radtriage
