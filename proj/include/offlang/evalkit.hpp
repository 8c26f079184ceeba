#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offlang/classifier.hpp"
#include "offlang/corpus.hpp"
#include "offlang/error.hpp"
#include "offlang/label.hpp"
#include "offlang/text.hpp"

namespace offlang {

/// HOF is the positive class throughout.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
};

inline ConfusionMatrix confusion(std::span<const Label> predictions,
                                 std::span<const Label> gold) {
  if (predictions.size() != gold.size()) {
    raise(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions against " +
                                         std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) raise(ErrorCode::EmptyInput, "nothing to score");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool pred_hof = predictions[i] == Label::HOF;
    const bool gold_hof = gold[i] == Label::HOF;
    if (pred_hof && gold_hof) ++m.tp;
    else if (pred_hof && !gold_hof) ++m.fp;
    else if (!pred_hof && gold_hof) ++m.fn;
    else ++m.tn;
  }
  return m;
}

/// Zero denominators score 0 and set the degenerate flag rather than raising;
/// single-class gold or single-class predictions are legitimate outcomes.
struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;
};

namespace detail {

inline ClassMetrics class_metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  ClassMetrics m;
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.degenerate = true;
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.degenerate = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.degenerate = true;
  }
  return m;
}

inline std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

}  // namespace detail

inline ClassMetrics hof_metrics(const ConfusionMatrix& m) {
  return detail::class_metrics_from_counts(m.tp, m.fp, m.fn);
}

inline ClassMetrics not_metrics(const ConfusionMatrix& m) {
  return detail::class_metrics_from_counts(m.tn, m.fn, m.fp);
}

/// Unweighted mean of the two class F1 scores.
inline double macro_f1(const ConfusionMatrix& m) {
  if (m.total() == 0) raise(ErrorCode::EmptyMatrix, "confusion matrix is empty");
  return (hof_metrics(m).f1 + not_metrics(m).f1) / 2.0;
}

struct EvaluationReport {
  double macro_f1 = 0.0;
  ClassMetrics hof;
  ClassMetrics nothate;
  ConfusionMatrix matrix;
  bool degenerate = false;
  std::string language = "other";
  std::string corpus_fingerprint;
  std::string model_fingerprint;
  double threshold = 0.5;
};

inline EvaluationReport report_from_matrix(const ConfusionMatrix& m) {
  if (m.total() == 0) raise(ErrorCode::EmptyMatrix, "confusion matrix is empty");
  EvaluationReport report;
  report.matrix = m;
  report.hof = hof_metrics(m);
  report.nothate = not_metrics(m);
  report.macro_f1 = (report.hof.f1 + report.nothate.f1) / 2.0;
  report.degenerate = report.hof.degenerate || report.nothate.degenerate;
  return report;
}

inline EvaluationReport evaluate(const TrainedModel& model, const LabeledCorpus& heldout,
                                 double threshold) {
  if (heldout.empty()) raise(ErrorCode::EmptyInput, "heldout corpus is empty");
  std::vector<std::string> texts;
  std::vector<Label> gold;
  texts.reserve(heldout.size());
  gold.reserve(heldout.size());
  for (const TextSample& s : heldout.samples()) {
    texts.push_back(s.text);
    gold.push_back(*s.label);
  }
  const ScoreVector scores = predict_scores(model, texts);
  std::vector<Label> predictions;
  predictions.reserve(scores.size());
  for (double score : scores) predictions.push_back(decide(score, threshold));

  EvaluationReport report = report_from_matrix(confusion(predictions, gold));
  report.language = std::string(to_string(heldout.language()));
  report.corpus_fingerprint = heldout.fingerprint();
  report.model_fingerprint = model.train_fingerprint();
  report.threshold = threshold;
  return report;
}

inline nlohmann::ordered_json class_metrics_to_json(const ClassMetrics& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["degenerate"] = m.degenerate;
  return j;
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["macro_f1"] = report.macro_f1;
  j["per_class"]["HOF"] = class_metrics_to_json(report.hof);
  j["per_class"]["NOT"] = class_metrics_to_json(report.nothate);
  j["matrix"] = {{"tp", report.matrix.tp}, {"fp", report.matrix.fp},
                 {"fn", report.matrix.fn}, {"tn", report.matrix.tn}};
  j["degenerate"] = report.degenerate;
  j["language"] = report.language;
  j["corpus_fingerprint"] = report.corpus_fingerprint;
  j["model_fingerprint"] = report.model_fingerprint;
  j["threshold"] = report.threshold;
  return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport report;
  report.macro_f1 = j.at("macro_f1").get<double>();
  auto read_class = [](const nlohmann::json& c) {
    ClassMetrics m;
    m.precision = c.at("precision").get<double>();
    m.recall = c.at("recall").get<double>();
    m.f1 = c.at("f1").get<double>();
    m.degenerate = c.value("degenerate", false);
    return m;
  };
  report.hof = read_class(j.at("per_class").at("HOF"));
  report.nothate = read_class(j.at("per_class").at("NOT"));
  report.matrix.tp = j.at("matrix").at("tp").get<std::int64_t>();
  report.matrix.fp = j.at("matrix").at("fp").get<std::int64_t>();
  report.matrix.fn = j.at("matrix").at("fn").get<std::int64_t>();
  report.matrix.tn = j.at("matrix").at("tn").get<std::int64_t>();
  report.degenerate = j.value("degenerate", false);
  report.language = j.value("language", "other");
  report.corpus_fingerprint = j.value("corpus_fingerprint", "");
  report.model_fingerprint = j.value("model_fingerprint", "");
  report.threshold = j.value("threshold", 0.5);
  return report;
}

// --- Comparison tables ---------------------------------------------------------

enum class TableFormat { markdown, csv };

struct TableOptions {
  /// Render scores as percentages with one decimal (72.2) instead of
  /// three-decimal fractions (0.722).
  bool percentages = false;
};

/// Renders run-versus-run comparison rows grouped by language, best macro F1
/// first within each group. Output is a pure function of the inputs.
inline std::string render_table(
    const std::vector<std::pair<std::string, EvaluationReport>>& reports, TableFormat format,
    const TableOptions& options = {}) {
  if (reports.empty()) raise(ErrorCode::EmptyReportList, "no reports to render");

  const auto fmt = [&options](double value) {
    return options.percentages ? detail::format_fixed(value * 100.0, 1)
                               : detail::format_fixed(value, 3);
  };

  std::map<std::string, std::vector<const std::pair<std::string, EvaluationReport>*>> groups;
  for (const auto& entry : reports) groups[entry.second.language].push_back(&entry);
  for (auto& [language, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
      if (a->second.macro_f1 != b->second.macro_f1) return a->second.macro_f1 > b->second.macro_f1;
      return a->first < b->first;
    });
  }

  std::string out;
  if (format == TableFormat::csv) {
    out += "language,run,macro_f1,hof_f1,not_f1\n";
    for (const auto& [language, rows] : groups) {
      for (const auto* row : rows) {
        out += language + ',' + csv_escape(row->first) + ',' + fmt(row->second.macro_f1) + ',' +
               fmt(row->second.hof.f1) + ',' + fmt(row->second.nothate.f1) + '\n';
      }
    }
    return out;
  }

  bool first = true;
  for (const auto& [language, rows] : groups) {
    if (!first) out += '\n';
    first = false;
    out += "### " + language + "\n\n";
    out += "| Run | Macro F1 | HOF F1 | NOT F1 |\n";
    out += "| --- | --- | --- | --- |\n";
    for (const auto* row : rows) {
      out += "| " + row->first + " | " + fmt(row->second.macro_f1) + " | " +
             fmt(row->second.hof.f1) + " | " + fmt(row->second.nothate.f1) + " |\n";
    }
  }
  return out;
}

}  // namespace offlang
