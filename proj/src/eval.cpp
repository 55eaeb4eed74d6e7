#include "urbanfuse/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "urbanfuse/classifiers.hpp"
#include "urbanfuse/error.hpp"
#include "urbanfuse/ingest.hpp"

namespace urbanfuse {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          std::size_t num_classes, std::vector<std::string> class_labels) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::invalid_input, "y_true has " + std::to_string(y_true.size()) +
                                              " entries, y_pred " + std::to_string(y_pred.size()));
  }
  if (num_classes == 0) throw Error(ErrorCode::invalid_input, "num_classes must be >= 1");
  if (class_labels.empty()) {
    for (std::size_t c = 0; c < num_classes; ++c) class_labels.push_back(std::to_string(c));
  }
  if (class_labels.size() != num_classes) throw Error(ErrorCode::invalid_input, "class label count mismatch");
  ConfusionMatrix cm{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0), std::move(class_labels)};
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= num_classes || y_pred[i] >= num_classes) {
      throw Error(ErrorCode::invalid_input, "class index out of range at position " + std::to_string(i));
    }
    ++cm.counts[y_true[i] * num_classes + y_pred[i]];
  }
  return cm;
}

double f1_score(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  if (precision == recall) return precision;
  return 2.0 * precision * recall / (precision + recall);
}

F1Report f1_report(const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes;
  if (cm.counts.size() != k * k) throw Error(ErrorCode::invalid_input, "malformed confusion matrix");
  F1Report rep;
  rep.total = cm.total();
  if (rep.total == 0) throw Error(ErrorCode::invalid_input, "confusion matrix is all zero");
  rep.per_class.resize(k);
  std::uint64_t tp_sum = 0, pred_sum = 0, true_sum = 0;
  double macro = 0.0, weighted = 0.0;
  std::size_t supported = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += cm(j, c);
      actual += cm(c, j);
    }
    const std::uint64_t tp = cm(c, c);
    auto& s = rep.per_class[c];
    s.support = actual;
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    s.f1 = f1_score(s.precision, s.recall);
    tp_sum += tp;
    pred_sum += predicted;
    true_sum += actual;
    if (actual > 0) {
      ++supported;
      macro += s.f1;
      weighted += static_cast<double>(actual) * s.f1;
    }
  }
  rep.macro_f1 = macro / static_cast<double>(supported);
  rep.weighted_f1 = weighted / static_cast<double>(true_sum);
  rep.accuracy = static_cast<double>(tp_sum) / static_cast<double>(rep.total);
  const double micro_p = static_cast<double>(tp_sum) / static_cast<double>(pred_sum);
  const double micro_r = static_cast<double>(tp_sum) / static_cast<double>(true_sum);
  rep.micro_f1 = f1_score(micro_p, micro_r);
  return rep;
}

PerClassTable per_class_table(const std::vector<std::pair<std::string, ConfusionMatrix>>& results,
                              std::size_t top_k) {
  if (results.empty()) throw Error(ErrorCode::invalid_input, "per-class table needs at least one result");
  const auto& labels = results.front().second.class_labels;
  std::vector<F1Report> reports;
  for (const auto& [name, cm] : results) {
    if (cm.class_labels != labels) {
      throw Error(ErrorCode::invalid_input, "result '" + name + "' uses a different class taxonomy");
    }
    reports.push_back(f1_report(cm));
  }
  const auto& base = reports.front().per_class;
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return base[a].support > base[b].support; });
  if (top_k > 0 && top_k < order.size()) order.resize(top_k);

  PerClassTable t;
  for (const auto& r : results) t.columns.push_back(r.first);
  t.f1 = Matrix(order.size(), results.size());
  double total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    t.class_labels.push_back(labels[order[i]]);
    t.support.push_back(static_cast<double>(base[order[i]].support));
    total += t.support.back();
    for (std::size_t j = 0; j < reports.size(); ++j) t.f1(i, j) = reports[j].per_class[order[i]].f1;
  }
  if (total > 0.0) {
    for (double& s : t.support) s /= total;
  }
  return t;
}

HoldoutScorer::HoldoutScorer(std::vector<std::size_t> y_true, std::vector<std::string> class_labels)
    : y_true_(std::move(y_true)), labels_(std::move(class_labels)) {
  for (auto c : y_true_) {
    if (c >= labels_.size()) throw Error(ErrorCode::invalid_input, "held-out label out of range");
  }
}

ConfusionMatrix HoldoutScorer::confusion(std::span<const std::size_t> y_pred) const {
  return urbanfuse::confusion(y_true_, y_pred, labels_.size(), labels_);
}

F1Report HoldoutScorer::score(std::span<const std::size_t> y_pred) const {
  return f1_report(confusion(y_pred));
}

F1Report HoldoutScorer::score_proba(const Matrix& proba) const {
  if (proba.cols() != labels_.size()) throw Error(ErrorCode::shape, "probability width != class count");
  return score(predict_labels(proba));
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

void write_report_csv(std::ostream& out, const F1Report& report, const std::vector<std::string>& class_labels) {
  out << "class,precision,recall,f1,support\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& s = report.per_class[c];
    out << csv_escape(c < class_labels.size() ? class_labels[c] : std::to_string(c)) << ','
        << format_metric(s.precision) << ',' << format_metric(s.recall) << ',' << format_metric(s.f1)
        << ',' << s.support << '\n';
  }
  out << "weighted_f1,,," << format_metric(report.weighted_f1) << ',' << report.total << '\n';
  out << "macro_f1,,," << format_metric(report.macro_f1) << ',' << report.total << '\n';
  out << "micro_f1,,," << format_metric(report.micro_f1) << ',' << report.total << '\n';
  out << "accuracy,,," << format_metric(report.accuracy) << ',' << report.total << '\n';
}

std::string format_report_text(const F1Report& report, const std::vector<std::string>& class_labels) {
  std::size_t width = 12;
  for (const auto& l : class_labels) width = std::max(width, l.size());
  std::ostringstream os;
  auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
  os << pad("class") << "  precision     recall         f1    support\n";
  char buf[96];
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& s = report.per_class[c];
    std::snprintf(buf, sizeof buf, "  %9.4f  %9.4f  %9.4f  %9llu\n", s.precision, s.recall, s.f1,
                  static_cast<unsigned long long>(s.support));
    os << pad(c < class_labels.size() ? class_labels[c] : std::to_string(c)) << buf;
  }
  os << '\n';
  const std::pair<const char*, double> rows[] = {{"weighted_f1", report.weighted_f1},
                                                 {"macro_f1", report.macro_f1},
                                                 {"micro_f1", report.micro_f1},
                                                 {"accuracy", report.accuracy}};
  for (const auto& [name, v] : rows) {
    std::snprintf(buf, sizeof buf, "  %31.4f  %9llu\n", v, static_cast<unsigned long long>(report.total));
    os << pad(name) << buf;
  }
  return os.str();
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "true\\predicted";
  for (const auto& l : cm.class_labels) out << ',' << csv_escape(l);
  out << '\n';
  for (std::size_t t = 0; t < cm.num_classes; ++t) {
    out << csv_escape(cm.class_labels[t]);
    for (std::size_t p = 0; p < cm.num_classes; ++p) out << ',' << cm(t, p);
    out << '\n';
  }
}

void write_per_class_csv(std::ostream& out, const PerClassTable& table) {
  out << "class,support";
  for (const auto& c : table.columns) out << ',' << csv_escape(c);
  out << '\n';
  for (std::size_t i = 0; i < table.class_labels.size(); ++i) {
    out << csv_escape(table.class_labels[i]) << ',' << format_metric(table.support[i]);
    for (std::size_t j = 0; j < table.columns.size(); ++j) out << ',' << format_metric(table.f1(i, j));
    out << '\n';
  }
}

}  // namespace urbanfuse
