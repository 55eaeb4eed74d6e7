#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "urbanfuse/matrix.hpp"

namespace urbanfuse {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;
  std::vector<std::string> class_labels;

  std::uint64_t operator()(std::size_t t, std::size_t p) const { return counts[t * num_classes + p]; }
  std::uint64_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          std::size_t num_classes, std::vector<std::string> class_labels = {});

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

/// Macro and weighted averages skip classes with no support.
struct F1Report {
  std::vector<ClassScore> per_class;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::uint64_t total = 0;
};

/// 2PR/(P+R), 0 when P+R is 0.
double f1_score(double precision, double recall);
F1Report f1_report(const ConfusionMatrix& cm);

struct PerClassTable {
  std::vector<std::string> class_labels;  // sorted by support, descending
  std::vector<std::string> columns;       // one per result
  Matrix f1;                              // class_labels x columns
  std::vector<double> support;            // normalised to sum 1
};

/// Every confusion matrix must carry the same class labels. top_k = 0 keeps
/// every class.
PerClassTable per_class_table(const std::vector<std::pair<std::string, ConfusionMatrix>>& results,
                              std::size_t top_k = 0);

/// Owns the held-out labels. Callers hand in predictions and get metrics
/// back; the labels themselves are not exposed.
class HoldoutScorer {
 public:
  HoldoutScorer(std::vector<std::size_t> y_true, std::vector<std::string> class_labels);

  std::size_t size() const noexcept { return y_true_.size(); }
  std::size_t num_classes() const noexcept { return labels_.size(); }
  const std::vector<std::string>& class_labels() const noexcept { return labels_; }
  ConfusionMatrix confusion(std::span<const std::size_t> y_pred) const;
  F1Report score(std::span<const std::size_t> y_pred) const;
  /// Argmax of each probability row, then score.
  F1Report score_proba(const Matrix& proba) const;

 private:
  std::vector<std::size_t> y_true_;
  std::vector<std::string> labels_;
};

/// class,precision,recall,f1,support rows followed by summary rows.
void write_report_csv(std::ostream& out, const F1Report& report, const std::vector<std::string>& class_labels);
/// Fixed-width plain-text version of the same report.
std::string format_report_text(const F1Report& report, const std::vector<std::string>& class_labels);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);
/// Bar-chart data: class,support,<column>...
void write_per_class_csv(std::ostream& out, const PerClassTable& table);

/// Six decimals, used by every human-facing metric table.
std::string format_metric(double value);

}  // namespace urbanfuse
