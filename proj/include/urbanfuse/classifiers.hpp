#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "urbanfuse/matrix.hpp"

namespace urbanfuse {

struct LogRegConfig {
  double l2 = 1.0;
  std::size_t max_iter = 200;
  double tol = 1e-4;
};

/// Per-column standardisation fitted on training data. Constant columns are
/// dropped.
struct Standardizer {
  std::size_t input_width = 0;
  std::vector<std::size_t> kept;
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

struct LogRegModel {
  std::size_t num_classes = 0;      // output width
  std::vector<std::size_t> classes; // classes seen in training, ascending
  Standardizer standardizer;
  Matrix weights;                   // classes.size() x kept columns
  std::vector<double> bias;
  double l2 = 0.0;
  std::size_t iterations = 0;
  std::vector<double> objective_trace;  // objective after each accepted step
};

/// Mean cross-entropy plus (l2/2)*|W|^2 on already-standardised x, with y in
/// [0, num_classes). params holds W row-major followed by the bias. Writes
/// the gradient when `gradient` is non-empty.
double logreg_objective(const Matrix& x, std::span<const std::size_t> y, std::size_t num_classes,
                        double l2, std::span<const double> params, std::span<double> gradient = {});

LogRegModel train_logreg(const Matrix& x, std::span<const std::size_t> y, std::size_t num_classes,
                         const LogRegConfig& config = {});
Matrix predict_proba(const LogRegModel& model, const Matrix& x);

struct GbdtConfig {
  std::size_t rounds = 100;
  std::size_t max_depth = 6;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;
  double lambda = 1.0;
  std::size_t bins = 256;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 for a leaf
  double threshold = 0.0;     // x < threshold goes left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;         // leaf output, learning rate already applied
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> row) const;
};

struct GbdtModel {
  std::size_t num_classes = 0;
  std::vector<std::size_t> classes;
  std::size_t input_width = 0;
  double learning_rate = 0.1;
  std::size_t max_depth = 6;
  std::size_t rounds = 0;
  double lambda = 1.0;
  std::vector<std::vector<double>> cuts;  // per feature, ascending bin edges
  std::vector<RegressionTree> trees;      // trees[round * classes.size() + c]
};

/// Bin edges for one column: a cut between every pair of neighbouring
/// distinct values when there are at most `bins` of them, quantile cuts
/// otherwise.
std::vector<double> histogram_cuts(std::span<const double> column, std::size_t bins);

GbdtModel train_gbdt(const Matrix& x, std::span<const std::size_t> y, std::size_t num_classes,
                     const GbdtConfig& config = {});
/// Uses only the first `rounds` rounds when given.
Matrix predict_proba(const GbdtModel& model, const Matrix& x, std::size_t rounds);
Matrix predict_proba(const GbdtModel& model, const Matrix& x);

enum class ClassifierKind { logreg, gbdt };
std::string_view to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(std::string_view text);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::logreg;
  LogRegConfig logreg;
  GbdtConfig gbdt;
};

using ClassifierModel = std::variant<LogRegModel, GbdtModel>;

ClassifierModel train_classifier(const Matrix& x, std::span<const std::size_t> y,
                                 std::size_t num_classes, const ClassifierConfig& config);
Matrix predict_proba(const ClassifierModel& model, const Matrix& x);
ClassifierKind kind_of(const ClassifierModel& model);

/// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);
std::vector<std::size_t> predict_labels(const Matrix& proba);

/// Softmax with max subtraction, in place.
void softmax_inplace(std::span<double> logits);

struct RoutingDecision {
  bool automatic = false;   // false: deferred to an expert
  std::size_t class_index = 0;
  double probability = 0.0; // top-class probability
};

/// Automatic when the top probability is >= threshold. threshold in (0, 1].
RoutingDecision route(std::span<const double> probabilities, double threshold);
RoutingDecision route(const ClassifierModel& model, std::span<const double> row, double threshold);

}  // namespace urbanfuse
