#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "urbanfuse/datetime.hpp"
#include "urbanfuse/matrix.hpp"

namespace urbanfuse {

/// The label-free part of a report. Anything that must not see labels
/// (graph construction, feature extraction) consumes these.
struct Observation {
  std::string id;
  std::string text;
  LocalDateTime timestamp;
  double lat = 0.0;
  double lon = 0.0;
  std::optional<std::string> image_ref;

  bool operator==(const Observation&) const = default;
};

struct Report {
  std::string id;
  std::string text;
  LocalDateTime timestamp;
  double lat = 0.0;
  double lon = 0.0;
  std::string main_class;
  std::string issue_class;
  std::optional<std::string> image_ref;

  Observation observation() const { return {id, text, timestamp, lat, lon, image_ref}; }
  bool operator==(const Report&) const = default;
};

/// Two-level label hierarchy. Class counts are data, not constants.
class LabelTaxonomy {
 public:
  LabelTaxonomy() = default;
  /// `issues` pairs each issue class with its main class. Throws
  /// invalid_input when the mapping is not total, names repeat, or a main
  /// class has no issue class.
  LabelTaxonomy(std::vector<std::string> main_classes,
                std::vector<std::pair<std::string, std::string>> issues);

  const std::vector<std::string>& main_classes() const noexcept { return main_; }
  const std::vector<std::string>& issue_classes() const noexcept { return issue_; }
  std::size_t num_main() const noexcept { return main_.size(); }
  std::size_t num_issue() const noexcept { return issue_.size(); }

  std::optional<int> main_index(const std::string& name) const;
  std::optional<int> issue_index(const std::string& name) const;
  int main_of_issue(int issue) const { return issue_to_main_[static_cast<std::size_t>(issue)]; }
  const std::string& main_name_of_issue(const std::string& issue) const;

  bool operator==(const LabelTaxonomy& other) const {
    return main_ == other.main_ && issue_ == other.issue_ && issue_to_main_ == other.issue_to_main_;
  }

 private:
  std::vector<std::string> main_;
  std::vector<std::string> issue_;
  std::vector<int> issue_to_main_;
  std::unordered_map<std::string, int> main_lookup_;
  std::unordered_map<std::string, int> issue_lookup_;
};

enum class LabelLevel { main, issue };

struct Dataset {
  std::vector<Report> reports;
  LabelTaxonomy taxonomy;

  std::size_t size() const noexcept { return reports.size(); }
  bool operator==(const Dataset&) const = default;
};

std::vector<std::string> report_ids(const Dataset& dataset);
std::vector<Observation> observations(const Dataset& dataset);
/// Dense label indices in taxonomy order. Throws invalid_input on a label
/// the taxonomy does not know.
std::vector<int> label_indices(const Dataset& dataset, LabelLevel level);
const std::vector<std::string>& class_names(const LabelTaxonomy& taxonomy, LabelLevel level);

enum class BlockKind { raw, probability, embedding };

std::string_view to_string(BlockKind kind);
BlockKind block_kind_from_string(std::string_view text);

/// Named feature matrix, row-aligned to a list of report ids.
class FeatureBlock {
 public:
  FeatureBlock() = default;
  /// Validates shape, finiteness and, for probability blocks, that rows are
  /// distributions (each entry in [0,1], sum 1 within 1e-9).
  FeatureBlock(std::string name, BlockKind kind, std::vector<std::string> report_ids,
               Matrix matrix, std::vector<std::string> column_names);

  const std::string& name() const noexcept { return name_; }
  BlockKind kind() const noexcept { return kind_; }
  const std::vector<std::string>& report_ids() const noexcept { return ids_; }
  const Matrix& matrix() const noexcept { return matrix_; }
  const std::vector<std::string>& column_names() const noexcept { return columns_; }
  std::size_t rows() const noexcept { return matrix_.rows(); }
  std::size_t cols() const noexcept { return matrix_.cols(); }

  FeatureBlock select_rows(std::span<const std::size_t> indices) const;
  /// Rows reordered/subset to `ids`; throws alignment when an id is absent.
  FeatureBlock select_ids(std::span<const std::string> ids) const;
  FeatureBlock renamed(std::string name) const;

  bool operator==(const FeatureBlock&) const = default;

 private:
  std::string name_;
  BlockKind kind_ = BlockKind::raw;
  std::vector<std::string> ids_;
  Matrix matrix_;
  std::vector<std::string> columns_;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// Stratified by issue class; each half keeps the input order. |test| is
/// round(test_fraction * N). Singleton classes stay in train unless the
/// requested test size cannot be met otherwise.
DatasetSplit split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed);

enum class Severity { warning, error };

struct ValidationIssue {
  Severity severity = Severity::error;
  std::string report_id;
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  std::size_t error_count() const;
  std::size_t warning_count() const;
  bool ok() const { return error_count() == 0; }
  std::string summary() const;
};

ValidationReport validate_dataset(const Dataset& dataset);

}  // namespace urbanfuse
