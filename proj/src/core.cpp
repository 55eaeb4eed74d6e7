#include "urbanfuse/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "urbanfuse/error.hpp"
#include "urbanfuse/rng.hpp"

namespace urbanfuse {

LabelTaxonomy::LabelTaxonomy(std::vector<std::string> main_classes,
                             std::vector<std::pair<std::string, std::string>> issues)
    : main_(std::move(main_classes)) {
  if (main_.empty()) throw Error(ErrorCode::invalid_input, "taxonomy needs at least one main class");
  for (std::size_t i = 0; i < main_.size(); ++i) {
    if (!main_lookup_.emplace(main_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::invalid_input, "duplicate main class '" + main_[i] + "'");
    }
  }
  std::vector<int> issues_per_main(main_.size(), 0);
  for (auto& [issue, parent] : issues) {
    auto it = main_lookup_.find(parent);
    if (it == main_lookup_.end()) {
      throw Error(ErrorCode::invalid_input,
                  "issue class '" + issue + "' maps to unknown main class '" + parent + "'");
    }
    if (!issue_lookup_.emplace(issue, static_cast<int>(issue_.size())).second) {
      throw Error(ErrorCode::invalid_input, "duplicate issue class '" + issue + "'");
    }
    issue_.push_back(std::move(issue));
    issue_to_main_.push_back(it->second);
    ++issues_per_main[static_cast<std::size_t>(it->second)];
  }
  for (std::size_t m = 0; m < main_.size(); ++m) {
    if (issues_per_main[m] == 0) {
      throw Error(ErrorCode::invalid_input, "main class '" + main_[m] + "' has no issue class");
    }
  }
}

std::optional<int> LabelTaxonomy::main_index(const std::string& name) const {
  auto it = main_lookup_.find(name);
  if (it == main_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> LabelTaxonomy::issue_index(const std::string& name) const {
  auto it = issue_lookup_.find(name);
  if (it == issue_lookup_.end()) return std::nullopt;
  return it->second;
}

const std::string& LabelTaxonomy::main_name_of_issue(const std::string& issue) const {
  auto idx = issue_index(issue);
  if (!idx) throw Error(ErrorCode::invalid_input, "unknown issue class '" + issue + "'");
  return main_[static_cast<std::size_t>(main_of_issue(*idx))];
}

std::vector<std::string> report_ids(const Dataset& dataset) {
  std::vector<std::string> ids;
  ids.reserve(dataset.size());
  for (const auto& r : dataset.reports) ids.push_back(r.id);
  return ids;
}

std::vector<Observation> observations(const Dataset& dataset) {
  std::vector<Observation> out;
  out.reserve(dataset.size());
  for (const auto& r : dataset.reports) out.push_back(r.observation());
  return out;
}

std::vector<int> label_indices(const Dataset& dataset, LabelLevel level) {
  std::vector<int> out;
  out.reserve(dataset.size());
  for (const auto& r : dataset.reports) {
    auto idx = level == LabelLevel::main ? dataset.taxonomy.main_index(r.main_class)
                                         : dataset.taxonomy.issue_index(r.issue_class);
    if (!idx) {
      throw Error(ErrorCode::invalid_input, "report '" + r.id + "' has a label outside the taxonomy");
    }
    out.push_back(*idx);
  }
  return out;
}

const std::vector<std::string>& class_names(const LabelTaxonomy& taxonomy, LabelLevel level) {
  return level == LabelLevel::main ? taxonomy.main_classes() : taxonomy.issue_classes();
}

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::raw: return "raw";
    case BlockKind::probability: return "probability";
    case BlockKind::embedding: return "embedding";
  }
  return "raw";
}

BlockKind block_kind_from_string(std::string_view text) {
  if (text == "raw") return BlockKind::raw;
  if (text == "probability") return BlockKind::probability;
  if (text == "embedding") return BlockKind::embedding;
  throw Error(ErrorCode::format, "unknown block kind '" + std::string(text) + "'");
}

FeatureBlock::FeatureBlock(std::string name, BlockKind kind, std::vector<std::string> report_ids,
                           Matrix matrix, std::vector<std::string> column_names)
    : name_(std::move(name)),
      kind_(kind),
      ids_(std::move(report_ids)),
      matrix_(std::move(matrix)),
      columns_(std::move(column_names)) {
  if (matrix_.rows() != ids_.size()) {
    throw Error(ErrorCode::shape, "block '" + name_ + "': " + std::to_string(matrix_.rows()) +
                                      " rows for " + std::to_string(ids_.size()) + " report ids");
  }
  if (matrix_.cols() != columns_.size()) {
    throw Error(ErrorCode::shape, "block '" + name_ + "': width " + std::to_string(matrix_.cols()) +
                                      " but " + std::to_string(columns_.size()) + " column names");
  }
  for (std::size_t r = 0; r < matrix_.rows(); ++r) {
    double sum = 0.0;
    for (double v : matrix_.row(r)) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::invalid_input,
                    "block '" + name_ + "': non-finite value for report '" + ids_[r] + "'");
      }
      if (kind_ == BlockKind::probability && (v < 0.0 || v > 1.0)) {
        throw Error(ErrorCode::invalid_input,
                    "block '" + name_ + "': probability outside [0,1] for '" + ids_[r] + "'");
      }
      sum += v;
    }
    if (kind_ == BlockKind::probability && std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::invalid_input,
                  "block '" + name_ + "': probability row for '" + ids_[r] + "' sums to " +
                      std::to_string(sum));
    }
  }
}

FeatureBlock FeatureBlock::select_rows(std::span<const std::size_t> indices) const {
  std::vector<std::string> ids;
  ids.reserve(indices.size());
  for (std::size_t i : indices) ids.push_back(ids_.at(i));
  return FeatureBlock(name_, kind_, std::move(ids), matrix_.select_rows(indices), columns_);
}

FeatureBlock FeatureBlock::select_ids(std::span<const std::string> ids) const {
  std::unordered_map<std::string, std::size_t> pos;
  pos.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) pos.emplace(ids_[i], i);
  std::vector<std::size_t> indices;
  indices.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = pos.find(id);
    if (it == pos.end()) {
      throw Error(ErrorCode::alignment, "block '" + name_ + "' has no row for report '" + id + "'");
    }
    indices.push_back(it->second);
  }
  return select_rows(indices);
}

FeatureBlock FeatureBlock::renamed(std::string name) const {
  FeatureBlock copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

DatasetSplit split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n == 0) throw Error(ErrorCode::invalid_input, "cannot split an empty dataset");
  if (n < 2) throw Error(ErrorCode::invalid_input, "split needs at least 2 reports");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::invalid_input, "test fraction must lie in (0,1)");
  }
  const auto labels = label_indices(dataset, LabelLevel::issue);
  const std::size_t num_classes = dataset.taxonomy.num_issue();
  const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));

  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

  std::vector<std::size_t> quota(num_classes, 0);
  std::vector<double> remainder(num_classes, 0.0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t size = members[c].size();
    if (size < 2) continue;
    const double ideal = test_fraction * static_cast<double>(size);
    quota[c] = std::min(static_cast<std::size_t>(std::floor(ideal)), size - 1);
    remainder[c] = ideal - static_cast<double>(quota[c]);
    assigned += quota[c];
  }

  // Top up by largest remainder. First pass keeps one member of every class
  // in train; later passes relax that and finally dip into singletons.
  auto top_up = [&](auto capacity) {
    while (assigned < target) {
      std::size_t best = num_classes;
      for (std::size_t c = 0; c < num_classes; ++c) {
        if (quota[c] >= capacity(c)) continue;
        if (best == num_classes || remainder[c] > remainder[best]) best = c;
      }
      if (best == num_classes) return;
      ++quota[best];
      remainder[best] -= 1.0;
      ++assigned;
    }
  };
  top_up([&](std::size_t c) { return members[c].size() < 2 ? 0 : members[c].size() - 1; });
  top_up([&](std::size_t c) { return members[c].size() < 2 ? 0 : members[c].size(); });
  top_up([&](std::size_t c) { return members[c].size(); });

  Rng rng(derive_seed(seed, "split"));
  std::vector<bool> in_test(n, false);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& m = members[c];
    rng.shuffle(std::span<std::size_t>(m));
    for (std::size_t k = 0; k < quota[c]; ++k) in_test[m[k]] = true;
  }

  DatasetSplit split{{{}, dataset.taxonomy}, {{}, dataset.taxonomy}};
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? split.test : split.train).reports.push_back(dataset.reports[i]);
  }
  return split;
}

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(), [](const auto& i) {
    return i.severity == Severity::error;
  }));
}

std::size_t ValidationReport::warning_count() const { return issues.size() - error_count(); }

std::string ValidationReport::summary() const {
  std::ostringstream out;
  out << error_count() << " error(s), " << warning_count() << " warning(s)";
  for (const auto& issue : issues) {
    out << "\n  " << (issue.severity == Severity::error ? "error" : "warning") << " ["
        << issue.code << "] " << issue.report_id << ": " << issue.message;
  }
  return out.str();
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  auto add = [&](Severity s, const std::string& id, std::string code, std::string message) {
    report.issues.push_back({s, id, std::move(code), std::move(message)});
  };
  std::unordered_set<std::string> seen;
  for (const auto& r : dataset.reports) {
    if (r.id.empty()) add(Severity::error, r.id, "empty-id", "report id is empty");
    if (!seen.insert(r.id).second) add(Severity::error, r.id, "duplicate-id", "report id appears more than once");
    if (!std::isfinite(r.lat) || r.lat < -90.0 || r.lat > 90.0) {
      add(Severity::error, r.id, "lat-range", "latitude " + std::to_string(r.lat) + " outside [-90, 90]");
    }
    if (!std::isfinite(r.lon) || r.lon < -180.0 || r.lon > 180.0) {
      add(Severity::error, r.id, "lon-range", "longitude " + std::to_string(r.lon) + " outside [-180, 180]");
    }
    const auto issue = dataset.taxonomy.issue_index(r.issue_class);
    const auto main = dataset.taxonomy.main_index(r.main_class);
    if (!issue) add(Severity::error, r.id, "unknown-issue-class", "unknown issue class '" + r.issue_class + "'");
    if (!main) add(Severity::error, r.id, "unknown-main-class", "unknown main class '" + r.main_class + "'");
    if (issue && main && dataset.taxonomy.main_of_issue(*issue) != *main) {
      add(Severity::error, r.id, "label-mismatch",
          "issue class '" + r.issue_class + "' does not belong to main class '" + r.main_class + "'");
    }
    const bool blank = std::all_of(r.text.begin(), r.text.end(),
                                   [](unsigned char c) { return std::isspace(c) != 0; });
    if (blank && !r.image_ref) {
      add(Severity::warning, r.id, "no-modality", "report has neither text nor image");
    }
  }
  return report;
}

}  // namespace urbanfuse
