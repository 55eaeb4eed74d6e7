#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "urbanfuse/core.hpp"

namespace urbanfuse {

struct GeoObject {
  std::string object_type;
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const GeoObject&) const = default;
};

struct HistoricalEvent {
  std::string issue_type;
  double lat = 0.0;
  double lon = 0.0;
  LocalDateTime timestamp;

  bool operator==(const HistoricalEvent&) const = default;
};

inline constexpr std::size_t kVisualDims = 2048;

struct VisualConcept {
  std::string label;
  double prob = 0.0;

  bool operator==(const VisualConcept&) const = default;
};

struct VisualFeatureEntry {
  std::string report_id;
  std::vector<double> vector;           // kVisualDims values
  std::vector<VisualConcept> concepts;  // non-increasing prob, at least two

  bool operator==(const VisualFeatureEntry&) const = default;
};

using VisualTable = std::map<std::string, VisualFeatureEntry>;

struct WeatherRow {
  LocalDateTime timestamp;  // truncated to the hour
  std::vector<double> values;

  bool operator==(const WeatherRow&) const = default;
};

struct WeatherTable {
  std::vector<std::string> column_names;
  std::vector<WeatherRow> rows;  // strictly increasing hours

  bool operator==(const WeatherTable&) const = default;
};

/// Dense vectors keyed by node id (one row per id).
struct NodeEmbeddings {
  std::vector<std::string> node_ids;
  Matrix matrix;

  std::size_t dims() const noexcept { return matrix.cols(); }
  bool operator==(const NodeEmbeddings&) const = default;
};

// Reports: JSON Lines. An optional first record {"taxonomy": {...}} carries
// the label taxonomy; otherwise it comes from `taxonomy_sidecar`, and failing
// that it is inferred from the labels in order of first appearance.
Dataset load_reports(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& taxonomy_sidecar = std::nullopt);
void save_reports(const Dataset& dataset, const std::filesystem::path& path);
LabelTaxonomy load_taxonomy(const std::filesystem::path& path);
void save_taxonomy(const LabelTaxonomy& taxonomy, const std::filesystem::path& path);

// Headered CSV.
std::vector<GeoObject> load_geo_objects(const std::filesystem::path& path);
void save_geo_objects(const std::vector<GeoObject>& objects, const std::filesystem::path& path);
std::vector<HistoricalEvent> load_historical_events(const std::filesystem::path& path);
void save_historical_events(const std::vector<HistoricalEvent>& events,
                            const std::filesystem::path& path);
WeatherTable load_weather(const std::filesystem::path& path);
void save_weather(const WeatherTable& weather, const std::filesystem::path& path);

// JSON Lines: {"report_id", "vector": [2048], "concepts": [{"label","prob"}...]}.
// Extractor error records {"report_id", "error"} are skipped; their ids are
// appended to `failed` when given.
VisualTable load_visual_features(const std::filesystem::path& path,
                                 std::vector<std::string>* failed = nullptr);
void save_visual_features(const VisualTable& table, const std::filesystem::path& path);
/// Throws format on wrong width, fewer than two concepts, probabilities
/// outside [0,1] or an increasing concept sequence.
void check_visual_entry(const VisualFeatureEntry& entry);

// "node_id\tv1\t...\tvD" per line.
NodeEmbeddings load_embeddings(const std::filesystem::path& path);
void save_embeddings(const NodeEmbeddings& embeddings, const std::filesystem::path& path);

// Feature block file: "#block\t<name>\t<kind>", a header "report_id\t<cols>",
// then one row per report.
FeatureBlock load_block(const std::filesystem::path& path);
void save_block(const FeatureBlock& block, const std::filesystem::path& path);

/// Shortest text that parses back to the same double (at most 17
/// significant digits).
std::string format_double(double value);
double parse_double(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

}  // namespace urbanfuse
