#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "urbanfuse/core.hpp"
#include "urbanfuse/ingest.hpp"

namespace urbanfuse {

enum Modality : std::size_t { kText = 0, kVisual = 1, kGeo = 2, kTime = 3 };
inline constexpr std::size_t kModalities = 4;

struct SynthConfig {
  std::size_t num_reports = 2000;
  std::size_t num_main_classes = 8;
  std::size_t num_issue_classes = 16;
  /// Probability that a modality is generated from the report's own class;
  /// otherwise from a uniformly drawn class. Order: text, visual, geo, time.
  std::array<double, kModalities> weights{0.4, 0.4, 0.4, 0.4};
  std::size_t vocabulary_size = 500;  // background words
  std::size_t words_per_class = 15;
  std::size_t geo_object_types = 16;
  std::size_t objects_per_class = 30;
  std::size_t background_objects_per_type = 40;
  std::size_t history_per_class = 60;
  double label_noise = 0.0;
  /// Issue-class priors follow 1/(rank+1)^zipf; 0 gives uniform classes.
  double zipf = 0.0;
  double image_rate = 1.0;
  int year = 2019;
  std::uint64_t seed = 1;
};

void validate(const SynthConfig& config);

struct SynthData {
  Dataset dataset;
  std::vector<GeoObject> geo_objects;
  std::vector<HistoricalEvent> history;
  WeatherTable weather;
  VisualTable visual;
  /// Generating class of each modality per report, and the class before
  /// label noise. Only for oracle checks; never written to disk.
  std::vector<std::array<std::size_t, kModalities>> cues;
  std::vector<std::size_t> true_issue;
};

/// Issue-class priors implied by the config, in taxonomy order.
std::vector<double> class_priors(const SynthConfig& config);

SynthData generate(const SynthConfig& config);

/// Writes reports.jsonl, geo_objects.csv, history.csv, weather.csv and
/// visual.jsonl into `dir`.
void save_synth(const SynthData& data, const std::filesystem::path& dir);

}  // namespace urbanfuse
