#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "urbanfuse/classifiers.hpp"
#include "urbanfuse/fusion.hpp"
#include "urbanfuse/graph_builder.hpp"
#include "urbanfuse/node_embedding.hpp"
#include "urbanfuse/synth.hpp"
#include "urbanfuse/text_features.hpp"

namespace urbanfuse {

enum class TextRepresentation { tfidf, word2vec };

struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "out";
  std::size_t threads = 0;  // 0: one per hardware thread

  std::filesystem::path data_dir;  // empty: <out_dir>/data
  std::string reports_file = "reports.jsonl";
  std::string taxonomy_file;       // optional sidecar
  std::string geo_objects_file = "geo_objects.csv";
  std::string history_file = "history.csv";
  std::string weather_file = "weather.csv";
  std::string visual_file = "visual.jsonl";

  SynthConfig synth;

  double test_fraction = 0.2;
  LabelLevel level = LabelLevel::main;

  bool use_text = true;
  bool use_image = true;
  bool use_geo = true;
  bool use_geo_hist = true;
  bool use_time = true;
  bool use_weather = true;

  TextRepresentation text_representation = TextRepresentation::tfidf;
  std::size_t max_terms = 50000;
  std::size_t min_df = 2;
  bool normalize = true;
  WordVectorConfig word_vectors;

  std::size_t graph_vocabulary = 5000;
  GraphConfig graph;
  WalkConfig walk;
  SkipGramConfig skipgram;

  ClassifierConfig classifier;

  std::vector<std::string> train_raw{"text", "image", "geo", "geo_hist", "time", "weather"};
  std::vector<std::string> train_prob;
  bool train_baselines = true;
  std::size_t folds = 5;
  bool in_sample = false;

  std::vector<std::string> search_blocks{"text", "image", "geo", "time", "weather", "graph"};
  std::size_t budget = 729;

  std::optional<double> threshold;

  PipelineConfig();
  std::filesystem::path data_path() const;
  std::uint64_t root_seed() const;  // throws config when unset
  std::size_t thread_count() const;
};

/// INI-style file ("[section]" then "key = value"), then "section.key=value"
/// overrides in order. Unknown keys are config errors.
PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::string>& overrides = {});
/// Every key with its resolved value, in the same format the loader reads.
std::string render_config(const PipelineConfig& config);

inline constexpr const char* kStages[] = {"synth", "featurize", "graph", "embed",
                                          "train", "fuse-search", "evaluate", "route"};

struct StageResult {
  std::string summary;               // one deterministic line
  std::vector<std::string> outputs;  // relative to out_dir
};

struct RouteOptions {
  std::optional<double> threshold;  // overrides the config value
  bool all_reports = false;         // default: the held-out split only
};

StageResult run_synth(const PipelineConfig& config);
StageResult run_featurize(const PipelineConfig& config);
StageResult run_graph(const PipelineConfig& config);
StageResult run_embed(const PipelineConfig& config);
StageResult run_train(const PipelineConfig& config);
StageResult run_fuse_search(const PipelineConfig& config);
StageResult run_evaluate(const PipelineConfig& config);
StageResult run_route(const PipelineConfig& config, const RouteOptions& options = {});

/// Dispatch by stage name; throws config on an unknown name.
StageResult run_stage(const std::string& stage, const PipelineConfig& config, const RouteOptions& route = {});

}  // namespace urbanfuse
