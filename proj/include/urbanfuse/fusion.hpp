#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "urbanfuse/classifiers.hpp"
#include "urbanfuse/core.hpp"
#include "urbanfuse/eval.hpp"

namespace urbanfuse {

struct FusionConfig {
  std::vector<std::string> raw_blocks;
  std::vector<std::string> prob_blocks;
  ClassifierConfig classifier;
  std::size_t folds = 5;
  /// Stack on in-sample probabilities instead of out-of-fold ones. Leaks
  /// labels into the meta features; kept only for comparison.
  bool in_sample = false;
};

/// Throws config on overlapping or empty block lists, or folds < 2.
void validate(const FusionConfig& config);
/// "text, graph, prob_time, prob_image" style label.
std::string describe(const FusionConfig& config);
std::size_t block_count(const FusionConfig& config);

/// Concatenates blocks that share one report order. Columns become
/// "<block>:<column>".
FeatureBlock early_fuse(std::span<const FeatureBlock> blocks);

/// Stratified fold index per row. Rows of each class are shuffled and dealt
/// round-robin, continuing across classes so folds stay balanced.
std::vector<std::size_t> stratified_folds(std::span<const std::size_t> y, std::size_t folds,
                                          std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

struct OofResult {
  FeatureBlock train;  // kind probability, scored out of fold
  FeatureBlock test;   // scored by the model fitted on all training rows
  std::vector<std::size_t> fold_of_row;
  /// Training row indices of each fold model, for leakage audits.
  std::vector<std::vector<std::size_t>> fold_training_rows;
  std::vector<std::string> warnings;
  ClassifierModel model;  // fitted on all training rows
};

/// Probabilities named "prob_<block>" with one column per class.
/// `test` may have zero rows.
OofResult oof_probabilities(const FeatureBlock& train, const FeatureBlock& test,
                            std::span<const std::size_t> y_train, std::span<const std::string> class_names,
                            const ClassifierConfig& classifier, std::size_t folds, std::uint64_t seed,
                            bool in_sample = false);

/// Probability blocks already computed, keyed by source block name.
using OofCache = std::map<std::string, OofResult>;

struct FusedData {
  Matrix train;
  Matrix test;
  std::vector<std::string> columns;
};

/// Raw blocks in config order, then probability blocks in config order.
/// Probability blocks come from `cache` when present there.
FusedData hybrid_fuse(const FusionConfig& config, const std::vector<FeatureBlock>& train_blocks,
                      const std::vector<FeatureBlock>& test_blocks, std::span<const std::size_t> y_train,
                      std::span<const std::string> class_names, std::uint64_t seed,
                      const OofCache* cache = nullptr);

/// Seed used for the stacking folds of one block.
std::uint64_t oof_seed(std::uint64_t seed, const std::string& block);

/// Each block absent, raw or probability (probability-kind blocks are never
/// stacked again). Ordered by block count, then by the base-3 counter.
std::vector<FusionConfig> enumerate_fusion_configs(const std::vector<FeatureBlock>& blocks,
                                                   const ClassifierConfig& classifier, std::size_t folds,
                                                   bool in_sample = false);

struct FusionResult {
  FusionConfig config;
  std::size_t enumeration_index = 0;
  F1Report report;
  ConfusionMatrix confusion;
};

struct SearchConfig {
  ClassifierConfig classifier;
  std::size_t folds = 5;
  std::size_t budget = 729;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // results do not depend on this
  bool in_sample = false;
};

/// Evaluates up to `budget` configs on the fixed split and ranks them by
/// weighted F1, then fewer blocks, then enumeration order.
std::vector<FusionResult> search_fusion(const std::vector<FeatureBlock>& train_blocks,
                                        const std::vector<FeatureBlock>& test_blocks,
                                        std::span<const std::size_t> y_train, const HoldoutScorer& scorer,
                                        const SearchConfig& config);

/// A fitted hybrid configuration: one base model per stacked block plus the
/// meta classifier over the fused features.
struct FusionModel {
  FusionConfig config;
  std::vector<std::string> class_names;
  std::map<std::string, ClassifierModel> base_models;
  ClassifierModel meta;
};

FusionModel fit_fusion(const FusionConfig& config, const std::vector<FeatureBlock>& train_blocks,
                       std::span<const std::size_t> y_train, std::span<const std::string> class_names,
                       std::uint64_t seed);
/// Fused feature matrix for rows of `blocks`, which must share one report order.
Matrix fusion_features(const FusionModel& model, const std::vector<FeatureBlock>& blocks);
Matrix predict_proba(const FusionModel& model, const std::vector<FeatureBlock>& blocks);

/// rank,classifier,features,weighted_f1,macro_f1,micro_f1,accuracy
void write_leaderboard_csv(std::ostream& out, const std::vector<FusionResult>& ranked);

}  // namespace urbanfuse
