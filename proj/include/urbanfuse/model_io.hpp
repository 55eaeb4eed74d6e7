#pragma once

#include <filesystem>
#include <string>

#include "urbanfuse/classifiers.hpp"
#include "urbanfuse/core.hpp"
#include "urbanfuse/fusion.hpp"
#include "urbanfuse/text_features.hpp"

namespace urbanfuse {

inline constexpr int kModelFormatVersion = 1;

/// A fitted fusion model together with the label space it predicts.
struct ModelFile {
  LabelTaxonomy taxonomy;
  LabelLevel level = LabelLevel::main;
  FusionModel model;
};

/// JSON container {"format": "urbanfuse-model", "version": 1, "kind": ...}.
/// Loading throws corruption on malformed content and version on a format
/// version this build does not read.
void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

void save_tfidf(const TfidfModel& model, const std::filesystem::path& path);
TfidfModel load_tfidf(const std::filesystem::path& path);

/// Serialised forms, exposed for round-trip tests.
std::string classifier_to_json(const ClassifierModel& model);
ClassifierModel classifier_from_json(const std::string& text);

std::string_view to_string(LabelLevel level);
LabelLevel label_level_from_string(std::string_view text);

}  // namespace urbanfuse
