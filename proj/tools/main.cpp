#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "urbanfuse/error.hpp"
#include "urbanfuse/pipeline.hpp"

namespace uf = urbanfuse;

int main(int argc, char** argv) {
  CLI::App app{"Multimodal report classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_file, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "root seed (overrides run.seed)");
  app.add_option("--out-dir", out_dir, "output directory (overrides run.out_dir)");
  app.add_option("--set", overrides, "section.key=value override, repeatable")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  const std::pair<const char*, const char*> descriptions[] = {
      {"synth", "generate a synthetic dataset into <out>/data"},
      {"featurize", "split the data and write per-modality feature blocks"},
      {"graph", "build the multimodal graph"},
      {"embed", "node2vec embeddings and the graph feature block"},
      {"train", "fit the main model and unimodal baselines"},
      {"fuse-search", "evaluate every raw/stacked block combination"},
      {"evaluate", "score trained models on the held-out split"},
      {"route", "automatic/defer decisions from a probability threshold"},
  };

  uf::RouteOptions route;
  std::vector<CLI::App*> stages;
  for (const char* name : uf::kStages) {
    std::string help;
    for (const auto& [stage, text] : descriptions)
      if (std::string(stage) == name) help = text;
    auto* sub = app.add_subcommand(name, help);
    if (std::string(name) == "route") {
      sub->add_option("--threshold", route.threshold, "minimum top probability for automatic routing");
      sub->add_flag("--all", route.all_reports, "route every report instead of the test split");
    }
    stages.push_back(sub);
  }
  auto* show = app.add_subcommand("config", "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    auto config = uf::load_pipeline_config(config_file ? std::optional<std::filesystem::path>(*config_file)
                                                       : std::nullopt,
                                           overrides);
    if (seed) config.seed = *seed;
    if (out_dir) config.out_dir = *out_dir;
    if (show->parsed()) {
      std::cout << uf::render_config(config);
      return 0;
    }
    for (auto* sub : stages) {
      if (sub->parsed()) {
        std::cout << uf::run_stage(sub->get_name(), config, route).summary << '\n';
      }
    }
  } catch (const uf::Error& e) {
    std::cerr << "error[" << uf::to_string(e.code()) << "]: " << e.message() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
