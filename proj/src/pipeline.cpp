#include "urbanfuse/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "urbanfuse/error.hpp"
#include "urbanfuse/eval.hpp"
#include "urbanfuse/geo_features.hpp"
#include "urbanfuse/ingest.hpp"
#include "urbanfuse/model_io.hpp"
#include "urbanfuse/parallel.hpp"
#include "urbanfuse/rng.hpp"
#include "urbanfuse/temporal_features.hpp"
#include "urbanfuse/visual_features.hpp"

namespace urbanfuse {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

PipelineConfig::PipelineConfig() {
  // Lighter walk and skip-gram settings than the library defaults keep a
  // full default run within minutes on a laptop.
  walk.walks_per_node = 4;
  walk.walk_length = 20;
  skipgram.window = 5;
  skipgram.epochs = 1;
}

fs::path PipelineConfig::data_path() const { return data_dir.empty() ? out_dir / "data" : data_dir; }

std::uint64_t PipelineConfig::root_seed() const {
  if (!seed) throw Error(ErrorCode::config, "a seed is required: set run.seed in the config or pass --seed");
  return *seed;
}

std::size_t PipelineConfig::thread_count() const {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Config keys

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::config, "expected a boolean, got '" + v + "'");
}

template <class T>
T parse_integer(const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) {
    throw Error(ErrorCode::config, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& v) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    throw Error(ErrorCode::config, "expected a number, got '" + v + "'");
  }
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct Key {
  const char* section;
  const char* name;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define UF_SIZE(sec, key, field)                                                            \
  Key{sec, key, [](PipelineConfig& c, const std::string& v) { c.field = parse_integer<std::size_t>(v); }, \
      [](const PipelineConfig& c) { return std::to_string(c.field); }}
#define UF_REAL(sec, key, field)                                                   \
  Key{sec, key, [](PipelineConfig& c, const std::string& v) { c.field = parse_real(v); }, \
      [](const PipelineConfig& c) { return format_double(c.field); }}
#define UF_BOOL(sec, key, field)                                                   \
  Key{sec, key, [](PipelineConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
      [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define UF_STR(sec, key, field)                                                \
  Key{sec, key, [](PipelineConfig& c, const std::string& v) { c.field = v; }, \
      [](const PipelineConfig& c) { return std::string(c.field); }}
#define UF_LIST(sec, key, field)                                                     \
  Key{sec, key, [](PipelineConfig& c, const std::string& v) { c.field = parse_list(v); }, \
      [](const PipelineConfig& c) { return join(c.field); }}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      Key{"run", "seed",
          [](PipelineConfig& c, const std::string& v) {
            if (v.empty()) c.seed.reset();
            else c.seed = parse_integer<std::uint64_t>(v);
          },
          [](const PipelineConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }},
      Key{"run", "out_dir", [](PipelineConfig& c, const std::string& v) { c.out_dir = v; },
          [](const PipelineConfig& c) { return c.out_dir.string(); }},
      UF_SIZE("run", "threads", threads),

      Key{"data", "dir", [](PipelineConfig& c, const std::string& v) { c.data_dir = v; },
          [](const PipelineConfig& c) { return c.data_dir.string(); }},
      UF_STR("data", "reports", reports_file),
      UF_STR("data", "taxonomy", taxonomy_file),
      UF_STR("data", "geo_objects", geo_objects_file),
      UF_STR("data", "history", history_file),
      UF_STR("data", "weather", weather_file),
      UF_STR("data", "visual", visual_file),

      UF_SIZE("synth", "num_reports", synth.num_reports),
      UF_SIZE("synth", "num_main_classes", synth.num_main_classes),
      UF_SIZE("synth", "num_issue_classes", synth.num_issue_classes),
      UF_REAL("synth", "weight_text", synth.weights[kText]),
      UF_REAL("synth", "weight_visual", synth.weights[kVisual]),
      UF_REAL("synth", "weight_geo", synth.weights[kGeo]),
      UF_REAL("synth", "weight_time", synth.weights[kTime]),
      UF_SIZE("synth", "vocabulary_size", synth.vocabulary_size),
      UF_SIZE("synth", "words_per_class", synth.words_per_class),
      UF_SIZE("synth", "geo_object_types", synth.geo_object_types),
      UF_REAL("synth", "label_noise", synth.label_noise),
      UF_REAL("synth", "zipf", synth.zipf),
      UF_REAL("synth", "image_rate", synth.image_rate),

      UF_REAL("split", "test_fraction", test_fraction),
      Key{"split", "level", [](PipelineConfig& c, const std::string& v) { c.level = label_level_from_string(v); },
          [](const PipelineConfig& c) { return std::string(to_string(c.level)); }},

      UF_BOOL("features", "text", use_text),
      UF_BOOL("features", "image", use_image),
      UF_BOOL("features", "geo", use_geo),
      UF_BOOL("features", "geo_hist", use_geo_hist),
      UF_BOOL("features", "time", use_time),
      UF_BOOL("features", "weather", use_weather),

      Key{"text", "representation",
          [](PipelineConfig& c, const std::string& v) {
            if (v == "tfidf") c.text_representation = TextRepresentation::tfidf;
            else if (v == "word2vec") c.text_representation = TextRepresentation::word2vec;
            else throw Error(ErrorCode::config, "text.representation must be tfidf or word2vec");
          },
          [](const PipelineConfig& c) {
            return std::string(c.text_representation == TextRepresentation::tfidf ? "tfidf" : "word2vec");
          }},
      UF_SIZE("text", "max_terms", max_terms),
      UF_SIZE("text", "min_df", min_df),
      UF_BOOL("text", "normalize", normalize),
      UF_SIZE("text", "w2v_dims", word_vectors.skipgram.dims),
      UF_SIZE("text", "w2v_window", word_vectors.skipgram.window),
      UF_SIZE("text", "w2v_epochs", word_vectors.skipgram.epochs),
      UF_SIZE("text", "w2v_min_count", word_vectors.min_count),

      UF_SIZE("graph", "vocabulary", graph_vocabulary),
      UF_SIZE("graph", "geo_neighbors", graph.geo_neighbors),
      UF_SIZE("graph", "concepts_per_image", graph.concepts_per_image),
      UF_SIZE("graph", "location_neighbors", graph.location_neighbors),
      Key{"graph", "geo_weight",
          [](PipelineConfig& c, const std::string& v) {
            if (v == "inverse_distance") c.graph.geo_weight = GeoWeightMode::inverse_distance;
            else if (v == "raw_distance") c.graph.geo_weight = GeoWeightMode::raw_distance;
            else throw Error(ErrorCode::config, "graph.geo_weight must be inverse_distance or raw_distance");
          },
          [](const PipelineConfig& c) {
            return std::string(c.graph.geo_weight == GeoWeightMode::inverse_distance ? "inverse_distance"
                                                                                     : "raw_distance");
          }},

      UF_REAL("walk", "p", walk.p),
      UF_REAL("walk", "q", walk.q),
      UF_SIZE("walk", "walks_per_node", walk.walks_per_node),
      UF_SIZE("walk", "walk_length", walk.walk_length),
      Key{"walk", "sampling",
          [](PipelineConfig& c, const std::string& v) {
            if (v == "inversion") c.walk.sampling = SamplingMode::inversion;
            else if (v == "alias") c.walk.sampling = SamplingMode::alias;
            else throw Error(ErrorCode::config, "walk.sampling must be inversion or alias");
          },
          [](const PipelineConfig& c) {
            return std::string(c.walk.sampling == SamplingMode::inversion ? "inversion" : "alias");
          }},

      UF_SIZE("skipgram", "dims", skipgram.dims),
      UF_SIZE("skipgram", "window", skipgram.window),
      UF_SIZE("skipgram", "negatives", skipgram.negatives),
      UF_SIZE("skipgram", "epochs", skipgram.epochs),
      UF_REAL("skipgram", "learning_rate", skipgram.learning_rate),

      Key{"classifier", "kind",
          [](PipelineConfig& c, const std::string& v) { c.classifier.kind = classifier_kind_from_string(v); },
          [](const PipelineConfig& c) { return std::string(to_string(c.classifier.kind)); }},
      UF_REAL("classifier", "l2", classifier.logreg.l2),
      UF_SIZE("classifier", "max_iter", classifier.logreg.max_iter),
      UF_REAL("classifier", "tol", classifier.logreg.tol),
      UF_SIZE("classifier", "rounds", classifier.gbdt.rounds),
      UF_SIZE("classifier", "max_depth", classifier.gbdt.max_depth),
      UF_REAL("classifier", "learning_rate", classifier.gbdt.learning_rate),
      UF_REAL("classifier", "min_child_weight", classifier.gbdt.min_child_weight),
      UF_REAL("classifier", "lambda", classifier.gbdt.lambda),
      UF_SIZE("classifier", "bins", classifier.gbdt.bins),

      UF_LIST("train", "raw", train_raw),
      UF_LIST("train", "prob", train_prob),
      UF_BOOL("train", "baselines", train_baselines),
      UF_SIZE("fusion", "folds", folds),
      UF_BOOL("fusion", "in_sample", in_sample),
      UF_LIST("search", "blocks", search_blocks),
      UF_SIZE("search", "budget", budget),

      Key{"route", "threshold", [](PipelineConfig& c, const std::string& v) {
            if (v.empty()) c.threshold.reset();
            else c.threshold = parse_real(v);
          },
          [](const PipelineConfig& c) { return c.threshold ? format_double(*c.threshold) : std::string(); }},
  };
  return keys;
}

#undef UF_SIZE
#undef UF_REAL
#undef UF_BOOL
#undef UF_STR
#undef UF_LIST

void apply_key(PipelineConfig& c, const std::string& section, const std::string& name, const std::string& value) {
  for (const auto& k : registry()) {
    if (section == k.section && name == k.name) {
      try {
        k.set(c, trim(value));
      } catch (const Error& e) {
        throw Error(ErrorCode::config, section + "." + name + ": " + e.message());
      }
      return;
    }
  }
  throw Error(ErrorCode::config, "unknown config key '" + section + "." + name + "'");
}

}  // namespace

PipelineConfig load_pipeline_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  PipelineConfig c;
  if (file) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorCode::config, e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw Error(ErrorCode::config, "key '" + section + "' must sit inside a [section]");
      for (const auto& [name, value] : body) apply_key(c, section, name, value.data());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw Error(ErrorCode::config, "override '" + o + "' must look like section.key=value");
    }
    apply_key(c, trim(o.substr(0, dot)), trim(o.substr(dot + 1, eq - dot - 1)), o.substr(eq + 1));
  }
  return c;
}

std::string render_config(const PipelineConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : registry()) {
    if (section != k.section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(config) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Stage plumbing

namespace {

constexpr int kManifestVersion = 1;

fs::path manifest_path(const PipelineConfig& c, const std::string& stage) {
  return c.out_dir / "manifest" / (stage + ".json");
}

bool stage_done(const PipelineConfig& c, const std::string& stage) { return fs::exists(manifest_path(c, stage)); }

void require_stage(const PipelineConfig& c, const std::string& stage) {
  if (!stage_done(c, stage)) {
    throw Error(ErrorCode::ordering, "run stage " + stage + " first (" + manifest_path(c, stage).string() + " is missing)");
  }
}

std::string relative(const PipelineConfig& c, const fs::path& p) {
  const auto rel = p.lexically_relative(c.out_dir);
  return (rel.empty() || *rel.begin() == "..") ? p.string() : rel.generic_string();
}

void write_manifest(const PipelineConfig& c, const std::string& stage, const StageResult& result) {
  ojson j;
  j["stage"] = stage;
  j["format_version"] = kManifestVersion;
  j["seed"] = c.root_seed();
  j["outputs"] = result.outputs;
  j["summary"] = result.summary;
  j["config"] = render_config(c);
  const auto path = manifest_path(c, stage);
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
}

std::vector<std::string> manifest_outputs(const PipelineConfig& c, const std::string& stage) {
  std::ifstream in(manifest_path(c, stage));
  try {
    return ojson::parse(in).at("outputs").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::corruption, manifest_path(c, stage).string() + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  return out;
}

fs::path input(const PipelineConfig& c, const std::string& file) { return c.data_path() / file; }

Dataset load_input_dataset(const PipelineConfig& c) {
  const auto path = input(c, c.reports_file);
  if (!fs::exists(path)) {
    if (c.data_dir.empty() && !stage_done(c, "synth")) {
      throw Error(ErrorCode::ordering, "run stage synth first, or point data.dir at existing inputs");
    }
    throw Error(ErrorCode::io, "reports file not found: " + path.string());
  }
  std::optional<fs::path> sidecar;
  if (!c.taxonomy_file.empty()) sidecar = input(c, c.taxonomy_file);
  return load_reports(path, sidecar);
}

// Images the extractor could not read count as absent.
VisualTable load_visual(const PipelineConfig& c, Dataset& dataset, std::size_t& failures) {
  std::vector<std::string> failed;
  auto table = load_visual_features(input(c, c.visual_file), &failed);
  const std::set<std::string> ids(failed.begin(), failed.end());
  failures = 0;
  for (auto& r : dataset.reports) {
    if (r.image_ref && ids.count(*r.image_ref)) {
      r.image_ref.reset();
      ++failures;
    }
  }
  return table;
}

struct SplitIds {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

SplitIds load_split(const PipelineConfig& c) {
  const auto path = c.out_dir / "split.tsv";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ordering, "run stage featurize first (" + path.string() + " is missing)");
  SplitIds s;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::corruption, "malformed split file " + path.string());
    const auto subset = line.substr(tab + 1);
    (subset == "test" ? s.test : s.train).push_back(line.substr(0, tab));
  }
  return s;
}

std::vector<std::size_t> labels_for(const Dataset& d, LabelLevel level, const std::vector<std::string>& ids) {
  const auto all = label_indices(d, level);
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < d.size(); ++i) by_id.emplace(d.reports[i].id, static_cast<std::size_t>(all[i]));
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::alignment, "split references unknown report '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

fs::path block_path(const PipelineConfig& c, const std::string& name) {
  return c.out_dir / "features" / (name + ".tsv");
}

FeatureBlock load_named_block(const PipelineConfig& c, const std::string& name) {
  const auto path = block_path(c, name);
  if (!fs::exists(path)) {
    if (name == "graph") require_stage(c, "embed");
    require_stage(c, "featurize");
    throw Error(ErrorCode::config, "feature block '" + name + "' was not produced (check the [features] toggles)");
  }
  return load_block(path);
}

std::vector<std::string> unique_names(std::initializer_list<const std::vector<std::string>*> lists) {
  std::vector<std::string> out;
  for (const auto* l : lists) {
    for (const auto& n : *l) {
      if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
  }
  return out;
}

void require_blocks(const PipelineConfig& c, const std::vector<std::string>& names) {
  require_stage(c, "featurize");
  if (std::find(names.begin(), names.end(), "graph") != names.end()) require_stage(c, "embed");
}

struct SplitBlocks {
  std::vector<FeatureBlock> train;
  std::vector<FeatureBlock> test;
};

SplitBlocks load_split_blocks(const PipelineConfig& c, const std::vector<std::string>& names, const SplitIds& split) {
  SplitBlocks out;
  for (const auto& n : names) {
    const auto b = load_named_block(c, n);
    out.train.push_back(b.select_ids(split.train));
    out.test.push_back(b.select_ids(split.test));
  }
  return out;
}

std::string count_summary(const std::vector<FeatureBlock>& blocks) {
  std::string s;
  for (const auto& b : blocks) s += " " + b.name() + "[" + std::to_string(b.cols()) + "]";
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

StageResult run_synth(const PipelineConfig& c) {
  SynthConfig sc = c.synth;
  sc.seed = derive_seed(c.root_seed(), "synth");
  const auto data = generate(sc);
  const auto dir = c.data_path();
  fs::create_directories(dir);
  save_reports(data.dataset, input(c, c.reports_file));
  save_geo_objects(data.geo_objects, input(c, c.geo_objects_file));
  save_historical_events(data.history, input(c, c.history_file));
  save_weather(data.weather, input(c, c.weather_file));
  save_visual_features(data.visual, input(c, c.visual_file));
  StageResult r;
  for (const auto& f : {c.reports_file, c.geo_objects_file, c.history_file, c.weather_file, c.visual_file}) {
    r.outputs.push_back(relative(c, input(c, f)));
  }
  std::ostringstream s;
  s << "synth: " << data.dataset.size() << " reports, " << data.dataset.taxonomy.num_main() << " main / "
    << data.dataset.taxonomy.num_issue() << " issue classes, " << data.geo_objects.size() << " geo objects, "
    << data.history.size() << " historical events, " << data.weather.rows.size() << " weather hours, "
    << data.visual.size() << " images";
  r.summary = s.str();
  write_manifest(c, "synth", r);
  return r;
}

StageResult run_featurize(const PipelineConfig& c) {
  const std::uint64_t seed = c.root_seed();
  Dataset dataset = load_input_dataset(c);
  std::size_t image_failures = 0;
  VisualTable visual;
  if (c.use_image) visual = load_visual(c, dataset, image_failures);
  const auto split = split_dataset(dataset, c.test_fraction, derive_seed(seed, "split"));
  StageResult r;

  {
    std::set<std::string> test_ids;
    for (const auto& rep : split.test.reports) test_ids.insert(rep.id);
    const auto path = c.out_dir / "split.tsv";
    auto out = open_out(path);
    out << "report_id\tsubset\n";
    for (const auto& rep : dataset.reports) out << rep.id << '\t' << (test_ids.count(rep.id) ? "test" : "train") << '\n';
    r.outputs.push_back(relative(c, path));
  }

  std::vector<FeatureBlock> blocks;
  if (c.use_text) {
    const auto corpus = tokenize_reports(split.train);
    if (c.text_representation == TextRepresentation::tfidf) {
      const auto model = tfidf_fit(corpus, build_vocabulary(corpus, c.max_terms, c.min_df), c.normalize);
      save_tfidf(model, c.out_dir / "models" / "tfidf.json");
      r.outputs.push_back("models/tfidf.json");
      blocks.push_back(report_text_block(dataset, model, "text"));
    } else {
      WordVectorConfig wc = c.word_vectors;
      wc.skipgram.seed = derive_seed(seed, "word2vec");
      const auto wv = train_word_vectors(corpus, wc);
      save_embeddings(NodeEmbeddings{wv.vocabulary.terms(), wv.vectors}, c.out_dir / "models" / "word_vectors.tsv");
      r.outputs.push_back("models/word_vectors.tsv");
      blocks.push_back(report_text_block(dataset, wv, "text"));
    }
  }
  if (c.use_image) blocks.push_back(visual_block(dataset, visual, "image"));
  if (c.use_geo) {
    const auto index = build_spatial_index(load_geo_objects(input(c, c.geo_objects_file)));
    save_geo_schema(index.types(), c.out_dir / "features" / "geo_schema.csv");
    r.outputs.push_back("features/geo_schema.csv");
    blocks.push_back(geo_block(dataset, index, "geo"));
  }
  if (c.use_geo_hist) {
    const auto events = load_historical_events(input(c, c.history_file));
    save_geo_schema(build_history_index(events).types(), c.out_dir / "features" / "geo_hist_schema.csv");
    r.outputs.push_back("features/geo_hist_schema.csv");
    blocks.push_back(historical_block(dataset, events, "geo_hist"));
  }
  if (c.use_time) blocks.push_back(time_block(dataset, "time"));
  if (c.use_weather) blocks.push_back(weather_block(dataset, load_weather(input(c, c.weather_file)), "weather"));
  for (const auto& b : blocks) {
    save_block(b, block_path(c, b.name()));
    r.outputs.push_back(relative(c, block_path(c, b.name())));
  }
  std::ostringstream s;
  s << "featurize: " << dataset.size() << " reports (" << split.train.size() << " train / " << split.test.size()
    << " test); blocks:" << count_summary(blocks);
  if (image_failures) s << "; " << image_failures << " failed images treated as absent";
  r.summary = s.str();
  write_manifest(c, "featurize", r);
  return r;
}

StageResult run_graph(const PipelineConfig& c) {
  c.root_seed();
  Dataset dataset = load_input_dataset(c);
  VisualTable visual;
  std::size_t image_failures = 0;
  if (c.use_image) visual = load_visual(c, dataset, image_failures);
  auto obs = observations(dataset);
  if (!c.use_image) {
    for (auto& o : obs) o.image_ref.reset();
  }
  SpatialIndex index;
  if (c.use_geo) index = build_spatial_index(load_geo_objects(input(c, c.geo_objects_file)));
  // Transductive: word nodes come from every report's text, never labels.
  const auto corpus = tokenize_reports(dataset);
  const auto tfidf = tfidf_fit(corpus, build_vocabulary(corpus, c.graph_vocabulary, 1), true);
  const auto graph = build_graph(obs, index, visual, tfidf, c.graph);
  const auto dir = c.out_dir / "graph";
  fs::create_directories(dir);
  save_graph(graph, dir / "edges.tsv", dir / "nodes.tsv");
  const auto stats = graph_stats(graph);
  {
    auto out = open_out(dir / "stats.txt");
    out << format_graph_stats(stats) << '\n';
  }
  StageResult r;
  r.outputs = {"graph/edges.tsv", "graph/nodes.tsv", "graph/stats.txt"};
  r.summary = "graph: " + std::to_string(stats.num_nodes) + " nodes, " + std::to_string(stats.num_edges) + " edges";
  write_manifest(c, "graph", r);
  return r;
}

StageResult run_embed(const PipelineConfig& c) {
  const std::uint64_t seed = c.root_seed();
  require_stage(c, "graph");
  const auto graph = load_graph(c.out_dir / "graph" / "edges.tsv", c.out_dir / "graph" / "nodes.tsv");
  Node2VecConfig nc{c.walk, c.skipgram};
  nc.walk.seed = derive_seed(seed, "walks");
  nc.walk.threads = c.thread_count();
  nc.skipgram.seed = derive_seed(seed, "skipgram");
  SkipGramResult stats;
  const auto emb = node2vec(graph, nc, &stats);
  save_embeddings(emb, c.out_dir / "embeddings" / "nodes.tsv");
  const Dataset dataset = load_input_dataset(c);
  const auto block = report_embedding_block(emb, dataset, "graph");
  save_block(block, block_path(c, "graph"));
  StageResult r;
  r.outputs = {"embeddings/nodes.tsv", "features/graph.tsv"};
  std::ostringstream s;
  s << "embed: " << emb.node_ids.size() << " nodes x " << emb.dims() << " dims";
  if (!stats.epoch_mean_loss.empty()) s << ", final epoch loss " << format_metric(stats.epoch_mean_loss.back());
  r.summary = s.str();
  write_manifest(c, "embed", r);
  return r;
}

StageResult run_train(const PipelineConfig& c) {
  const std::uint64_t seed = c.root_seed();
  const auto names = unique_names({&c.train_raw, &c.train_prob});
  require_blocks(c, names);
  const Dataset dataset = load_input_dataset(c);
  const auto split = load_split(c);
  const auto y = labels_for(dataset, c.level, split.train);
  const auto& classes = class_names(dataset.taxonomy, c.level);
  const auto blocks = load_split_blocks(c, names, split);

  FusionConfig main;
  main.raw_blocks = c.train_raw;
  main.prob_blocks = c.train_prob;
  main.classifier = c.classifier;
  main.folds = c.folds;
  main.in_sample = c.in_sample;
  validate(main);

  struct Job {
    std::string file;
    FusionConfig config;
  };
  std::vector<Job> jobs{{"models/model.json", main}};
  if (c.train_baselines) {
    for (const auto& n : names) {
      FusionConfig b = main;
      b.raw_blocks = {n};
      b.prob_blocks.clear();
      jobs.push_back({"models/baseline_" + n + ".json", b});
    }
  }
  const std::uint64_t train_seed = derive_seed(seed, "train");
  std::vector<FusionModel> models(jobs.size());
  parallel_for(jobs.size(), c.thread_count(), [&](std::size_t i) {
    models[i] = fit_fusion(jobs[i].config, blocks.train, y, classes, train_seed);
  });
  StageResult r;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    save_model(ModelFile{dataset.taxonomy, c.level, models[i]}, c.out_dir / jobs[i].file);
    r.outputs.push_back(jobs[i].file);
  }
  r.summary = "train: " + std::string(to_string(c.classifier.kind)) + " on \"" + describe(main) + "\", " +
              std::to_string(y.size()) + " rows, " + std::to_string(jobs.size() - 1) + " baselines";
  write_manifest(c, "train", r);
  return r;
}

StageResult run_fuse_search(const PipelineConfig& c) {
  const std::uint64_t seed = c.root_seed();
  require_blocks(c, c.search_blocks);
  const Dataset dataset = load_input_dataset(c);
  const auto split = load_split(c);
  const auto& classes = class_names(dataset.taxonomy, c.level);
  const auto y_train = labels_for(dataset, c.level, split.train);
  const HoldoutScorer scorer(labels_for(dataset, c.level, split.test), classes);
  const auto blocks = load_split_blocks(c, c.search_blocks, split);

  SearchConfig sc;
  sc.classifier = c.classifier;
  sc.folds = c.folds;
  sc.budget = c.budget;
  sc.seed = derive_seed(seed, "fuse-search");
  sc.threads = c.thread_count();
  sc.in_sample = c.in_sample;
  const auto ranked = search_fusion(blocks.train, blocks.test, y_train, scorer, sc);

  StageResult r;
  {
    auto out = open_out(c.out_dir / "results" / "search_leaderboard.csv");
    write_leaderboard_csv(out, ranked);
  }
  // Per-class view: every single-block raw config plus the overall winner.
  std::vector<std::pair<std::string, ConfusionMatrix>> columns;
  for (const auto& res : ranked) {
    if (res.config.prob_blocks.empty() && res.config.raw_blocks.size() == 1) {
      columns.emplace_back(describe(res.config), res.confusion);
    }
  }
  std::sort(columns.begin(), columns.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  columns.emplace_back("best: " + describe(ranked.front().config), ranked.front().confusion);
  {
    auto out = open_out(c.out_dir / "results" / "search_per_class.csv");
    write_per_class_csv(out, per_class_table(columns, 40));
  }
  r.outputs = {"results/search_leaderboard.csv", "results/search_per_class.csv"};
  r.summary = "fuse-search: " + std::to_string(ranked.size()) + " configs, best \"" + describe(ranked.front().config) +
              "\" weighted_f1=" + format_metric(ranked.front().report.weighted_f1);
  write_manifest(c, "fuse-search", r);
  return r;
}

namespace {

struct LoadedModel {
  std::string name;
  ModelFile file;
};

std::vector<LoadedModel> load_trained_models(const PipelineConfig& c) {
  require_stage(c, "train");
  std::vector<LoadedModel> out;
  for (const auto& rel : manifest_outputs(c, "train")) {
    const auto stem = fs::path(rel).stem().string();
    out.push_back({stem, load_model(c.out_dir / rel)});
  }
  if (out.empty()) throw Error(ErrorCode::corruption, "train manifest lists no models");
  return out;
}

std::vector<FeatureBlock> model_inputs(const PipelineConfig& c, const FusionModel& m, const std::vector<std::string>& ids) {
  std::vector<FeatureBlock> blocks;
  for (const auto& n : unique_names({&m.config.raw_blocks, &m.config.prob_blocks})) {
    blocks.push_back(load_named_block(c, n).select_ids(ids));
  }
  return blocks;
}

}  // namespace

StageResult run_evaluate(const PipelineConfig& c) {
  c.root_seed();
  const auto models = load_trained_models(c);
  const Dataset dataset = load_input_dataset(c);
  const auto split = load_split(c);
  const auto level = models.front().file.level;
  const auto& classes = class_names(dataset.taxonomy, level);
  const HoldoutScorer scorer(labels_for(dataset, level, split.test), classes);

  std::vector<FusionResult> results;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i].file.model;
    if (m.class_names != classes) throw Error(ErrorCode::validation, "model '" + models[i].name + "' uses a different taxonomy");
    const auto pred = predict_labels(predict_proba(m, model_inputs(c, m, split.test)));
    FusionResult fr;
    fr.config = m.config;
    fr.enumeration_index = i;
    fr.confusion = scorer.confusion(pred);
    fr.report = f1_report(fr.confusion);
    results.push_back(std::move(fr));
  }
  const auto& main = results.front();
  StageResult r;
  {
    auto out = open_out(c.out_dir / "results" / "metrics.csv");
    write_report_csv(out, main.report, classes);
  }
  {
    auto out = open_out(c.out_dir / "results" / "report.txt");
    out << "model: " << describe(main.config) << " (" << to_string(main.config.classifier.kind) << ")\n\n"
        << format_report_text(main.report, classes);
  }
  {
    auto out = open_out(c.out_dir / "results" / "confusion.csv");
    write_confusion_csv(out, main.confusion);
  }
  std::vector<std::pair<std::string, ConfusionMatrix>> columns;
  for (const auto& res : results) columns.emplace_back(describe(res.config), res.confusion);
  {
    auto out = open_out(c.out_dir / "results" / "per_class.csv");
    write_per_class_csv(out, per_class_table(columns));
  }
  auto ranked = results;
  std::stable_sort(ranked.begin(), ranked.end(), [](const FusionResult& a, const FusionResult& b) {
    if (a.report.weighted_f1 != b.report.weighted_f1) return a.report.weighted_f1 > b.report.weighted_f1;
    return block_count(a.config) < block_count(b.config);
  });
  {
    auto out = open_out(c.out_dir / "results" / "leaderboard.csv");
    write_leaderboard_csv(out, ranked);
  }
  r.outputs = {"results/metrics.csv", "results/report.txt", "results/confusion.csv", "results/per_class.csv",
               "results/leaderboard.csv"};
  r.summary = "evaluate: \"" + describe(main.config) + "\" weighted_f1=" + format_metric(main.report.weighted_f1) +
              " macro_f1=" + format_metric(main.report.macro_f1) + " accuracy=" + format_metric(main.report.accuracy) +
              " on " + std::to_string(main.report.total) + " test reports";
  write_manifest(c, "evaluate", r);
  return r;
}

StageResult run_route(const PipelineConfig& c, const RouteOptions& options) {
  c.root_seed();
  const auto threshold = options.threshold ? options.threshold : c.threshold;
  if (!threshold) {
    throw Error(ErrorCode::config, "routing needs an explicit threshold: pass --threshold or set route.threshold");
  }
  const auto models = load_trained_models(c);
  const auto& m = models.front().file.model;
  std::vector<std::string> ids;
  if (options.all_reports) {
    ids = report_ids(load_input_dataset(c));
  } else {
    ids = load_split(c).test;
  }
  const Matrix proba = predict_proba(m, model_inputs(c, m, ids));
  std::size_t automatic = 0;
  const auto path = c.out_dir / "results" / "routing.jsonl";
  auto out = open_out(path);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto d = route(proba.row(i), *threshold);
    ojson j;
    j["report_id"] = ids[i];
    j["decision"] = d.automatic ? "auto" : "defer";
    if (d.automatic) {
      j["class"] = m.class_names[d.class_index];
      ++automatic;
    }
    j["probability"] = d.probability;
    out << j.dump() << '\n';
  }
  StageResult r;
  r.outputs = {"results/routing.jsonl"};
  const double share = ids.empty() ? 0.0 : static_cast<double>(automatic) / static_cast<double>(ids.size());
  r.summary = "route: threshold=" + format_double(*threshold) + " auto=" + std::to_string(automatic) + "/" +
              std::to_string(ids.size()) + " (" + format_metric(share) + ")";
  write_manifest(c, "route", r);
  return r;
}

StageResult run_stage(const std::string& stage, const PipelineConfig& config, const RouteOptions& route_options) {
  if (stage == "synth") return run_synth(config);
  if (stage == "featurize") return run_featurize(config);
  if (stage == "graph") return run_graph(config);
  if (stage == "embed") return run_embed(config);
  if (stage == "train") return run_train(config);
  if (stage == "fuse-search") return run_fuse_search(config);
  if (stage == "evaluate") return run_evaluate(config);
  if (stage == "route") return run_route(config, route_options);
  throw Error(ErrorCode::config, "unknown stage '" + stage + "'");
}

}  // namespace urbanfuse
