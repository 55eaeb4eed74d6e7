#include "urbanfuse/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

using json = nlohmann::json;

namespace {

constexpr const char* kFormat = "urbanfuse-model";

json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) throw Error(ErrorCode::corruption, "matrix data size does not match its shape");
  return Matrix(rows, cols, std::move(data));
}

json to_json(const LogRegModel& m) {
  return {{"type", "logreg"},
          {"num_classes", m.num_classes},
          {"classes", m.classes},
          {"standardizer",
           {{"input_width", m.standardizer.input_width},
            {"kept", m.standardizer.kept},
            {"mean", m.standardizer.mean},
            {"scale", m.standardizer.scale}}},
          {"weights", matrix_json(m.weights)},
          {"bias", m.bias},
          {"l2", m.l2},
          {"iterations", m.iterations}};
}

LogRegModel logreg_from(const json& j) {
  LogRegModel m;
  m.num_classes = j.at("num_classes").get<std::size_t>();
  m.classes = j.at("classes").get<std::vector<std::size_t>>();
  const auto& s = j.at("standardizer");
  m.standardizer.input_width = s.at("input_width").get<std::size_t>();
  m.standardizer.kept = s.at("kept").get<std::vector<std::size_t>>();
  m.standardizer.mean = s.at("mean").get<std::vector<double>>();
  m.standardizer.scale = s.at("scale").get<std::vector<double>>();
  m.weights = matrix_from(j.at("weights"));
  m.bias = j.at("bias").get<std::vector<double>>();
  m.l2 = j.at("l2").get<double>();
  m.iterations = j.at("iterations").get<std::size_t>();
  const std::size_t d = m.standardizer.kept.size();
  if (m.standardizer.mean.size() != d || m.standardizer.scale.size() != d || m.weights.cols() != d ||
      m.weights.rows() != m.classes.size() || m.bias.size() != m.classes.size()) {
    throw Error(ErrorCode::corruption, "inconsistent logistic regression dimensions");
  }
  for (auto c : m.classes) {
    if (c >= m.num_classes) throw Error(ErrorCode::corruption, "class index out of range");
  }
  for (auto k : m.standardizer.kept) {
    if (k >= m.standardizer.input_width) throw Error(ErrorCode::corruption, "kept column out of range");
  }
  return m;
}

json to_json(const GbdtModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      if (n.feature < 0) nodes.push_back({{"value", n.value}});
      else nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"type", "gbdt"},
          {"num_classes", m.num_classes},
          {"classes", m.classes},
          {"input_width", m.input_width},
          {"learning_rate", m.learning_rate},
          {"max_depth", m.max_depth},
          {"rounds", m.rounds},
          {"lambda", m.lambda},
          {"cuts", m.cuts},
          {"trees", std::move(trees)}};
}

GbdtModel gbdt_from(const json& j) {
  GbdtModel m;
  m.num_classes = j.at("num_classes").get<std::size_t>();
  m.classes = j.at("classes").get<std::vector<std::size_t>>();
  m.input_width = j.at("input_width").get<std::size_t>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.max_depth = j.at("max_depth").get<std::size_t>();
  m.rounds = j.at("rounds").get<std::size_t>();
  m.lambda = j.at("lambda").get<double>();
  m.cuts = j.at("cuts").get<std::vector<std::vector<double>>>();
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    for (const auto& jn : jt) {
      TreeNode n;
      if (jn.contains("value")) {
        n.value = jn.at("value").get<double>();
      } else {
        n.feature = jn.at("feature").get<std::int32_t>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<std::uint32_t>();
        n.right = jn.at("right").get<std::uint32_t>();
      }
      t.nodes.push_back(n);
    }
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const auto& n = t.nodes[i];
      if (n.feature < 0) continue;
      if (static_cast<std::size_t>(n.feature) >= m.input_width || n.left <= i || n.right <= i ||
          n.left >= t.nodes.size() || n.right >= t.nodes.size()) {
        throw Error(ErrorCode::corruption, "malformed regression tree");
      }
    }
    if (t.nodes.empty()) throw Error(ErrorCode::corruption, "empty regression tree");
    m.trees.push_back(std::move(t));
  }
  if (m.trees.size() != m.rounds * m.classes.size()) {
    throw Error(ErrorCode::corruption, "tree count != rounds x classes");
  }
  return m;
}

json to_json(const ClassifierModel& m) {
  return std::visit([](const auto& x) { return to_json(x); }, m);
}

ClassifierModel classifier_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "logreg") return logreg_from(j);
  if (type == "gbdt") return gbdt_from(j);
  throw Error(ErrorCode::corruption, "unknown classifier type '" + type + "'");
}

json to_json(const ClassifierConfig& c) {
  return {{"kind", std::string(to_string(c.kind))},
          {"logreg", {{"l2", c.logreg.l2}, {"max_iter", c.logreg.max_iter}, {"tol", c.logreg.tol}}},
          {"gbdt",
           {{"rounds", c.gbdt.rounds},
            {"max_depth", c.gbdt.max_depth},
            {"learning_rate", c.gbdt.learning_rate},
            {"min_child_weight", c.gbdt.min_child_weight},
            {"lambda", c.gbdt.lambda},
            {"bins", c.gbdt.bins}}}};
}

ClassifierConfig classifier_config_from(const json& j) {
  ClassifierConfig c;
  c.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
  const auto& l = j.at("logreg");
  c.logreg = {l.at("l2").get<double>(), l.at("max_iter").get<std::size_t>(), l.at("tol").get<double>()};
  const auto& g = j.at("gbdt");
  c.gbdt.rounds = g.at("rounds").get<std::size_t>();
  c.gbdt.max_depth = g.at("max_depth").get<std::size_t>();
  c.gbdt.learning_rate = g.at("learning_rate").get<double>();
  c.gbdt.min_child_weight = g.at("min_child_weight").get<double>();
  c.gbdt.lambda = g.at("lambda").get<double>();
  c.gbdt.bins = g.at("bins").get<std::size_t>();
  return c;
}

json taxonomy_json(const LabelTaxonomy& t) {
  json issues = json::array();
  for (const auto& i : t.issue_classes()) issues.push_back({{"name", i}, {"main", t.main_name_of_issue(i)}});
  return {{"main_classes", t.main_classes()}, {"issue_classes", std::move(issues)}};
}

LabelTaxonomy taxonomy_from(const json& j) {
  std::vector<std::pair<std::string, std::string>> issues;
  for (const auto& i : j.at("issue_classes")) {
    issues.emplace_back(i.at("name").get<std::string>(), i.at("main").get<std::string>());
  }
  return LabelTaxonomy(j.at("main_classes").get<std::vector<std::string>>(), std::move(issues));
}

json read_container(const std::filesystem::path& path, const char* kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corruption, path.string() + ": not valid JSON (" + e.what() + ")");
  }
  if (!j.is_object() || j.value("format", "") != kFormat) {
    throw Error(ErrorCode::corruption, path.string() + ": not a model container");
  }
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw Error(ErrorCode::corruption, path.string() + ": missing format version");
  }
  const int version = j["version"].get<int>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::version, path.string() + ": format version " + std::to_string(version) +
                                        ", this build reads version " + std::to_string(kModelFormatVersion));
  }
  if (j.value("kind", "") != kind) {
    throw Error(ErrorCode::corruption, path.string() + ": expected a '" + kind + "' model");
  }
  return j;
}

void write_container(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

// Wraps json library errors (missing keys, wrong types) as corruption.
template <class F>
auto guarded(const std::filesystem::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corruption, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::corruption) throw;
    throw Error(ErrorCode::corruption, path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(LabelLevel level) { return level == LabelLevel::main ? "main" : "issue"; }

LabelLevel label_level_from_string(std::string_view text) {
  if (text == "main") return LabelLevel::main;
  if (text == "issue") return LabelLevel::issue;
  throw Error(ErrorCode::config, "label level must be 'main' or 'issue', got '" + std::string(text) + "'");
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  const auto& m = file.model;
  json base = json::object();
  for (const auto& [name, model] : m.base_models) base[name] = to_json(model);
  json j = {{"format", kFormat},
            {"version", kModelFormatVersion},
            {"kind", "fusion"},
            {"taxonomy", taxonomy_json(file.taxonomy)},
            {"level", std::string(to_string(file.level))},
            {"class_names", m.class_names},
            {"fusion",
             {{"raw_blocks", m.config.raw_blocks},
              {"prob_blocks", m.config.prob_blocks},
              {"folds", m.config.folds},
              {"in_sample", m.config.in_sample},
              {"classifier", to_json(m.config.classifier)}}},
            {"base_models", std::move(base)},
            {"meta", to_json(m.meta)}};
  write_container(j, path);
}

ModelFile load_model(const std::filesystem::path& path) {
  const json j = read_container(path, "fusion");
  return guarded(path, [&] {
    ModelFile f;
    f.taxonomy = taxonomy_from(j.at("taxonomy"));
    f.level = label_level_from_string(j.at("level").get<std::string>());
    auto& m = f.model;
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (m.class_names != class_names(f.taxonomy, f.level)) {
      throw Error(ErrorCode::corruption, "class names do not match the taxonomy");
    }
    const auto& fu = j.at("fusion");
    m.config.raw_blocks = fu.at("raw_blocks").get<std::vector<std::string>>();
    m.config.prob_blocks = fu.at("prob_blocks").get<std::vector<std::string>>();
    m.config.folds = fu.at("folds").get<std::size_t>();
    m.config.in_sample = fu.at("in_sample").get<bool>();
    m.config.classifier = classifier_config_from(fu.at("classifier"));
    for (const auto& [name, jm] : j.at("base_models").items()) m.base_models.emplace(name, classifier_from(jm));
    m.meta = classifier_from(j.at("meta"));
    return f;
  });
}

void save_tfidf(const TfidfModel& model, const std::filesystem::path& path) {
  json j = {{"format", kFormat},
            {"version", kModelFormatVersion},
            {"kind", "tfidf"},
            {"terms", model.vocabulary.terms()},
            {"document_frequency", model.vocabulary.document_frequency()},
            {"corpus_size", model.vocabulary.corpus_size()},
            {"idf", model.idf},
            {"normalize", model.normalize}};
  write_container(j, path);
}

TfidfModel load_tfidf(const std::filesystem::path& path) {
  const json j = read_container(path, "tfidf");
  return guarded(path, [&] {
    TfidfModel m;
    m.vocabulary = Vocabulary(j.at("terms").get<std::vector<std::string>>(),
                              j.at("document_frequency").get<std::vector<std::size_t>>(),
                              j.at("corpus_size").get<std::size_t>());
    m.idf = j.at("idf").get<std::vector<double>>();
    m.normalize = j.at("normalize").get<bool>();
    if (m.idf.size() != m.vocabulary.size()) throw Error(ErrorCode::corruption, "idf length != vocabulary size");
    return m;
  });
}

std::string classifier_to_json(const ClassifierModel& model) { return to_json(model).dump(); }

ClassifierModel classifier_from_json(const std::string& text) {
  try {
    return classifier_from(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corruption, e.what());
  }
}

}  // namespace urbanfuse
