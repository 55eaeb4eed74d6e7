#include "urbanfuse/fusion.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "urbanfuse/error.hpp"
#include "urbanfuse/parallel.hpp"
#include "urbanfuse/rng.hpp"

namespace urbanfuse {

namespace {

const FeatureBlock& find_block(const std::vector<FeatureBlock>& blocks, const std::string& name,
                               const char* which) {
  for (const auto& b : blocks) {
    if (b.name() == name) return b;
  }
  throw Error(ErrorCode::config, std::string("unknown ") + which + " block '" + name + "'");
}

void check_same_ids(const FeatureBlock& a, const FeatureBlock& b) {
  if (a.report_ids() != b.report_ids()) {
    throw Error(ErrorCode::alignment, "blocks '" + a.name() + "' and '" + b.name() +
                                          "' are not aligned to the same report order");
  }
}

}  // namespace

void validate(const FusionConfig& config) {
  if (config.raw_blocks.empty() && config.prob_blocks.empty()) {
    throw Error(ErrorCode::config, "fusion config selects no blocks");
  }
  std::set<std::string> seen;
  for (const auto* list : {&config.raw_blocks, &config.prob_blocks}) {
    for (const auto& n : *list) {
      if (!seen.insert(n).second) throw Error(ErrorCode::config, "block '" + n + "' listed twice in fusion config");
    }
  }
  if (config.folds < 2) throw Error(ErrorCode::config, "folds must be >= 2");
}

std::string describe(const FusionConfig& config) {
  std::string out;
  auto add = [&](const std::string& s) {
    if (!out.empty()) out += ", ";
    out += s;
  };
  for (const auto& n : config.raw_blocks) add(n);
  for (const auto& n : config.prob_blocks) add("prob_" + n);
  return out;
}

std::size_t block_count(const FusionConfig& config) {
  return config.raw_blocks.size() + config.prob_blocks.size();
}

FeatureBlock early_fuse(std::span<const FeatureBlock> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::invalid_input, "early fusion needs at least one block");
  std::vector<const Matrix*> parts;
  std::vector<std::string> columns;
  std::string name;
  for (const auto& b : blocks) {
    check_same_ids(blocks.front(), b);
    parts.push_back(&b.matrix());
    for (const auto& c : b.column_names()) columns.push_back(b.name() + ":" + c);
    name += (name.empty() ? "" : "+") + b.name();
  }
  return FeatureBlock(std::move(name), BlockKind::raw, blocks.front().report_ids(), hconcat(parts),
                      std::move(columns));
}

std::vector<std::size_t> stratified_folds(std::span<const std::size_t> y, std::size_t folds,
                                          std::uint64_t seed, std::vector<std::string>* warnings) {
  if (folds < 2) throw Error(ErrorCode::invalid_input, "folds must be >= 2");
  if (folds > y.size()) {
    throw Error(ErrorCode::invalid_input, "folds (" + std::to_string(folds) + ") exceed row count (" +
                                              std::to_string(y.size()) + ")");
  }
  const std::size_t k = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  Rng rng(derive_seed(seed, "folds"));
  std::vector<std::size_t> fold(y.size());
  std::size_t offset = 0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < folds && warnings) {
      warnings->push_back("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                          " rows, fewer than " + std::to_string(folds) + " folds");
    }
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t i = 0; i < rows.size(); ++i) fold[rows[i]] = (offset + i) % folds;
    offset += rows.size();
  }
  return fold;
}

OofResult oof_probabilities(const FeatureBlock& train, const FeatureBlock& test,
                            std::span<const std::size_t> y_train, std::span<const std::string> class_names,
                            const ClassifierConfig& classifier, std::size_t folds, std::uint64_t seed,
                            bool in_sample) {
  if (train.rows() != y_train.size()) {
    throw Error(ErrorCode::invalid_input, "block '" + train.name() + "' rows != training labels");
  }
  if (test.rows() > 0 && test.cols() != train.cols()) {
    throw Error(ErrorCode::shape, "train and test widths differ for block '" + train.name() + "'");
  }
  const std::size_t k = class_names.size();
  const std::size_t n = train.rows();
  OofResult out;
  Matrix train_prob(n, k);
  if (in_sample) {
    out.fold_of_row.assign(n, 0);
    out.fold_training_rows.emplace_back(n);
    std::iota(out.fold_training_rows[0].begin(), out.fold_training_rows[0].end(), 0);
  } else {
    out.fold_of_row = stratified_folds(y_train, folds, seed, &out.warnings);
    out.fold_training_rows.resize(folds);
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> fit_rows, score_rows;
      for (std::size_t i = 0; i < n; ++i) (out.fold_of_row[i] == f ? score_rows : fit_rows).push_back(i);
      if (score_rows.empty()) continue;
      std::vector<std::size_t> y_fit;
      for (auto i : fit_rows) y_fit.push_back(y_train[i]);
      const auto model = train_classifier(train.matrix().select_rows(fit_rows), y_fit, k, classifier);
      const Matrix p = predict_proba(model, train.matrix().select_rows(score_rows));
      for (std::size_t j = 0; j < score_rows.size(); ++j) {
        std::copy(p.row(j).begin(), p.row(j).end(), train_prob.row(score_rows[j]).begin());
      }
      out.fold_training_rows[f] = std::move(fit_rows);
    }
  }
  out.model = train_classifier(train.matrix(), y_train, k, classifier);
  if (in_sample) train_prob = predict_proba(out.model, train.matrix());
  Matrix test_prob = test.rows() > 0 ? predict_proba(out.model, test.matrix()) : Matrix(0, k);

  const std::string name = "prob_" + train.name();
  std::vector<std::string> columns;
  for (const auto& c : class_names) columns.push_back(name + ":" + c);
  out.train = FeatureBlock(name, BlockKind::probability, train.report_ids(), std::move(train_prob), columns);
  out.test = FeatureBlock(name, BlockKind::probability, test.report_ids(), std::move(test_prob), columns);
  return out;
}

std::uint64_t oof_seed(std::uint64_t seed, const std::string& block) {
  return derive_seed(seed, "stack:" + block);
}

FusedData hybrid_fuse(const FusionConfig& config, const std::vector<FeatureBlock>& train_blocks,
                      const std::vector<FeatureBlock>& test_blocks, std::span<const std::size_t> y_train,
                      std::span<const std::string> class_names, std::uint64_t seed, const OofCache* cache) {
  validate(config);
  std::vector<const Matrix*> train_parts, test_parts;
  FusedData out;
  std::vector<OofResult> computed;
  computed.reserve(config.prob_blocks.size());
  const FeatureBlock* first = nullptr;
  const FeatureBlock* first_test = nullptr;
  auto align = [&](const FeatureBlock& tr, const FeatureBlock& te) {
    if (!first) {
      first = &tr;
      first_test = &te;
    }
    check_same_ids(*first, tr);
    check_same_ids(*first_test, te);
  };
  for (const auto& n : config.raw_blocks) {
    const auto& tr = find_block(train_blocks, n, "training");
    const auto& te = find_block(test_blocks, n, "test");
    align(tr, te);
    train_parts.push_back(&tr.matrix());
    test_parts.push_back(&te.matrix());
    for (const auto& c : tr.column_names()) out.columns.push_back(n + ":" + c);
  }
  for (const auto& n : config.prob_blocks) {
    const auto& tr = find_block(train_blocks, n, "training");
    const auto& te = find_block(test_blocks, n, "test");
    if (tr.kind() == BlockKind::probability) {
      throw Error(ErrorCode::config, "block '" + n + "' already holds probabilities; it cannot be stacked again");
    }
    align(tr, te);
    const OofResult* oof = nullptr;
    if (cache) {
      const auto it = cache->find(n);
      if (it != cache->end()) oof = &it->second;
    }
    if (!oof) {
      computed.push_back(oof_probabilities(tr, te, y_train, class_names, config.classifier, config.folds,
                                           oof_seed(seed, n), config.in_sample));
      oof = &computed.back();
    }
    train_parts.push_back(&oof->train.matrix());
    test_parts.push_back(&oof->test.matrix());
    for (const auto& c : oof->train.column_names()) out.columns.push_back(c);
  }
  out.train = hconcat(train_parts);
  out.test = hconcat(test_parts);
  return out;
}

std::vector<FusionConfig> enumerate_fusion_configs(const std::vector<FeatureBlock>& blocks,
                                                   const ClassifierConfig& classifier, std::size_t folds,
                                                   bool in_sample) {
  const std::size_t b = blocks.size();
  if (b == 0) throw Error(ErrorCode::invalid_input, "fusion search needs at least one block");
  if (b > 20) throw Error(ErrorCode::invalid_input, "too many blocks for exhaustive enumeration");
  std::size_t total = 1;
  for (std::size_t i = 0; i < b; ++i) total *= 3;
  std::vector<std::pair<std::size_t, FusionConfig>> staged;
  for (std::size_t code = 1; code < total; ++code) {
    FusionConfig cfg;
    cfg.classifier = classifier;
    cfg.folds = folds;
    cfg.in_sample = in_sample;
    bool ok = true;
    std::size_t rest = code;
    for (std::size_t i = 0; i < b; ++i, rest /= 3) {
      const std::size_t digit = rest % 3;
      if (digit == 1) cfg.raw_blocks.push_back(blocks[i].name());
      if (digit == 2) {
        if (blocks[i].kind() == BlockKind::probability) ok = false;
        cfg.prob_blocks.push_back(blocks[i].name());
      }
    }
    if (ok) staged.emplace_back(block_count(cfg), std::move(cfg));
  }
  std::stable_sort(staged.begin(), staged.end(),
                   [](const auto& a, const auto& c) { return a.first < c.first; });
  std::vector<FusionConfig> out;
  out.reserve(staged.size());
  for (auto& s : staged) out.push_back(std::move(s.second));
  return out;
}

std::vector<FusionResult> search_fusion(const std::vector<FeatureBlock>& train_blocks,
                                        const std::vector<FeatureBlock>& test_blocks,
                                        std::span<const std::size_t> y_train, const HoldoutScorer& scorer,
                                        const SearchConfig& config) {
  if (config.budget < 1) throw Error(ErrorCode::invalid_input, "search budget must be >= 1");
  auto configs = enumerate_fusion_configs(train_blocks, config.classifier, config.folds, config.in_sample);
  if (configs.size() > config.budget) configs.resize(config.budget);
  const auto& class_names = scorer.class_labels();

  std::vector<std::string> stacked;
  for (const auto& c : configs) {
    for (const auto& n : c.prob_blocks) {
      if (std::find(stacked.begin(), stacked.end(), n) == stacked.end()) stacked.push_back(n);
    }
  }
  std::vector<OofResult> oof(stacked.size());
  parallel_for(stacked.size(), config.threads, [&](std::size_t i) {
    const auto& n = stacked[i];
    oof[i] = oof_probabilities(find_block(train_blocks, n, "training"), find_block(test_blocks, n, "test"),
                               y_train, class_names, config.classifier, config.folds, oof_seed(config.seed, n),
                               config.in_sample);
  });
  OofCache cache;
  for (std::size_t i = 0; i < stacked.size(); ++i) cache.emplace(stacked[i], std::move(oof[i]));

  std::vector<FusionResult> results(configs.size());
  parallel_for(configs.size(), config.threads, [&](std::size_t i) {
    const auto fused = hybrid_fuse(configs[i], train_blocks, test_blocks, y_train, class_names, config.seed, &cache);
    const auto model = train_classifier(fused.train, y_train, class_names.size(), configs[i].classifier);
    const auto pred = predict_labels(predict_proba(model, fused.test));
    auto& r = results[i];
    r.config = configs[i];
    r.enumeration_index = i;
    r.confusion = scorer.confusion(pred);
    r.report = f1_report(r.confusion);
  });
  std::stable_sort(results.begin(), results.end(), [](const FusionResult& a, const FusionResult& b) {
    if (a.report.weighted_f1 != b.report.weighted_f1) return a.report.weighted_f1 > b.report.weighted_f1;
    const auto na = block_count(a.config), nb = block_count(b.config);
    if (na != nb) return na < nb;
    return a.enumeration_index < b.enumeration_index;
  });
  return results;
}

FusionModel fit_fusion(const FusionConfig& config, const std::vector<FeatureBlock>& train_blocks,
                       std::span<const std::size_t> y_train, std::span<const std::string> class_names,
                       std::uint64_t seed) {
  validate(config);
  FusionModel model;
  model.config = config;
  model.class_names.assign(class_names.begin(), class_names.end());
  const FeatureBlock no_test;
  std::vector<const Matrix*> parts;
  std::vector<OofResult> stacked;
  stacked.reserve(config.prob_blocks.size());
  const FeatureBlock* first = nullptr;
  auto take = [&](const std::string& n) -> const FeatureBlock& {
    const auto& b = find_block(train_blocks, n, "training");
    if (first) check_same_ids(*first, b);
    else first = &b;
    return b;
  };
  for (const auto& n : config.raw_blocks) parts.push_back(&take(n).matrix());
  for (const auto& n : config.prob_blocks) {
    const auto& tr = take(n);
    if (tr.kind() == BlockKind::probability) {
      throw Error(ErrorCode::config, "block '" + n + "' already holds probabilities; it cannot be stacked again");
    }
    stacked.push_back(oof_probabilities(tr, no_test, y_train, class_names, config.classifier, config.folds,
                                        oof_seed(seed, n), config.in_sample));
    model.base_models.emplace(n, stacked.back().model);
    parts.push_back(&stacked.back().train.matrix());
  }
  const Matrix fused = hconcat(parts);
  model.meta = train_classifier(fused, y_train, class_names.size(), config.classifier);
  return model;
}

Matrix fusion_features(const FusionModel& model, const std::vector<FeatureBlock>& blocks) {
  std::vector<Matrix> probs;
  probs.reserve(model.config.prob_blocks.size());
  std::vector<const Matrix*> parts;
  const FeatureBlock* first = nullptr;
  auto take = [&](const std::string& n) -> const FeatureBlock& {
    const auto& b = find_block(blocks, n, "input");
    if (first) check_same_ids(*first, b);
    else first = &b;
    return b;
  };
  for (const auto& n : model.config.raw_blocks) parts.push_back(&take(n).matrix());
  for (const auto& n : model.config.prob_blocks) {
    const auto it = model.base_models.find(n);
    if (it == model.base_models.end()) throw Error(ErrorCode::corruption, "fusion model lacks base model for '" + n + "'");
    probs.push_back(predict_proba(it->second, take(n).matrix()));
  }
  for (const auto& p : probs) parts.push_back(&p);
  return hconcat(parts);
}

Matrix predict_proba(const FusionModel& model, const std::vector<FeatureBlock>& blocks) {
  return predict_proba(model.meta, fusion_features(model, blocks));
}

void write_leaderboard_csv(std::ostream& out, const std::vector<FusionResult>& ranked) {
  out << "rank,classifier,features,weighted_f1,macro_f1,micro_f1,accuracy\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    out << i + 1 << ',' << to_string(r.config.classifier.kind) << ",\"" << describe(r.config) << "\","
        << format_metric(r.report.weighted_f1) << ',' << format_metric(r.report.macro_f1) << ','
        << format_metric(r.report.micro_f1) << ',' << format_metric(r.report.accuracy) << '\n';
  }
}

}  // namespace urbanfuse
