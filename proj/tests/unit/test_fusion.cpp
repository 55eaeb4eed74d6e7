#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "urbanfuse/error.hpp"
#include "urbanfuse/fusion.hpp"
#include "urbanfuse/rng.hpp"

using namespace urbanfuse;

namespace {

std::vector<std::string> ids(std::size_t n, const std::string& prefix) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

FeatureBlock block(const std::string& name, std::vector<std::string> rows, std::size_t width, double fill) {
  Matrix m(rows.size(), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) m(r, c) = fill + static_cast<double>(r * width + c);
  std::vector<std::string> cols;
  for (std::size_t c = 0; c < width; ++c) cols.push_back("f" + std::to_string(c));
  return FeatureBlock(name, BlockKind::raw, std::move(rows), std::move(m), std::move(cols));
}

// Each view shows a noisy one-hot of the true class when its cue fires
// (probability `strength`), otherwise of a random class.
struct Planted {
  std::vector<FeatureBlock> train, test;
  std::vector<std::size_t> y_train, y_test;
};

Planted planted(std::size_t n_train, std::size_t n_test, std::size_t k, std::vector<double> strengths,
                std::uint64_t seed) {
  Rng rng(seed);
  Planted p;
  auto make = [&](std::size_t n, std::vector<std::size_t>& y, std::vector<FeatureBlock>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < n; ++i) y.push_back(i % k);
    for (std::size_t b = 0; b < strengths.size(); ++b) {
      Matrix m(n, k);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cue = rng.bernoulli(strengths[b]) ? y[i] : static_cast<std::size_t>(rng.below(k));
        for (std::size_t c = 0; c < k; ++c) m(i, c) = (c == cue ? 1.0 : 0.0) + rng.normal(0, 0.3);
      }
      std::vector<std::string> cols;
      for (std::size_t c = 0; c < k; ++c) cols.push_back("c" + std::to_string(c));
      out.emplace_back("v" + std::to_string(b), BlockKind::raw, ids(n, prefix), std::move(m), std::move(cols));
    }
  };
  make(n_train, p.y_train, p.train, "tr");
  make(n_test, p.y_test, p.test, "te");
  return p;
}

std::vector<std::string> class_names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < k; ++c) out.push_back("k" + std::to_string(c));
  return out;
}

}  // namespace

TEST_CASE("early fusion concatenates aligned blocks") {
  const auto rows = ids(4, "r");
  const std::vector<FeatureBlock> blocks{block("a", rows, 3, 0.0), block("b", rows, 2, 100.0)};
  const auto fused = early_fuse(blocks);
  CHECK(fused.cols() == 5);
  CHECK(fused.report_ids() == rows);
  CHECK(fused.column_names()[3] == "b:f0");
  CHECK(fused.matrix()(2, 3) == blocks[1].matrix()(2, 0));
  CHECK(fused.matrix()(2, 1) == blocks[0].matrix()(2, 1));

  const std::vector<FeatureBlock> one{blocks[0]};
  CHECK(early_fuse(one).matrix() == blocks[0].matrix());

  auto shuffled = rows;
  std::swap(shuffled[0], shuffled[1]);
  const std::vector<FeatureBlock> misaligned{block("a", rows, 3, 0.0), block("b", shuffled, 2, 0.0)};
  try {
    (void)early_fuse(misaligned);
    FAIL("misaligned blocks fused");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::alignment);
  }
}

TEST_CASE("stratified folds are balanced and deterministic") {
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < 53; ++i) y.push_back(i % 4);
  const auto folds = stratified_folds(y, 5, 9);
  CHECK(folds == stratified_folds(y, 5, 9));
  std::vector<std::size_t> size(5, 0);
  for (auto f : folds) {
    REQUIRE(f < 5);
    ++size[f];
  }
  CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
  for (std::size_t c = 0; c < 4; ++c) {
    std::vector<std::size_t> per(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) ++per[folds[i]];
    CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
  }
  const std::vector<std::size_t> tiny{0, 1, 0};
  CHECK_THROWS_AS(stratified_folds(tiny, 5, 1), Error);
  std::vector<std::string> warnings;
  const std::vector<std::size_t> rare{0, 0, 0, 0, 0, 0, 1};
  (void)stratified_folds(rare, 3, 1, &warnings);
  CHECK(warnings.size() == 1);
}

TEST_CASE("out-of-fold probabilities never see their own rows") {
  const auto p = planted(90, 30, 3, {0.7}, 5);
  const auto names = class_names(3);
  ClassifierConfig clf;
  const auto oof = oof_probabilities(p.train[0], p.test[0], p.y_train, names, clf, 5, 3);
  CHECK(oof.train.name() == "prob_v0");
  CHECK(oof.train.kind() == BlockKind::probability);
  CHECK(oof.train.cols() == 3);
  CHECK(oof.test.rows() == 30);
  REQUIRE(oof.fold_training_rows.size() == 5);
  for (std::size_t row = 0; row < 90; ++row) {
    const auto& training = oof.fold_training_rows[oof.fold_of_row[row]];
    CHECK(std::find(training.begin(), training.end(), row) == training.end());
  }
  for (std::size_t f = 0; f < 5; ++f) {
    std::set<std::size_t> used(oof.fold_training_rows[f].begin(), oof.fold_training_rows[f].end());
    for (std::size_t row = 0; row < 90; ++row) CHECK((used.count(row) == 1) == (oof.fold_of_row[row] != f));
  }
  for (std::size_t r = 0; r < oof.train.rows(); ++r) {
    const auto row = oof.train.matrix().row(r);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("hybrid fusion layouts") {
  const auto p = planted(60, 20, 3, {0.6, 0.6, 0.6, 0.6}, 8);
  const auto names = class_names(3);
  FusionConfig raw_only;
  raw_only.raw_blocks = {"v0", "v1"};
  const auto a = hybrid_fuse(raw_only, p.train, p.test, p.y_train, names, 1);
  const std::vector<FeatureBlock> pair{p.train[0], p.train[1]};
  CHECK(a.train == early_fuse(pair).matrix());
  CHECK(a.columns.size() == 6);

  FusionConfig prob_only;
  prob_only.prob_blocks = {"v2"};
  const auto b = hybrid_fuse(prob_only, p.train, p.test, p.y_train, names, 1);
  CHECK(b.train.cols() == 3);
  CHECK(b.test.rows() == 20);

  FusionConfig mixed;
  mixed.raw_blocks = {"v0"};
  mixed.prob_blocks = {"v1", "v2", "v3"};
  const auto m = hybrid_fuse(mixed, p.train, p.test, p.y_train, names, 1);
  CHECK(m.train.cols() == 3 + 3 * 3);
  CHECK(m.columns[3].rfind("prob_v1", 0) == 0);
  CHECK(m.columns.back().rfind("prob_v3", 0) == 0);
  CHECK(describe(mixed) == "v0, prob_v1, prob_v2, prob_v3");
  CHECK(block_count(mixed) == 4);

  FusionConfig unknown;
  unknown.raw_blocks = {"nope"};
  try {
    (void)hybrid_fuse(unknown, p.train, p.test, p.y_train, names, 1);
    FAIL("unknown block accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
  FusionConfig twice;
  twice.raw_blocks = {"v0"};
  twice.prob_blocks = {"v0"};
  CHECK_THROWS_AS(validate(twice), Error);
}

TEST_CASE("enumeration covers every non-empty raw/prob/absent assignment") {
  const auto rows = ids(3, "r");
  const std::vector<FeatureBlock> two{block("a", rows, 1, 0), block("b", rows, 1, 0)};
  const auto configs = enumerate_fusion_configs(two, {}, 5);
  CHECK(configs.size() == 8);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    seen.insert(describe(configs[i]));
    if (i > 0) CHECK(block_count(configs[i]) >= block_count(configs[i - 1]));
  }
  CHECK(seen.size() == 8);
  std::vector<FeatureBlock> six;
  for (int i = 0; i < 6; ++i) six.push_back(block("b" + std::to_string(i), rows, 1, 0));
  CHECK(enumerate_fusion_configs(six, {}, 5).size() == 728);
}

TEST_CASE("search ranks configs and finds the planted multimodal signal") {
  const auto p = planted(240, 120, 4, {0.55, 0.55, 0.55}, 21);
  std::vector<std::size_t> y_test = p.y_test;
  const HoldoutScorer scorer(y_test, class_names(4));
  SearchConfig sc;
  sc.folds = 3;
  sc.seed = 4;
  const auto ranked = search_fusion(p.train, p.test, p.y_train, scorer, sc);
  CHECK(ranked.size() == 26);
  for (std::size_t i = 1; i < ranked.size(); ++i)
    CHECK(ranked[i].report.weighted_f1 <= ranked[i - 1].report.weighted_f1);
  CHECK(block_count(ranked.front().config) >= 2);

  auto threaded = sc;
  threaded.threads = 3;
  const auto again = search_fusion(p.train, p.test, p.y_train, scorer, threaded);
  REQUIRE(again.size() == ranked.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(describe(again[i].config) == describe(ranked[i].config));
    CHECK(again[i].report.weighted_f1 == ranked[i].report.weighted_f1);
  }

  auto capped = sc;
  capped.budget = 5;
  CHECK(search_fusion(p.train, p.test, p.y_train, scorer, capped).size() == 5);
  capped.budget = 0;
  CHECK_THROWS_AS(search_fusion(p.train, p.test, p.y_train, scorer, capped), Error);
}

TEST_CASE("fitted fusion model reproduces hybrid features") {
  const auto p = planted(60, 20, 3, {0.7, 0.7}, 2);
  FusionConfig c;
  c.raw_blocks = {"v0"};
  c.prob_blocks = {"v1"};
  const auto model = fit_fusion(c, p.train, p.y_train, class_names(3), 6);
  const auto proba = predict_proba(model, p.test);
  CHECK(proba.rows() == 20);
  CHECK(proba.cols() == 3);
  CHECK(fusion_features(model, p.test).cols() == 6);
}
