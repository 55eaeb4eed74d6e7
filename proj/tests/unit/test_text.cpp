#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "urbanfuse/error.hpp"
#include "urbanfuse/rng.hpp"
#include "urbanfuse/text_features.hpp"

using namespace urbanfuse;

namespace {

double value_of(const SparseRow& row, const Vocabulary& v, const std::string& term) {
  const auto idx = v.index_of(term);
  REQUIRE(idx.has_value());
  for (const auto& [i, x] : row)
    if (i == *idx) return x;
  return 0.0;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("tokenizer rules") {
  CHECK(tokenize("Grofvuil op straat!") == TokenList{"grofvuil", "op", "straat"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Bak 3x vol, 2019") == TokenList{"bak", "vol"});
  CHECK(tokenize("ÉÉN Straße") == TokenList{"één", "straße"});
  CHECK(tokenize("a b c") .empty());
}

TEST_CASE("vocabulary keeps by df with lexicographic ties") {
  const std::vector<TokenList> corpus{{"a", "b"}, {"b"}};
  auto v = build_vocabulary(corpus, 10, 1);
  REQUIRE(v.size() == 2);
  CHECK(v.document_frequency()[*v.index_of("a")] == 1);
  CHECK(v.document_frequency()[*v.index_of("b")] == 2);
  v = build_vocabulary(corpus, 1, 1);
  CHECK(v.terms() == std::vector<std::string>{"b"});
  CHECK(build_vocabulary({{"y"}, {"x"}}, 1, 1).terms() == std::vector<std::string>{"x"});
  CHECK(build_vocabulary(corpus, 10, 2).terms() == std::vector<std::string>{"b"});
  CHECK_THROWS_AS(build_vocabulary(corpus, 0, 1), Error);
  CHECK_THROWS_AS(build_vocabulary({}, 5, 1), Error);
}

TEST_CASE("vocabulary does not depend on document order") {
  Rng rng(2);
  std::vector<TokenList> corpus;
  for (int d = 0; d < 50; ++d) {
    TokenList doc;
    for (int t = 0; t < 6; ++t) doc.push_back("w" + std::to_string(rng.below(30)));
    corpus.push_back(doc);
  }
  const auto v1 = build_vocabulary(corpus, 12, 2);
  std::reverse(corpus.begin(), corpus.end());
  rng.shuffle(std::span<TokenList>(corpus));
  CHECK(build_vocabulary(corpus, 12, 2) == v1);
}

TEST_CASE("tfidf worked example") {
  const std::vector<TokenList> corpus{tokenize("trash on street"), tokenize("trash bag")};
  const auto v = build_vocabulary(corpus, 100, 1);
  const auto raw = tfidf_fit(corpus, v, false);
  CHECK(raw.idf[*v.index_of("trash")] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(raw.idf[*v.index_of("street")] == doctest::Approx(std::log(1.5) + 1.0).epsilon(1e-15));
  CHECK(raw.idf[*v.index_of("street")] == doctest::Approx(1.4055).epsilon(1e-4));
  const auto row = tfidf_transform(raw, "trash on street");
  CHECK(value_of(row, v, "trash") == doctest::Approx(1.0));
  CHECK(value_of(row, v, "on") == doctest::Approx(1.4054651081));
  CHECK(value_of(row, v, "street") == doctest::Approx(1.4054651081));
  CHECK(tfidf_transform(raw, "").empty());
  CHECK(tfidf_transform(raw, "onbekend woord").empty());
  // Raw counts.
  CHECK(value_of(tfidf_transform(raw, "trash trash"), v, "trash") == doctest::Approx(2.0));
}

TEST_CASE("normalised rows have unit norm or are empty; idf falls with df") {
  Rng rng(6);
  std::vector<TokenList> corpus;
  for (int d = 0; d < 80; ++d) {
    TokenList doc;
    for (std::size_t t = 0; t < rng.below(8); ++t) doc.push_back("w" + std::to_string(rng.below(40)));
    corpus.push_back(doc);
  }
  const auto model = tfidf_fit(corpus, build_vocabulary(corpus, 100, 1), true);
  for (const auto& doc : corpus) {
    const auto row = tfidf_transform(model, doc);
    double norm = 0.0;
    for (const auto& [i, x] : row) norm += x * x;
    if (!row.empty()) CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t i = 1; i < row.size(); ++i) CHECK(row[i - 1].first < row[i].first);
  }
  const auto& df = model.vocabulary.document_frequency();
  for (std::size_t a = 0; a < df.size(); ++a) {
    CHECK(model.idf[a] > 0.0);
    for (std::size_t b = 0; b < df.size(); ++b)
      if (df[a] < df[b]) CHECK(model.idf[a] >= model.idf[b]);
  }
}

TEST_CASE("text blocks") {
  auto d = uft::labelled(1, 2, 2);
  d.reports[0].text = "trash on street";
  d.reports[1].text = "trash bag";
  d.reports[2].text = "";
  d.reports[3].text = "zzz";
  const auto corpus = tokenize_reports(d);
  const auto model = tfidf_fit(corpus, build_vocabulary(corpus, 100, 1));
  const auto block = report_text_block(d, model);
  CHECK(block.cols() == model.vocabulary.size());
  CHECK(block.rows() == 4);
  CHECK(block.kind() == BlockKind::raw);
  for (std::size_t c = 0; c < block.cols(); ++c) CHECK(block.matrix()(2, c) == 0.0);

  WordVectors wv;
  wv.vocabulary = Vocabulary({"trash", "bag"}, {2, 1}, 2);
  wv.vectors = Matrix(2, 3);
  for (std::size_t i = 0; i < 6; ++i) wv.vectors.data()[i] = static_cast<double>(i + 1);
  const auto mean = report_text_block(d, wv, "w2v");
  CHECK(mean.cols() == 3);
  // "trash bag" averages both rows.
  CHECK(mean.matrix()(1, 0) == doctest::Approx((1.0 + 4.0) / 2));
  CHECK(mean.matrix()(1, 2) == doctest::Approx((3.0 + 6.0) / 2));
  // All out of vocabulary.
  for (std::size_t c = 0; c < 3; ++c) CHECK(mean.matrix()(3, c) == 0.0);
}

TEST_CASE("word vectors: two always co-occurring tokens beat random pairs") {
  // Filler words come in 12 disjoint topics; "alpha" and "beta" appear
  // together in every document.
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    CAPTURE(seed);
    Rng rng(seed);
    std::vector<TokenList> corpus;
    for (int d = 0; d < 600; ++d) {
      const std::string topic(1, static_cast<char>('a' + d % 12));
      TokenList doc{"alpha", "beta"};
      for (int t = 0; t < 6; ++t) doc.push_back("w" + topic + std::string(1, static_cast<char>('a' + rng.below(5))));
      rng.shuffle(std::span<std::string>(doc));
      corpus.push_back(doc);
    }
    WordVectorConfig cfg;
    cfg.skipgram.dims = 8;
    cfg.skipgram.epochs = 5;
    cfg.skipgram.seed = seed;
    const auto wv = train_word_vectors(corpus, cfg);
    auto row = [&](std::size_t i) { return wv.vectors.row(i); };
    const auto a = *wv.vocabulary.index_of("alpha"), b = *wv.vocabulary.index_of("beta");
    const double pair = cosine(row(a), row(b));
    double mean = 0.0;
    const auto v = wv.vocabulary.size();
    for (int i = 0; i < 200; ++i) mean += cosine(row(rng.below(v)), row(rng.below(v))) / 200;
    CHECK(pair > mean);
    CHECK(train_word_vectors(corpus, cfg).vectors == wv.vectors);
  }
}

TEST_CASE("word vectors on a corpus without pairs keep initialisation and warn") {
  WordVectorConfig cfg;
  cfg.skipgram.dims = 4;
  std::vector<std::string> warnings;
  const auto wv = train_word_vectors({{"lonely"}}, cfg, &warnings);
  CHECK(wv.vectors.rows() == 1);
  CHECK_FALSE(warnings.empty());
  CHECK_THROWS_AS(train_word_vectors({{}}, cfg), Error);
  cfg.skipgram.dims = 0;
  CHECK_THROWS_AS(train_word_vectors({{"a", "b"}}, cfg), Error);
}
