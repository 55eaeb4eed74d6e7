#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "urbanfuse/core.hpp"
#include "urbanfuse/skipgram.hpp"

namespace urbanfuse {

using TokenList = std::vector<std::string>;

/// Lowercased maximal runs of letters/digits (UTF-8 aware). Tokens shorter
/// than two code points and tokens containing an ASCII digit are dropped.
TokenList tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> document_frequency,
             std::size_t corpus_size);

  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::vector<std::size_t>& document_frequency() const noexcept { return df_; }
  std::size_t corpus_size() const noexcept { return corpus_size_; }
  std::size_t size() const noexcept { return terms_.size(); }
  std::optional<std::size_t> index_of(std::string_view term) const;

  bool operator==(const Vocabulary& other) const {
    return terms_ == other.terms_ && df_ == other.df_ && corpus_size_ == other.corpus_size_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::size_t corpus_size_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Terms with df >= min_df; when more than max_terms remain, the top
/// max_terms by df (ties lexicographic). Terms are indexed in that order.
Vocabulary build_vocabulary(const std::vector<TokenList>& corpus, std::size_t max_terms,
                            std::size_t min_df);

struct TfidfModel {
  Vocabulary vocabulary;
  std::vector<double> idf;  // ln((1+N)/(1+df)) + 1
  bool normalize = true;

  bool operator==(const TfidfModel&) const = default;
};

/// (term index, value) pairs sorted by index.
using SparseRow = std::vector<std::pair<std::size_t, double>>;

TfidfModel tfidf_fit(const std::vector<TokenList>& corpus, const Vocabulary& vocabulary,
                     bool normalize = true);
SparseRow tfidf_transform(const TfidfModel& model, const TokenList& tokens);
SparseRow tfidf_transform(const TfidfModel& model, std::string_view text);

struct WordVectors {
  Vocabulary vocabulary;
  Matrix vectors;

  std::size_t dims() const noexcept { return vectors.cols(); }
};

struct WordVectorConfig {
  SkipGramConfig skipgram{100, 5, 5, 5, 0.025, 1};
  std::size_t min_count = 1;
  std::size_t max_terms = 50000;
};

/// Each token list is one training sequence. Degenerate corpora (no
/// co-occurring pairs) return initialization vectors plus a warning.
WordVectors train_word_vectors(const std::vector<TokenList>& corpus, const WordVectorConfig& config,
                               std::vector<std::string>* warnings = nullptr);

std::vector<TokenList> tokenize_reports(const Dataset& dataset);

/// Dense TF-IDF rows, width |vocabulary|.
FeatureBlock report_text_block(const Dataset& dataset, const TfidfModel& model,
                               std::string name = "text");
/// Mean of in-vocabulary token vectors; zero row when none.
FeatureBlock report_text_block(const Dataset& dataset, const WordVectors& model,
                               std::string name = "text_w2v");

}  // namespace urbanfuse
