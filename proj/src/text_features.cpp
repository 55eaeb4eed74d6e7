#include "urbanfuse/text_features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

namespace {

// Decodes one UTF-8 sequence; malformed bytes decode as U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_ascii_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

// Non-ASCII code points count as word characters unless they fall in a
// punctuation, symbol, space or emoji block.
bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || is_ascii_digit(cp);
  }
  if (cp == 0xFFFD) return false;
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE00 && cp <= 0xFE0F) return false;
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0xFF1A && cp <= 0xFF20) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x137) return cp | 1u;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return cp | 1u;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::string current;
  std::size_t length = 0;
  bool has_digit = false;
  auto flush = [&] {
    if (length >= 2 && !has_digit) tokens.push_back(current);
    current.clear();
    length = 0;
    has_digit = false;
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_code_point(text, i);
    if (is_word_char(cp)) {
      append_utf8(current, to_lower(cp));
      ++length;
      has_digit = has_digit || is_ascii_digit(cp);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> document_frequency,
                       std::size_t corpus_size)
    : terms_(std::move(terms)), df_(std::move(document_frequency)), corpus_size_(corpus_size) {
  if (terms_.size() != df_.size()) throw Error(ErrorCode::invalid_input, "vocabulary/df length mismatch");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (df_[i] < 1 || df_[i] > corpus_size_) {
      throw Error(ErrorCode::invalid_input, "document frequency of '" + terms_[i] + "' out of range");
    }
    if (!index_.emplace(terms_[i], i).second) {
      throw Error(ErrorCode::invalid_input, "duplicate vocabulary term '" + terms_[i] + "'");
    }
  }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocabulary(const std::vector<TokenList>& corpus, std::size_t max_terms,
                            std::size_t min_df) {
  if (corpus.empty()) throw Error(ErrorCode::invalid_input, "vocabulary needs a non-empty corpus");
  if (max_terms < 1) throw Error(ErrorCode::invalid_input, "max_terms must be >= 1");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::unordered_set<std::string_view> seen;
    for (const auto& tok : doc) {
      if (seen.insert(tok).second) ++df[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [term, count] : df) {
    if (count >= std::max<std::size_t>(min_df, 1)) kept.emplace_back(term, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (kept.size() > max_terms) kept.resize(max_terms);
  std::vector<std::string> terms;
  std::vector<std::size_t> freq;
  for (auto& [term, count] : kept) {
    terms.push_back(term);
    freq.push_back(count);
  }
  return Vocabulary(std::move(terms), std::move(freq), corpus.size());
}

TfidfModel tfidf_fit(const std::vector<TokenList>& corpus, const Vocabulary& vocabulary,
                     bool normalize) {
  std::vector<std::size_t> df(vocabulary.size(), 0);
  for (const auto& doc : corpus) {
    std::unordered_set<std::size_t> seen;
    for (const auto& tok : doc) {
      if (auto idx = vocabulary.index_of(tok); idx && seen.insert(*idx).second) ++df[*idx];
    }
  }
  TfidfModel model{vocabulary, std::vector<double>(vocabulary.size()), normalize};
  const double n = static_cast<double>(corpus.size());
  for (std::size_t t = 0; t < df.size(); ++t) {
    model.idf[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[t]))) + 1.0;
  }
  return model;
}

SparseRow tfidf_transform(const TfidfModel& model, const TokenList& tokens) {
  std::map<std::size_t, double> counts;
  for (const auto& tok : tokens) {
    if (auto idx = model.vocabulary.index_of(tok)) counts[*idx] += 1.0;
  }
  SparseRow row;
  row.reserve(counts.size());
  double norm2 = 0.0;
  for (const auto& [idx, tf] : counts) {
    const double v = tf * model.idf[idx];
    row.emplace_back(idx, v);
    norm2 += v * v;
  }
  if (model.normalize && norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& entry : row) entry.second *= inv;
  }
  return row;
}

SparseRow tfidf_transform(const TfidfModel& model, std::string_view text) {
  return tfidf_transform(model, tokenize(text));
}

WordVectors train_word_vectors(const std::vector<TokenList>& corpus, const WordVectorConfig& config,
                               std::vector<std::string>* warnings) {
  if (corpus.empty()) throw Error(ErrorCode::invalid_input, "word vectors need a non-empty corpus");
  Vocabulary vocab = build_vocabulary(corpus, config.max_terms, config.min_count);
  if (vocab.size() == 0) throw Error(ErrorCode::invalid_input, "word-vector vocabulary is empty");
  std::vector<double> counts(vocab.size(), 0.0);
  std::vector<std::vector<std::uint32_t>> sequences;
  sequences.reserve(corpus.size());
  for (const auto& doc : corpus) {
    std::vector<std::uint32_t> seq;
    for (const auto& tok : doc) {
      if (auto idx = vocab.index_of(tok)) {
        seq.push_back(static_cast<std::uint32_t>(*idx));
        counts[*idx] += 1.0;
      }
    }
    sequences.push_back(std::move(seq));
  }
  auto trained = train_skipgram(sequences, counts, config.skipgram);
  if (warnings) warnings->insert(warnings->end(), trained.warnings.begin(), trained.warnings.end());
  return WordVectors{std::move(vocab), std::move(trained.input_vectors)};
}

std::vector<TokenList> tokenize_reports(const Dataset& dataset) {
  std::vector<TokenList> corpus;
  corpus.reserve(dataset.size());
  for (const auto& r : dataset.reports) corpus.push_back(tokenize(r.text));
  return corpus;
}

FeatureBlock report_text_block(const Dataset& dataset, const TfidfModel& model, std::string name) {
  Matrix m(dataset.size(), model.vocabulary.size());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (const auto& [idx, v] : tfidf_transform(model, dataset.reports[r].text)) m(r, idx) = v;
  }
  std::vector<std::string> columns;
  columns.reserve(model.vocabulary.size());
  for (const auto& t : model.vocabulary.terms()) columns.push_back("tfidf:" + t);
  return FeatureBlock(std::move(name), BlockKind::raw, report_ids(dataset), std::move(m),
                      std::move(columns));
}

FeatureBlock report_text_block(const Dataset& dataset, const WordVectors& model, std::string name) {
  const std::size_t dims = model.dims();
  Matrix m(dataset.size(), dims);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    std::size_t used = 0;
    auto row = m.row(r);
    for (const auto& tok : tokenize(dataset.reports[r].text)) {
      if (auto idx = model.vocabulary.index_of(tok)) {
        auto v = model.vectors.row(*idx);
        for (std::size_t d = 0; d < dims; ++d) row[d] += v[d];
        ++used;
      }
    }
    if (used > 0) {
      for (double& x : row) x /= static_cast<double>(used);
    }
  }
  std::vector<std::string> columns;
  for (std::size_t d = 0; d < dims; ++d) columns.push_back("w2v_" + std::to_string(d));
  return FeatureBlock(std::move(name), BlockKind::raw, report_ids(dataset), std::move(m),
                      std::move(columns));
}

}  // namespace urbanfuse
