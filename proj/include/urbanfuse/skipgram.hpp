#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "urbanfuse/matrix.hpp"

namespace urbanfuse {

struct SkipGramConfig {
  std::size_t dims = 256;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // decays linearly to 1e-4 of this value
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  Matrix input_vectors;   // the embeddings, one row per token id
  Matrix output_vectors;  // context vectors
  std::vector<double> epoch_mean_loss;
  std::size_t pairs_per_epoch = 0;
  std::vector<std::string> warnings;
};

/// Skip-gram with negative sampling over token-id sequences. Negatives come
/// from counts^0.75. Single-threaded and bit-reproducible for a fixed seed.
/// `counts[t]` is the corpus frequency of token t; its size fixes the
/// vocabulary size.
SkipGramResult train_skipgram(std::span<const std::vector<std::uint32_t>> sequences,
                              std::span<const double> counts, const SkipGramConfig& config);

/// Loss of one (center, context) pair with its negatives:
///   -ln s(u.v) - sum_n ln s(-u.v_n)
double skipgram_pair_loss(std::span<const double> center, std::span<const double> context,
                          std::span<const std::span<const double>> negatives);

struct SkipGramPairGradient {
  double loss = 0.0;
  std::vector<double> center;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
};

/// Analytic gradient of skipgram_pair_loss; the trainer applies exactly
/// these terms.
SkipGramPairGradient skipgram_pair_gradient(std::span<const double> center,
                                            std::span<const double> context,
                                            std::span<const std::span<const double>> negatives);

}  // namespace urbanfuse
