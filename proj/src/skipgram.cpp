#include "urbanfuse/skipgram.hpp"

#include <algorithm>
#include <cmath>

#include "urbanfuse/error.hpp"
#include "urbanfuse/rng.hpp"

namespace urbanfuse {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -ln s(x) for label 1, -ln s(-x) for label 0.
double target_loss(double x, bool positive) {
  const double z = positive ? -x : x;
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// d(-loss)/dx: label - s(x). Shared by the analytic gradient and the trainer.
double target_coefficient(double x, bool positive) { return (positive ? 1.0 : 0.0) - sigmoid(x); }

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double skipgram_pair_loss(std::span<const double> center, std::span<const double> context,
                          std::span<const std::span<const double>> negatives) {
  const std::size_t n = center.size();
  double loss = target_loss(dot(center.data(), context.data(), n), true);
  for (const auto& neg : negatives) loss += target_loss(dot(center.data(), neg.data(), n), false);
  return loss;
}

SkipGramPairGradient skipgram_pair_gradient(std::span<const double> center,
                                            std::span<const double> context,
                                            std::span<const std::span<const double>> negatives) {
  const std::size_t n = center.size();
  SkipGramPairGradient grad;
  grad.center.assign(n, 0.0);
  auto add_target = [&](std::span<const double> target, bool positive, std::vector<double>& out) {
    const double x = dot(center.data(), target.data(), n);
    grad.loss += target_loss(x, positive);
    const double g = target_coefficient(x, positive);
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      grad.center[i] -= g * target[i];
      out[i] = -g * center[i];
    }
  };
  add_target(context, true, grad.context);
  grad.negatives.resize(negatives.size());
  for (std::size_t k = 0; k < negatives.size(); ++k) add_target(negatives[k], false, grad.negatives[k]);
  return grad;
}

SkipGramResult train_skipgram(std::span<const std::vector<std::uint32_t>> sequences,
                              std::span<const double> counts, const SkipGramConfig& config) {
  if (config.dims < 1) throw Error(ErrorCode::invalid_input, "skip-gram dims must be >= 1");
  if (sequences.empty()) throw Error(ErrorCode::invalid_input, "skip-gram needs at least one sequence");
  const std::size_t vocab = counts.size();
  if (vocab == 0) throw Error(ErrorCode::invalid_input, "skip-gram vocabulary is empty");
  const std::size_t dims = config.dims;

  Rng rng(config.seed);
  SkipGramResult result;
  result.input_vectors = Matrix(vocab, dims);
  result.output_vectors = Matrix(vocab, dims, 0.0);
  const double half = 0.5 / static_cast<double>(dims);
  for (double* p = result.input_vectors.data(); p != result.input_vectors.data() + vocab * dims; ++p) {
    *p = rng.uniform(-half, half);
  }

  std::vector<double> cumulative(vocab);
  double acc = 0.0;
  for (std::size_t t = 0; t < vocab; ++t) {
    if (!(counts[t] >= 0.0)) throw Error(ErrorCode::invalid_input, "negative token count");
    acc += std::pow(counts[t], 0.75);
    cumulative[t] = acc;
  }
  if (!(acc > 0.0)) throw Error(ErrorCode::invalid_input, "all token counts are zero");

  std::size_t positions = 0;
  std::size_t pairs = 0;
  for (const auto& seq : sequences) {
    for (std::uint32_t t : seq) {
      if (t >= vocab) throw Error(ErrorCode::invalid_input, "token id outside vocabulary");
    }
    positions += seq.size();
    const std::size_t len = seq.size();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t lo = i >= config.window ? i - config.window : 0;
      const std::size_t hi = std::min(len - 1, i + config.window);
      pairs += hi - lo;
    }
  }
  result.pairs_per_epoch = pairs;
  if (pairs == 0) {
    result.warnings.push_back("no training pairs: every sequence is shorter than 2; vectors remain at initialization");
    return result;
  }

  const double total = static_cast<double>(positions * config.epochs);
  std::size_t processed = 0;
  std::vector<double> center_grad(dims);
  std::vector<std::uint32_t> targets(config.negatives + 1);
  double* in = result.input_vectors.data();
  double* out = result.output_vectors.data();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& seq : sequences) {
      const std::size_t len = seq.size();
      for (std::size_t i = 0; i < len; ++i, ++processed) {
        const double lr =
            config.learning_rate * std::max(1e-4, 1.0 - static_cast<double>(processed) / total);
        double* u = in + static_cast<std::size_t>(seq[i]) * dims;
        const std::size_t lo = i >= config.window ? i - config.window : 0;
        const std::size_t hi = std::min(len - 1, i + config.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          targets[0] = seq[j];
          std::size_t used = 1;
          for (std::size_t k = 0; k < config.negatives; ++k) {
            const double r = rng.uniform01() * acc;
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
            const auto neg = static_cast<std::uint32_t>(
                std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), vocab - 1));
            if (neg == targets[0]) continue;
            targets[used++] = neg;
          }
          std::fill(center_grad.begin(), center_grad.end(), 0.0);
          for (std::size_t k = 0; k < used; ++k) {
            double* v = out + static_cast<std::size_t>(targets[k]) * dims;
            const double x = dot(u, v, dims);
            loss_sum += target_loss(x, k == 0);
            const double g = target_coefficient(x, k == 0) * lr;
            for (std::size_t d = 0; d < dims; ++d) {
              center_grad[d] += g * v[d];
              v[d] += g * u[d];
            }
          }
          for (std::size_t d = 0; d < dims; ++d) u[d] += center_grad[d];
        }
      }
    }
    result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(pairs));
  }
  return result;
}

}  // namespace urbanfuse
