#include "urbanfuse/classifiers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_training_inputs(const Matrix& x, std::span<const std::size_t> y, std::size_t num_classes) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::invalid_input, "feature rows (" + std::to_string(x.rows()) +
                                              ") != labels (" + std::to_string(y.size()) + ")");
  }
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_input, "non-finite feature value");
  }
  for (auto c : y) {
    if (c >= num_classes) throw Error(ErrorCode::invalid_input, "label index out of range");
  }
}

// Sorted distinct labels; throws when fewer than two.
std::vector<std::size_t> present_classes(std::span<const std::size_t> y, std::size_t num_classes) {
  std::vector<char> seen(num_classes, 0);
  for (auto c : y) seen[c] = 1;
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (seen[c]) out.push_back(c);
  }
  if (out.size() < 2) throw Error(ErrorCode::invalid_input, "training labels contain fewer than 2 classes");
  return out;
}

std::vector<std::size_t> compact_labels(std::span<const std::size_t> y, const std::vector<std::size_t>& classes,
                                        std::size_t num_classes) {
  std::vector<std::size_t> to_compact(num_classes, 0);
  for (std::size_t i = 0; i < classes.size(); ++i) to_compact[classes[i]] = i;
  std::vector<std::size_t> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = to_compact[y[i]];
  return out;
}

void check_width(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw Error(ErrorCode::shape, "model expects " + std::to_string(expected) + " features, got " +
                                      std::to_string(got));
  }
}

// Spread compact-class probabilities into the full class width.
Matrix expand(const Matrix& compact, const std::vector<std::size_t>& classes, std::size_t num_classes) {
  Matrix out(compact.rows(), num_classes, 0.0);
  for (std::size_t r = 0; r < compact.rows(); ++r) {
    for (std::size_t c = 0; c < classes.size(); ++c) out(r, classes[c]) = compact(r, c);
  }
  return out;
}

}  // namespace

void softmax_inplace(std::span<double> logits) {
  if (logits.empty()) return;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) sum += (v = std::exp(v - m));
  for (double& v : logits) v /= sum;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> predict_labels(const Matrix& proba) {
  std::vector<std::size_t> out(proba.rows());
  for (std::size_t r = 0; r < proba.rows(); ++r) out[r] = argmax(proba.row(r));
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.input_width = x.cols();
  const std::size_t n = x.rows();
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = x(r, c);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    if (n == 0 || !(hi > lo)) continue;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) continue;
    s.kept.push_back(c);
    s.mean.push_back(mean);
    s.scale.push_back(sd);
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  check_width(input_width, x.cols());
  Matrix out(x.rows(), kept.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < kept.size(); ++j) dst[j] = (src[kept[j]] - mean[j]) / scale[j];
  }
  return out;
}

double logreg_objective(const Matrix& x, std::span<const std::size_t> y, std::size_t num_classes,
                        double l2, std::span<const double> params, std::span<double> gradient) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  const auto k = static_cast<Eigen::Index>(num_classes);
  if (params.size() != static_cast<std::size_t>(k * d + k) || y.size() != x.rows()) {
    throw Error(ErrorCode::shape, "logistic objective: parameter or label size mismatch");
  }
  Eigen::Map<const RowMat> xm(x.data(), n, d);
  Eigen::Map<const RowMat> w(params.data(), k, d);
  Eigen::Map<const Eigen::VectorXd> b(params.data() + k * d, k);
  RowMat z = xm * w.transpose();
  z.rowwise() += b.transpose();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    loss += lse - z(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]));
    z.row(i) = (z.row(i).array() - lse).exp().matrix();  // now probabilities
  }
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  const double objective = loss * inv_n + 0.5 * l2 * w.squaredNorm();
  if (!gradient.empty()) {
    if (gradient.size() != params.size()) throw Error(ErrorCode::shape, "gradient buffer size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) z(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)])) -= 1.0;
    Eigen::Map<RowMat> gw(gradient.data(), k, d);
    Eigen::Map<Eigen::VectorXd> gb(gradient.data() + k * d, k);
    gw.noalias() = (z.transpose() * xm) * inv_n;
    gw += l2 * w;
    gb = z.colwise().sum().transpose() * inv_n;
  }
  return objective;
}

LogRegModel train_logreg(const Matrix& x, std::span<const std::size_t> y, std::size_t num_classes,
                         const LogRegConfig& config) {
  check_training_inputs(x, y, num_classes);
  if (!(config.l2 >= 0.0) || !(config.tol > 0.0)) throw Error(ErrorCode::invalid_input, "l2 must be >= 0 and tol > 0");
  LogRegModel model;
  model.num_classes = num_classes;
  model.classes = present_classes(y, num_classes);
  model.l2 = config.l2;
  model.standardizer = Standardizer::fit(x);
  const Matrix xs = model.standardizer.apply(x);
  const auto labels = compact_labels(y, model.classes, num_classes);
  const std::size_t k = model.classes.size();
  const std::size_t d = xs.cols();

  std::vector<double> counts(k, 0.0);
  for (auto c : labels) counts[c] += 1.0;
  const auto n = static_cast<Eigen::Index>(xs.rows());
  const auto kk = static_cast<Eigen::Index>(k);
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::Map<const RowMat> xm(xs.data(), n, dd);
  RowMat w = RowMat::Zero(kk, dd);
  Eigen::VectorXd b(kk);
  for (std::size_t c = 0; c < k; ++c) b(static_cast<Eigen::Index>(c)) = std::log(counts[c] / static_cast<double>(labels.size()));
  const double inv_n = 1.0 / static_cast<double>(n);

  // Mean cross-entropy of logits z; fills p with (softmax - onehot) when asked.
  auto cross_entropy = [&](const RowMat& z, RowMat* p) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto yi = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
      const double m = z.row(i).maxCoeff();
      const double lse = m + std::log((z.row(i).array() - m).exp().sum());
      loss += lse - z(i, yi);
      if (p) {
        p->row(i) = (z.row(i).array() - lse).exp().matrix();
        (*p)(i, yi) -= 1.0;
      }
    }
    return loss * inv_n;
  };

  // Logits are updated along the search direction instead of recomputed, so
  // each backtracking trial costs O(n k) rather than a full product.
  RowMat z = RowMat::Zero(n, kk);
  z.rowwise() += b.transpose();
  RowMat resid(n, kk);
  double f = cross_entropy(z, &resid) + 0.5 * config.l2 * w.squaredNorm();
  RowMat gw = (resid.transpose() * xm) * inv_n + config.l2 * w;
  Eigen::VectorXd gb = resid.colwise().sum().transpose() * inv_n;
  RowMat dz(n, kk), z_try(n, kk);
  double step = 1.0;
  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    const double gmax = std::max(gw.size() ? gw.cwiseAbs().maxCoeff() : 0.0, gb.cwiseAbs().maxCoeff());
    if (gmax < config.tol) break;
    const double gg = gw.squaredNorm() + gb.squaredNorm();
    dz.noalias() = xm * gw.transpose();
    dz.rowwise() += gb.transpose();
    bool accepted = false;
    double f_try = 0.0;
    while (step > 1e-20) {
      z_try = z - step * dz;
      f_try = cross_entropy(z_try, nullptr) + 0.5 * config.l2 * (w - step * gw).squaredNorm();
      if (f_try <= f - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    w -= step * gw;
    b -= step * gb;
    z.swap(z_try);
    f = f_try;
    cross_entropy(z, &resid);
    gw.noalias() = (resid.transpose() * xm) * inv_n;
    gw += config.l2 * w;
    gb = resid.colwise().sum().transpose() * inv_n;
    model.objective_trace.push_back(f);
    ++model.iterations;
    step *= 2.0;
  }
  model.weights = Matrix(k, d, std::vector<double>(w.data(), w.data() + w.size()));
  model.bias.assign(b.data(), b.data() + b.size());
  return model;
}

Matrix predict_proba(const LogRegModel& model, const Matrix& x) {
  const Matrix xs = model.standardizer.apply(x);
  const std::size_t k = model.classes.size();
  Eigen::Map<const RowMat> xm(xs.data(), static_cast<Eigen::Index>(xs.rows()), static_cast<Eigen::Index>(xs.cols()));
  Eigen::Map<const RowMat> w(model.weights.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(xs.cols()));
  Matrix z(xs.rows(), k);
  Eigen::Map<RowMat> zm(z.data(), static_cast<Eigen::Index>(xs.rows()), static_cast<Eigen::Index>(k));
  zm.noalias() = xm * w.transpose();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < k; ++c) row[c] += model.bias[c];
    softmax_inplace(row);
  }
  return expand(z, model.classes, model.num_classes);
}

// ---------------------------------------------------------------------------
// Histogram gradient boosting

double RegressionTree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& nd = nodes[i];
    i = row[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
  }
  return nodes[i].value;
}

std::vector<double> histogram_cuts(std::span<const double> column, std::size_t bins) {
  std::vector<double> v(column.begin(), column.end());
  std::sort(v.begin(), v.end());
  std::vector<double> cuts;
  if (v.empty()) return cuts;
  std::vector<double> u = v;
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (u.size() <= bins) {
    for (std::size_t i = 1; i < u.size(); ++i) {
      double mid = u[i - 1] + (u[i] - u[i - 1]) / 2.0;
      if (!(mid > u[i - 1])) mid = u[i];
      cuts.push_back(mid);
    }
    return cuts;
  }
  const std::size_t n = v.size();
  for (std::size_t i = 1; i < bins; ++i) {
    const double c = v[i * n / bins];
    if (c > v.front() && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
  }
  return cuts;
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  std::size_t bin = 0;
  double gl = 0.0, hl = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(const std::vector<std::uint8_t>& binned, const std::vector<std::vector<double>>& cuts,
             std::size_t rows, const GbdtConfig& config)
      : binned_(binned), cuts_(cuts), n_(rows), config_(config), node_of_(rows) {}

  // Builds one tree; leaf_out[r] receives the leaf value of training row r.
  RegressionTree grow(std::span<const double> g, std::span<const double> h, std::vector<double>& leaf_out) {
    RegressionTree tree;
    std::fill(node_of_.begin(), node_of_.end(), 0u);
    double G = 0.0, H = 0.0;
    for (std::size_t r = 0; r < n_; ++r) {
      G += g[r];
      H += h[r];
    }
    tree.nodes.push_back({});
    stats_.assign(1, {G, H});
    std::vector<std::uint32_t> active{0};
    const std::size_t nbins_max = config_.bins;
    std::vector<std::int32_t> slot_of_row(n_);
    for (std::size_t depth = 0; depth < config_.max_depth && !active.empty(); ++depth) {
      std::vector<std::int32_t> slot_of_node(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) slot_of_node[active[s]] = static_cast<std::int32_t>(s);
      for (std::size_t r = 0; r < n_; ++r) slot_of_row[r] = slot_of_node[node_of_[r]];
      std::vector<SplitCandidate> best(active.size());
      std::vector<double> hist(active.size() * nbins_max * 2);
      for (std::size_t f = 0; f < cuts_.size(); ++f) {
        const std::size_t nb = cuts_[f].size() + 1;
        if (nb < 2) continue;
        std::fill(hist.begin(), hist.end(), 0.0);
        const std::uint8_t* col = binned_.data() + f * n_;
        for (std::size_t r = 0; r < n_; ++r) {
          const auto s = slot_of_row[r];
          if (s < 0) continue;
          double* cell = hist.data() + (static_cast<std::size_t>(s) * nbins_max + col[r]) * 2;
          cell[0] += g[r];
          cell[1] += h[r];
        }
        for (std::size_t s = 0; s < active.size(); ++s) {
          const auto [Gn, Hn] = stats_[active[s]];
          const double parent = Gn * Gn / (Hn + config_.lambda);
          double gl = 0.0, hl = 0.0;
          const double* hs = hist.data() + s * nbins_max * 2;
          for (std::size_t b = 0; b + 1 < nb; ++b) {
            gl += hs[2 * b];
            hl += hs[2 * b + 1];
            const double gr = Gn - gl, hr = Hn - hl;
            if (hl < config_.min_child_weight || hr < config_.min_child_weight) continue;
            const double gain =
                0.5 * (gl * gl / (hl + config_.lambda) + gr * gr / (hr + config_.lambda) - parent);
            if (gain > best[s].gain) best[s] = {gain, static_cast<std::int32_t>(f), b, gl, hl};
          }
        }
      }
      std::vector<std::uint32_t> next;
      std::vector<std::int64_t> split_of_slot(active.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) {
        if (best[s].feature < 0) continue;
        const std::uint32_t id = active[s];
        const auto [Gn, Hn] = stats_[id];
        const auto left = static_cast<std::uint32_t>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        stats_.push_back({best[s].gl, best[s].hl});
        stats_.push_back({Gn - best[s].gl, Hn - best[s].hl});
        auto& nd = tree.nodes[id];
        nd.feature = best[s].feature;
        nd.threshold = cuts_[static_cast<std::size_t>(best[s].feature)][best[s].bin];
        nd.left = left;
        nd.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
        split_of_slot[s] = static_cast<std::int64_t>(s);
      }
      for (std::size_t r = 0; r < n_; ++r) {
        const auto s = slot_of_row[r];
        if (s < 0 || split_of_slot[static_cast<std::size_t>(s)] < 0) continue;
        const auto& nd = tree.nodes[node_of_[r]];
        const std::size_t f = static_cast<std::size_t>(nd.feature);
        node_of_[r] = binned_[f * n_ + r] <= best[static_cast<std::size_t>(s)].bin ? nd.left : nd.right;
      }
      active = std::move(next);
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (tree.nodes[i].feature >= 0) continue;
      const auto [Gn, Hn] = stats_[i];
      tree.nodes[i].value = -Gn / (Hn + config_.lambda) * config_.learning_rate;
    }
    for (std::size_t r = 0; r < n_; ++r) leaf_out[r] = tree.nodes[node_of_[r]].value;
    return tree;
  }

 private:
  const std::vector<std::uint8_t>& binned_;
  const std::vector<std::vector<double>>& cuts_;
  std::size_t n_;
  const GbdtConfig& config_;
  std::vector<std::uint32_t> node_of_;
  std::vector<std::pair<double, double>> stats_;
};

}  // namespace

GbdtModel train_gbdt(const Matrix& x, std::span<const std::size_t> y, std::size_t num_classes,
                     const GbdtConfig& config) {
  check_training_inputs(x, y, num_classes);
  if (config.bins < 2 || config.bins > 256) throw Error(ErrorCode::invalid_input, "bins must be in [2, 256]");
  if (config.rounds < 1 || config.max_depth < 1) throw Error(ErrorCode::invalid_input, "rounds and max_depth must be >= 1");
  if (!(config.learning_rate > 0.0) || !(config.lambda >= 0.0) || !(config.min_child_weight >= 0.0)) {
    throw Error(ErrorCode::invalid_input, "learning_rate must be > 0; lambda and min_child_weight >= 0");
  }
  GbdtModel model;
  model.num_classes = num_classes;
  model.classes = present_classes(y, num_classes);
  model.input_width = x.cols();
  model.learning_rate = config.learning_rate;
  model.max_depth = config.max_depth;
  model.rounds = config.rounds;
  model.lambda = config.lambda;
  const auto labels = compact_labels(y, model.classes, num_classes);
  const std::size_t n = x.rows(), d = x.cols(), k = model.classes.size();

  model.cuts.resize(d);
  std::vector<std::uint8_t> binned(d * n);
  std::vector<double> column(n);
  for (std::size_t f = 0; f < d; ++f) {
    for (std::size_t r = 0; r < n; ++r) column[r] = x(r, f);
    model.cuts[f] = histogram_cuts(column, config.bins);
    const auto& cuts = model.cuts[f];
    for (std::size_t r = 0; r < n; ++r) {
      binned[f * n + r] = static_cast<std::uint8_t>(std::upper_bound(cuts.begin(), cuts.end(), column[r]) - cuts.begin());
    }
  }

  TreeGrower grower(binned, model.cuts, n, config);
  Matrix margin(n, k, 0.0);
  Matrix prob(n, k);
  std::vector<double> g(n), h(n), leaf(n);
  model.trees.reserve(config.rounds * k);
  for (std::size_t round = 0; round < config.rounds; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      auto p = prob.row(r);
      const auto m = margin.row(r);
      std::copy(m.begin(), m.end(), p.begin());
      softmax_inplace(p);
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t r = 0; r < n; ++r) {
        const double p = prob(r, c);
        g[r] = p - (labels[r] == c ? 1.0 : 0.0);
        h[r] = std::max(p * (1.0 - p), 1e-16);
      }
      model.trees.push_back(grower.grow(g, h, leaf));
      for (std::size_t r = 0; r < n; ++r) margin(r, c) += leaf[r];
    }
  }
  return model;
}

Matrix predict_proba(const GbdtModel& model, const Matrix& x, std::size_t rounds) {
  check_width(model.input_width, x.cols());
  const std::size_t k = model.classes.size();
  rounds = std::min(rounds, model.trees.size() / std::max<std::size_t>(k, 1));
  Matrix z(x.rows(), k, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    auto out = z.row(r);
    for (std::size_t t = 0; t < rounds * k; ++t) out[t % k] += model.trees[t].predict(row);
    softmax_inplace(out);
  }
  return expand(z, model.classes, model.num_classes);
}

Matrix predict_proba(const GbdtModel& model, const Matrix& x) {
  return predict_proba(model, x, std::numeric_limits<std::size_t>::max());
}

// ---------------------------------------------------------------------------

std::string_view to_string(ClassifierKind kind) {
  return kind == ClassifierKind::logreg ? "logreg" : "gbdt";
}

ClassifierKind classifier_kind_from_string(std::string_view text) {
  if (text == "logreg" || text == "lr") return ClassifierKind::logreg;
  if (text == "gbdt" || text == "xgb") return ClassifierKind::gbdt;
  throw Error(ErrorCode::config, "unknown classifier '" + std::string(text) + "' (expected logreg or gbdt)");
}

ClassifierModel train_classifier(const Matrix& x, std::span<const std::size_t> y,
                                 std::size_t num_classes, const ClassifierConfig& config) {
  if (config.kind == ClassifierKind::logreg) return train_logreg(x, y, num_classes, config.logreg);
  return train_gbdt(x, y, num_classes, config.gbdt);
}

Matrix predict_proba(const ClassifierModel& model, const Matrix& x) {
  return std::visit([&](const auto& m) { return predict_proba(m, x); }, model);
}

ClassifierKind kind_of(const ClassifierModel& model) {
  return std::holds_alternative<LogRegModel>(model) ? ClassifierKind::logreg : ClassifierKind::gbdt;
}

RoutingDecision route(std::span<const double> probabilities, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_input, "routing threshold must be in (0, 1]");
  }
  if (probabilities.empty()) throw Error(ErrorCode::invalid_input, "empty probability row");
  RoutingDecision d;
  d.class_index = argmax(probabilities);
  d.probability = probabilities[d.class_index];
  d.automatic = d.probability >= threshold;
  return d;
}

RoutingDecision route(const ClassifierModel& model, std::span<const double> row, double threshold) {
  Matrix x(1, row.size(), std::vector<double>(row.begin(), row.end()));
  const Matrix p = predict_proba(model, x);
  return route(p.row(0), threshold);
}

}  // namespace urbanfuse
