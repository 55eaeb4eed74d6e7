#include "urbanfuse/node_embedding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

namespace {

// Unnormalised second-order scores into `out`; returns their sum.
double second_order_scores(const MultimodalGraph& graph, std::size_t prev, std::size_t curr,
                           double p, double q, std::vector<double>& out) {
  const auto next = graph.neighbors(curr);
  const auto back = graph.neighbors(prev);
  out.resize(next.size());
  double total = 0.0;
  std::size_t b = 0;
  for (std::size_t k = 0; k < next.size(); ++k) {
    const std::size_t x = next[k].node;
    double alpha;
    if (x == prev) {
      alpha = 1.0 / p;
    } else {
      while (b < back.size() && back[b].node < x) ++b;
      alpha = (b < back.size() && back[b].node == x) ? 1.0 : 1.0 / q;
    }
    out[k] = next[k].weight * alpha;
    total += out[k];
  }
  return total;
}

// Vose's alias method over `weights`, written into prob/alias at `offset`.
void build_alias(std::span<const double> weights, std::vector<double>& prob,
                 std::vector<std::uint32_t>& alias, std::size_t offset) {
  const std::size_t n = weights.size();
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    prob[offset + s] = scaled[s];
    alias[offset + s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : large) {
    prob[offset + i] = 1.0;
    alias[offset + i] = i;
  }
  for (auto i : small) {
    prob[offset + i] = 1.0;
    alias[offset + i] = i;
  }
}

}  // namespace

void validate(const WalkConfig& config) {
  if (!(config.p > 0.0) || !(config.q > 0.0)) throw Error(ErrorCode::invalid_input, "p and q must be > 0");
  if (config.walks_per_node < 1) throw Error(ErrorCode::invalid_input, "walks_per_node must be >= 1");
  if (config.walk_length < 2) throw Error(ErrorCode::invalid_input, "walk_length must be >= 2");
}

std::vector<double> transition_distribution(const MultimodalGraph& graph, std::size_t prev,
                                            std::size_t curr, double p, double q) {
  if (prev >= graph.num_nodes() || curr >= graph.num_nodes()) {
    throw Error(ErrorCode::invalid_input, "node index out of range");
  }
  if (graph.degree(curr) == 0) {
    throw Error(ErrorCode::dead_end, "node '" + graph.node_id(curr) + "' has no neighbours");
  }
  if (!graph.edge_weight(prev, curr)) {
    throw Error(ErrorCode::invalid_input, "'" + graph.node_id(prev) + "' is not adjacent to '" +
                                              graph.node_id(curr) + "'");
  }
  std::vector<double> probs;
  const double total = second_order_scores(graph, prev, curr, p, q, probs);
  for (double& v : probs) v /= total;
  return probs;
}

Node2VecWalker::Node2VecWalker(const MultimodalGraph& graph, const WalkConfig& config)
    : graph_(graph), config_(config) {
  validate(config_);
  if (config_.sampling != SamplingMode::alias) return;
  const std::size_t n = graph.num_nodes();
  first_.prob.resize(graph.adjacency_size());
  first_.alias.resize(graph.adjacency_size());
  std::vector<double> weights;
  for (std::size_t v = 0; v < n; ++v) {
    const auto adj = graph.neighbors(v);
    if (adj.empty()) continue;
    weights.clear();
    for (const auto& a : adj) weights.push_back(a.weight);
    build_alias(weights, first_.prob, first_.alias, graph.adjacency_offset(v));
  }
  // Directed edge (prev -> curr) lives at adjacency slot of curr in prev's list.
  second_offset_.resize(graph.adjacency_size() + 1);
  std::size_t total = 0;
  for (std::size_t prev = 0; prev < n; ++prev) {
    const auto adj = graph.neighbors(prev);
    for (std::size_t k = 0; k < adj.size(); ++k) {
      second_offset_[graph.adjacency_offset(prev) + k] = total;
      total += graph.degree(adj[k].node);
    }
  }
  second_offset_.back() = total;
  second_.prob.resize(total);
  second_.alias.resize(total);
  for (std::size_t prev = 0; prev < n; ++prev) {
    const auto adj = graph.neighbors(prev);
    for (std::size_t k = 0; k < adj.size(); ++k) {
      second_order_scores(graph, prev, adj[k].node, config_.p, config_.q, weights);
      build_alias(weights, second_.prob, second_.alias, second_offset_[graph.adjacency_offset(prev) + k]);
    }
  }
}

std::size_t Node2VecWalker::draw(std::span<const double> scores, double total, Rng& rng) const {
  const double r = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    acc += scores[k];
    if (r < acc) return k;
  }
  // Rounding can leave r just above the final partial sum.
  for (std::size_t k = scores.size(); k-- > 0;) {
    if (scores[k] > 0.0) return k;
  }
  return scores.size() - 1;
}

std::size_t Node2VecWalker::draw_alias(const AliasTable& table, std::size_t offset,
                                       std::size_t size, Rng& rng) {
  const std::size_t k = static_cast<std::size_t>(rng.below(size));
  return rng.uniform01() < table.prob[offset + k] ? k : table.alias[offset + k];
}

std::size_t Node2VecWalker::first_step(std::size_t curr, Rng& rng) const {
  const auto adj = graph_.neighbors(curr);
  if (adj.empty()) throw Error(ErrorCode::dead_end, "node '" + graph_.node_id(curr) + "' has no neighbours");
  if (config_.sampling == SamplingMode::alias) {
    return adj[draw_alias(first_, graph_.adjacency_offset(curr), adj.size(), rng)].node;
  }
  thread_local std::vector<double> scores;
  scores.resize(adj.size());
  double total = 0.0;
  for (std::size_t k = 0; k < adj.size(); ++k) total += (scores[k] = adj[k].weight);
  return adj[draw(scores, total, rng)].node;
}

std::size_t Node2VecWalker::next_step(std::size_t prev, std::size_t curr, Rng& rng) const {
  const auto adj = graph_.neighbors(curr);
  if (adj.empty()) throw Error(ErrorCode::dead_end, "node '" + graph_.node_id(curr) + "' has no neighbours");
  if (config_.sampling == SamplingMode::alias) {
    const auto back = graph_.neighbors(prev);
    const auto it = std::lower_bound(back.begin(), back.end(), curr,
                                     [](const MultimodalGraph::Adjacent& a, std::size_t v) { return a.node < v; });
    if (it == back.end() || it->node != curr) {
      throw Error(ErrorCode::invalid_input, "walk step between non-adjacent nodes");
    }
    const std::size_t slot = graph_.adjacency_offset(prev) + static_cast<std::size_t>(it - back.begin());
    return adj[draw_alias(second_, second_offset_[slot], adj.size(), rng)].node;
  }
  thread_local std::vector<double> scores;
  const double total = second_order_scores(graph_, prev, curr, config_.p, config_.q, scores);
  return adj[draw(scores, total, rng)].node;
}

Walk Node2VecWalker::walk(std::size_t start, Rng& rng) const {
  Walk out;
  out.reserve(config_.walk_length);
  out.push_back(static_cast<std::uint32_t>(start));
  if (graph_.degree(start) == 0) return out;
  out.push_back(static_cast<std::uint32_t>(first_step(start, rng)));
  while (out.size() < config_.walk_length) {
    const std::size_t curr = out.back();
    if (graph_.degree(curr) == 0) break;
    out.push_back(static_cast<std::uint32_t>(next_step(out[out.size() - 2], curr, rng)));
  }
  return out;
}

std::vector<Walk> generate_walks(const MultimodalGraph& graph, const WalkConfig& config) {
  const Node2VecWalker walker(graph, config);
  const std::size_t n = graph.num_nodes();
  const std::size_t total = n * config.walks_per_node;
  std::vector<Walk> walks(total);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t w = idx / n;
      const std::size_t v = idx % n;
      Rng rng(derive_seed(config.seed, v, w));
      walks[idx] = walker.walk(v, rng);
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, total));
  if (threads == 1) {
    work(0, total);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (total + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(total, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  return walks;
}

NodeEmbeddings train_node_embeddings(const MultimodalGraph& graph, const std::vector<Walk>& walks,
                                     const SkipGramConfig& config, SkipGramResult* stats) {
  const std::size_t n = graph.num_nodes();
  std::vector<double> counts(n, 0.0);
  for (const auto& w : walks) {
    for (auto v : w) {
      if (v >= n) throw Error(ErrorCode::invalid_input, "walk references unknown node index");
      counts[v] += 1.0;
    }
  }
  SkipGramResult result = train_skipgram(walks, counts, config);
  NodeEmbeddings out;
  out.node_ids = graph.node_ids();
  out.matrix = result.input_vectors;
  if (stats) *stats = std::move(result);
  return out;
}

NodeEmbeddings node2vec(const MultimodalGraph& graph, const Node2VecConfig& config,
                        SkipGramResult* stats) {
  return train_node_embeddings(graph, generate_walks(graph, config.walk), config.skipgram, stats);
}

FeatureBlock report_embedding_block(const NodeEmbeddings& embeddings, const Dataset& dataset,
                                    std::string name) {
  std::unordered_map<std::string, std::size_t> rows;
  rows.reserve(embeddings.node_ids.size());
  for (std::size_t i = 0; i < embeddings.node_ids.size(); ++i) rows.emplace(embeddings.node_ids[i], i);
  const std::size_t dims = embeddings.dims();
  Matrix m(dataset.reports.size(), dims);
  std::vector<std::string> missing;
  for (std::size_t r = 0; r < dataset.reports.size(); ++r) {
    const auto it = rows.find(report_node_id(dataset.reports[r].id));
    if (it == rows.end()) {
      missing.push_back(dataset.reports[r].id);
      continue;
    }
    const auto src = embeddings.matrix.row(it->second);
    std::copy(src.begin(), src.end(), m.row(r).begin());
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << missing.size() << " report(s) have no graph embedding:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg << ' ' << missing[i];
    if (missing.size() > 10) msg << " ...";
    throw Error(ErrorCode::missing_node, msg.str());
  }
  std::vector<std::string> columns;
  for (std::size_t d = 0; d < dims; ++d) columns.push_back(name + "_" + std::to_string(d));
  return FeatureBlock(std::move(name), BlockKind::embedding, report_ids(dataset), std::move(m),
                      std::move(columns));
}

}  // namespace urbanfuse
