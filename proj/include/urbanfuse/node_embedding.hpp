#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "urbanfuse/core.hpp"
#include "urbanfuse/graph_builder.hpp"
#include "urbanfuse/ingest.hpp"
#include "urbanfuse/rng.hpp"
#include "urbanfuse/skipgram.hpp"

namespace urbanfuse {

enum class SamplingMode {
  inversion,  // cumulative-sum inversion per step
  alias,      // precomputed alias table per directed edge; memory ~ sum(deg^2)
};

struct WalkConfig {
  double p = 1.0;  // return
  double q = 1.0;  // in-out
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 80;
  std::uint64_t seed = 1;
  SamplingMode sampling = SamplingMode::inversion;
  std::size_t threads = 1;  // output is identical for any thread count
};

void validate(const WalkConfig& config);

/// Second-order step distribution over the neighbours of `curr`, aligned
/// with graph.neighbors(curr): weight * (1/p if back to prev, 1 if adjacent
/// to prev, 1/q otherwise), normalised.
std::vector<double> transition_distribution(const MultimodalGraph& graph, std::size_t prev,
                                            std::size_t curr, double p, double q);

using Walk = std::vector<std::uint32_t>;

class Node2VecWalker {
 public:
  Node2VecWalker(const MultimodalGraph& graph, const WalkConfig& config);

  /// Weight-proportional first move; `curr` must have a neighbour.
  std::size_t first_step(std::size_t curr, Rng& rng) const;
  std::size_t next_step(std::size_t prev, std::size_t curr, Rng& rng) const;
  /// Stops early at a node without neighbours.
  Walk walk(std::size_t start, Rng& rng) const;

 private:
  struct AliasTable {
    std::vector<double> prob;
    std::vector<std::uint32_t> alias;
  };
  std::size_t draw(std::span<const double> scores, double total, Rng& rng) const;
  static std::size_t draw_alias(const AliasTable& table, std::size_t offset, std::size_t size, Rng& rng);

  const MultimodalGraph& graph_;
  WalkConfig config_;
  // Alias mode: tables for first steps (per node) and for each directed edge.
  AliasTable first_;
  AliasTable second_;
  std::vector<std::size_t> second_offset_;
};

/// walks_per_node rounds; in each round one walk starts at every node in id
/// order. Walk (round w, node v) uses its own generator seeded from
/// (seed, v, w). Result index = w * num_nodes + v.
std::vector<Walk> generate_walks(const MultimodalGraph& graph, const WalkConfig& config);

/// Skip-gram over walks; one embedding row per graph node, in node order.
NodeEmbeddings train_node_embeddings(const MultimodalGraph& graph, const std::vector<Walk>& walks,
                                     const SkipGramConfig& config, SkipGramResult* stats = nullptr);

struct Node2VecConfig {
  WalkConfig walk;
  SkipGramConfig skipgram;
};

NodeEmbeddings node2vec(const MultimodalGraph& graph, const Node2VecConfig& config,
                        SkipGramResult* stats = nullptr);

/// Rows are the report-node vectors. Throws missing_node listing absent ids.
FeatureBlock report_embedding_block(const NodeEmbeddings& embeddings, const Dataset& dataset,
                                    std::string name = "graph");

}  // namespace urbanfuse
