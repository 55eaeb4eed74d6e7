#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "urbanfuse/core.hpp"
#include "urbanfuse/geo_features.hpp"
#include "urbanfuse/ingest.hpp"
#include "urbanfuse/text_features.hpp"

namespace urbanfuse {

enum class NodeKind { report, geo_object, location, visual_concept, word, hour, weekday };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view text);

/// Undirected weighted graph. Nodes are indexed in id order and every
/// adjacency list is sorted by neighbour index (hence by neighbour id).
class MultimodalGraph {
 public:
  struct Adjacent {
    std::size_t node;
    double weight;
  };
  struct Edge {
    std::size_t u;  // u < v
    std::size_t v;
    double weight;
  };

  MultimodalGraph() = default;
  /// Throws invalid_input on unknown endpoints, self-loops, duplicate
  /// undirected edges, or weights that are not finite and positive.
  static MultimodalGraph from_edges(std::vector<std::pair<std::string, NodeKind>> nodes,
                                    const std::vector<std::tuple<std::string, std::string, double>>& edges);

  std::size_t num_nodes() const noexcept { return ids_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::string& node_id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& node_ids() const noexcept { return ids_; }
  NodeKind node_kind(std::size_t i) const { return kinds_[i]; }
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::span<const Adjacent> neighbors(std::size_t i) const {
    return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  /// Position of node i's first entry in the flattened adjacency array.
  std::size_t adjacency_offset(std::size_t i) const { return offsets_[i]; }
  std::size_t adjacency_size() const noexcept { return adjacency_.size(); }
  /// Binary search in u's adjacency.
  std::optional<double> edge_weight(std::size_t u, std::size_t v) const;
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool operator==(const MultimodalGraph& other) const;

 private:
  friend class GraphAssembler;

  std::vector<std::string> ids_;
  std::vector<NodeKind> kinds_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Adjacent> adjacency_;
  std::vector<Edge> edges_;
};

enum class GeoWeightMode {
  inverse_distance,  // 1 / (1 + d_m)
  raw_distance,      // d_m, floored at 1e-3 m
};

struct GraphConfig {
  GeoWeightMode geo_weight = GeoWeightMode::inverse_distance;
  std::size_t geo_neighbors = 2;
  std::size_t concepts_per_image = 2;
  std::size_t location_neighbors = 2;
  double exact_time_weight = 1.0;
  double ring_weight = 0.5;
  /// Fail when a report has no word, concept or geo edge.
  bool require_content = true;
};

double distance_weight(double meters, GeoWeightMode mode);

/// Label-free: takes observations, never reports. `graph_tfidf` supplies the
/// word nodes (its vocabulary) and edge weights.
MultimodalGraph build_graph(std::span<const Observation> reports, const SpatialIndex& geo_index,
                            const VisualTable& visual, const TfidfModel& graph_tfidf,
                            const GraphConfig& config = {});

std::string report_node_id(std::string_view report_id);
std::string location_node_id(double lat, double lon);

struct GraphStats {
  std::map<NodeKind, std::size_t> nodes_per_kind;
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::map<std::size_t, std::size_t> degree_histogram;  // degree -> node count
};

GraphStats graph_stats(const MultimodalGraph& graph);
std::string format_graph_stats(const GraphStats& stats);

/// "u\tv\tweight" lines plus a "node_id\tkind" sidecar.
void save_graph(const MultimodalGraph& graph, const std::filesystem::path& edges_path,
                const std::filesystem::path& nodes_path);
MultimodalGraph load_graph(const std::filesystem::path& edges_path,
                           const std::filesystem::path& nodes_path);

}  // namespace urbanfuse
