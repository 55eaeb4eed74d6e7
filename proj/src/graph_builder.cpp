#include "urbanfuse/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::report: return "report";
    case NodeKind::geo_object: return "geo_object";
    case NodeKind::location: return "location";
    case NodeKind::visual_concept: return "visual_concept";
    case NodeKind::word: return "word";
    case NodeKind::hour: return "hour";
    case NodeKind::weekday: return "weekday";
  }
  return "report";
}

NodeKind node_kind_from_string(std::string_view text) {
  for (auto k : {NodeKind::report, NodeKind::geo_object, NodeKind::location,
                 NodeKind::visual_concept, NodeKind::word, NodeKind::hour, NodeKind::weekday}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::format, "unknown node kind '" + std::string(text) + "'");
}

/// Collects nodes and undirected edges, then freezes them into a graph.
class GraphAssembler {
 public:
  void add_node(const std::string& id, NodeKind kind) {
    auto [it, inserted] = nodes_.emplace(id, kind);
    if (!inserted && it->second != kind) {
      throw Error(ErrorCode::invalid_input, "node '" + id + "' added with two kinds");
    }
  }

  /// Returns false when the edge already existed (its weight becomes the max).
  bool add_edge(const std::string& a, const std::string& b, double weight) {
    if (a == b) throw Error(ErrorCode::invalid_input, "self-loop on '" + a + "'");
    if (!std::isfinite(weight) || weight <= 0.0) {
      throw Error(ErrorCode::invalid_input, "edge " + a + " - " + b + " has non-positive weight");
    }
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto [it, inserted] = edges_.emplace(std::move(key), weight);
    if (!inserted) it->second = std::max(it->second, weight);
    return inserted;
  }

  MultimodalGraph finish() {
    MultimodalGraph g;
    g.ids_.reserve(nodes_.size());
    for (const auto& [id, kind] : nodes_) {
      g.lookup_.emplace(id, g.ids_.size());
      g.ids_.push_back(id);
      g.kinds_.push_back(kind);
    }
    const std::size_t n = g.ids_.size();
    std::vector<std::vector<MultimodalGraph::Adjacent>> adj(n);
    for (const auto& [key, w] : edges_) {
      auto iu = g.lookup_.find(key.first);
      auto iv = g.lookup_.find(key.second);
      if (iu == g.lookup_.end() || iv == g.lookup_.end()) {
        throw Error(ErrorCode::invalid_input, "edge references unknown node: " + key.first + " - " + key.second);
      }
      std::size_t u = iu->second, v = iv->second;
      if (u > v) std::swap(u, v);
      g.edges_.push_back({u, v, w});
      adj[u].push_back({v, w});
      adj[v].push_back({u, w});
    }
    std::sort(g.edges_.begin(), g.edges_.end(),
              [](const auto& a, const auto& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    g.offsets_.assign(1, 0);
    for (auto& list : adj) {
      std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.node < b.node; });
      g.adjacency_.insert(g.adjacency_.end(), list.begin(), list.end());
      g.offsets_.push_back(g.adjacency_.size());
    }
    return g;
  }

 private:
  std::map<std::string, NodeKind> nodes_;
  std::map<std::pair<std::string, std::string>, double> edges_;
};

MultimodalGraph MultimodalGraph::from_edges(
    std::vector<std::pair<std::string, NodeKind>> nodes,
    const std::vector<std::tuple<std::string, std::string, double>>& edges) {
  GraphAssembler assembler;
  for (const auto& [id, kind] : nodes) assembler.add_node(id, kind);
  for (const auto& [a, b, w] : edges) {
    if (!assembler.add_edge(a, b, w)) {
      throw Error(ErrorCode::invalid_input, "duplicate edge " + a + " - " + b);
    }
  }
  return assembler.finish();
}

std::optional<std::size_t> MultimodalGraph::index_of(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> MultimodalGraph::edge_weight(std::size_t u, std::size_t v) const {
  const auto adj = neighbors(u);
  auto it = std::lower_bound(adj.begin(), adj.end(), v,
                             [](const Adjacent& a, std::size_t node) { return a.node < node; });
  if (it == adj.end() || it->node != v) return std::nullopt;
  return it->weight;
}

bool MultimodalGraph::operator==(const MultimodalGraph& other) const {
  if (ids_ != other.ids_ || kinds_ != other.kinds_ || edges_.size() != other.edges_.size()) return false;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& a = edges_[i];
    const auto& b = other.edges_[i];
    if (a.u != b.u || a.v != b.v || a.weight != b.weight) return false;
  }
  return true;
}

double distance_weight(double meters, GeoWeightMode mode) {
  return mode == GeoWeightMode::inverse_distance ? 1.0 / (1.0 + meters) : std::max(meters, 1e-3);
}

std::string report_node_id(std::string_view report_id) { return "report:" + std::string(report_id); }

namespace {

constexpr double kLocationScale = 1e5;  // 5 decimal places

std::string fixed5(long long scaled) {
  const bool negative = scaled < 0;
  const unsigned long long a = negative ? 0ULL - static_cast<unsigned long long>(scaled)
                                        : static_cast<unsigned long long>(scaled);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s%llu.%05llu", negative ? "-" : "", a / 100000ULL, a % 100000ULL);
  return buf;
}

std::string hour_node(int h) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "hour:%02d", h);
  return buf;
}

std::string weekday_node(int d) { return "weekday:" + std::to_string(d); }

}  // namespace

std::string location_node_id(double lat, double lon) {
  return "loc:" + fixed5(std::llround(lat * kLocationScale)) + "," +
         fixed5(std::llround(lon * kLocationScale));
}

MultimodalGraph build_graph(std::span<const Observation> reports, const SpatialIndex& geo_index,
                            const VisualTable& visual, const TfidfModel& graph_tfidf,
                            const GraphConfig& config) {
  GraphAssembler g;
  for (int h = 0; h < 24; ++h) g.add_node(hour_node(h), NodeKind::hour);
  for (int d = 0; d < 7; ++d) g.add_node(weekday_node(d), NodeKind::weekday);
  for (int h = 0; h < 24; ++h) g.add_edge(hour_node(h), hour_node((h + 1) % 24), config.ring_weight);
  for (int d = 0; d < 7; ++d) g.add_edge(weekday_node(d), weekday_node((d + 1) % 7), config.ring_weight);

  // Deduplicated locations, in first-seen order.
  std::map<std::pair<long long, long long>, std::size_t> location_slot;
  std::vector<LatLon> location_points;
  std::vector<std::string> location_ids;

  std::vector<std::string> isolated;
  for (const auto& r : reports) {
    const std::string node = report_node_id(r.id);
    g.add_node(node, NodeKind::report);
    std::size_t content_edges = 0;

    // Geo objects: the k nearest over all types.
    struct Candidate {
      double d;
      std::size_t type;
      std::size_t index;
    };
    std::vector<Candidate> candidates;
    for (std::size_t t = 0; t < geo_index.types().size(); ++t) {
      for (const auto& n : geo_index.grid_at(t).nearest({r.lat, r.lon}, config.geo_neighbors)) {
        candidates.push_back({n.distance_m, t, n.index});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.d, a.type, a.index) < std::tie(b.d, b.type, b.index);
    });
    for (std::size_t k = 0; k < std::min(config.geo_neighbors, candidates.size()); ++k) {
      const auto& c = candidates[k];
      const std::string geo = "geo:" + geo_index.types()[c.type] + "#" + std::to_string(c.index);
      g.add_node(geo, NodeKind::geo_object);
      g.add_edge(node, geo, distance_weight(c.d, config.geo_weight));
      ++content_edges;
    }

    if (r.image_ref) {
      auto it = visual.find(*r.image_ref);
      if (it == visual.end()) {
        throw Error(ErrorCode::alignment, "report '" + r.id + "' references missing image '" + *r.image_ref + "'");
      }
      const auto& concepts = it->second.concepts;
      for (std::size_t k = 0; k < std::min(config.concepts_per_image, concepts.size()); ++k) {
        if (concepts[k].prob <= 0.0) continue;
        const std::string c = "concept:" + concepts[k].label;
        g.add_node(c, NodeKind::visual_concept);
        g.add_edge(node, c, concepts[k].prob);
        ++content_edges;
      }
    }

    for (const auto& [idx, weight] : tfidf_transform(graph_tfidf, r.text)) {
      if (weight <= 0.0) continue;
      const std::string w = "word:" + graph_tfidf.vocabulary.terms()[idx];
      g.add_node(w, NodeKind::word);
      g.add_edge(node, w, weight);
      ++content_edges;
    }

    const int h = r.timestamp.hour;
    const int d = r.timestamp.weekday();
    g.add_edge(node, hour_node(h), config.exact_time_weight);
    g.add_edge(node, hour_node((h + 1) % 24), config.ring_weight);
    g.add_edge(node, hour_node((h + 23) % 24), config.ring_weight);
    g.add_edge(node, weekday_node(d), config.exact_time_weight);
    g.add_edge(node, weekday_node((d + 1) % 7), config.ring_weight);
    g.add_edge(node, weekday_node((d + 6) % 7), config.ring_weight);

    const auto key = std::make_pair(std::llround(r.lat * kLocationScale), std::llround(r.lon * kLocationScale));
    auto [slot, fresh] = location_slot.emplace(key, location_points.size());
    if (fresh) {
      location_points.push_back({static_cast<double>(key.first) / kLocationScale,
                                 static_cast<double>(key.second) / kLocationScale});
      location_ids.push_back(location_node_id(r.lat, r.lon));
      g.add_node(location_ids.back(), NodeKind::location);
    }
    g.add_edge(node, location_ids[slot->second], config.exact_time_weight);

    if (content_edges == 0) isolated.push_back(r.id);
  }

  if (config.require_content && !isolated.empty()) {
    std::ostringstream msg;
    msg << isolated.size() << " report(s) have no text, image or geo edge:";
    for (std::size_t i = 0; i < std::min<std::size_t>(isolated.size(), 20); ++i) msg << ' ' << isolated[i];
    if (isolated.size() > 20) msg << " ...";
    throw Error(ErrorCode::isolated_node, msg.str());
  }

  if (location_points.size() > 1) {
    const PointGrid grid(location_points);
    for (std::size_t i = 0; i < location_points.size(); ++i) {
      std::size_t linked = 0;
      for (const auto& n : grid.nearest(location_points[i], config.location_neighbors + 1)) {
        if (n.index == i || linked == config.location_neighbors) continue;
        g.add_edge(location_ids[i], location_ids[n.index], distance_weight(n.distance_m, config.geo_weight));
        ++linked;
      }
    }
  }
  return g.finish();
}

GraphStats graph_stats(const MultimodalGraph& graph) {
  GraphStats s;
  for (auto k : {NodeKind::report, NodeKind::geo_object, NodeKind::location, NodeKind::visual_concept,
                 NodeKind::word, NodeKind::hour, NodeKind::weekday}) {
    s.nodes_per_kind[k] = 0;
  }
  s.num_nodes = graph.num_nodes();
  s.num_edges = graph.num_edges();
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    ++s.nodes_per_kind[graph.node_kind(i)];
    ++s.degree_histogram[graph.degree(i)];
  }
  return s;
}

std::string format_graph_stats(const GraphStats& stats) {
  std::ostringstream out;
  out << "nodes=" << stats.num_nodes << " edges=" << stats.num_edges;
  for (const auto& [kind, count] : stats.nodes_per_kind) out << ' ' << to_string(kind) << '=' << count;
  if (!stats.degree_histogram.empty()) {
    out << " max_degree=" << stats.degree_histogram.rbegin()->first;
  }
  return out.str();
}

void save_graph(const MultimodalGraph& graph, const std::filesystem::path& edges_path,
                const std::filesystem::path& nodes_path) {
  for (const auto* p : {&edges_path, &nodes_path}) {
    if (p->has_parent_path()) std::filesystem::create_directories(p->parent_path());
  }
  std::ofstream edges(edges_path, std::ios::binary | std::ios::trunc);
  std::ofstream nodes(nodes_path, std::ios::binary | std::ios::trunc);
  if (!edges || !nodes) throw Error(ErrorCode::io, "cannot write graph files");
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    nodes << graph.node_id(i) << '\t' << to_string(graph.node_kind(i)) << '\n';
  }
  for (const auto& e : graph.edges()) {
    edges << graph.node_id(e.u) << '\t' << graph.node_id(e.v) << '\t' << format_double(e.weight) << '\n';
  }
}

MultimodalGraph load_graph(const std::filesystem::path& edges_path,
                           const std::filesystem::path& nodes_path) {
  std::ifstream nodes_in(nodes_path);
  std::ifstream edges_in(edges_path);
  if (!nodes_in || !edges_in) throw Error(ErrorCode::io, "cannot read graph files");
  std::vector<std::pair<std::string, NodeKind>> nodes;
  std::string line;
  while (std::getline(nodes_in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::parse, "bad node line '" + line + "'");
    nodes.emplace_back(line.substr(0, tab), node_kind_from_string(line.substr(tab + 1)));
  }
  std::vector<std::tuple<std::string, std::string, double>> edges;
  while (std::getline(edges_in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(ErrorCode::parse, "bad edge line '" + line + "'");
    edges.emplace_back(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), parse_double(line.substr(t2 + 1)));
  }
  return MultimodalGraph::from_edges(std::move(nodes), edges);
}

}  // namespace urbanfuse
