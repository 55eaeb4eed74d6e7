#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "urbanfuse/core.hpp"
#include "urbanfuse/ingest.hpp"

namespace urbanfuse {

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr double kEarthRadiusM = 6371000.0;
/// Distance reported for every proximity feature of a type with no objects.
inline constexpr double kAbsentTypeDistanceM = 20000.0;
inline constexpr double kGridCellM = 200.0;

double haversine_m(LatLon a, LatLon b);

struct Neighbor {
  double distance_m = 0.0;
  std::size_t index = 0;  // position in the grid's point list
};

/// Uniform lat/lon grid over one point set. Queries are exact: rings of
/// cells are scanned until a lower bound on the distance to every unscanned
/// cell rules them out.
class PointGrid {
 public:
  explicit PointGrid(std::vector<LatLon> points, double cell_m = kGridCellM);

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<LatLon>& points() const noexcept { return points_; }

  /// Up to k neighbours ordered by (distance, index).
  std::vector<Neighbor> nearest(LatLon query, std::size_t k) const;
  /// Every point with distance <= radius_m, ordered by (distance, index).
  std::vector<Neighbor> within(LatLon query, double radius_m) const;

 private:
  struct CellRange {
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  template <typename Visit, typename Done>
  void scan(LatLon query, Visit&& visit, Done&& done) const;
  double ring_lower_bound(LatLon query, long long qi, long long qj, long long r) const;

  std::vector<LatLon> points_;
  std::vector<std::size_t> order_;  // point indices grouped by cell
  std::unordered_map<long long, CellRange> cells_;
  double lat0_ = 0.0;
  double lon0_ = 0.0;
  double dlat_ = 1.0;
  double dlon_ = 1.0;
  long long imin_ = 0, imax_ = -1, jmin_ = 0, jmax_ = -1;
  double min_lon_ = 0.0, max_lon_ = 0.0;
};

/// One grid per object type; the type registry is sorted by name.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  SpatialIndex(std::vector<std::string> types, std::vector<PointGrid> grids);

  const std::vector<std::string>& types() const noexcept { return types_; }
  /// nullptr when the type has no objects.
  const PointGrid* grid(std::string_view type) const;
  const PointGrid& grid_at(std::size_t type_index) const { return grids_[type_index]; }

 private:
  std::vector<std::string> types_;
  std::vector<PointGrid> grids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

SpatialIndex build_spatial_index(const std::vector<GeoObject>& objects);
SpatialIndex build_history_index(const std::vector<HistoricalEvent>& events);

struct Proximity {
  double nearest_1 = kAbsentTypeDistanceM;
  double mean_5 = kAbsentTypeDistanceM;
  double mean_10 = kAbsentTypeDistanceM;
  double mean_100 = kAbsentTypeDistanceM;
};

struct Density {
  std::size_t count_25 = 0;
  std::size_t count_50 = 0;
  std::size_t count_100 = 0;
  std::size_t count_200 = 0;
};

/// mean_k averages the min(k, available) nearest objects.
Proximity proximity_features(const SpatialIndex& index, LatLon point, std::string_view object_type);
/// Inclusive counts (distance <= radius).
Density density_features(const SpatialIndex& index, LatLon point, std::string_view object_type);

/// Per type: nearest_1, mean_5, mean_10, mean_100, count_25m, count_50m,
/// count_100m, count_200m.
std::vector<std::string> geo_feature_schema(const std::vector<std::string>& types);
void save_geo_schema(const std::vector<std::string>& types, const std::filesystem::path& path);

FeatureBlock geo_block(const Dataset& dataset, const SpatialIndex& index, std::string name = "geo");
/// Same features over historical events keyed by issue type; timestamps are
/// ignored.
FeatureBlock historical_block(const Dataset& dataset, const std::vector<HistoricalEvent>& events,
                              std::string name = "geo_hist");

}  // namespace urbanfuse
