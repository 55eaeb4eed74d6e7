#include "urbanfuse/geo_features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMetersPerDegreeLat = kEarthRadiusM * kDegToRad;

long long cell_key(long long i, long long j) { return (i << 32) ^ (j & 0xffffffffLL); }

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance_m != b.distance_m ? a.distance_m < b.distance_m : a.index < b.index;
}

constexpr double kRadii[] = {25.0, 50.0, 100.0, 200.0};

}  // namespace

double haversine_m(LatLon a, LatLon b) {
  const double dlat = std::abs(b.lat - a.lat) * kDegToRad;
  const double dlon = std::abs(b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double ca = std::cos(a.lat * kDegToRad);
  const double cb = std::cos(b.lat * kDegToRad);
  // Order the cosine product so the result is exactly symmetric.
  const double cc = a.lat <= b.lat ? ca * cb : cb * ca;
  const double h = std::min(1.0, s1 * s1 + cc * s2 * s2);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

PointGrid::PointGrid(std::vector<LatLon> points, double cell_m) : points_(std::move(points)) {
  if (points_.empty()) return;
  double lat_sum = 0.0;
  lat0_ = points_[0].lat;
  lon0_ = points_[0].lon;
  min_lon_ = max_lon_ = points_[0].lon;
  for (const auto& p : points_) {
    lat0_ = std::min(lat0_, p.lat);
    lon0_ = std::min(lon0_, p.lon);
    max_lon_ = std::max(max_lon_, p.lon);
    lat_sum += p.lat;
  }
  min_lon_ = lon0_;
  const double ref_lat = lat_sum / static_cast<double>(points_.size());
  dlat_ = cell_m / kMetersPerDegreeLat;
  dlon_ = dlat_ / std::max(std::cos(ref_lat * kDegToRad), 0.01);

  std::vector<std::pair<long long, std::size_t>> keyed;
  keyed.reserve(points_.size());
  imin_ = jmin_ = std::numeric_limits<long long>::max();
  imax_ = jmax_ = std::numeric_limits<long long>::min();
  for (std::size_t idx = 0; idx < points_.size(); ++idx) {
    const auto i = static_cast<long long>(std::floor((points_[idx].lat - lat0_) / dlat_));
    const auto j = static_cast<long long>(std::floor((points_[idx].lon - lon0_) / dlon_));
    imin_ = std::min(imin_, i);
    imax_ = std::max(imax_, i);
    jmin_ = std::min(jmin_, j);
    jmax_ = std::max(jmax_, j);
    keyed.emplace_back(cell_key(i, j), idx);
  }
  std::sort(keyed.begin(), keyed.end());
  order_.reserve(keyed.size());
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    auto& range = cells_[keyed[k].first];
    if (range.end == 0) range.begin = k;
    range.end = k + 1;
    order_.push_back(keyed[k].second);
  }
}

double PointGrid::ring_lower_bound(LatLon q, long long qi, long long qj, long long r) const {
  // Any point outside the (2r+1)^2 block is either outside its latitude band
  // or inside the band but outside its longitude band.
  const double lat_lo = lat0_ + static_cast<double>(qi - r) * dlat_;
  const double lat_hi = lat0_ + static_cast<double>(qi + r + 1) * dlat_;
  const double lat_gap = std::max(0.0, std::min(q.lat - lat_lo, lat_hi - q.lat));
  const double bound_lat = lat_gap * kMetersPerDegreeLat;

  double bound_lon = 0.0;
  const double span = std::max(max_lon_, q.lon) - std::min(min_lon_, q.lon);
  if (span <= 180.0) {
    const double lon_lo = lon0_ + static_cast<double>(qj - r) * dlon_;
    const double lon_hi = lon0_ + static_cast<double>(qj + r + 1) * dlon_;
    const double lon_gap = std::max(0.0, std::min(q.lon - lon_lo, lon_hi - q.lon));
    const double band_lo = std::clamp(lat_lo, -90.0, 90.0) * kDegToRad;
    const double band_hi = std::clamp(lat_hi, -90.0, 90.0) * kDegToRad;
    const double cos_min = std::max(0.0, std::min(std::cos(band_lo), std::cos(band_hi)));
    const double s = std::sin(std::min(lon_gap * kDegToRad, std::numbers::pi) / 2.0);
    const double arg = std::sqrt(std::max(0.0, std::cos(q.lat * kDegToRad)) * cos_min) * s;
    bound_lon = 2.0 * kEarthRadiusM * std::asin(std::min(1.0, arg));
  }
  // Margin for floating-point cell assignment at band edges.
  return std::min(bound_lat, bound_lon) * (1.0 - 1e-9) - 1e-6;
}

template <typename Visit, typename Done>
void PointGrid::scan(LatLon q, Visit&& visit, Done&& done) const {
  if (points_.empty()) return;
  const auto qi = static_cast<long long>(std::floor((q.lat - lat0_) / dlat_));
  const auto qj = static_cast<long long>(std::floor((q.lon - lon0_) / dlon_));
  auto outside = [](long long v, long long lo, long long hi) {
    return v < lo ? lo - v : (v > hi ? v - hi : 0LL);
  };
  long long r = std::max(outside(qi, imin_, imax_), outside(qj, jmin_, jmax_));
  auto visit_cell = [&](long long i, long long j) {
    auto it = cells_.find(cell_key(i, j));
    if (it == cells_.end()) return;
    for (std::size_t k = it->second.begin; k < it->second.end; ++k) {
      const std::size_t idx = order_[k];
      visit(Neighbor{haversine_m(q, points_[idx]), idx});
    }
  };
  for (;; ++r) {
    const long long ilo = std::max(qi - r, imin_), ihi = std::min(qi + r, imax_);
    const long long jlo = std::max(qj - r, jmin_), jhi = std::min(qj + r, jmax_);
    for (long long i = ilo; i <= ihi; ++i) {
      if (i == qi - r || i == qi + r) {
        for (long long j = jlo; j <= jhi; ++j) visit_cell(i, j);
      } else {
        if (qj - r >= jmin_ && qj - r <= jmax_) visit_cell(i, qj - r);
        if (r > 0 && qj + r >= jmin_ && qj + r <= jmax_) visit_cell(i, qj + r);
      }
    }
    const bool covered = qi - r <= imin_ && qi + r >= imax_ && qj - r <= jmin_ && qj + r >= jmax_;
    if (covered || done(ring_lower_bound(q, qi, qj, r))) return;
  }
}

std::vector<Neighbor> PointGrid::nearest(LatLon query, std::size_t k) const {
  std::vector<Neighbor> found;
  if (k == 0) return found;
  auto kth = [&]() {
    std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1), found.end(),
                     neighbor_less);
    return found[k - 1].distance_m;
  };
  scan(
      query, [&](const Neighbor& n) { found.push_back(n); },
      [&](double bound) { return found.size() >= k && kth() <= bound; });
  const std::size_t keep = std::min(k, found.size());
  std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(keep), found.end(),
                    neighbor_less);
  found.resize(keep);
  return found;
}

std::vector<Neighbor> PointGrid::within(LatLon query, double radius_m) const {
  std::vector<Neighbor> found;
  scan(
      query,
      [&](const Neighbor& n) {
        if (n.distance_m <= radius_m) found.push_back(n);
      },
      [&](double bound) { return bound > radius_m; });
  std::sort(found.begin(), found.end(), neighbor_less);
  return found;
}

SpatialIndex::SpatialIndex(std::vector<std::string> types, std::vector<PointGrid> grids)
    : types_(std::move(types)), grids_(std::move(grids)) {
  if (types_.size() != grids_.size()) throw Error(ErrorCode::invalid_input, "type/grid count mismatch");
  for (std::size_t i = 0; i < types_.size(); ++i) lookup_.emplace(types_[i], i);
}

const PointGrid* SpatialIndex::grid(std::string_view type) const {
  auto it = lookup_.find(std::string(type));
  return it == lookup_.end() ? nullptr : &grids_[it->second];
}

namespace {

template <typename Items, typename TypeOf>
SpatialIndex index_by_type(const Items& items, TypeOf type_of) {
  std::map<std::string, std::vector<LatLon>> grouped;
  for (const auto& item : items) grouped[type_of(item)].push_back({item.lat, item.lon});
  std::vector<std::string> types;
  std::vector<PointGrid> grids;
  for (auto& [type, pts] : grouped) {
    types.push_back(type);
    grids.emplace_back(std::move(pts));
  }
  return SpatialIndex(std::move(types), std::move(grids));
}

void fill_row(const SpatialIndex& index, LatLon p, std::span<double> row) {
  for (std::size_t t = 0; t < index.types().size(); ++t) {
    const auto& grid = index.grid_at(t);
    const auto near = grid.nearest(p, 100);
    double* out = row.data() + 8 * t;
    double sum = 0.0;
    const double means[] = {1, 5, 10, 100};
    std::size_t slot = 0;
    for (std::size_t k = 0; k < near.size(); ++k) {
      sum += near[k].distance_m;
      while (slot < 4 && static_cast<double>(k + 1) == means[slot]) {
        out[slot] = sum / static_cast<double>(k + 1);
        ++slot;
      }
    }
    for (; slot < 4; ++slot) {
      out[slot] = near.empty() ? kAbsentTypeDistanceM : sum / static_cast<double>(near.size());
    }
    const auto close = grid.within(p, kRadii[3]);
    for (std::size_t c = 0; c < 4; ++c) {
      out[4 + c] = static_cast<double>(std::count_if(close.begin(), close.end(), [&](const Neighbor& n) {
        return n.distance_m <= kRadii[c];
      }));
    }
  }
}

FeatureBlock spatial_block(const Dataset& dataset, const SpatialIndex& index, std::string name) {
  Matrix m(dataset.size(), 8 * index.types().size());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    fill_row(index, {dataset.reports[r].lat, dataset.reports[r].lon}, m.row(r));
  }
  return FeatureBlock(std::move(name), BlockKind::raw, report_ids(dataset), std::move(m),
                      geo_feature_schema(index.types()));
}

}  // namespace

SpatialIndex build_spatial_index(const std::vector<GeoObject>& objects) {
  return index_by_type(objects, [](const GeoObject& o) { return o.object_type; });
}

SpatialIndex build_history_index(const std::vector<HistoricalEvent>& events) {
  return index_by_type(events, [](const HistoricalEvent& e) { return e.issue_type; });
}

Proximity proximity_features(const SpatialIndex& index, LatLon point, std::string_view object_type) {
  const PointGrid* grid = index.grid(object_type);
  if (!grid || grid->size() == 0) return {};
  const auto near = grid->nearest(point, 100);
  auto mean_of = [&](std::size_t k) {
    const std::size_t n = std::min(k, near.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += near[i].distance_m;
    return sum / static_cast<double>(n);
  };
  return {near[0].distance_m, mean_of(5), mean_of(10), mean_of(100)};
}

Density density_features(const SpatialIndex& index, LatLon point, std::string_view object_type) {
  const PointGrid* grid = index.grid(object_type);
  if (!grid) return {};
  Density d;
  for (const auto& n : grid->within(point, kRadii[3])) {
    d.count_25 += n.distance_m <= kRadii[0];
    d.count_50 += n.distance_m <= kRadii[1];
    d.count_100 += n.distance_m <= kRadii[2];
    ++d.count_200;
  }
  return d;
}

std::vector<std::string> geo_feature_schema(const std::vector<std::string>& types) {
  static constexpr const char* kStats[] = {"nearest_1",  "mean_5",    "mean_10",    "mean_100",
                                           "count_25m", "count_50m", "count_100m", "count_200m"};
  std::vector<std::string> names;
  names.reserve(types.size() * 8);
  for (const auto& t : types) {
    for (const char* s : kStats) names.push_back(t + "_" + s);
  }
  return names;
}

void save_geo_schema(const std::vector<std::string>& types, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  out << "index,feature,object_type,statistic\n";
  const auto names = geo_feature_schema(types);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& type = types[i / 8];
    out << i << ',' << csv_escape(names[i]) << ',' << csv_escape(type) << ','
        << names[i].substr(type.size() + 1) << '\n';
  }
}

FeatureBlock geo_block(const Dataset& dataset, const SpatialIndex& index, std::string name) {
  return spatial_block(dataset, index, std::move(name));
}

FeatureBlock historical_block(const Dataset& dataset, const std::vector<HistoricalEvent>& events,
                              std::string name) {
  return spatial_block(dataset, build_history_index(events), std::move(name));
}

}  // namespace urbanfuse
