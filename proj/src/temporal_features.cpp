#include "urbanfuse/temporal_features.hpp"

#include <set>
#include <unordered_map>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

FeatureBlock time_block(const Dataset& dataset, std::string name) {
  static constexpr const char* kWeekdays[] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};
  Matrix m(dataset.size(), kTimeBlockWidth);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto& t = dataset.reports[r].timestamp;
    m(r, static_cast<std::size_t>(t.month - 1)) = 1.0;
    m(r, 12 + static_cast<std::size_t>(t.weekday())) = 1.0;
    m(r, 19 + static_cast<std::size_t>(t.hour)) = 1.0;
  }
  std::vector<std::string> columns;
  for (int i = 1; i <= 12; ++i) columns.push_back("month_" + std::to_string(i));
  for (const char* d : kWeekdays) columns.push_back(std::string("weekday_") + d);
  for (int h = 0; h < 24; ++h) columns.push_back("hour_" + std::to_string(h));
  return FeatureBlock(std::move(name), BlockKind::raw, report_ids(dataset), std::move(m),
                      std::move(columns));
}

FeatureBlock weather_block(const Dataset& dataset, const WeatherTable& weather, std::string name) {
  std::unordered_map<std::int64_t, std::size_t> by_hour;
  for (std::size_t i = 0; i < weather.rows.size(); ++i) {
    if (weather.rows[i].values.size() != weather.column_names.size()) {
      throw Error(ErrorCode::format, "weather row width differs from header");
    }
    by_hour.emplace(weather.rows[i].timestamp.hour_key(), i);
  }
  const std::size_t width = weather.column_names.size();
  Matrix m(dataset.size(), width);
  std::set<std::int64_t> missing;
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto key = dataset.reports[r].timestamp.hour_key();
    auto it = by_hour.find(key);
    if (it == by_hour.end()) {
      missing.insert(key);
      continue;
    }
    const auto& values = weather.rows[it->second].values;
    std::copy(values.begin(), values.end(), m.row(r).begin());
  }
  if (!missing.empty()) {
    std::string list;
    for (auto key : missing) {
      if (!list.empty()) list += ", ";
      const auto t = LocalDateTime::from_hour_key(key).to_iso();
      list += t.substr(0, 10) + " " + t.substr(11, 5);
    }
    throw Error(ErrorCode::join, "no weather row for hour(s): " + list);
  }
  return FeatureBlock(std::move(name), BlockKind::raw, report_ids(dataset), std::move(m),
                      weather.column_names);
}

}  // namespace urbanfuse
