#pragma once

#include <string>

#include "urbanfuse/core.hpp"
#include "urbanfuse/ingest.hpp"

namespace urbanfuse {

inline constexpr std::size_t kTimeBlockWidth = 12 + 7 + 24;

/// One-hot month (12), weekday (7, Monday first) and hour (24).
FeatureBlock time_block(const Dataset& dataset, std::string name = "time");

/// Joins each report to the weather row of its hour. Throws join naming
/// every missing hour; values are copied verbatim.
FeatureBlock weather_block(const Dataset& dataset, const WeatherTable& weather,
                           std::string name = "weather");

}  // namespace urbanfuse
