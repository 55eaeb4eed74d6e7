#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace urbanfuse {

/// Wall-clock timestamp without a timezone. Reports, weather rows and
/// historical events all use local time of the city.
struct LocalDateTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
  int second = 0;

  auto operator<=>(const LocalDateTime&) const = default;

  /// Monday = 0 ... Sunday = 6.
  int weekday() const;
  LocalDateTime truncated_to_hour() const { return {year, month, day, hour, 0, 0}; }
  /// Hours since 1970-01-01T00:00, used as a dense join key.
  std::int64_t hour_key() const;
  static LocalDateTime from_hour_key(std::int64_t key);

  /// "YYYY-MM-DDTHH:MM:SS".
  std::string to_iso() const;
  /// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS[.fff]]" and a space instead of
  /// 'T'. Offsets and 'Z' are rejected: timestamps are wall-clock only.
  static LocalDateTime parse(std::string_view text);
};

/// Days since 1970-01-01 in the proleptic Gregorian calendar.
std::int64_t days_from_civil(int year, int month, int day);
bool is_valid_date(int year, int month, int day);

}  // namespace urbanfuse
