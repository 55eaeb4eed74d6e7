#include "urbanfuse/datetime.hpp"

#include <charconv>
#include <cstdio>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

namespace {

int parse_fixed(std::string_view text, std::size_t pos, std::size_t width, std::string_view whole) {
  int value = 0;
  if (pos + width > text.size()) {
    throw Error(ErrorCode::parse, "truncated timestamp '" + std::string(whole) + "'");
  }
  for (std::size_t i = pos; i < pos + width; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::parse, "bad digit in timestamp '" + std::string(whole) + "'");
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c) {
    throw Error(ErrorCode::parse, "malformed timestamp '" + std::string(whole) + "'");
  }
}

}  // namespace

// Hinnant's days_from_civil.
std::int64_t days_from_civil(int year, int month, int day) {
  const std::int64_t y = static_cast<std::int64_t>(year) - (month <= 2 ? 1 : 0);
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const std::int64_t yoe = y - era * 400;
  const std::int64_t mp = (month + 9) % 12;
  const std::int64_t doy = (153 * mp + 2) / 5 + day - 1;
  const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

bool is_valid_date(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  const int limit = (month == 2 && leap) ? 29 : kDays[month - 1];
  return day <= limit;
}

int LocalDateTime::weekday() const {
  const std::int64_t days = days_from_civil(year, month, day);
  // 1970-01-01 was a Thursday (3 with Monday = 0).
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

std::int64_t LocalDateTime::hour_key() const {
  return days_from_civil(year, month, day) * 24 + hour;
}

LocalDateTime LocalDateTime::from_hour_key(std::int64_t key) {
  std::int64_t days = key >= 0 ? key / 24 : (key - 23) / 24;
  const int hour = static_cast<int>(key - days * 24);
  // Hinnant's civil_from_days.
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const std::int64_t doe = days - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const int d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  const int m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  const int y = static_cast<int>(yoe + era * 400 + (m <= 2 ? 1 : 0));
  return {y, m, d, hour, 0, 0};
}

std::string LocalDateTime::to_iso() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", year, month, day, hour, minute,
                second);
  return buf;
}

LocalDateTime LocalDateTime::parse(std::string_view text) {
  LocalDateTime t;
  t.year = parse_fixed(text, 0, 4, text);
  expect(text, 4, '-', text);
  t.month = parse_fixed(text, 5, 2, text);
  expect(text, 7, '-', text);
  t.day = parse_fixed(text, 8, 2, text);
  std::size_t pos = 10;
  if (pos < text.size()) {
    if (text[pos] != 'T' && text[pos] != ' ') {
      throw Error(ErrorCode::parse, "malformed timestamp '" + std::string(text) + "'");
    }
    t.hour = parse_fixed(text, 11, 2, text);
    expect(text, 13, ':', text);
    t.minute = parse_fixed(text, 14, 2, text);
    pos = 16;
    if (pos < text.size() && text[pos] == ':') {
      t.second = parse_fixed(text, 17, 2, text);
      pos = 19;
      if (pos < text.size() && text[pos] == '.') {
        ++pos;
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        if (pos == start) throw Error(ErrorCode::parse, "empty fraction in '" + std::string(text) + "'");
      }
    }
    if (pos != text.size()) {
      throw Error(ErrorCode::parse, "unsupported timestamp suffix in '" + std::string(text) +
                                        "' (timestamps are timezone-naive)");
    }
  }
  if (!is_valid_date(t.year, t.month, t.day) || t.hour > 23 || t.minute > 59 || t.second > 60) {
    throw Error(ErrorCode::parse, "out-of-range timestamp '" + std::string(text) + "'");
  }
  return t;
}

}  // namespace urbanfuse
