#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "flowcast/core/error.hpp"

namespace flowcast {

using Timestamp = std::chrono::sys_seconds;
using std::chrono::hours;

inline Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw Error("invalid calendar date");
  return sys_days{ymd} + std::chrono::hours{hour};
}

/// UTC hour of day in [0, 24).
inline int utc_hour(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  return static_cast<int>(duration_cast<std::chrono::hours>(ts - day).count());
}

/// Fraction of the UTC day elapsed, in [0, 1).
inline double day_fraction(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  return static_cast<double>((ts - day).count()) / 86400.0;
}

/// Fraction of the calendar year elapsed, in [0, 1).
inline double year_fraction(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const sys_days start{ymd.year() / January / 1};
  const sys_days next{(ymd.year() + years{1}) / January / 1};
  const double len = static_cast<double>((next - start).count()) * 86400.0;
  return static_cast<double>((ts - start).count()) / len;
}

/// ISO-8601 UTC, e.g. "2021-07-01T09:00:00Z".
inline std::string format_iso8601(Timestamp ts) {
  using namespace std::chrono;
  const auto day = floor<days>(ts);
  const year_month_day ymd{day};
  const hh_mm_ss hms{ts - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline Timestamp parse_iso8601(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const std::string str{text};
  if (std::sscanf(str.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &s) != 6) {
    throw Error("malformed ISO-8601 timestamp: " + str);
  }
  return make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h) +
         std::chrono::minutes{mi} + std::chrono::seconds{s};
}

}  // namespace flowcast
