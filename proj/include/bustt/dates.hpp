#pragma once

#include <chrono>
#include <string>

#include "bustt/error.hpp"

namespace bustt {

using Date = std::chrono::year_month_day;

inline std::chrono::sys_days to_days(const Date& d) { return std::chrono::sys_days(d); }

inline bool is_weekend(const Date& d) {
  const std::chrono::weekday wd(to_days(d));
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

/// Monday=0 .. Sunday=6.
inline int weekday_index(const Date& d) {
  return static_cast<int>(std::chrono::weekday(to_days(d)).iso_encoding()) - 1;
}

/// ISO-8601 week number (the week containing the year's first Thursday is week 1).
inline int iso_week(const Date& d) {
  using namespace std::chrono;
  const sys_days day = to_days(d);
  // Thursday of the same ISO week.
  const sys_days thursday = day - days(weekday_index(d)) + days(3);
  const year_month_day t(thursday);
  const sys_days jan1 = sys_days(t.year() / January / 1);
  return static_cast<int>((thursday - jan1).count()) / 7 + 1;
}

Date parse_date(const std::string& iso);       // "2017-08-28"
std::string format_date(const Date& d);

inline Date add_days(const Date& d, int n) {
  return Date(to_days(d) + std::chrono::days(n));
}

inline int days_between(const Date& a, const Date& b) {
  return static_cast<int>((to_days(b) - to_days(a)).count());
}

}  // namespace bustt
