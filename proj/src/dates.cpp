#include "bustt/dates.hpp"

#include <cstdio>

namespace bustt {

Date parse_date(const std::string& iso) {
  int y = 0, m = 0, d = 0;
  if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
    throw_error(ErrorKind::invalid_argument, "bad date: '" + iso + "'");
  const Date date(std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
                  std::chrono::day(static_cast<unsigned>(d)));
  if (!date.ok()) throw_error(ErrorKind::invalid_argument, "invalid calendar date: '" + iso + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

}  // namespace bustt
