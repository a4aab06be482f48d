#include "casegraph/clock.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "casegraph/error.hpp"

namespace casegraph {

std::string format_rfc3339(EpochSeconds t) {
  const auto tt = static_cast<std::time_t>(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

EpochSeconds parse_rfc3339(std::string_view text) {
  std::tm tm{};
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const std::string str(text);
  char tail = 0;
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail) == 7 &&
      tail == 'Z' && str.size() == 20) {
  } else if (std::sscanf(str.c_str(), "%4d-%2d-%2d", &y, &mo, &d) == 3 && str.size() == 10) {
    h = mi = s = 0;
  } else {
    throw Error(ErrorCode::parse_error, "not an RFC 3339 UTC timestamp: '" + str + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) {
    throw Error(ErrorCode::parse_error, "timestamp out of range: '" + str + "'");
  }
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = s;
  return static_cast<EpochSeconds>(timegm(&tm));
}

EpochSeconds Clock::now() const {
  if (fixed_) return at_;
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace casegraph
