#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace casegraph {

// Seconds since the Unix epoch, UTC.
using EpochSeconds = std::int64_t;

std::string format_rfc3339(EpochSeconds t);
// Accepts "YYYY-MM-DDTHH:MM:SSZ" and "YYYY-MM-DD" (midnight UTC).
EpochSeconds parse_rfc3339(std::string_view text);

// Source of entry timestamps. In fixed mode every call returns the same
// instant, which makes logs from repeated runs byte-identical.
class Clock {
 public:
  Clock() = default;
  static Clock fixed(EpochSeconds at) {
    Clock c;
    c.fixed_ = true;
    c.at_ = at;
    return c;
  }
  Clock(const Clock& other) : fixed_(other.fixed_), at_(other.at_) {}
  Clock& operator=(const Clock& other) {
    fixed_ = other.fixed_;
    at_ = other.at_;
    return *this;
  }

  EpochSeconds now() const;
  std::string now_rfc3339() const { return format_rfc3339(now()); }
  bool is_fixed() const noexcept { return fixed_; }

 private:
  bool fixed_ = false;
  EpochSeconds at_ = 0;
};

}  // namespace casegraph
