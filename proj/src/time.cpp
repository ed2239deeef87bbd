#include "labelforge/time.hpp"

#include <charconv>
#include <cstdio>

#include "labelforge/error.hpp"

namespace labelforge {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  auto first = text.data() + pos;
  auto last = first + len;
  for (auto p = first; p != last; ++p) {
    if (*p < '0' || *p > '9') return false;
  }
  return std::from_chars(first, last, out).ec == std::errc{};
}

[[noreturn]] void bad_timestamp(std::string_view text) {
  throw Error(ErrorCode::InvalidTimestamp, "cannot parse '" + std::string(text) + "'");
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0;
  if (text.size() < 10 || text[4] != '-' || text[7] != '-' || !read_int(text, 0, 4, y) ||
      !read_int(text, 5, 2, mo) || !read_int(text, 8, 2, d)) {
    bad_timestamp(text);
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) bad_timestamp(text);

  int hh = 0, mm = 0, ss = 0;
  if (text.size() > 10) {
    if (text[10] != 'T' && text[10] != ' ') bad_timestamp(text);
    if (text.size() < 19 || text[13] != ':' || text[16] != ':' || !read_int(text, 11, 2, hh) ||
        !read_int(text, 14, 2, mm) || !read_int(text, 17, 2, ss)) {
      bad_timestamp(text);
    }
    auto rest = text.substr(19);
    if (!(rest.empty() || rest == "Z" || rest == "+00:00")) bad_timestamp(text);
    if (hh > 23 || mm > 59 || ss > 60) bad_timestamp(text);
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

Date parse_date(std::string_view text) { return day_of(parse_timestamp(text)); }

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string format_date(Date d) {
  using namespace std::chrono;
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::chrono::seconds parse_window(std::string_view text) {
  using namespace std::chrono;
  if (text == "1y") return days{365};
  if (text == "6m") return days{182};
  if (text == "3m") return days{91};
  if (text == "1m") return days{30};
  if (text == "1w") return days{7};
  if (text.size() >= 2 && text.back() == 'd') {
    int n = 0;
    auto digits = text.substr(0, text.size() - 1);
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc{} && p == digits.data() + digits.size() && n >= 0) return days{n};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown window '" + std::string(text) + "'");
}

}  // namespace labelforge
