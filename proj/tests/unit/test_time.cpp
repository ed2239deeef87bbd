#include <doctest.h>

#include "labelforge/error.hpp"
#include "labelforge/time.hpp"

using namespace labelforge;
using namespace std::chrono;

TEST_CASE("timestamps parse in every accepted form") {
  const auto expected = sys_days{2019y / September / 27} + 10h + 5min + 7s;
  CHECK(parse_timestamp("2019-09-27 10:05:07") == expected);
  CHECK(parse_timestamp("2019-09-27T10:05:07") == expected);
  CHECK(parse_timestamp("2019-09-27T10:05:07Z") == expected);
  CHECK(parse_timestamp("2019-09-27T10:05:07+00:00") == expected);
  CHECK(parse_timestamp("2019-09-27") == sys_days{2019y / September / 27});
}

TEST_CASE("malformed timestamps are rejected") {
  for (const char* bad : {"", "2019", "2019-13-01", "2019-02-30", "2019-09-27X", "27/09/2019",
                          "2019-09-27 25:00:00"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_timestamp(bad), Error);
  }
  try {
    parse_timestamp("nope");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidTimestamp);
  }
}

TEST_CASE("formatting round-trips") {
  const auto t = parse_timestamp("2018-12-03 09:30:00");
  CHECK(format_timestamp(t) == "2018-12-03T09:30:00Z");
  CHECK(parse_timestamp(format_timestamp(t)) == t);
  CHECK(format_date(day_of(t)) == "2018-12-03");
  CHECK(parse_date("2018-12-03") == day_of(t));
}

TEST_CASE("window lengths") {
  CHECK(parse_window("1y") == days{365});
  CHECK(parse_window("6m") == days{182});
  CHECK(parse_window("3m") == days{91});
  CHECK(parse_window("1m") == days{30});
  CHECK(parse_window("1w") == days{7});
  CHECK(parse_window("45d") == days{45});
  CHECK_THROWS_AS(parse_window("2x"), Error);
}
