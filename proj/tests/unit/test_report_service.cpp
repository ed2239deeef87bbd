#include <doctest.h>

#include <cstdlib>

#include "labelforge/error.hpp"
#include "labelforge/report_service.hpp"
#include "test_support.hpp"

using namespace labelforge;

namespace {

const std::string kApp = "5cfda85debe5e9a7341b4eeed01d92807ed29552";

std::vector<ScanSnapshot> parse_list(const std::string& body) {
  // The body is a JSON array of snapshot objects; split at top level.
  std::vector<ScanSnapshot> out;
  int depth = 0;
  std::size_t start = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') {
      if (depth++ == 0) start = i;
    } else if (c == '}') {
      if (--depth == 0) out.push_back(parse_snapshot(body.substr(start, i - start + 1)).snapshot);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("the history endpoint returns every report in order") {
  auto store = testing::load_store({"table_history.jsonl"});
  ReportService service(store);
  const auto r = service.handle("GET", "/apps/" + kApp + "/reports");
  REQUIRE(r.status == 200);
  const auto list = parse_list(r.body);
  REQUIRE(list.size() == 15);
  for (std::size_t i = 1; i < list.size(); ++i) CHECK(list[i - 1].scan_date < list[i].scan_date);
  CHECK(list == store.history(kApp).snapshots);

  const auto golden = testing::read_file(std::string(LABELFORGE_GOLDEN) + "/table_history_reports.json");
  if (std::getenv("LABELFORGE_UPDATE_GOLDEN")) {
    std::ofstream(std::string(LABELFORGE_GOLDEN) + "/table_history_reports.json", std::ios::binary) << r.body << '\n';
  } else {
    CHECK(r.body + "\n" == golden);
  }

  const auto latest = service.handle("GET", "/apps/" + kApp + "/reports/latest");
  REQUIRE(latest.status == 200);
  CHECK(format_date(day_of(parse_snapshot(latest.body).snapshot.scan_date)) == "2019-09-27");
}

TEST_CASE("routing errors") {
  auto store = testing::load_store({"table_history.jsonl"});
  ReportService service(store);
  CHECK(service.handle("GET", "/apps/ffff0000/reports").status == 404);
  CHECK(service.handle("GET", "/nothing").status == 404);
  CHECK(service.handle("POST", "/apps/" + kApp + "/reports").status == 405);
  CHECK(service.handle("GET", "/apps/" + kApp + "/rescan").status == 405);
  CHECK(service.handle("POST", "/apps/" + kApp + "/rescan").status == 409);
  const auto apps = service.handle("GET", "/apps");
  CHECK(apps.status == 200);
  CHECK(apps.body == "[\"" + kApp + "\"]");
}

TEST_CASE("scripted rescans append in order, then run out") {
  auto store = testing::load_store({"table_history.jsonl"});
  ReportService service(store, ReplayScript::load(testing::fixture("table_replay.json")));
  CHECK(service.handle("POST", "/apps/" + kApp + "/rescan").status == 202);
  CHECK(store.latest(kApp)->positives == 31);
  CHECK(service.handle("POST", "/apps/" + kApp + "/rescan").status == 202);
  CHECK(store.latest(kApp)->positives == 30);
  CHECK(format_date(day_of(store.latest(kApp)->scan_date)) == "2019-10-25");
  CHECK(service.handle("POST", "/apps/" + kApp + "/rescan").status == 409);
  CHECK(store.history(kApp).snapshots.size() == 17);
}

TEST_CASE("replay scripts are validated") {
  auto store = testing::load_store({"table_history.jsonl"});
  CHECK_THROWS_WITH_AS(ReplayScript::parse("[]"), doctest::Contains("InvalidReplayScript"), Error);
  const auto old = serialize_snapshot(testing::make_snapshot(kApp, "2019-01-01", 3));
  CHECK_THROWS_WITH_AS(ReportService(store, ReplayScript::parse(R"({"rescans":{")" + kApp + R"(":[)" + old + "]}}")),
                       doctest::Contains("InvalidReplayScript"), Error);
  const auto other = serialize_snapshot(testing::make_snapshot("abcd", "2020-01-01", 3));
  CHECK_THROWS_WITH_AS(ReportService(store, ReplayScript::parse(R"({"rescans":{"abcd":[)" + other + "]}}")),
                       doctest::Contains("InvalidReplayScript"), Error);
}

TEST_CASE("the HTTP listener serves the same responses") {
  auto store = testing::load_store({"table_history.jsonl"});
  ReportService service(store, ReplayScript::load(testing::fixture("table_replay.json")));
  auto handle = serve(service, "127.0.0.1:0");
  REQUIRE(handle.port() > 0);

  ClientConfig cfg;
  cfg.base_url = handle.base_url();
  cfg.rescan_poll_interval = std::chrono::seconds(1);
  VtClient client(cfg, make_http_transport(cfg.base_url), std::make_shared<VirtualClock>());
  CHECK(client.fetch_report(kApp).positives == 29);
  CHECK(client.rescan(kApp).accepted);
  const auto fresh = client.fetch_report(kApp, true);
  CHECK(format_date(day_of(fresh.scan_date)) == "2019-10-11");
  CHECK(client.rescan(kApp).accepted);
  CHECK_FALSE(client.rescan(kApp).accepted);
  CHECK_THROWS_WITH_AS(client.fetch_report("ffff0000"), doctest::Contains("NotFound"), Error);
  handle.stop();
}
