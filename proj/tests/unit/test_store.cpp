#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "labelforge/error.hpp"
#include "labelforge/store.hpp"
#include "test_support.hpp"

using namespace labelforge;
using testing::fixture;

namespace {

std::vector<std::string> fixture_lines(const std::string& name) {
  std::istringstream in(testing::read_file(fixture(name)));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string dump_all(const Store& store) {
  std::string out;
  for (const auto& id : store.app_ids()) {
    for (const auto& s : store.history(id).snapshots) out += serialize_snapshot(s) + "\n";
  }
  return out;
}

ErrorCode manifest_error(const std::string& csv) {
  std::istringstream in(csv);
  try {
    load_manifest(in);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

const char* const kTableApp = "5cfda85debe5e9a7341b4eeed01d92807ed29552";

}  // namespace

TEST_CASE("the hesitant-app history keeps its recorded positives_delta row") {
  const auto store = testing::load_store({"table_history.jsonl"});
  const auto h = store.history(kTableApp);
  REQUIRE(h.snapshots.size() == 15);
  const std::vector<std::int64_t> recorded{2, 0, -8, 2, 1, -3, 2, 0, -1, 1, 1, -7, 5, -1, 0};
  for (std::size_t i = 0; i < h.snapshots.size(); ++i) CHECK(h.snapshots[i].positives_delta == recorded[i]);

  // Direct subtraction of the stored positives.
  std::vector<std::int64_t> derived;
  for (std::size_t i = 1; i < h.snapshots.size(); ++i) {
    derived.push_back(h.snapshots[i].positives - h.snapshots[i - 1].positives);
  }
  CHECK(derived_positives_delta(h) == derived);
  // The recorded row disagrees with the positives at two scans.
  CHECK(positives_delta_mismatches(h) == std::vector<std::size_t>{5, 11});
}

TEST_CASE("snapshot_at picks the latest report on or before the day") {
  const auto store = testing::load_store({"table_history.jsonl"});
  CHECK(store.snapshot_at(kTableApp, parse_date("2019-01-08")).positives == 39);
  CHECK(format_date(day_of(store.snapshot_at(kTableApp, parse_date("2019-04-11")).scan_date)) == "2019-01-08");
  CHECK(store.snapshot_at(kTableApp, parse_date("2019-04-12")).positives == 31);
  CHECK(store.snapshot_at(kTableApp, parse_date("2030-01-01")).positives == 29);
  CHECK(store.latest(kTableApp)->positives == 29);
  CHECK_FALSE(store.latest("unknown00").has_value());
  CHECK_THROWS_WITH_AS(store.snapshot_at(kTableApp, parse_date("2018-12-02")), doctest::Contains("NoSnapshotBefore"),
                       Error);
  CHECK_THROWS_WITH_AS(store.history("missing00"), doctest::Contains("UnknownApp"), Error);
}

TEST_CASE("duplicates and malformed lines are reported, not fatal") {
  auto store = Store::in_memory();
  std::istringstream in(
      R"({"app_id":"aa11","scan_date":"2019-01-01","positives":0,"total":0})"
      "\n\n{broken\n"
      R"({"app_id":"aa11","scan_date":"2019-01-01","positives":5,"total":9})"
      "\n"
      R"({"app_id":"aa11","scan_date":"2019-01-02","positives":1,"total":0})"
      "\n");
  const auto r = store.ingest(in);
  CHECK(r.accepted == 2);
  CHECK(r.duplicates == 1);
  REQUIRE(r.warnings.size() >= 2);
  CHECK(r.warnings[0].rfind("line 3:", 0) == 0);
  CHECK(store.history("aa11").snapshots.front().positives == 0);
  CHECK_FALSE(store.add(testing::make_snapshot("aa11", "2019-01-02", 0, 0)));
}

TEST_CASE("app ids must be plain identifiers") {
  auto store = Store::in_memory();
  CHECK_THROWS_AS(store.add(testing::make_snapshot("../etc", "2019-01-01", 0)), Error);
  CHECK_THROWS_AS(store.add(testing::make_snapshot("a", "2019-01-01", 0)), Error);
}

TEST_CASE("property: ingest order does not change the histories") {
  auto lines = fixture_lines("table_history.jsonl");
  const auto extra = fixture_lines("hand_labeled_2019_sept.jsonl");
  lines.insert(lines.end(), extra.begin(), extra.begin() + 20);
  std::string reference;
  std::mt19937_64 rng(7);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(lines.begin(), lines.end(), rng);
    std::string joined;
    for (const auto& l : lines) joined += l + "\n";
    std::istringstream in(joined);
    auto store = Store::in_memory();
    store.ingest(in);
    const auto dump = dump_all(store);
    if (round == 0) reference = dump;
    CHECK(dump == reference);
    for (const auto& id : store.app_ids()) {
      const auto h = store.history(id);
      CHECK(std::is_sorted(h.snapshots.begin(), h.snapshots.end(),
                           [](const auto& a, const auto& b) { return a.scan_date < b.scan_date; }));
    }
  }
}

TEST_CASE("a reopened store serves byte-identical histories") {
  testing::TempDir dir;
  std::string before;
  {
    auto store = Store::open(dir / "store");
    std::ifstream a(fixture("table_history.jsonl")), b(fixture("hand_labeled_2019_sept.jsonl"));
    store.ingest(a);
    store.ingest(b);
    before = dump_all(store);
    CHECK(store.snapshot_count() == 115);
  }
  CHECK(std::filesystem::exists(dir / "store" / "index.json"));
  CHECK(std::filesystem::exists(dir / "store" / "apps" / "5c" / (std::string(kTableApp) + ".jsonl")));
  const auto reopened = Store::open(dir / "store");
  CHECK(dump_all(reopened) == before);
  CHECK(reopened.snapshot_count() == 115);

  {
    auto store = Store::open(dir / "store");
    std::ifstream again(fixture("table_history.jsonl"));
    const auto r = store.ingest(again);
    CHECK(r.accepted == 0);
    CHECK(r.duplicates == 15);
  }
  CHECK(dump_all(Store::open(dir / "store")) == before);
}

TEST_CASE("manifest loading") {
  const auto m = testing::hand_labeled_manifest();
  CHECK(m.name == "hand_labeled_2019");
  CHECK(m.size() == 100);
  CHECK(m.count(Label::Malicious) == 10);
  CHECK(m.count(Label::Benign) == 90);
  const auto& e = m.entries.at("bd97c85d38bd5bfc5e29b05b1a3a81b12949065a");
  CHECK(e.truth.malware_type == "Adware");
  CHECK(e.dex_date.has_value());

  std::istringstream mixed("app_id,label\nAA11,Malicious\nbb22,BENIGN\n");
  const auto m2 = load_manifest(mixed);
  CHECK(m2.entries.at("aa11").truth.value == Label::Malicious);
  CHECK(m2.entries.at("bb22").truth.value == Label::Benign);

  CHECK(manifest_error("app_id,label\n") == ErrorCode::EmptyManifest);
  CHECK(manifest_error("app_id,label\naa11,evil\n") == ErrorCode::UnknownLabelString);
  CHECK(manifest_error("app_id,label\naa11,benign\nAA11,malicious\n") == ErrorCode::DuplicateAppId);
  CHECK(manifest_error("id,truth\naa11,benign\n") == ErrorCode::InvalidManifest);
  CHECK(manifest_error("app_id,label,malware_type\naa11,benign,Trojan\n") == ErrorCode::InvalidManifest);
}

TEST_CASE("snapshots_at names the first app without a usable report") {
  const auto store = testing::load_store({"hand_labeled_2019_sept.jsonl"});
  const auto m = testing::hand_labeled_manifest();
  CHECK(store.snapshots_at(m, parse_date("2019-09-27")).size() == 100);
  CHECK_THROWS_WITH_AS(store.snapshots_at(m, parse_date("2019-09-26")), doctest::Contains("MissingSnapshot"), Error);
  CHECK(store.scan_days(m) == std::vector<Date>{parse_date("2019-09-27")});
}
