#include <doctest.h>

#include <random>

#include "labelforge/error.hpp"
#include "labelforge/report_service.hpp"
#include "labelforge/strategies.hpp"
#include "labelforge/threshold_search.hpp"
#include "test_support.hpp"

using namespace labelforge;

namespace {

struct Planted {
  SnapshotMap snapshots;
  DatasetManifest manifest;
};

Planted planted(const std::vector<std::int64_t>& malicious, const std::vector<std::int64_t>& benign) {
  Planted p;
  int i = 0;
  auto put = [&](std::int64_t pos, Label l) {
    const auto id = "app" + std::to_string(i++);
    p.snapshots[id] = testing::make_snapshot(id, "2019-09-27", pos);
    p.manifest.entries[id] = {GroundTruthLabel{l, std::nullopt}, std::nullopt};
  };
  for (auto v : malicious) put(v, Label::Malicious);
  for (auto v : benign) put(v, Label::Benign);
  return p;
}

}  // namespace

TEST_CASE("ties go to the largest sigma") {
  const auto p = planted({5, 6, 7, 9}, {0, 1, 2, 0});
  const auto r = find_optimal_threshold(p.snapshots, p.manifest, ScoreMetric::MCC, SigmaRange{1, 20});
  CHECK(r.best_sigma == 5);
  CHECK(r.best_score == 1.0);
  CHECK(r.score_table.at(3) == 1.0);
  CHECK(r.score_table.size() == 20);
  CHECK(r.confusion.at(5).tp == 4);
}

TEST_CASE("accuracy metric and all-equal scores") {
  const auto p = planted({}, {0, 0, 0});
  const auto r = find_optimal_threshold(p.snapshots, p.manifest, ScoreMetric::MCC, SigmaRange{1, 5});
  CHECK(r.best_sigma == 5);
  CHECK(r.best_score == 0.0);
  const auto a = find_optimal_threshold(p.snapshots, p.manifest, ScoreMetric::Accuracy, SigmaRange{1, 5});
  CHECK(a.best_score == 1.0);
}

TEST_CASE("property: a singleton range scores exactly the standalone strategy") {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<std::int64_t> mal, ben;
    for (int k = 0; k < 30; ++k) {
      if (rng() % 3 == 0) mal.push_back(static_cast<std::int64_t>(rng() % 40));
      else ben.push_back(static_cast<std::int64_t>(rng() % 8));
    }
    if (mal.empty()) mal.push_back(10);
    const auto p = planted(mal, ben);
    const auto sigma = static_cast<std::int64_t>(1 + rng() % 30);
    const auto r = find_optimal_threshold(p.snapshots, p.manifest, ScoreMetric::MCC, SigmaRange{sigma, sigma});
    const auto cm = confusion(apply_strategy(ThresholdStrategy::count_at_least(sigma), p.snapshots), p.manifest);
    CHECK(r.best_sigma == sigma);
    CHECK(r.best_score == mcc(cm));
    CHECK(r.confusion.at(sigma) == cm);

    const auto full = find_optimal_threshold(p.snapshots, p.manifest, ScoreMetric::MCC, SigmaRange{1, 30});
    for (const auto& [s, v] : full.score_table) {
      CHECK(v <= full.best_score);
      if (s > full.best_sigma) CHECK(v < full.best_score);
    }
  }
}

TEST_CASE("search input errors") {
  const auto p = planted({5}, {0});
  DatasetManifest empty;
  CHECK_THROWS_WITH_AS(find_optimal_threshold(p.snapshots, empty), doctest::Contains("EmptyDataset"), Error);
  auto missing = p.manifest;
  missing.entries["zz99"] = {GroundTruthLabel{Label::Benign, std::nullopt}, std::nullopt};
  CHECK_THROWS_WITH_AS(find_optimal_threshold(p.snapshots, missing), doctest::Contains("MissingSnapshot"), Error);
  CHECK_THROWS_AS(SigmaRange::parse("5..2"), Error);
  CHECK_THROWS_AS(SigmaRange::parse("0..2"), Error);
  CHECK(SigmaRange::parse("7").first == 7);
  CHECK(SigmaRange::parse("2..9").last == 9);
  CHECK_THROWS_AS(parse_metric("f1"), Error);
}

TEST_CASE("online search refreshes every app before scoring") {
  auto store = testing::load_store({"hand_labeled_2019_sept.jsonl"});
  const auto m = testing::hand_labeled_manifest();
  ReportService service(store, ReplayScript::load(testing::fixture("hand_labeled_2019_replay.json")));
  auto clock = std::make_shared<VirtualClock>();
  ClientConfig cfg;
  cfg.rescan_poll_interval = std::chrono::seconds(60);
  VtClient client(cfg, make_loopback_transport(service), clock);

  const auto r = refresh_and_find(client, store, m, ScoreMetric::MCC, SigmaRange{1, 20});
  CHECK(r.refresh.refreshed.size() == 100);
  CHECK(r.refresh.failures.empty());
  CHECK(store.snapshot_count() == 200);
  for (const auto& [id, s] : r.snapshots) CHECK(format_date(day_of(s.scan_date)) == "2019-11-08");
  const auto offline = find_optimal_threshold(store.snapshots_at(m, parse_date("2019-11-08")), m,
                                              ScoreMetric::MCC, SigmaRange{1, 20});
  CHECK(r.result.best_sigma == offline.best_sigma);
  CHECK(r.result.score_table == offline.score_table);

  // The script is spent: every rescan is refused.
  CHECK_THROWS_WITH_AS(refresh_and_find(client, store, m), doctest::Contains("AllRefreshesFailed"), Error);
}
