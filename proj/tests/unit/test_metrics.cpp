#include <doctest.h>

#include <cmath>
#include <random>

#include "labelforge/error.hpp"
#include "labelforge/metrics.hpp"
#include "test_support.hpp"

using namespace labelforge;
using namespace std::chrono;

namespace {

// Reference MCC straight from the definition, in long double.
double reference_mcc(const std::vector<int>& pred, const std::vector<int>& truth) {
  long double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) tp += 1;
    else if (!pred[i] && !truth[i]) tn += 1;
    else if (pred[i]) fp += 1;
    else fn += 1;
  }
  const long double d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (d == 0) return 0.0;
  return static_cast<double>((tp * tn - fp * fn) / std::sqrt(d));
}

ConfusionMatrix cm_of(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  ConfusionMatrix cm;
  cm.tp = tp;
  cm.fp = fp;
  cm.tn = tn;
  cm.fn = fn;
  return cm;
}

DatasetManifest manifest_of(const std::vector<std::pair<std::string, Label>>& rows) {
  DatasetManifest m;
  for (const auto& [id, l] : rows) m.entries[id] = ManifestEntry{GroundTruthLabel{l, std::nullopt}, std::nullopt};
  return m;
}

}  // namespace

TEST_CASE("MCC matches a brute-force reference on random pairs") {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 1 + rng() % 200;
    const double bias = static_cast<double>(rng() % 101) / 100.0;
    std::vector<int> pred(n), truth(n);
    std::map<std::string, Label> predicted;
    DatasetManifest m;
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<double>(rng() % 1000) / 1000.0 < bias;
      pred[i] = (rng() % 4 == 0) ? !truth[i] : truth[i];
      if (rng() % 7 == 0) pred[i] = static_cast<int>(rng() % 2);
      const auto id = "app" + std::to_string(i);
      predicted[id] = pred[i] ? Label::Malicious : Label::Benign;
      m.entries[id] = {GroundTruthLabel{truth[i] ? Label::Malicious : Label::Benign, std::nullopt}, std::nullopt};
    }
    cm = confusion(predicted, m);
    CHECK(cm.total() == n);
    CHECK(std::abs(mcc(cm) - reference_mcc(pred, truth)) <= 1e-12);
  }
}

TEST_CASE("MCC boundary cases") {
  CHECK(mcc(cm_of(10, 0, 90, 0)) == 1.0);
  CHECK(mcc(cm_of(0, 90, 0, 10)) == -1.0);
  CHECK(mcc(cm_of(0, 0, 100, 0)) == 0.0);
  CHECK(mcc(cm_of(100, 0, 0, 0)) == 0.0);
  CHECK(mcc(cm_of(0, 0, 0, 0)) == 0.0);
  CHECK(mcc(cm_of(5, 5, 0, 0)) == 0.0);
}

TEST_CASE("rates on the November threshold table") {
  const auto vt3 = cm_of(7, 0, 90, 3);
  CHECK(mcc(vt3) == doctest::Approx(0.8231).epsilon(1e-4));
  CHECK(recall(vt3) == doctest::Approx(0.7));
  CHECK(specificity(vt3) == 1.0);
  CHECK(precision(vt3) == 1.0);
  CHECK(accuracy(vt3) == doctest::Approx(0.97));
  CHECK(mcc(cm_of(6, 0, 90, 4)) == doctest::Approx(0.7579).epsilon(1e-4));
  CHECK(recall(cm_of(0, 0, 5, 0)) == 0.0);
  CHECK(precision(cm_of(0, 0, 5, 3)) == 0.0);
}

TEST_CASE("confusion requires a prediction for every manifest app") {
  const auto m = manifest_of({{"aa", Label::Malicious}, {"bb", Label::Benign}});
  CHECK_THROWS_WITH_AS(confusion({{"aa", Label::Malicious}}, m), doctest::Contains("MissingPrediction"), Error);
  const auto cm = confusion({{"aa", Label::Malicious}, {"bb", Label::Malicious}, {"zz", Label::Benign}}, m);
  CHECK(cm == cm_of(1, 1, 0, 0));
}

TEST_CASE("scanner correctness treats Unknown as not detected") {
  SnapshotMap snaps;
  snaps["m1"] = testing::with_verdicts(testing::make_snapshot("m1", "2019-09-27", 0), {{"A", true}, {"B", false}});
  snaps["m2"] = testing::with_verdicts(testing::make_snapshot("m2", "2019-09-27", 0), {{"A", true}});
  snaps["b1"] = testing::with_verdicts(testing::make_snapshot("b1", "2019-09-27", 0), {{"A", false}, {"B", false}});
  snaps["b2"] = testing::with_verdicts(testing::make_snapshot("b2", "2019-09-27", 0), {{"A", true}});
  auto m = manifest_of({{"m1", Label::Malicious}, {"m2", Label::Malicious}, {"b1", Label::Benign}, {"b2", Label::Benign}});
  m.entries["m1"].truth.malware_type = "Ransom";
  m.entries["m2"].truth.malware_type = "Trojan";

  CHECK(scanner_correctness(snaps, m, "A") == doctest::Approx(0.75));
  CHECK(scanner_correctness(snaps, m, "B") == doctest::Approx(0.5));
  CHECK(scanner_correctness(snaps, m, "Z") == doctest::Approx(0.5));
  CHECK(scanner_correctness(snaps, m, "A", "Ransom") == 1.0);
  CHECK(scanner_correctness(snaps, m, "B", "Ransom") == 0.0);
  CHECK_THROWS_WITH_AS(scanner_correctness(snaps, m, "A", "Worm"), doctest::Contains("EmptyDatasetAfterFilter"), Error);

  std::map<Date, SnapshotMap> dated{{parse_date("2019-09-27"), snaps}};
  CHECK(correct_scanner_set(dated, m, 0.7) == std::set<std::string>{"A"});
  CHECK(correct_scanner_set(dated, m, 0.5) == std::set<std::string>{"A", "B"});
}

TEST_CASE("certainty of the {M, B, M, M} sequence is 0.75") {
  AppHistory h{"aa", {}};
  const char* dates[] = {"2019-01-01", "2019-02-01", "2019-03-01", "2019-04-01"};
  const bool detected[] = {true, false, true, true};
  for (int i = 0; i < 4; ++i) {
    h.snapshots.push_back(testing::with_verdicts(testing::make_snapshot("aa", dates[i], 0), {{"X", detected[i]}}));
  }
  CHECK(app_certainty(h, "X") == 0.75);
  CHECK(app_certainty(h, "Absent") == 1.0);
}

TEST_CASE("scanner certainty aggregates qualifying apps") {
  auto history = [](const std::string& id, const std::string& first_seen, std::vector<bool> verdicts) {
    AppHistory h{id, {}};
    auto day = parse_timestamp("2019-06-01");
    for (bool v : verdicts) {
      auto s = testing::with_verdicts(testing::make_snapshot(id, format_timestamp(day), 0), {{"X", v}});
      s.first_seen = parse_timestamp(first_seen);
      h.snapshots.push_back(s);
      day += days{14};
    }
    return h;
  };
  const std::vector<AppHistory> hs{
      history("a1", "2019-05-29", {true, true, true, true}),   // certainty 1.0, gap 3 days
      history("a2", "2019-05-01", {true, false, false, false}),  // 0.25, gap 31 days
      history("a3", "2017-01-01", {false, true}),                // 0.5, gap > 2 years
  };
  const auto week = scanner_certainty(hs, "X", CertaintyAnchor::FirstSeen, parse_window("1w"));
  CHECK(week.n_apps == 1);
  CHECK(week.mean == 1.0);
  CHECK(week.std == 0.0);
  const auto year = scanner_certainty(hs, "X", CertaintyAnchor::FirstSeen, parse_window("1y"));
  CHECK(year.n_apps == 2);
  CHECK(year.mean == doctest::Approx(0.625));
  CHECK(year.std == doctest::Approx(0.375));
  const auto all = scanner_certainty(hs, "X", CertaintyAnchor::FirstSeen, days{10000});
  CHECK(all.n_apps == 3);

  CHECK_THROWS_WITH_AS(scanner_certainty(hs, "X", CertaintyAnchor::DexDate, days{365}),
                       doctest::Contains("NoQualifyingApps"), Error);
  const auto dex = scanner_certainty(hs, "X", CertaintyAnchor::DexDate, days{365},
                                     {{"a2", parse_timestamp("2019-05-30")}});
  CHECK(dex.n_apps == 1);
  CHECK(dex.mean == 0.25);
}

TEST_CASE("property: certainty lies in (0, 1] and is 1 for constant verdicts") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    AppHistory h{"aa", {}};
    const int n = 1 + static_cast<int>(rng() % 20);
    bool constant = true;
    bool first = false;
    auto t = parse_timestamp("2019-01-01");
    for (int i = 0; i < n; ++i) {
      const bool v = rng() % 2;
      if (i == 0) first = v;
      constant = constant && v == first;
      h.snapshots.push_back(testing::with_verdicts(testing::make_snapshot("aa", format_timestamp(t), 0), {{"X", v}}));
      t += days{1};
    }
    const double c = app_certainty(h, "X");
    CHECK(c > 0.0);
    CHECK(c <= 1.0);
    if (constant) CHECK(c == 1.0);
  }
}

TEST_CASE("stability date of the hesitant app") {
  const auto store = testing::load_store({"table_history.jsonl"});
  const auto r = stability_date(store.history("5cfda85debe5e9a7341b4eeed01d92807ed29552"));
  REQUIRE(r.date.has_value());
  CHECK(format_date(day_of(*r.date)) == "2019-01-08");
  CHECK_FALSE(r.stable_thereafter);

  AppHistory flat{"bb", {testing::make_snapshot("bb", "2019-01-01", 3), testing::make_snapshot("bb", "2019-02-01", 3),
                         testing::make_snapshot("bb", "2019-03-01", 3)}};
  const auto f = stability_date(flat);
  CHECK(format_date(day_of(*f.date)) == "2019-02-01");
  CHECK(f.stable_thereafter);

  AppHistory moving{"cc", {testing::make_snapshot("cc", "2019-01-01", 3), testing::make_snapshot("cc", "2019-02-01", 4)}};
  CHECK_FALSE(stability_date(moving).date.has_value());
}
