#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "labelforge/report.hpp"
#include "labelforge/store.hpp"

namespace labelforge {

/// Malicious is the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  void add(Label predicted, Label truth) noexcept;

  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws MissingPrediction when a manifest app has no prediction. Extra
/// predictions are ignored.
ConfusionMatrix confusion(const std::map<std::string, Label>& predicted,
                          const DatasetManifest& truth);

// All ratios return 0 when their denominator is 0.
double mcc(const ConfusionMatrix& cm) noexcept;
double recall(const ConfusionMatrix& cm) noexcept;
double specificity(const ConfusionMatrix& cm) noexcept;
double precision(const ConfusionMatrix& cm) noexcept;
double accuracy(const ConfusionMatrix& cm) noexcept;

using SnapshotMap = std::map<std::string, ScanSnapshot>;

/// Fraction of the (optionally type-filtered) manifest a scanner labels in
/// agreement with ground truth. Unknown verdicts count as "not detected".
/// Throws EmptyDatasetAfterFilter or MissingSnapshot.
double scanner_correctness(const SnapshotMap& snapshots, const DatasetManifest& truth,
                           const std::string& scanner,
                           const std::optional<std::string>& type_filter = std::nullopt);

/// Scanners whose mean correctness over all dates is at least `min_avg`.
/// Candidates are every scanner appearing in any snapshot.
std::set<std::string> correct_scanner_set(const std::map<Date, SnapshotMap>& dated_snapshots,
                                          const DatasetManifest& truth, double min_avg = 0.90);

enum class CertaintyAnchor { FirstSeen, DexDate };

struct CertaintySummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t n_apps = 0;
};

/// Share of an app's snapshots in which `scanner` repeats the verdict from the
/// app's earliest snapshot.
double app_certainty(const AppHistory& history, const std::string& scanner);

/// Aggregates app_certainty over apps whose earliest scan lies within
/// `max_gap` of the anchor date. Apps without an anchor value are skipped;
/// `dex_dates` supplies dex_date anchors for apps whose reports lack one.
/// Throws NoQualifyingApps.
CertaintySummary scanner_certainty(const std::vector<AppHistory>& histories,
                                   const std::string& scanner, CertaintyAnchor anchor,
                                   std::chrono::seconds max_gap,
                                   const std::map<std::string, Timestamp>& dex_dates = {});

struct StabilityResult {
  std::optional<Timestamp> date;
  bool stable_thereafter = false;
};

/// First scan date whose derived positives delta is zero, and whether every
/// later delta is zero too.
StabilityResult stability_date(const AppHistory& history);

}  // namespace labelforge
