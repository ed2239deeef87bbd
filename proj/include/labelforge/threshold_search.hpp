#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "labelforge/error.hpp"
#include "labelforge/metrics.hpp"
#include "labelforge/store.hpp"

namespace labelforge {

class VtClient;

enum class ScoreMetric { MCC, Accuracy };

ScoreMetric parse_metric(std::string_view text);
std::string_view to_string(ScoreMetric metric) noexcept;
double score(const ConfusionMatrix& cm, ScoreMetric metric) noexcept;

/// Inclusive range of count thresholds.
struct SigmaRange {
  std::int64_t first = 1;
  std::int64_t last = 60;

  /// "A..B" or a single "N".
  static SigmaRange parse(std::string_view text);
};

struct ThresholdSearchResult {
  std::int64_t best_sigma = 0;
  double best_score = 0.0;
  std::map<std::int64_t, double> score_table;
  std::map<std::int64_t, ConfusionMatrix> confusion;
};

/// Scores CountAtLeast(sigma) for every sigma in range and returns the best;
/// ties go to the largest sigma. Apps in `snapshots` but not in `truth` are
/// ignored. Throws EmptyDataset, MissingSnapshot or InvalidArgument.
ThresholdSearchResult find_optimal_threshold(const SnapshotMap& snapshots,
                                             const DatasetManifest& truth,
                                             ScoreMetric metric = ScoreMetric::MCC,
                                             SigmaRange range = {});

struct RefreshFailure {
  std::string app_id;
  ErrorCode code;
  std::string message;
};

struct RefreshReport {
  std::vector<std::string> refreshed;
  std::vector<RefreshFailure> failures;
};

struct RefreshedSearch {
  ThresholdSearchResult result;
  RefreshReport refresh;
  /// The fresh snapshots the search ran on.
  SnapshotMap snapshots;
};

/// Online search: for each manifest app, rescan, wait for a report newer
/// than the stored one, ingest it, then search over the fresh reports of the
/// apps that succeeded. Throws AllRefreshesFailed when none did.
RefreshedSearch refresh_and_find(VtClient& client, Store& store, const DatasetManifest& truth,
                                 ScoreMetric metric = ScoreMetric::MCC, SigmaRange range = {});

}  // namespace labelforge
