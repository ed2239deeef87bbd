#include "labelforge/threshold_search.hpp"

#include <charconv>

#include "labelforge/vt_client.hpp"

namespace labelforge {

ScoreMetric parse_metric(std::string_view text) {
  if (text == "mcc" || text == "MCC") return ScoreMetric::MCC;
  if (text == "accuracy") return ScoreMetric::Accuracy;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(text) + "'");
}

std::string_view to_string(ScoreMetric metric) noexcept {
  return metric == ScoreMetric::MCC ? "mcc" : "accuracy";
}

double score(const ConfusionMatrix& cm, ScoreMetric metric) noexcept {
  return metric == ScoreMetric::MCC ? mcc(cm) : accuracy(cm);
}

SigmaRange SigmaRange::parse(std::string_view text) {
  auto to_int = [&](std::string_view part) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || p != part.data() + part.size()) {
      throw Error(ErrorCode::InvalidArgument, "bad range '" + std::string(text) + "'");
    }
    return v;
  };
  SigmaRange r;
  if (auto pos = text.find(".."); pos != std::string_view::npos) {
    r.first = to_int(text.substr(0, pos));
    r.last = to_int(text.substr(pos + 2));
  } else {
    r.first = r.last = to_int(text);
  }
  if (r.first < 1 || r.last < r.first) {
    throw Error(ErrorCode::InvalidArgument, "range must satisfy 1 <= first <= last");
  }
  return r;
}

ThresholdSearchResult find_optimal_threshold(const SnapshotMap& snapshots,
                                             const DatasetManifest& truth, ScoreMetric metric,
                                             SigmaRange range) {
  if (truth.entries.empty()) throw Error(ErrorCode::EmptyDataset, truth.name);
  if (range.first < 1 || range.last < range.first) {
    throw Error(ErrorCode::InvalidArgument, "empty sigma range");
  }
  struct Row {
    std::int64_t positives;
    Label truth;
  };
  std::vector<Row> rows;
  rows.reserve(truth.entries.size());
  for (const auto& [id, entry] : truth.entries) {
    auto it = snapshots.find(id);
    if (it == snapshots.end()) throw Error(ErrorCode::MissingSnapshot, id);
    rows.push_back({it->second.positives, entry.truth.value});
  }

  ThresholdSearchResult out;
  bool first = true;
  for (auto sigma = range.first; sigma <= range.last; ++sigma) {
    ConfusionMatrix cm;
    for (const auto& r : rows) cm.add(r.positives >= sigma ? Label::Malicious : Label::Benign, r.truth);
    const double s = score(cm, metric);
    out.score_table.emplace(sigma, s);
    out.confusion.emplace(sigma, cm);
    if (first || s >= out.best_score) {
      out.best_score = s;
      out.best_sigma = sigma;
      first = false;
    }
  }
  return out;
}

RefreshedSearch refresh_and_find(VtClient& client, Store& store, const DatasetManifest& truth,
                                 ScoreMetric metric, SigmaRange range) {
  RefreshedSearch out;
  DatasetManifest refreshed{truth.name, {}};
  for (const auto& [id, entry] : truth.entries) {
    try {
      std::optional<Timestamp> baseline;
      if (auto prev = store.latest(id)) baseline = prev->scan_date;
      if (!client.rescan(id).accepted) {
        out.refresh.failures.push_back({id, ErrorCode::NotFound, "rescan not accepted"});
        continue;
      }
      auto snapshot = client.fetch_report(id, true, baseline);
      store.add(snapshot);
      out.snapshots.emplace(id, std::move(snapshot));
      out.refresh.refreshed.push_back(id);
      refreshed.entries.emplace(id, entry);
    } catch (const Error& e) {
      out.refresh.failures.push_back({id, e.code(), e.what()});
    }
  }
  if (refreshed.entries.empty()) {
    std::string why = "no app could be refreshed";
    if (!out.refresh.failures.empty()) why += " (first failure: " + out.refresh.failures.front().message + ")";
    throw Error(ErrorCode::AllRefreshesFailed, why);
  }
  out.result = find_optimal_threshold(out.snapshots, refreshed, metric, range);
  return out;
}

}  // namespace labelforge
