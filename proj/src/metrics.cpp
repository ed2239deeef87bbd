#include "labelforge/metrics.hpp"

#include <cmath>

#include "labelforge/error.hpp"

namespace labelforge {

void ConfusionMatrix::add(Label predicted, Label truth) noexcept {
  if (truth == Label::Malicious) {
    (predicted == Label::Malicious ? tp : fn) += 1;
  } else {
    (predicted == Label::Malicious ? fp : tn) += 1;
  }
}

ConfusionMatrix confusion(const std::map<std::string, Label>& predicted,
                          const DatasetManifest& truth) {
  ConfusionMatrix cm;
  for (const auto& [id, entry] : truth.entries) {
    auto it = predicted.find(id);
    if (it == predicted.end()) throw Error(ErrorCode::MissingPrediction, id);
    cm.add(it->second, entry.truth.value);
  }
  return cm;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) noexcept {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double mcc(const ConfusionMatrix& cm) noexcept {
  const double tp = static_cast<double>(cm.tp);
  const double fp = static_cast<double>(cm.fp);
  const double tn = static_cast<double>(cm.tn);
  const double fn = static_cast<double>(cm.fn);
  const double a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
  if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0;
  // Multiply the square roots pairwise so large counts do not overflow.
  return (tp * tn - fp * fn) / (std::sqrt(a * b) * std::sqrt(c * d));
}

double recall(const ConfusionMatrix& cm) noexcept { return ratio(cm.tp, cm.tp + cm.fn); }
double specificity(const ConfusionMatrix& cm) noexcept { return ratio(cm.tn, cm.tn + cm.fp); }
double precision(const ConfusionMatrix& cm) noexcept { return ratio(cm.tp, cm.tp + cm.fp); }
double accuracy(const ConfusionMatrix& cm) noexcept { return ratio(cm.tp + cm.tn, cm.total()); }

double scanner_correctness(const SnapshotMap& snapshots, const DatasetManifest& truth,
                           const std::string& scanner,
                           const std::optional<std::string>& type_filter) {
  std::size_t considered = 0, correct = 0;
  for (const auto& [id, entry] : truth.entries) {
    if (type_filter && entry.truth.malware_type != type_filter) continue;
    auto it = snapshots.find(id);
    if (it == snapshots.end()) throw Error(ErrorCode::MissingSnapshot, id);
    const bool detected = verdict_of(it->second, scanner) == Verdict::Malicious;
    ++considered;
    if (detected == (entry.truth.value == Label::Malicious)) ++correct;
  }
  if (considered == 0) {
    throw Error(ErrorCode::EmptyDatasetAfterFilter,
                type_filter ? "no apps of type " + *type_filter : std::string("empty manifest"));
  }
  return static_cast<double>(correct) / static_cast<double>(considered);
}

std::set<std::string> correct_scanner_set(const std::map<Date, SnapshotMap>& dated_snapshots,
                                          const DatasetManifest& truth, double min_avg) {
  if (dated_snapshots.empty()) throw Error(ErrorCode::InvalidArgument, "no dates given");
  std::set<std::string> candidates;
  for (const auto& [_, snaps] : dated_snapshots) {
    for (const auto& [id, s] : snaps) {
      for (const auto& r : s.verdicts) candidates.insert(r.name);
    }
  }
  std::set<std::string> out;
  for (const auto& scanner : candidates) {
    double sum = 0.0;
    for (const auto& [_, snaps] : dated_snapshots) sum += scanner_correctness(snaps, truth, scanner);
    if (sum / static_cast<double>(dated_snapshots.size()) >= min_avg) out.insert(scanner);
  }
  return out;
}

double app_certainty(const AppHistory& history, const std::string& scanner) {
  const auto& snaps = history.snapshots;
  if (snaps.empty()) throw Error(ErrorCode::InvalidArgument, history.app_id + " has no snapshots");
  const Verdict initial = verdict_of(snaps.front(), scanner);
  std::size_t same = 0;
  for (const auto& s : snaps) {
    if (verdict_of(s, scanner) == initial) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(snaps.size());
}

CertaintySummary scanner_certainty(const std::vector<AppHistory>& histories,
                                   const std::string& scanner, CertaintyAnchor anchor,
                                   std::chrono::seconds max_gap,
                                   const std::map<std::string, Timestamp>& dex_dates) {
  std::vector<double> values;
  for (const auto& h : histories) {
    if (h.snapshots.empty()) continue;
    const auto& first = h.snapshots.front();
    std::optional<Timestamp> anchor_time;
    if (anchor == CertaintyAnchor::FirstSeen) {
      anchor_time = first.first_seen;
    } else if (first.dex_date) {
      anchor_time = first.dex_date;
    } else if (auto it = dex_dates.find(h.app_id); it != dex_dates.end()) {
      anchor_time = it->second;
    }
    if (!anchor_time || first.scan_date - *anchor_time > max_gap) continue;
    values.push_back(app_certainty(h, scanner));
  }
  if (values.empty()) throw Error(ErrorCode::NoQualifyingApps, scanner);

  CertaintySummary out;
  out.n_apps = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

StabilityResult stability_date(const AppHistory& history) {
  StabilityResult out;
  const auto deltas = derived_positives_delta(history);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i] != 0) continue;
    out.date = history.snapshots[i + 1].scan_date;
    out.stable_thereafter = true;
    for (std::size_t j = i + 1; j < deltas.size(); ++j) {
      if (deltas[j] != 0) {
        out.stable_thereafter = false;
        break;
      }
    }
    break;
  }
  return out;
}

}  // namespace labelforge
