#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "labelforge/report.hpp"

namespace labelforge {

/// Snapshots of one app, strictly ordered by scan_date.
struct AppHistory {
  std::string app_id;
  std::vector<ScanSnapshot> snapshots;
};

struct ManifestEntry {
  GroundTruthLabel truth;
  std::optional<Timestamp> dex_date;

  bool operator==(const ManifestEntry&) const = default;
};

/// Ground truth for a set of apps. Never empty once loaded.
struct DatasetManifest {
  std::string name;
  std::map<std::string, ManifestEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t count(Label label) const noexcept;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t duplicates = 0;
  /// Line-level parse errors and consistency warnings, prefixed "line N: ".
  std::vector<std::string> warnings;
};

/// Append-only snapshot store keyed by (app_id, scan_date).
///
/// On disk: `<root>/index.json` lists every app with its snapshot count and
/// `<root>/apps/<first two hex chars>/<app_id>.jsonl` holds one canonical
/// snapshot per line in ingest order. Readers may run concurrently; writers
/// are serialized.
class Store {
 public:
  /// Opens (creating if needed) a store rooted at `root`. Throws IoError.
  static Store open(const std::filesystem::path& root);
  /// A store with no backing directory.
  static Store in_memory();

  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  ~Store();

  /// Parses JSONL and adds every new snapshot. Malformed lines are reported,
  /// not fatal. Duplicates of stored (app_id, scan_date) pairs are skipped.
  IngestReport ingest(std::istream& jsonl);
  /// Returns false when the (app_id, scan_date) pair is already stored.
  bool add(const ScanSnapshot& snapshot);

  bool contains(const std::string& app_id) const;
  std::vector<std::string> app_ids() const;
  std::size_t snapshot_count() const;

  /// Throws UnknownApp.
  AppHistory history(const std::string& app_id) const;
  /// Latest snapshot whose scan day is on or before `as_of`.
  /// Throws UnknownApp or NoSnapshotBefore.
  ScanSnapshot snapshot_at(const std::string& app_id, Date as_of) const;
  std::optional<ScanSnapshot> latest(const std::string& app_id) const;

  /// snapshot_at for every manifest app. Throws MissingSnapshot naming the
  /// first app with no usable snapshot.
  std::map<std::string, ScanSnapshot> snapshots_at(const DatasetManifest& manifest,
                                                   Date as_of) const;
  /// Distinct scan days across the given apps, ascending.
  std::vector<Date> scan_days(const DatasetManifest& manifest) const;

  const std::optional<std::filesystem::path>& root() const noexcept;

 private:
  struct Impl;
  explicit Store(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Element i is positives[i+1] - positives[i].
std::vector<std::int64_t> derived_positives_delta(const AppHistory& history);

/// Indices i >= 1 whose recorded positives_delta differs from the derived one.
std::vector<std::size_t> positives_delta_mismatches(const AppHistory& history);

/// CSV with header `app_id,label[,malware_type][,dex_date]`; labels are
/// "malicious" or "benign" (case-insensitive).
/// Throws UnknownLabelString, DuplicateAppId, InvalidManifest or EmptyManifest.
DatasetManifest load_manifest(std::istream& csv, std::string name = "manifest");
DatasetManifest load_manifest_file(const std::filesystem::path& path);

}  // namespace labelforge
