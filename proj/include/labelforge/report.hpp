#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "labelforge/time.hpp"

namespace labelforge {

/// Ternary scanner judgement; the numeric values are used verbatim as
/// feature-vector entries.
enum class Verdict : int { Malicious = 1, Benign = 0, Unknown = -1 };

enum class Label { Benign = 0, Malicious = 1 };

std::string_view to_string(Label label) noexcept;
std::string_view to_string(Verdict verdict) noexcept;

struct ScannerResult {
  std::string name;
  bool detected = false;
  std::optional<std::string> result;
  std::optional<std::string> version;

  bool operator==(const ScannerResult&) const = default;
};

/// One dated scan report of one app. Immutable once parsed.
struct ScanSnapshot {
  std::string app_id;
  Timestamp scan_date{};
  Timestamp first_seen{};
  std::optional<Timestamp> dex_date;
  std::int64_t positives = 0;
  std::int64_t total = 0;
  std::optional<std::int64_t> positives_delta;
  std::int64_t times_submitted = 0;
  /// Report order is kept so downstream layouts are deterministic.
  std::vector<ScannerResult> verdicts;
  std::set<std::string> permissions;
  std::set<std::string> tags;

  const ScannerResult* find_scanner(std::string_view name) const noexcept;

  bool operator==(const ScanSnapshot&) const = default;
};

struct GroundTruthLabel {
  Label value = Label::Benign;
  std::optional<std::string> malware_type;

  bool operator==(const GroundTruthLabel&) const = default;
};

enum class WarningKind {
  PositivesMismatch,    // positives != number of detected verdicts
  TotalMismatch,        // total != number of verdict entries
  PositivesExceedTotal,
  FirstSeenAfterScan,
};

struct IngestWarning {
  WarningKind kind;
  std::string message;
};

struct ParsedSnapshot {
  ScanSnapshot snapshot;
  std::vector<IngestWarning> warnings;
};

/// Parses one VirusTotal-v2-style report object. Consistency problems are
/// returned as warnings; structural problems throw Error with one of
/// MalformedJson, MissingRequiredField, InvalidTimestamp or InvalidField.
ParsedSnapshot parse_snapshot(std::string_view json_text);

/// Compact single-line canonical JSON; parse_snapshot(serialize_snapshot(s)) == s.
std::string serialize_snapshot(const ScanSnapshot& snapshot);

/// Consistency checks applied by parse_snapshot.
std::vector<IngestWarning> check_consistency(const ScanSnapshot& snapshot);

Verdict verdict_of(const ScanSnapshot& snapshot, std::string_view scanner) noexcept;

}  // namespace labelforge
