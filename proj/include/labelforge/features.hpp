#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labelforge/report.hpp"

namespace labelforge {

enum class FeatureKind { Engineered, Naive };

/// Describes how a scan report becomes a feature vector.
///
/// Engineered layout, in order: verdicts of `scanners`, report age in years,
/// times_submitted, positives, total, permission indicators, tag indicators.
/// Naive layout: verdicts of `scanners`. Verdicts encode +1/0/-1.
///
/// `selected`, when present, restricts the layout to those indices of the
/// full layout (ascending), which is how feature selection is recorded.
struct FeatureSchema {
  FeatureKind kind = FeatureKind::Engineered;
  std::vector<std::string> scanners;
  std::vector<std::string> permissions;
  std::vector<std::string> tags;
  /// Reference date for the age feature; absent means each snapshot's own scan_date.
  std::optional<Timestamp> fixed_as_of;
  std::optional<std::vector<std::size_t>> selected;

  std::size_t full_length() const noexcept;
  std::size_t length() const noexcept;
  /// Names of the active features, e.g. "ESET-NOD32", "age", "perm:android.permission.SEND_SMS".
  std::vector<std::string> feature_names() const;
  /// Short stable fingerprint of the canonical JSON form.
  std::string id() const;
  /// Throws InvalidSchema on duplicate vocabulary entries or bad selections.
  void validate() const;

  /// The eleven correct scanners plus the bundled 324-permission and 32-tag vocabularies.
  static FeatureSchema engineered_default();
  static FeatureSchema naive(std::vector<std::string> universe);

  bool operator==(const FeatureSchema&) const = default;
};

/// Avira, CAT-QuickHeal, DrWeb, ESET-NOD32, Fortinet, Ikarus, MAX, McAfee,
/// NANO-Antivirus, Sophos, SymantecMobileInsight.
const std::vector<std::string>& default_correct_scanners();
/// The seventeen scanners whose verdicts trained the best naive-feature forests.
const std::vector<std::string>& selected_naive_scanners();
const std::vector<std::string>& default_permission_vocab();
const std::vector<std::string>& default_tag_vocab();

std::string schema_to_json(const FeatureSchema& schema);
/// Throws InvalidSchema.
FeatureSchema schema_from_json(std::string_view json_text);
FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const FeatureSchema& schema, const std::filesystem::path& path);

struct FeatureVector {
  std::vector<double> values;
  std::string schema_id;

  bool operator==(const FeatureVector&) const = default;
};

/// Throws SchemaKindMismatch when the schema is not Engineered.
FeatureVector engineered_vector(const ScanSnapshot& snapshot, const FeatureSchema& schema);
/// Throws SchemaKindMismatch when the schema is not Naive.
FeatureVector naive_vector(const ScanSnapshot& snapshot, const FeatureSchema& schema);
/// Dispatches on schema.kind.
FeatureVector extract(const ScanSnapshot& snapshot, const FeatureSchema& schema);

struct UnknownVocabulary {
  std::size_t permissions = 0;
  std::size_t tags = 0;
};
/// Permissions and tags present in the report but absent from the schema.
UnknownVocabulary count_unknown_vocabulary(const ScanSnapshot& snapshot, const FeatureSchema& schema);

/// Sorted union of scanner names across snapshots.
std::vector<std::string> observed_scanners(const std::vector<ScanSnapshot>& snapshots);
/// Sorted union of permissions (or tags) across snapshots, padded with
/// placeholder names up to `pad_to` entries.
std::vector<std::string> observed_vocabulary(const std::vector<ScanSnapshot>& snapshots,
                                             bool permissions, std::size_t pad_to = 0);

struct SelectionPolicy {
  enum class Mode { MeanImportance, Fixed };
  Mode mode = Mode::MeanImportance;
  double threshold = 0.0;  // used by Fixed

  static SelectionPolicy mean() { return {}; }
  static SelectionPolicy fixed(double t) { return {Mode::Fixed, t}; }
};

struct FeatureSelection {
  FeatureSchema schema;
  /// kept[new_index] == index in the input schema's layout.
  std::vector<std::size_t> kept;
};

/// Keeps every feature whose importance reaches the threshold (the mean
/// importance by default, compared with a 1e-12 relative tolerance).
/// Throws SchemaMismatch, InvalidArgument or EmptySelection.
FeatureSelection select_features(const std::vector<double>& importances, const FeatureSchema& schema,
                                 SelectionPolicy policy = SelectionPolicy::mean());

/// Applies a selection's index map to a vector extracted with the input schema.
FeatureVector project(const FeatureVector& vector, const FeatureSelection& selection);

}  // namespace labelforge
