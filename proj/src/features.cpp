#include "labelforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "labelforge/error.hpp"

namespace labelforge {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kScalarFeatures = 4;  // age, times_submitted, positives, total
constexpr double kSecondsPerYear = 365.25 * 86400.0;

template <class Range>
void require_unique(const Range& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw Error(ErrorCode::InvalidSchema, std::string("duplicate ") + what + " '" + n + "'");
    }
  }
}

double verdict_value(const ScanSnapshot& s, const std::string& scanner) {
  return static_cast<double>(static_cast<int>(verdict_of(s, scanner)));
}

std::vector<double> full_engineered(const ScanSnapshot& s, const FeatureSchema& schema) {
  std::vector<double> v;
  v.reserve(schema.full_length());
  for (const auto& name : schema.scanners) v.push_back(verdict_value(s, name));
  const Timestamp as_of = schema.fixed_as_of.value_or(s.scan_date);
  const double age = static_cast<double>((as_of - s.first_seen).count()) / kSecondsPerYear;
  v.push_back(std::max(0.0, age));
  v.push_back(static_cast<double>(s.times_submitted));
  v.push_back(static_cast<double>(s.positives));
  v.push_back(static_cast<double>(s.total));
  for (const auto& p : schema.permissions) v.push_back(s.permissions.count(p) ? 1.0 : 0.0);
  for (const auto& t : schema.tags) v.push_back(s.tags.count(t) ? 1.0 : 0.0);
  return v;
}

FeatureVector finish(std::vector<double> full, const FeatureSchema& schema) {
  FeatureVector out;
  out.schema_id = schema.id();
  if (!schema.selected) {
    out.values = std::move(full);
  } else {
    out.values.reserve(schema.selected->size());
    for (auto i : *schema.selected) out.values.push_back(full[i]);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& default_correct_scanners() {
  static const std::vector<std::string> names{
      "Avira",  "CAT-QuickHeal", "DrWeb",  "ESET-NOD32",     "Fortinet",             "Ikarus",
      "MAX",    "McAfee",        "NANO-Antivirus", "Sophos", "SymantecMobileInsight"};
  return names;
}

const std::vector<std::string>& selected_naive_scanners() {
  static const std::vector<std::string> names{
      "AhnLab-V3", "Avira",  "CAT-QuickHeal", "Cyren",          "DrWeb",  "ESET-NOD32",
      "F-Secure",  "Fortinet", "Ikarus",      "K7GW",           "MAX",    "McAfee",
      "McAfee-GW-Edition", "NANO-Antivirus", "Sophos", "SymantecMobileInsight", "Trustlook"};
  return names;
}

std::size_t FeatureSchema::full_length() const noexcept {
  if (kind == FeatureKind::Naive) return scanners.size();
  return scanners.size() + kScalarFeatures + permissions.size() + tags.size();
}

std::size_t FeatureSchema::length() const noexcept {
  return selected ? selected->size() : full_length();
}

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> all(scanners.begin(), scanners.end());
  if (kind == FeatureKind::Engineered) {
    for (const char* n : {"age", "times_submitted", "positives", "total"}) all.emplace_back(n);
    for (const auto& p : permissions) all.push_back("perm:" + p);
    for (const auto& t : tags) all.push_back("tag:" + t);
  }
  if (!selected) return all;
  std::vector<std::string> out;
  out.reserve(selected->size());
  for (auto i : *selected) out.push_back(all[i]);
  return out;
}

std::string FeatureSchema::id() const {
  // FNV-1a over the canonical JSON form.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : schema_to_json(*this)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void FeatureSchema::validate() const {
  require_unique(scanners, "scanner");
  require_unique(permissions, "permission");
  require_unique(tags, "tag");
  if (selected) {
    if (selected->empty()) throw Error(ErrorCode::InvalidSchema, "empty selection");
    for (std::size_t i = 0; i < selected->size(); ++i) {
      if ((*selected)[i] >= full_length() || (i > 0 && (*selected)[i] <= (*selected)[i - 1])) {
        throw Error(ErrorCode::InvalidSchema, "selection indices must be ascending and in range");
      }
    }
  }
  if (full_length() == 0) throw Error(ErrorCode::InvalidSchema, "schema has no features");
}

FeatureSchema FeatureSchema::engineered_default() {
  FeatureSchema s;
  s.kind = FeatureKind::Engineered;
  s.scanners = default_correct_scanners();
  s.permissions = default_permission_vocab();
  s.tags = default_tag_vocab();
  return s;
}

FeatureSchema FeatureSchema::naive(std::vector<std::string> universe) {
  FeatureSchema s;
  s.kind = FeatureKind::Naive;
  s.scanners = std::move(universe);
  return s;
}

std::string schema_to_json(const FeatureSchema& schema) {
  Json j = Json::object();
  j["kind"] = schema.kind == FeatureKind::Engineered ? "engineered" : "naive";
  j["scanners"] = schema.scanners;
  j["permissions"] = schema.permissions;
  j["tags"] = schema.tags;
  j["as_of"] = schema.fixed_as_of ? format_timestamp(*schema.fixed_as_of) : std::string("snapshot");
  if (schema.selected) j["selected"] = *schema.selected;
  return j.dump();
}

FeatureSchema schema_from_json(std::string_view json_text) {
  Json j = Json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidSchema, "expected a JSON object");
  FeatureSchema s;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "engineered") s.kind = FeatureKind::Engineered;
    else if (kind == "naive") s.kind = FeatureKind::Naive;
    else throw Error(ErrorCode::InvalidSchema, "unknown kind '" + kind + "'");
    s.scanners = j.at("scanners").get<std::vector<std::string>>();
    s.permissions = j.value("permissions", std::vector<std::string>{});
    s.tags = j.value("tags", std::vector<std::string>{});
    const auto as_of = j.value("as_of", std::string("snapshot"));
    if (as_of != "snapshot") s.fixed_as_of = parse_timestamp(as_of);
    if (j.contains("selected")) s.selected = j["selected"].get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidSchema) throw;
    throw Error(ErrorCode::InvalidSchema, e.what());
  }
  s.validate();
  return s;
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return schema_from_json(buf.str());
}

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << Json::parse(schema_to_json(schema)).dump(2) << '\n';
}

FeatureVector engineered_vector(const ScanSnapshot& snapshot, const FeatureSchema& schema) {
  if (schema.kind != FeatureKind::Engineered) {
    throw Error(ErrorCode::SchemaKindMismatch, "engineered extraction needs an engineered schema");
  }
  return finish(full_engineered(snapshot, schema), schema);
}

FeatureVector naive_vector(const ScanSnapshot& snapshot, const FeatureSchema& schema) {
  if (schema.kind != FeatureKind::Naive) {
    throw Error(ErrorCode::SchemaKindMismatch, "naive extraction needs a naive schema");
  }
  std::vector<double> v;
  v.reserve(schema.scanners.size());
  for (const auto& name : schema.scanners) v.push_back(verdict_value(snapshot, name));
  return finish(std::move(v), schema);
}

FeatureVector extract(const ScanSnapshot& snapshot, const FeatureSchema& schema) {
  return schema.kind == FeatureKind::Engineered ? engineered_vector(snapshot, schema)
                                                : naive_vector(snapshot, schema);
}

UnknownVocabulary count_unknown_vocabulary(const ScanSnapshot& snapshot, const FeatureSchema& schema) {
  UnknownVocabulary out;
  if (schema.kind != FeatureKind::Engineered) return out;
  const std::set<std::string> perms(schema.permissions.begin(), schema.permissions.end());
  const std::set<std::string> tags(schema.tags.begin(), schema.tags.end());
  for (const auto& p : snapshot.permissions) out.permissions += perms.count(p) ? 0 : 1;
  for (const auto& t : snapshot.tags) out.tags += tags.count(t) ? 0 : 1;
  return out;
}

std::vector<std::string> observed_scanners(const std::vector<ScanSnapshot>& snapshots) {
  std::set<std::string> names;
  for (const auto& s : snapshots) {
    for (const auto& r : s.verdicts) names.insert(r.name);
  }
  return {names.begin(), names.end()};
}

std::vector<std::string> observed_vocabulary(const std::vector<ScanSnapshot>& snapshots,
                                             bool permissions, std::size_t pad_to) {
  std::set<std::string> names;
  for (const auto& s : snapshots) {
    const auto& src = permissions ? s.permissions : s.tags;
    names.insert(src.begin(), src.end());
  }
  std::vector<std::string> out(names.begin(), names.end());
  const char* placeholder = permissions ? "unassigned.permission." : "unassigned-tag-";
  for (std::size_t i = out.size(); i < pad_to; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%03zu", placeholder, i);
    out.emplace_back(buf);
  }
  return out;
}

FeatureSelection select_features(const std::vector<double>& importances, const FeatureSchema& schema,
                                 SelectionPolicy policy) {
  if (importances.size() != schema.length()) {
    throw Error(ErrorCode::SchemaMismatch, "importances do not match the schema length");
  }
  if (std::any_of(importances.begin(), importances.end(),
                  [](double v) { return !std::isfinite(v) || v < 0.0; })) {
    throw Error(ErrorCode::InvalidArgument, "importances must be finite and non-negative");
  }
  double threshold = policy.threshold;
  if (policy.mode == SelectionPolicy::Mode::MeanImportance) {
    threshold = std::accumulate(importances.begin(), importances.end(), 0.0) /
                static_cast<double>(importances.size());
  }
  const double slack = 1e-12 * std::max(1.0, std::abs(threshold));

  FeatureSelection out;
  for (std::size_t i = 0; i < importances.size(); ++i) {
    if (importances[i] >= threshold - slack) out.kept.push_back(i);
  }
  if (out.kept.empty()) throw Error(ErrorCode::EmptySelection, "no feature reaches the threshold");

  out.schema = schema;
  std::vector<std::size_t> base(schema.length());
  if (schema.selected) base = *schema.selected;
  else std::iota(base.begin(), base.end(), std::size_t{0});
  std::vector<std::size_t> selected;
  selected.reserve(out.kept.size());
  for (auto k : out.kept) selected.push_back(base[k]);
  out.schema.selected = std::move(selected);
  return out;
}

FeatureVector project(const FeatureVector& vector, const FeatureSelection& selection) {
  FeatureVector out;
  out.schema_id = selection.schema.id();
  out.values.reserve(selection.kept.size());
  for (auto k : selection.kept) out.values.push_back(vector.values.at(k));
  return out;
}

}  // namespace labelforge
