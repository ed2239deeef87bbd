#include "labelforge/report.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "labelforge/error.hpp"
#include "snapshot_json.hpp"

namespace labelforge {

std::string_view to_string(Label label) noexcept {
  return label == Label::Malicious ? "malicious" : "benign";
}

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::Malicious: return "malicious";
    case Verdict::Benign: return "benign";
    case Verdict::Unknown: return "unknown";
  }
  return "unknown";
}

const ScannerResult* ScanSnapshot::find_scanner(std::string_view name) const noexcept {
  auto it = std::find_if(verdicts.begin(), verdicts.end(),
                         [&](const ScannerResult& r) { return r.name == name; });
  return it == verdicts.end() ? nullptr : &*it;
}

Verdict verdict_of(const ScanSnapshot& snapshot, std::string_view scanner) noexcept {
  const auto* r = snapshot.find_scanner(scanner);
  if (r == nullptr) return Verdict::Unknown;
  return r->detected ? Verdict::Malicious : Verdict::Benign;
}

namespace detail {

namespace {

// Aliases in lookup order; "app_id" is what serialize_snapshot writes.
constexpr std::array<const char*, 5> kAppIdKeys{"app_id", "sha256", "sha1", "md5", "resource"};

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::InvalidField, field + ": " + why);
}

std::int64_t read_count(const Json& object, const char* key, bool required) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) {
    if (required) throw Error(ErrorCode::MissingRequiredField, key);
    return 0;
  }
  if (!it->is_number_integer()) invalid(key, "expected an integer");
  auto value = it->get<std::int64_t>();
  if (value < 0) invalid(key, "must be non-negative");
  return value;
}

std::optional<Timestamp> read_time(const Json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) invalid(key, "expected a timestamp string");
  return parse_timestamp(it->get_ref<const std::string&>());
}

std::optional<std::string> read_optional_string(const Json& object, const char* key,
                                                const std::string& context) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) invalid(context + "." + key, "expected a string");
  return it->get<std::string>();
}

void read_string_set(const Json& node, const char* field, std::set<std::string>& out) {
  if (node.is_array()) {
    for (const auto& v : node) {
      if (!v.is_string()) invalid(field, "expected strings");
      out.insert(v.get<std::string>());
    }
  } else if (node.is_object()) {
    for (const auto& [k, _] : node.items()) out.insert(k);
  } else if (!node.is_null()) {
    invalid(field, "expected an array");
  }
}

}  // namespace

Json to_json(const ScanSnapshot& s) {
  Json j = Json::object();
  j["app_id"] = s.app_id;
  j["scan_date"] = format_timestamp(s.scan_date);
  j["first_seen"] = format_timestamp(s.first_seen);
  if (s.dex_date) j["dex_date"] = format_timestamp(*s.dex_date);
  j["positives"] = s.positives;
  j["total"] = s.total;
  if (s.positives_delta) j["positives_delta"] = *s.positives_delta;
  j["times_submitted"] = s.times_submitted;
  Json scans = Json::object();
  for (const auto& r : s.verdicts) {
    Json e = Json::object();
    e["detected"] = r.detected;
    e["result"] = r.result ? Json(*r.result) : Json(nullptr);
    e["version"] = r.version ? Json(*r.version) : Json(nullptr);
    scans[r.name] = std::move(e);
  }
  j["scans"] = std::move(scans);
  j["permissions"] = Json(std::vector<std::string>(s.permissions.begin(), s.permissions.end()));
  j["tags"] = Json(std::vector<std::string>(s.tags.begin(), s.tags.end()));
  return j;
}

ScanSnapshot snapshot_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedJson, "expected a JSON object");
  ScanSnapshot s;

  for (const char* key : kAppIdKeys) {
    auto it = j.find(key);
    if (it != j.end() && it->is_string() && !it->get_ref<const std::string&>().empty()) {
      s.app_id = it->get<std::string>();
      break;
    }
  }
  if (s.app_id.empty()) throw Error(ErrorCode::MissingRequiredField, "app_id");
  std::transform(s.app_id.begin(), s.app_id.end(), s.app_id.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  auto scan_date = read_time(j, "scan_date");
  if (!scan_date) throw Error(ErrorCode::MissingRequiredField, "scan_date");
  s.scan_date = *scan_date;
  s.first_seen = read_time(j, "first_seen").value_or(s.scan_date);
  s.dex_date = read_time(j, "dex_date");

  s.positives = read_count(j, "positives", true);
  s.total = read_count(j, "total", true);
  s.times_submitted = read_count(j, "times_submitted", false);
  if (auto it = j.find("positives_delta"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) invalid("positives_delta", "expected an integer");
    s.positives_delta = it->get<std::int64_t>();
  }

  if (auto it = j.find("scans"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) invalid("scans", "expected an object");
    s.verdicts.reserve(it->size());
    for (const auto& [name, entry] : it->items()) {
      if (!entry.is_object()) invalid("scans." + name, "expected an object");
      auto detected = entry.find("detected");
      if (detected == entry.end() || !detected->is_boolean()) {
        invalid("scans." + name + ".detected", "expected a boolean");
      }
      ScannerResult r;
      r.name = name;
      r.detected = detected->get<bool>();
      r.result = read_optional_string(entry, "result", "scans." + name);
      r.version = read_optional_string(entry, "version", "scans." + name);
      s.verdicts.push_back(std::move(r));
    }
  }

  if (auto it = j.find("permissions"); it != j.end()) {
    read_string_set(*it, "permissions", s.permissions);
  } else if (auto info = j.find("additional_info"); info != j.end() && info->is_object()) {
    auto andro = info->find("androguard");
    if (andro != info->end() && andro->is_object()) {
      if (auto perms = andro->find("Permissions"); perms != andro->end()) {
        read_string_set(*perms, "permissions", s.permissions);
      }
    }
  }
  if (auto it = j.find("tags"); it != j.end()) read_string_set(*it, "tags", s.tags);
  return s;
}

}  // namespace detail

std::vector<IngestWarning> check_consistency(const ScanSnapshot& s) {
  std::vector<IngestWarning> out;
  const auto detected = std::count_if(s.verdicts.begin(), s.verdicts.end(),
                                      [](const ScannerResult& r) { return r.detected; });
  if (detected != s.positives) {
    out.push_back({WarningKind::PositivesMismatch,
                   s.app_id + "@" + format_timestamp(s.scan_date) + ": positives=" +
                       std::to_string(s.positives) + " but " + std::to_string(detected) +
                       " scanners detected"});
  }
  if (static_cast<std::int64_t>(s.verdicts.size()) != s.total) {
    out.push_back({WarningKind::TotalMismatch,
                   s.app_id + "@" + format_timestamp(s.scan_date) + ": total=" +
                       std::to_string(s.total) + " but " + std::to_string(s.verdicts.size()) +
                       " scanners reported"});
  }
  if (s.positives > s.total) {
    out.push_back({WarningKind::PositivesExceedTotal,
                   s.app_id + "@" + format_timestamp(s.scan_date) + ": positives > total"});
  }
  if (s.first_seen > s.scan_date) {
    out.push_back({WarningKind::FirstSeenAfterScan,
                   s.app_id + "@" + format_timestamp(s.scan_date) + ": first_seen after scan_date"});
  }
  return out;
}

ParsedSnapshot parse_snapshot(std::string_view json_text) {
  detail::Json j;
  try {
    j = detail::Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, e.what());
  }
  ParsedSnapshot parsed{detail::snapshot_from_json(j), {}};
  parsed.warnings = check_consistency(parsed.snapshot);
  return parsed;
}

std::string serialize_snapshot(const ScanSnapshot& snapshot) {
  return detail::to_json(snapshot).dump();
}

}  // namespace labelforge
