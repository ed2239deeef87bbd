#include "labelforge/store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <mutex>
#include <set>
#include <shared_mutex>

#include "csv.hpp"
#include "labelforge/error.hpp"
#include "snapshot_json.hpp"

namespace labelforge {

namespace fs = std::filesystem;

std::size_t DatasetManifest::count(Label label) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [&](const auto& kv) { return kv.second.truth.value == label; }));
}

struct Store::Impl {
  std::optional<fs::path> root;
  mutable std::shared_mutex mutex;
  std::map<std::string, std::vector<ScanSnapshot>> apps;

  fs::path app_file(const std::string& app_id) const {
    return *root / "apps" / app_id.substr(0, 2) / (app_id + ".jsonl");
  }

  // Caller holds the unique lock.
  bool insert(const ScanSnapshot& s) {
    auto& list = apps[s.app_id];
    auto pos = std::lower_bound(list.begin(), list.end(), s.scan_date,
                                [](const ScanSnapshot& a, Timestamp t) { return a.scan_date < t; });
    if (pos != list.end() && pos->scan_date == s.scan_date) return false;
    list.insert(pos, s);
    return true;
  }

  void append_to_disk(const ScanSnapshot& s) const {
    if (!root) return;
    const auto path = app_file(s.app_id);
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    out << serialize_snapshot(s) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }

  void write_index() const {
    if (!root) return;
    detail::Json index = detail::Json::object();
    index["format_version"] = 1;
    detail::Json list = detail::Json::object();
    for (const auto& [id, snaps] : apps) list[id] = snaps.size();
    index["apps"] = std::move(list);
    const auto tmp = *root / "index.json.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
      out << index.dump(2) << '\n';
    }
    std::error_code ec;
    fs::rename(tmp, *root / "index.json", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot replace index: " + ec.message());
  }

  void load() {
    const auto index_path = *root / "index.json";
    if (!fs::exists(index_path)) return;
    std::ifstream in(index_path, std::ios::binary);
    detail::Json index;
    try {
      index = detail::Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoError, "corrupt index.json: " + std::string(e.what()));
    }
    for (const auto& [id, _] : index.at("apps").items()) {
      const auto path = app_file(id);
      std::ifstream file(path, std::ios::binary);
      if (!file) throw Error(ErrorCode::IoError, "missing " + path.string());
      std::string line;
      while (std::getline(file, line)) {
        if (line.empty()) continue;
        insert(parse_snapshot(line).snapshot);
      }
    }
  }
};

namespace {

void check_app_id(const std::string& id) {
  const bool ok = id.size() >= 2 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_';
  });
  if (!ok) throw Error(ErrorCode::InvalidField, "app_id '" + id + "' is not a plain identifier");
}

}  // namespace

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::open(const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) {
    throw Error(ErrorCode::IoError, "cannot create store at " + root.string());
  }
  auto impl = std::make_unique<Impl>();
  impl->root = root;
  impl->load();
  return Store(std::move(impl));
}

Store Store::in_memory() { return Store(std::make_unique<Impl>()); }

IngestReport Store::ingest(std::istream& jsonl) {
  IngestReport report;
  std::unique_lock lock(impl_->mutex);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(jsonl, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto prefix = "line " + std::to_string(line_no) + ": ";
    try {
      auto parsed = parse_snapshot(line);
      check_app_id(parsed.snapshot.app_id);
      if (!impl_->insert(parsed.snapshot)) {
        ++report.duplicates;
        continue;
      }
      impl_->append_to_disk(parsed.snapshot);
      ++report.accepted;
      for (auto& w : parsed.warnings) report.warnings.push_back(prefix + w.message);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::IoError) throw;
      report.warnings.push_back(prefix + e.what());
    }
  }
  if (jsonl.bad()) throw Error(ErrorCode::IoError, "read failure");
  if (report.accepted > 0) impl_->write_index();
  return report;
}

bool Store::add(const ScanSnapshot& snapshot) {
  check_app_id(snapshot.app_id);
  std::unique_lock lock(impl_->mutex);
  if (!impl_->insert(snapshot)) return false;
  impl_->append_to_disk(snapshot);
  impl_->write_index();
  return true;
}

bool Store::contains(const std::string& app_id) const {
  std::shared_lock lock(impl_->mutex);
  return impl_->apps.count(app_id) != 0;
}

std::vector<std::string> Store::app_ids() const {
  std::shared_lock lock(impl_->mutex);
  std::vector<std::string> ids;
  ids.reserve(impl_->apps.size());
  for (const auto& [id, _] : impl_->apps) ids.push_back(id);
  return ids;
}

std::size_t Store::snapshot_count() const {
  std::shared_lock lock(impl_->mutex);
  std::size_t n = 0;
  for (const auto& [_, snaps] : impl_->apps) n += snaps.size();
  return n;
}

AppHistory Store::history(const std::string& app_id) const {
  std::shared_lock lock(impl_->mutex);
  auto it = impl_->apps.find(app_id);
  if (it == impl_->apps.end()) throw Error(ErrorCode::UnknownApp, app_id);
  return AppHistory{app_id, it->second};
}

ScanSnapshot Store::snapshot_at(const std::string& app_id, Date as_of) const {
  std::shared_lock lock(impl_->mutex);
  auto it = impl_->apps.find(app_id);
  if (it == impl_->apps.end()) throw Error(ErrorCode::UnknownApp, app_id);
  const auto& list = it->second;
  // First snapshot whose day is after as_of; the one before it is the answer.
  auto after = std::upper_bound(list.begin(), list.end(), as_of,
                                [](Date d, const ScanSnapshot& s) { return d < day_of(s.scan_date); });
  if (after == list.begin()) {
    throw Error(ErrorCode::NoSnapshotBefore, app_id + " has no snapshot on or before " + format_date(as_of));
  }
  return *std::prev(after);
}

std::optional<ScanSnapshot> Store::latest(const std::string& app_id) const {
  std::shared_lock lock(impl_->mutex);
  auto it = impl_->apps.find(app_id);
  if (it == impl_->apps.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

std::map<std::string, ScanSnapshot> Store::snapshots_at(const DatasetManifest& manifest,
                                                        Date as_of) const {
  std::map<std::string, ScanSnapshot> out;
  for (const auto& [id, _] : manifest.entries) {
    try {
      out.emplace(id, snapshot_at(id, as_of));
    } catch (const Error& e) {
      throw Error(ErrorCode::MissingSnapshot, id + " (" + e.what() + ")");
    }
  }
  return out;
}

std::vector<Date> Store::scan_days(const DatasetManifest& manifest) const {
  std::shared_lock lock(impl_->mutex);
  std::set<Date> days;
  for (const auto& [id, _] : manifest.entries) {
    auto it = impl_->apps.find(id);
    if (it == impl_->apps.end()) continue;
    for (const auto& s : it->second) days.insert(day_of(s.scan_date));
  }
  return {days.begin(), days.end()};
}

const std::optional<fs::path>& Store::root() const noexcept { return impl_->root; }

std::vector<std::int64_t> derived_positives_delta(const AppHistory& history) {
  std::vector<std::int64_t> deltas;
  const auto& s = history.snapshots;
  for (std::size_t i = 1; i < s.size(); ++i) deltas.push_back(s[i].positives - s[i - 1].positives);
  return deltas;
}

std::vector<std::size_t> positives_delta_mismatches(const AppHistory& history) {
  std::vector<std::size_t> out;
  const auto& s = history.snapshots;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].positives_delta && *s[i].positives_delta != s[i].positives - s[i - 1].positives) {
      out.push_back(i);
    }
  }
  return out;
}

DatasetManifest load_manifest(std::istream& csv, std::string name) {
  DatasetManifest manifest;
  manifest.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  int col_id = -1, col_label = -1, col_type = -1, col_dex = -1;
  bool have_header = false;

  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };

  while (std::getline(csv, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    for (auto& f : fields) f = detail::trim(f);
    if (!have_header) {
      for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
        const auto h = lower(fields[i]);
        if (h == "app_id") col_id = i;
        else if (h == "label") col_label = i;
        else if (h == "malware_type") col_type = i;
        else if (h == "dex_date") col_dex = i;
      }
      if (col_id < 0 || col_label < 0) {
        throw Error(ErrorCode::InvalidManifest, "header must contain app_id and label columns");
      }
      have_header = true;
      continue;
    }
    const auto where = "line " + std::to_string(line_no);
    auto field = [&](int col) -> std::string {
      return col >= 0 && col < static_cast<int>(fields.size()) ? fields[col] : std::string{};
    };
    auto id = lower(field(col_id));
    if (id.empty()) throw Error(ErrorCode::InvalidManifest, where + ": empty app_id");
    ManifestEntry entry;
    const auto label = lower(field(col_label));
    if (label == "malicious") entry.truth.value = Label::Malicious;
    else if (label == "benign") entry.truth.value = Label::Benign;
    else throw Error(ErrorCode::UnknownLabelString, where + ": '" + field(col_label) + "'");
    if (auto type = field(col_type); !type.empty()) {
      if (entry.truth.value != Label::Malicious) {
        throw Error(ErrorCode::InvalidManifest, where + ": malware_type on a benign app");
      }
      entry.truth.malware_type = type;
    }
    if (auto dex = field(col_dex); !dex.empty()) entry.dex_date = parse_timestamp(dex);
    if (!manifest.entries.emplace(id, std::move(entry)).second) {
      throw Error(ErrorCode::DuplicateAppId, where + ": " + id);
    }
  }
  if (manifest.entries.empty()) throw Error(ErrorCode::EmptyManifest, manifest.name);
  return manifest;
}

DatasetManifest load_manifest_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return load_manifest(in, path.stem().string());
}

}  // namespace labelforge
