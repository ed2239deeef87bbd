#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "labelforge/report.hpp"
#include "labelforge/store.hpp"
#include "labelforge/time.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(LABELFORGE_FIXTURES) + "/" + name; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("labelforge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Snapshot with `positives` detecting scanners "S0".."S{p-1}" out of `total`.
inline labelforge::ScanSnapshot make_snapshot(const std::string& id, const std::string& date, std::int64_t positives,
                                              std::int64_t total = 60) {
  labelforge::ScanSnapshot s;
  s.app_id = id;
  s.scan_date = labelforge::parse_timestamp(date);
  s.first_seen = s.scan_date;
  s.positives = positives;
  s.total = total;
  for (std::int64_t i = 0; i < total; ++i) {
    s.verdicts.push_back({"S" + std::to_string(i), i < positives, std::nullopt, std::nullopt});
  }
  return s;
}

inline labelforge::ScanSnapshot with_verdicts(labelforge::ScanSnapshot s,
                                              const std::vector<std::pair<std::string, bool>>& verdicts) {
  s.verdicts.clear();
  s.positives = 0;
  for (const auto& [name, det] : verdicts) {
    s.verdicts.push_back({name, det, std::nullopt, std::nullopt});
    s.positives += det ? 1 : 0;
  }
  s.total = static_cast<std::int64_t>(verdicts.size());
  return s;
}

inline labelforge::Store load_store(const std::vector<std::string>& fixture_files) {
  auto store = labelforge::Store::in_memory();
  for (const auto& f : fixture_files) {
    std::ifstream in(fixture(f));
    store.ingest(in);
  }
  return store;
}

inline labelforge::DatasetManifest hand_labeled_manifest() {
  return labelforge::load_manifest_file(fixture("hand_labeled_2019.csv"));
}

}  // namespace testing
