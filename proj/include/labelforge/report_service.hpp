#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labelforge/store.hpp"
#include "labelforge/vt_client.hpp"

namespace labelforge {

/// Scripted reanalysis results: each rescan of an app appends the next
/// snapshot from its list. JSON form: {"rescans": {"<app_id>": [snapshot, ...]}}.
struct ReplayScript {
  std::map<std::string, std::vector<ScanSnapshot>> rescans;

  /// Throws InvalidReplayScript.
  static ReplayScript parse(std::string_view json_text);
  static ReplayScript load(const std::filesystem::path& path);
};

/// History-preserving report service over a Store.
///
///   GET  /apps                     200, JSON array of app ids
///   GET  /apps/{id}/reports        200, every stored snapshot in scan_date order
///   GET  /apps/{id}/reports/latest 200, newest snapshot
///   POST /apps/{id}/rescan         202 after appending the next scripted
///                                  snapshot, 409 when the script is exhausted
///
/// Unknown apps answer 404. Bodies reuse the snapshot JSON schema.
class ReportService {
 public:
  /// Throws InvalidReplayScript when the script names unknown apps or does
  /// not move strictly forward in time from the stored history.
  explicit ReportService(Store& store, std::optional<ReplayScript> script = std::nullopt);

  HttpResponse handle(std::string_view method, std::string_view path);

 private:
  HttpResponse rescan(const std::string& app_id);

  Store& store_;
  std::optional<ReplayScript> script_;
  std::mutex rescan_mutex_;
  std::map<std::string, std::size_t> cursor_;
};

/// A running HTTP listener; stops and joins on destruction.
class ServiceHandle {
 public:
  ServiceHandle(ServiceHandle&&) noexcept;
  ServiceHandle& operator=(ServiceHandle&&) noexcept;
  ~ServiceHandle();

  int port() const noexcept;
  std::string base_url() const;
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

 private:
  friend ServiceHandle serve(ReportService& service, const std::string& bind_address);
  struct Impl;
  explicit ServiceHandle(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Binds "host:port" (port 0 picks a free port) and serves in a background
/// thread. Throws BindError.
ServiceHandle serve(ReportService& service, const std::string& bind_address);

/// In-process transport that calls ReportService::handle directly.
std::shared_ptr<HttpTransport> make_loopback_transport(ReportService& service);

}  // namespace labelforge
