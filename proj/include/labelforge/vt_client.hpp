#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "labelforge/report.hpp"

namespace labelforge {

/// Time source for the limiter and the poll loop; tests substitute a
/// virtual clock so quota windows can be exercised instantly.
class Clock {
 public:
  using time_point = std::chrono::system_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(std::chrono::milliseconds duration) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() override;
  void sleep_for(std::chrono::milliseconds duration) override;
};

/// Starts at the epoch; sleep_for advances time without blocking.
class VirtualClock final : public Clock {
 public:
  time_point now() override;
  void sleep_for(std::chrono::milliseconds duration) override;
  void advance(std::chrono::milliseconds duration);

 private:
  std::mutex mutex_;
  time_point now_{};
};

/// Rolling-window limiter: at most `daily` grants in any 24 h and at most
/// `per_minute` in any 60 s. Thread-safe; callers are serialized.
class RateLimiter {
 public:
  RateLimiter(std::uint64_t daily, std::uint64_t per_minute, std::shared_ptr<Clock> clock);

  /// Grants one request. A spent daily quota throws QuotaExhausted at once;
  /// a full minute window either waits for a free slot or throws.
  void acquire(bool wait_for_minute_slot = true);
  bool try_acquire();

  std::uint64_t used_last_day();
  std::uint64_t daily_quota() const noexcept { return daily_; }
  std::uint64_t per_minute_quota() const noexcept { return per_minute_; }

 private:
  void prune(Clock::time_point now);
  std::uint64_t used_last_minute(Clock::time_point now) const;

  std::uint64_t daily_;
  std::uint64_t per_minute_;
  std::shared_ptr<Clock> clock_;
  std::mutex mutex_;
  std::deque<Clock::time_point> grants_;
};

struct HttpRequest {
  std::string method;  // "GET" or "POST"
  std::string path;    // includes any query string
  std::map<std::string, std::string> headers;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Throws Error(TransportError) when no response was received.
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport for "http://host:port[/prefix]" URLs.
std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url);

enum class ApiFlavor {
  Native,          // POST /apps/{id}/rescan, GET /apps/{id}/reports/latest
  VirusTotalV2,    // /vtapi/v2/file/rescan, /vtapi/v2/file/report
};

struct ClientConfig {
  std::string base_url = "http://127.0.0.1:8585";
  std::string api_key;
  ApiFlavor flavor = ApiFlavor::Native;
  std::uint64_t daily_quota = 20'000;
  std::uint64_t per_minute_quota = 4;
  bool wait_for_minute_slot = true;
  std::chrono::seconds rescan_poll_interval{240};
  int max_poll_attempts = 10;

  /// Defaults with api_key taken from VT_API_KEY.
  static ClientConfig from_env();
};

struct RescanResult {
  bool accepted = false;
};

/// Client for a VirusTotal-compatible API. Every request, rescans and report
/// downloads alike, draws from the same limiter.
class VtClient {
 public:
  VtClient(ClientConfig config, std::shared_ptr<HttpTransport> transport,
           std::shared_ptr<Clock> clock);
  /// Real network transport and system clock.
  explicit VtClient(ClientConfig config);

  /// Throws QuotaExhausted, Unauthorized, NotFound or TransportError.
  RescanResult rescan(const std::string& app_id);

  /// Downloads the latest report. With wait_for_fresh it sleeps one poll
  /// interval before each attempt until the report's scan_date is newer than
  /// `newer_than` (or the last report this client saw for the app), up to
  /// max_poll_attempts. Throws NotFound, StaleAfterPolling, QuotaExhausted,
  /// Unauthorized, TransportError or a report parse error.
  ScanSnapshot fetch_report(const std::string& app_id, bool wait_for_fresh = false,
                            std::optional<Timestamp> newer_than = std::nullopt);

  const ClientConfig& config() const noexcept { return config_; }
  RateLimiter& limiter() noexcept { return *limiter_; }

 private:
  HttpResponse send(HttpRequest request);
  ScanSnapshot fetch_once(const std::string& app_id);

  ClientConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<Clock> clock_;
  std::unique_ptr<RateLimiter> limiter_;
  std::mutex seen_mutex_;
  std::map<std::string, Timestamp> last_seen_;
};

}  // namespace labelforge
