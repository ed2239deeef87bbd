#include "labelforge/vt_client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "labelforge/error.hpp"

namespace labelforge {

Clock::time_point SystemClock::now() { return std::chrono::system_clock::now(); }

void SystemClock::sleep_for(std::chrono::milliseconds duration) {
  std::this_thread::sleep_for(duration);
}

Clock::time_point VirtualClock::now() {
  std::lock_guard lock(mutex_);
  return now_;
}

void VirtualClock::sleep_for(std::chrono::milliseconds duration) { advance(duration); }

void VirtualClock::advance(std::chrono::milliseconds duration) {
  std::lock_guard lock(mutex_);
  now_ += duration;
}

RateLimiter::RateLimiter(std::uint64_t daily, std::uint64_t per_minute, std::shared_ptr<Clock> clock)
    : daily_(daily), per_minute_(per_minute), clock_(std::move(clock)) {
  if (daily_ == 0 || per_minute_ == 0) {
    throw Error(ErrorCode::InvalidArgument, "quotas must be positive");
  }
}

void RateLimiter::prune(Clock::time_point now) {
  const auto horizon = now - std::chrono::hours{24};
  while (!grants_.empty() && grants_.front() <= horizon) grants_.pop_front();
}

std::uint64_t RateLimiter::used_last_minute(Clock::time_point now) const {
  const auto horizon = now - std::chrono::minutes{1};
  std::uint64_t n = 0;
  for (auto it = grants_.rbegin(); it != grants_.rend() && *it > horizon; ++it) ++n;
  return n;
}

void RateLimiter::acquire(bool wait_for_minute_slot) {
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = clock_->now();
    prune(now);
    if (grants_.size() >= daily_) {
      throw Error(ErrorCode::QuotaExhausted,
                  "daily quota of " + std::to_string(daily_) + " requests spent");
    }
    const auto in_minute = used_last_minute(now);
    if (in_minute < per_minute_) {
      grants_.push_back(now);
      return;
    }
    if (!wait_for_minute_slot) {
      throw Error(ErrorCode::QuotaExhausted,
                  "per-minute quota of " + std::to_string(per_minute_) + " requests spent");
    }
    // The oldest grant inside the minute window frees the next slot.
    const auto oldest = *(grants_.end() - static_cast<std::ptrdiff_t>(in_minute));
    const auto wait = std::chrono::ceil<std::chrono::milliseconds>(oldest + std::chrono::minutes{1} - now);
    lock.unlock();
    clock_->sleep_for(std::max(wait, std::chrono::milliseconds{1}));
    lock.lock();
  }
}

bool RateLimiter::try_acquire() {
  try {
    acquire(false);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::uint64_t RateLimiter::used_last_day() {
  std::lock_guard lock(mutex_);
  prune(clock_->now());
  return grants_.size();
}

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "base_url needs a scheme: " + base_url);
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    origin_ = base_url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  HttpResponse send(const HttpRequest& request) override {
    httplib::Client client(origin_);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers(request.headers.begin(), request.headers.end());
    const auto path = prefix_ + request.path;
    auto result = request.method == "POST" ? client.Post(path, headers, "", "application/json")
                                           : client.Get(path, headers);
    if (!result) {
      throw Error(ErrorCode::TransportError,
                  request.method + " " + origin_ + path + ": " + httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  }

 private:
  std::string origin_;
  std::string prefix_;
};

std::string url_encode(const std::string& s) {
  return httplib::detail::encode_query_param(s);
}

void check_status(const HttpResponse& r, const std::string& app_id) {
  // VirusTotal v2 signals a spent quota with 204 No Content.
  if (r.status == 204 || r.status == 429) {
    throw Error(ErrorCode::QuotaExhausted, "server-side rate limit");
  }
  if (r.status >= 200 && r.status < 300) return;
  switch (r.status) {
    case 401:
    case 403: throw Error(ErrorCode::Unauthorized, "server refused the API key (" + std::to_string(r.status) + ")");
    case 404: throw Error(ErrorCode::NotFound, app_id);
    default: throw Error(ErrorCode::TransportError, "unexpected status " + std::to_string(r.status));
  }
}

int v2_response_code(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::MalformedJson, "VirusTotal v2 response is not a JSON object");
  }
  return j.value("response_code", 0);
}

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url) {
  return std::make_shared<HttplibTransport>(base_url);
}

ClientConfig ClientConfig::from_env() {
  ClientConfig c;
  if (const char* key = std::getenv("VT_API_KEY")) c.api_key = key;
  return c;
}

VtClient::VtClient(ClientConfig config, std::shared_ptr<HttpTransport> transport,
                   std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      limiter_(std::make_unique<RateLimiter>(config_.daily_quota, config_.per_minute_quota, clock_)) {
  if (config_.max_poll_attempts < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_poll_attempts must be >= 1");
  }
}

VtClient::VtClient(ClientConfig config)
    : VtClient(config, make_http_transport(config.base_url), std::make_shared<SystemClock>()) {}

HttpResponse VtClient::send(HttpRequest request) {
  limiter_->acquire(config_.wait_for_minute_slot);
  if (config_.flavor == ApiFlavor::Native && !config_.api_key.empty()) {
    request.headers["x-apikey"] = config_.api_key;
  }
  return transport_->send(request);
}

RescanResult VtClient::rescan(const std::string& app_id) {
  if (config_.flavor == ApiFlavor::VirusTotalV2) {
    auto r = send({"POST",
                   "/vtapi/v2/file/rescan?apikey=" + url_encode(config_.api_key) +
                       "&resource=" + url_encode(app_id),
                   {}});
    check_status(r, app_id);
    const int code = v2_response_code(r.body);
    if (code == 0) throw Error(ErrorCode::NotFound, app_id);
    return {code == 1};
  }
  auto r = send({"POST", "/apps/" + app_id + "/rescan", {}});
  if (r.status == 409) return {false};
  check_status(r, app_id);
  return {true};
}

ScanSnapshot VtClient::fetch_once(const std::string& app_id) {
  HttpResponse r;
  if (config_.flavor == ApiFlavor::VirusTotalV2) {
    r = send({"GET",
              "/vtapi/v2/file/report?apikey=" + url_encode(config_.api_key) +
                  "&resource=" + url_encode(app_id) + "&allinfo=1",
              {}});
    check_status(r, app_id);
    if (v2_response_code(r.body) != 1) throw Error(ErrorCode::NotFound, app_id);
  } else {
    r = send({"GET", "/apps/" + app_id + "/reports/latest", {}});
    check_status(r, app_id);
  }
  auto snapshot = parse_snapshot(r.body).snapshot;
  std::lock_guard lock(seen_mutex_);
  auto& seen = last_seen_[app_id];
  seen = std::max(seen, snapshot.scan_date);
  return snapshot;
}

ScanSnapshot VtClient::fetch_report(const std::string& app_id, bool wait_for_fresh,
                                    std::optional<Timestamp> newer_than) {
  if (!wait_for_fresh) return fetch_once(app_id);
  if (!newer_than) {
    std::lock_guard lock(seen_mutex_);
    if (auto it = last_seen_.find(app_id); it != last_seen_.end()) newer_than = it->second;
  }
  for (int attempt = 0; attempt < config_.max_poll_attempts; ++attempt) {
    clock_->sleep_for(config_.rescan_poll_interval);
    auto snapshot = fetch_once(app_id);
    if (!newer_than || snapshot.scan_date > *newer_than) return snapshot;
  }
  throw Error(ErrorCode::StaleAfterPolling,
              app_id + " not refreshed after " + std::to_string(config_.max_poll_attempts) + " polls");
}

}  // namespace labelforge
