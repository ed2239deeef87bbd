#include "labelforge/report_service.hpp"

#include <charconv>
#include <condition_variable>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "labelforge/error.hpp"
#include "snapshot_json.hpp"

namespace labelforge {

using detail::Json;

ReplayScript ReplayScript::parse(std::string_view json_text) {
  Json j = Json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("rescans") || !j["rescans"].is_object()) {
    throw Error(ErrorCode::InvalidReplayScript, "expected {\"rescans\": {app_id: [snapshots]}}");
  }
  ReplayScript script;
  for (const auto& [id, list] : j["rescans"].items()) {
    if (!list.is_array()) throw Error(ErrorCode::InvalidReplayScript, id + ": expected an array");
    auto& out = script.rescans[id];
    for (const auto& entry : list) {
      try {
        out.push_back(detail::snapshot_from_json(entry));
      } catch (const Error& e) {
        throw Error(ErrorCode::InvalidReplayScript, id + ": " + e.what());
      }
      if (out.back().app_id != id) {
        throw Error(ErrorCode::InvalidReplayScript, id + ": snapshot belongs to " + out.back().app_id);
      }
      if (out.size() > 1 && out[out.size() - 2].scan_date >= out.back().scan_date) {
        throw Error(ErrorCode::InvalidReplayScript, id + ": scan dates must strictly increase");
      }
    }
  }
  return script;
}

ReplayScript ReplayScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidReplayScript, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

ReportService::ReportService(Store& store, std::optional<ReplayScript> script)
    : store_(store), script_(std::move(script)) {
  if (!script_) return;
  for (const auto& [id, list] : script_->rescans) {
    auto latest = store_.latest(id);
    if (!latest) throw Error(ErrorCode::InvalidReplayScript, id + " is not in the store");
    if (!list.empty() && list.front().scan_date <= latest->scan_date) {
      throw Error(ErrorCode::InvalidReplayScript, id + ": scripted scans must postdate stored history");
    }
  }
}

namespace {

HttpResponse json_response(int status, const Json& body) { return {status, body.dump()}; }

HttpResponse error_response(int status, std::string_view error, const std::string& app_id = {}) {
  Json body = Json::object();
  body["error"] = error;
  if (!app_id.empty()) body["app_id"] = app_id;
  return json_response(status, body);
}

std::vector<std::string_view> split_path(std::string_view path) {
  if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    const auto end = path.find('/');
    parts.push_back(path.substr(0, end));
    if (end == std::string_view::npos) break;
    path.remove_prefix(end);
  }
  return parts;
}

}  // namespace

HttpResponse ReportService::handle(std::string_view method, std::string_view path) {
  const auto parts = split_path(path);
  if (parts.empty() || parts[0] != "apps") return error_response(404, "NoSuchEndpoint");

  if (parts.size() == 1) {
    if (method != "GET") return error_response(405, "MethodNotAllowed");
    return json_response(200, Json(store_.app_ids()));
  }

  const std::string id(parts[1]);
  if (!store_.contains(id)) return error_response(404, "UnknownApp", id);

  if (parts.size() == 3 && parts[2] == "reports") {
    if (method != "GET") return error_response(405, "MethodNotAllowed");
    Json list = Json::array();
    for (const auto& s : store_.history(id).snapshots) list.push_back(detail::to_json(s));
    return json_response(200, list);
  }
  if (parts.size() == 4 && parts[2] == "reports" && parts[3] == "latest") {
    if (method != "GET") return error_response(405, "MethodNotAllowed");
    return json_response(200, detail::to_json(*store_.latest(id)));
  }
  if (parts.size() == 3 && parts[2] == "rescan") {
    if (method != "POST") return error_response(405, "MethodNotAllowed");
    return rescan(id);
  }
  return error_response(404, "NoSuchEndpoint");
}

HttpResponse ReportService::rescan(const std::string& app_id) {
  std::lock_guard lock(rescan_mutex_);
  const std::vector<ScanSnapshot>* list = nullptr;
  if (script_) {
    if (auto it = script_->rescans.find(app_id); it != script_->rescans.end()) list = &it->second;
  }
  auto& cursor = cursor_[app_id];
  if (list == nullptr || cursor >= list->size()) return error_response(409, "NoMoreScriptedScans", app_id);
  const auto& next = (*list)[cursor++];
  store_.add(next);
  Json body = Json::object();
  body["app_id"] = app_id;
  body["scan_date"] = format_timestamp(next.scan_date);
  return json_response(202, body);
}

struct ServiceHandle::Impl {
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;

  void stop() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

ServiceHandle::ServiceHandle(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
ServiceHandle::ServiceHandle(ServiceHandle&&) noexcept = default;
ServiceHandle& ServiceHandle::operator=(ServiceHandle&&) noexcept = default;
ServiceHandle::~ServiceHandle() {
  if (impl_) impl_->stop();
}

int ServiceHandle::port() const noexcept { return impl_->port; }

std::string ServiceHandle::base_url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

void ServiceHandle::stop() { impl_->stop(); }

void ServiceHandle::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

ServiceHandle serve(ReportService& service, const std::string& bind_address) {
  const auto colon = bind_address.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::BindError, "expected host:port, got " + bind_address);
  const std::string host = bind_address.substr(0, colon);
  int port = -1;
  const auto port_text = std::string_view(bind_address).substr(colon + 1);
  auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || port < 0 || port > 65535) {
    throw Error(ErrorCode::BindError, "bad port in " + bind_address);
  }

  auto impl = std::make_unique<ServiceHandle::Impl>();
  impl->host = host;
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    auto r = service.handle(req.method, req.path);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl->server.Get(R"(/.*)", handler);
  impl->server.Post(R"(/.*)", handler);

  if (port == 0) {
    impl->port = impl->server.bind_to_any_port(host);
    if (impl->port < 0) throw Error(ErrorCode::BindError, "cannot bind " + bind_address);
  } else {
    if (!impl->server.bind_to_port(host, port)) throw Error(ErrorCode::BindError, "cannot bind " + bind_address);
    impl->port = port;
  }
  auto* server = &impl->server;
  impl->thread = std::thread([server] { server->listen_after_bind(); });
  impl->server.wait_until_ready();
  return ServiceHandle(std::move(impl));
}

namespace {

class LoopbackTransport final : public HttpTransport {
 public:
  explicit LoopbackTransport(ReportService& service) : service_(service) {}
  HttpResponse send(const HttpRequest& request) override {
    return service_.handle(request.method, request.path);
  }

 private:
  ReportService& service_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_loopback_transport(ReportService& service) {
  return std::make_shared<LoopbackTransport>(service);
}

}  // namespace labelforge
