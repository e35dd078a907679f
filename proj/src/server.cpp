#include "psyseg/server.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#include <httplib.h>

#include "psyseg/patch.hpp"

namespace psyseg::server {

using nlohmann::json;

namespace {

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string b64_png(const imaging::Image& img) {
  const auto bytes = imaging::encode_png(img);
  return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

/// Immutable view published after every mutation so readers never wait on `iterate`.
struct Snapshot {
  int iteration = 0;
  int answered = 0;
  int quota = 0;
  std::string phase;
  std::optional<session::PendingQuery> next;
  std::string hierarchy;                    // hierarchy.json text, empty before the first iteration
  std::map<int, std::string> overlays;      // level -> PNG bytes
};

class SessionHost {
 public:
  explicit SessionHost(session::Session s)
      : session_(std::move(s)),
        image_(session_.image()),
        superpixels_(session_.superpixels()),
        context_scale_(session_.config().context_scale) {
    publish(true);
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::shared_lock lock(snap_mutex_);
    return snap_;
  }

  // Static per-session data; safe to read without the writer lock.
  const imaging::Image& image() const { return image_; }
  const imaging::SuperpixelMap& superpixels() const { return superpixels_; }
  double context_scale() const { return context_scale_; }

  /// 201 on a new answer, 200 for a repeat of an answered query id.
  int respond(const std::string& query_id, int choice) {
    std::lock_guard writer(writer_);
    if (session_.phase() == session::Phase::Complete) return 409;
    const bool fresh = session_.record_response(query_id, choice, query::ResponseSource::Human, wall_clock_ms());
    publish(false);
    return fresh ? 201 : 200;
  }

  json iterate() {
    std::lock_guard writer(writer_);
    session_.iterate();
    publish(true);
    json summary{{"iteration", session_.iteration()}, {"phase", to_string(session_.phase())}};
    const auto& tree = *session_.tree();
    summary["depth"] = tree.depth();
    json levels = json::array();
    for (int l = 0; l <= tree.depth(); ++l) levels.push_back(tree.cut(l).size());
    summary["segments_per_level"] = levels;
    if (!session_.reports().empty()) summary["dendrogram_purity"] = session_.reports().back().dendrogram_purity;
    return summary;
  }

 private:
  void publish(bool files_changed) {
    auto snap = std::make_shared<Snapshot>();
    snap->iteration = session_.iteration();
    snap->answered = session_.answered_this_iteration();
    snap->quota = session_.quota();
    snap->phase = to_string(session_.phase());
    snap->next = session_.next_query();
    if (files_changed || !snap_) {
      if (session_.tree()) {
        snap->hierarchy = session_.tree()->to_json().dump();
        for (int l = 0; l <= session_.tree()->depth(); ++l) {
          const auto p = session_.overlay_path(l);
          if (std::filesystem::exists(p)) snap->overlays[l] = slurp(p);
        }
      }
    } else {
      snap->hierarchy = snap_->hierarchy;
      snap->overlays = snap_->overlays;
    }
    std::unique_lock lock(snap_mutex_);
    snap_ = std::move(snap);
  }

  session::Session session_;
  std::mutex writer_;
  mutable std::shared_mutex snap_mutex_;
  std::shared_ptr<const Snapshot> snap_;
  imaging::Image image_;
  imaging::SuperpixelMap superpixels_;
  double context_scale_ = imaging::kDefaultContextScale;
};

Service::Service(std::filesystem::path static_dir) : http_(std::make_unique<httplib::Server>()) {
  routes();
  if (!static_dir.empty() && !http_->set_mount_point("/", static_dir.string()))
    throw std::runtime_error("static directory not found: " + static_dir.string());
}

Service::~Service() { stop(); }

void Service::add_session(const std::string& id, session::Session s) {
  sessions_[id] = std::make_unique<SessionHost>(std::move(s));
}

SessionHost* Service::find(const std::string& id) {
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second.get();
}

void Service::listen(const std::string& host, int port) {
  if (!http_->bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  http_->listen_after_bind();
}

int Service::bind_any(const std::string& host) {
  const int port = http_->bind_to_any_port(host);
  if (port < 0) throw std::runtime_error("cannot bind " + host);
  return port;
}

void Service::run() { http_->listen_after_bind(); }
void Service::stop() {
  if (http_ && http_->is_running()) http_->stop();
}
void Service::wait_until_ready() const { http_->wait_until_ready(); }

void Service::routes() {
  auto& s = *http_;
  const std::string base = R"(/api/sessions/([^/]+))";

  s.Get(base, [this](const httplib::Request& req, httplib::Response& res) {
    auto* host = find(req.matches[1]);
    if (!host) return send_error(res, 404, "unknown session");
    const auto snap = host->snapshot();
    send_json(res, 200,
              {{"iteration", snap->iteration}, {"answered", snap->answered}, {"quota", snap->quota}, {"state", snap->phase}});
  });

  s.Get(base + "/queries/next", [this](const httplib::Request& req, httplib::Response& res) {
    auto* host = find(req.matches[1]);
    if (!host) return send_error(res, 404, "unknown session");
    const auto snap = host->snapshot();
    if (!snap->next) {
      res.status = 204;
      return;
    }
    json options = json::array();
    for (int i = 0; i < 3; ++i) {
      const int patch = snap->next->query[i];
      const auto view = imaging::extract_patch(host->image(), host->superpixels(), patch, host->context_scale());
      options.push_back({{"patch_id", patch},
                         {"crop_png_b64", b64_png(view.crop)},
                         {"context_png_b64", b64_png(imaging::outlined_context(view, host->superpixels()))}});
    }
    send_json(res, 200, {{"query_id", snap->next->id}, {"options", options}});
  });

  s.Post(base + "/responses", [this](const httplib::Request& req, httplib::Response& res) {
    auto* host = find(req.matches[1]);
    if (!host) return send_error(res, 404, "unknown session");
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return send_error(res, 400, "body is not JSON");
    }
    if (!body.contains("query_id") || !body["query_id"].is_string() || !body.contains("choice") ||
        !body["choice"].is_number_integer())
      return send_error(res, 400, "expected {query_id: string, choice: 0|1|2}");
    const int choice = body["choice"].get<int>();
    if (choice < 0 || choice > 2) return send_error(res, 400, "choice must be 0, 1 or 2");
    try {
      const int status = host->respond(body["query_id"].get<std::string>(), choice);
      if (status == 409) return send_error(res, 409, "session is complete");
      const auto snap = host->snapshot();
      send_json(res, status, {{"answered", snap->answered}, {"quota", snap->quota}, {"duplicate", status == 200}});
    } catch (const std::out_of_range& e) {
      send_error(res, 404, e.what());
    }
  });

  s.Post(base + "/iterate", [this](const httplib::Request& req, httplib::Response& res) {
    auto* host = find(req.matches[1]);
    if (!host) return send_error(res, 404, "unknown session");
    try {
      send_json(res, 200, host->iterate());
    } catch (const session::QuotaNotMet& e) {
      send_error(res, 409, e.what());
    } catch (const std::logic_error& e) {
      send_error(res, 409, e.what());
    }
  });

  s.Get(base + "/hierarchy", [this](const httplib::Request& req, httplib::Response& res) {
    auto* host = find(req.matches[1]);
    if (!host) return send_error(res, 404, "unknown session");
    const auto snap = host->snapshot();
    if (snap->hierarchy.empty()) return send_error(res, 404, "no hierarchy yet");
    res.set_content(snap->hierarchy, "application/json");
  });

  s.Get(base + R"(/segmentation/(\d+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
    auto* host = find(req.matches[1]);
    if (!host) return send_error(res, 404, "unknown session");
    const auto snap = host->snapshot();
    const auto it = snap->overlays.find(std::stoi(req.matches[2]));
    if (it == snap->overlays.end()) return send_error(res, 404, "no overlay for that level");
    res.set_content(it->second, "image/png");
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
}

}  // namespace psyseg::server
