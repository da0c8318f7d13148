#pragma once

// Read-only HTTP service over a directory of analyzed sessions. Request
// handling is split into pure functions over an immutable snapshot, with a
// thin cpp-httplib layer on top.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "classlens/actions.hpp"
#include "classlens/ingest.hpp"
#include "classlens/summary.hpp"

namespace classlens::service {

struct SessionEntry {
  std::string session_id;
  fs::path directory;
  bool analyzed = false;
  double duration = 0.0;
  std::string analyzed_at;  // summary.json mtime, UTC ISO-8601
  std::optional<fs::path> media;
  std::string summary_bytes;
  json summary;
  EventTimeline timeline;
};

struct Snapshot {
  fs::path data_dir;
  std::vector<SessionEntry> sessions;  // sorted by session_id

  const SessionEntry* find(std::string_view id) const {
    for (const auto& s : sessions)
      if (s.session_id == id) return &s;
    return nullptr;
  }
};

namespace detail {

inline std::string iso_utc(fs::file_time_type t) {
  const auto sys = std::chrono::file_clock::to_sys(t);
  const std::time_t tt = std::chrono::system_clock::to_time_t(
      std::chrono::time_point_cast<std::chrono::system_clock::duration>(sys));
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline SessionEntry scan_one(const fs::path& dir) {
  SessionEntry e;
  e.directory = dir;
  e.session_id = dir.filename().string();
  std::string media_rel;
  fs::path media_base = dir;

  // The manifest, if readable, supplies id, duration and media.
  if (const auto mp = dir / kManifestName; fs::exists(mp)) {
    try {
      const json mj = json::parse(read_file(mp));
      e.session_id = mj.value("session_id", e.session_id);
      e.duration = mj.value("duration", 0.0);
      media_rel = mj.value("media_path", std::string{});
    } catch (const std::exception&) {
    }
  }
  if (const auto sp = dir / kSummaryName; fs::exists(sp)) {
    try {
      std::string bytes = read_file(sp);
      json summary = json::parse(bytes);
      EventTimeline timeline = timeline_from_json(json::parse(read_file(dir / kTimelineName)));
      e.session_id = summary.at("session_id").get<std::string>();
      e.duration = summary.at("duration").get<double>();
      (void)summary.at("windows").at("fine");
      (void)summary.at("xy_series");
      media_rel = summary.value("media_path", std::string{});
      e.analyzed_at = iso_utc(fs::last_write_time(sp));
      e.summary_bytes = std::move(bytes);
      e.summary = std::move(summary);
      e.timeline = std::move(timeline);
      e.analyzed = true;
    } catch (const std::exception&) {
      e.analyzed = false;  // degraded entry; listed but not served
      e.summary_bytes.clear();
      e.summary = json();
      e.timeline = {};
      e.analyzed_at.clear();
    }
  }
  if (!media_rel.empty()) {
    const fs::path media = media_base / media_rel;
    if (fs::is_regular_file(media)) e.media = media;
  }
  return e;
}

}  // namespace detail

/// Each immediate subdirectory holding a manifest or summary is a session.
/// Duplicate ids keep the first directory in name order.
inline Snapshot scan_data_dir(const fs::path& data_dir) {
  Snapshot snap;
  snap.data_dir = data_dir;
  if (!fs::is_directory(data_dir)) return snap;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(data_dir))
    if (entry.is_directory() &&
        (fs::exists(entry.path() / kManifestName) || fs::exists(entry.path() / kSummaryName)))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    auto e = detail::scan_one(d);
    if (!snap.find(e.session_id)) snap.sessions.push_back(std::move(e));
  }
  std::sort(snap.sessions.begin(), snap.sessions.end(),
            [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
  return snap;
}

// Pure handlers -------------------------------------------------------------

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

inline ApiResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump(), "application/json"};
}

inline ApiResponse get_sessions(const Snapshot& snap) {
  json list = json::array();
  for (const auto& s : snap.sessions)
    list.push_back({{"session_id", s.session_id},
                    {"duration", s.duration},
                    {"analyzed", s.analyzed},
                    {"analyzed_at", s.analyzed ? json(s.analyzed_at) : json(nullptr)},
                    {"media_available", s.media.has_value()}});
  return {200, json{{"sessions", std::move(list)}}.dump(), "application/json"};
}

inline ApiResponse get_summary(const Snapshot& snap, std::string_view id) {
  const auto* s = snap.find(id);
  if (!s) return error_response(404, "unknown session '" + std::string(id) + "'");
  if (!s->analyzed) return error_response(404, "session '" + std::string(id) + "' has no valid summary");
  return {200, s->summary_bytes, "application/json"};
}

/// Closed query interval for the review panels.
struct TimeQuery {
  double from = 0.0;
  double to = 0.0;
};

/// Parses and checks from/to against the session duration; `to` past the end
/// clamps. Returns an error message on failure.
inline std::variant<TimeQuery, std::string> parse_time_query(const std::optional<std::string>& from,
                                                             const std::optional<std::string>& to,
                                                             double duration) {
  TimeQuery q{0.0, duration};
  if (from) {
    const auto v = parse_double(*from);
    if (!v || !std::isfinite(*v)) return std::string("from must be a number");
    q.from = *v;
  }
  if (to) {
    const auto v = parse_double(*to);
    if (!v || !std::isfinite(*v)) return std::string("to must be a number");
    q.to = *v;
  }
  if (q.from < 0.0) return std::string("from must be >= 0");
  if (!(q.from < q.to)) return std::string("from must be below to");
  q.to = std::min(q.to, duration);
  if (!(q.from < q.to)) return std::string("from must be below the session duration");
  return q;
}

/// Intervals count when their overlap with [from, to] has positive length;
/// instants (zero-length events, samples) count when from <= t <= to.
inline bool in_query(double start, double end, const TimeQuery& q) {
  if (start == end) return q.from <= start && start <= q.to;
  return std::min(end, q.to) - std::max(start, q.from) > 0.0;
}

inline json timeline_payload(const SessionEntry& s, const TimeQuery& q) {
  json windows = json::array();
  for (const auto& w : s.summary.at("windows").at("fine"))
    if (in_query(w.at("start").get<double>(), w.at("end").get<double>(), q)) windows.push_back(w);
  json samples = json::array();
  for (const auto& p : s.summary.at("xy_series")) {
    const double t = p.at("t").get<double>();
    if (q.from <= t && t <= q.to) samples.push_back(p);
  }
  json events = json::array();
  for (const auto& e : s.timeline.events)
    if (in_query(e.interval.start, e.interval.end, q)) events.push_back(event_to_json(e));
  return json{{"session_id", s.session_id}, {"from", q.from},          {"to", q.to},
              {"windows", std::move(windows)}, {"samples", std::move(samples)}, {"events", std::move(events)}};
}

inline ApiResponse get_timeline(const Snapshot& snap, std::string_view id, const std::optional<std::string>& from,
                                const std::optional<std::string>& to) {
  const auto* s = snap.find(id);
  if (!s) return error_response(404, "unknown session '" + std::string(id) + "'");
  if (!s->analyzed) return error_response(404, "session '" + std::string(id) + "' has no valid summary");
  const auto q = parse_time_query(from, to, s->duration);
  if (const auto* msg = std::get_if<std::string>(&q)) return error_response(400, *msg);
  return {200, timeline_payload(*s, std::get<TimeQuery>(q)).dump(), "application/json"};
}

// Byte ranges ---------------------------------------------------------------

struct RangePlan {
  int status = 200;  // 200, 206 or 416
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string content_range;  // empty for 200
};

/// Resolves a `Range` header against a resource of `size` bytes. Only one
/// `bytes=` range is honoured; lists are refused with 416. An unparseable
/// header is ignored (full response), as HTTP permits.
inline RangePlan plan_range(std::optional<std::string_view> header, std::size_t size) {
  RangePlan full{200, 0, size, {}};
  const RangePlan refuse{416, 0, 0, "bytes */" + std::to_string(size)};
  if (!header) return full;
  std::string_view h = trim(*header);
  if (h.substr(0, 6) != "bytes=") return full;
  h.remove_prefix(6);
  if (h.find(',') != std::string_view::npos) return refuse;
  const auto dash = h.find('-');
  if (dash == std::string_view::npos) return full;
  const auto first_txt = trim(h.substr(0, dash));
  const auto last_txt = trim(h.substr(dash + 1));
  const auto digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  std::size_t first = 0, last = 0;
  if (first_txt.empty()) {
    if (!digits(last_txt)) return full;
    const auto suffix = std::stoull(std::string(last_txt));
    if (suffix == 0 || size == 0) return refuse;
    first = size - std::min<std::size_t>(suffix, size);
    last = size - 1;
  } else {
    if (!digits(first_txt) || (!last_txt.empty() && !digits(last_txt))) return full;
    first = std::stoull(std::string(first_txt));
    last = last_txt.empty() ? size - 1 : std::stoull(std::string(last_txt));
    if (first >= size) return refuse;
    if (last < first) return full;
    last = std::min(last, size - 1);
  }
  return {206, first, last - first + 1,
          "bytes " + std::to_string(first) + "-" + std::to_string(last) + "/" + std::to_string(size)};
}

inline std::string media_type(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".mp4" || ext == ".m4v") return "video/mp4";
  if (ext == ".webm") return "video/webm";
  if (ext == ".mov") return "video/quicktime";
  if (ext == ".wav") return "audio/wav";
  return "application/octet-stream";
}

// HTTP layer ----------------------------------------------------------------

struct ServiceOptions {
  fs::path data_dir = "data";
  std::optional<fs::path> static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
};

class Service {
 public:
  explicit Service(ServiceOptions opt) : opt_(std::move(opt)) {
    snapshot_ = std::make_shared<const Snapshot>(scan_data_dir(opt_.data_dir));
    routes();
  }

  std::shared_ptr<const Snapshot> snapshot() const { return std::atomic_load(&snapshot_); }

  /// Rescans the data directory; concurrent reloads run one at a time.
  std::shared_ptr<const Snapshot> reload() {
    std::lock_guard lock(reload_mutex_);
    auto fresh = std::make_shared<const Snapshot>(scan_data_dir(opt_.data_dir));
    std::atomic_store(&snapshot_, std::shared_ptr<const Snapshot>(fresh));
    return fresh;
  }

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind() {
    if (opt_.port == 0) return server_.bind_to_any_port(opt_.host);
    return server_.bind_to_port(opt_.host, opt_.port) ? opt_.port : -1;
  }

  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  }

  static std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  }

  void routes() {
    if (opt_.static_dir) server_.set_mount_point("/", opt_.static_dir->string());

    server_.Get("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
      send(res, get_sessions(*snapshot()));
    });
    server_.Get(R"(/api/sessions/([^/]+)/summary)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_summary(*snapshot(), req.matches[1].str()));
    });
    server_.Get(R"(/api/sessions/([^/]+)/timeline)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_timeline(*snapshot(), req.matches[1].str(), param(req, "from"), param(req, "to")));
    });
    server_.Get(R"(/api/sessions/([^/]+)/media)", [this](const httplib::Request& req, httplib::Response& res) {
      serve_media(req, res);
    });
    server_.Post("/api/reload", [this](const httplib::Request&, httplib::Response& res) {
      const auto snap = reload();
      send(res, {200, json{{"sessions", snap->sessions.size()}}.dump(), "application/json"});
    });
  }

  void serve_media(const httplib::Request& req, httplib::Response& res) {
    const auto snap = snapshot();
    const std::string id = req.matches[1].str();
    const auto* s = snap->find(id);
    if (!s) return send(res, error_response(404, "unknown session '" + id + "'"));
    if (!s->media || !fs::is_regular_file(*s->media))
      return send(res, error_response(404, "no media for session '" + id + "'"));

    const fs::path path = *s->media;
    const std::size_t size = fs::file_size(path);
    // get_header_value returns by value; keep it alive for the view.
    const std::string range = req.get_header_value("Range");
    const RangePlan plan =
        plan_range(req.has_header("Range") ? std::optional<std::string_view>(range) : std::nullopt, size);
    // Ranges are resolved here; stop httplib from slicing the body again.
    const_cast<httplib::Request&>(req).ranges.clear();

    res.set_header("Accept-Ranges", "bytes");
    if (plan.status == 416) {
      res.set_header("Content-Range", plan.content_range);
      return send(res, error_response(416, "range not satisfiable"));
    }
    res.status = plan.status;
    if (plan.status == 206) res.set_header("Content-Range", plan.content_range);
    const std::size_t offset = plan.offset;
    res.set_content_provider(plan.length, media_type(path),
                             [path, offset](std::size_t off, std::size_t len, httplib::DataSink& sink) {
                               std::ifstream in(path, std::ios::binary);
                               if (!in) return false;
                               in.seekg(static_cast<std::streamoff>(offset + off));
                               std::string buf(std::min<std::size_t>(len, 1 << 16), '\0');
                               in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
                               const auto got = static_cast<std::size_t>(in.gcount());
                               if (got == 0) return false;
                               return sink.write(buf.data(), got);
                             });
  }

  ServiceOptions opt_;
  httplib::Server server_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::mutex reload_mutex_;
};

}  // namespace classlens::service
