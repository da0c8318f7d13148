#include <gtest/gtest.h>

#include <future>
#include <sstream>
#include <thread>

#include "classlens/classlens.hpp"
#include "classlens/service.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace classlens;
using namespace classlens::service;
namespace ts = testing_support;

namespace {

fs::path analyzed_session(const fs::path& data, const std::string& name, const std::string& scenario,
                          double duration) {
  const auto dir = data / name;
  synth::write_session(synth::make_session(scenario, synth::kDefaultSeed, duration), dir);
  AnalyzeOptions opt;
  opt.session_dir = dir;
  std::ostringstream log, err;
  if (run_analyze(opt, log, err) != 0) throw std::runtime_error(err.str());
  return dir;
}

// Shared fixture: two analyzed sessions, built once.
class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new fs::path(ts::temp_dir("service_data"));
    analyzed_session(*data_, "a", "lecture_audio", 130.0);
    analyzed_session(*data_, "b", "stationary", 20.0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*data_);
    delete data_;
  }
  static fs::path* data_;
};

fs::path* ServiceTest::data_ = nullptr;

std::string dir_hash(const fs::path& root) {
  std::vector<std::string> parts;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    std::string p = fs::relative(e.path(), root).string();
    if (e.is_regular_file())
      p += ":" + std::to_string(std::hash<std::string>{}(read_file(e.path()))) + ":" +
           std::to_string(e.last_write_time().time_since_epoch().count());
    parts.push_back(p);
  }
  std::sort(parts.begin(), parts.end());
  std::string all;
  for (const auto& p : parts) all += p + "\n";
  return all;
}

}  // namespace

// Pure handlers ---------------------------------------------------------------

TEST_F(ServiceTest, SessionsListsBoth) {
  const auto snap = scan_data_dir(*data_);
  const auto r = get_sessions(snap);
  EXPECT_EQ(r.status, 200);
  const json j = json::parse(r.body);
  ASSERT_EQ(j["sessions"].size(), 2u);
  EXPECT_TRUE(j["sessions"][0]["analyzed"].get<bool>());
  EXPECT_TRUE(j["sessions"][0]["media_available"].get<bool>());
}

TEST_F(ServiceTest, SummaryIsTheFileBytes) {
  const auto snap = scan_data_dir(*data_);
  const auto& id = snap.sessions[0].session_id;
  const auto r = get_summary(snap, id);
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body, read_file(*data_ / "a" / kSummaryName));
  EXPECT_EQ(get_summary(snap, "nope").status, 404);
  EXPECT_EQ(json::parse(get_summary(snap, "nope").body)["error"], "unknown session 'nope'");
}

TEST_F(ServiceTest, TimelineThirtySecondsHasThreeFineWindows) {
  const auto snap = scan_data_dir(*data_);
  const auto& s = snap.sessions[0];
  ASSERT_EQ(s.duration, 130.0);
  const auto r = get_timeline(snap, s.session_id, "0", "30");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)["windows"].size(), 3u);
}

TEST_F(ServiceTest, TimelineQueryErrors) {
  const auto snap = scan_data_dir(*data_);
  const auto& id = snap.sessions[0].session_id;
  EXPECT_EQ(get_timeline(snap, id, "30", "10").status, 400);
  EXPECT_EQ(get_timeline(snap, id, "-1", "10").status, 400);
  EXPECT_EQ(get_timeline(snap, id, "abc", std::nullopt).status, 400);
  EXPECT_EQ(get_timeline(snap, id, "200", "300").status, 400);
  EXPECT_EQ(get_timeline(snap, "ghost", "0", "1").status, 404);
  const json clamped = json::parse(get_timeline(snap, id, "100", "500").body);
  EXPECT_EQ(clamped["to"], 130.0);
}

TEST_F(ServiceTest, TimelinePayloadMatchesBruteForceFilter) {
  const auto snap = scan_data_dir(*data_);
  std::mt19937_64 rng(21);
  for (const auto& s : snap.sessions) {
    std::uniform_real_distribution<double> u(0.0, s.duration);
    for (int trial = 0; trial < 60; ++trial) {
      double a = u(rng), b = u(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (trial == 0) a = 0.0, b = s.duration;
      const json got = timeline_payload(s, {a, b});
      const json want = oracles::timeline_filter(s.directory, a, b);
      EXPECT_EQ(got["windows"], want["windows"]);
      EXPECT_EQ(got["samples"], want["samples"]);
      EXPECT_EQ(got["events"], want["events"]);
      // Subset of the full timeline.
      EXPECT_LE(got["events"].size(), s.timeline.events.size());
    }
  }
}

TEST(ServiceScan, EmptyAndCorruptDirectories) {
  const auto data = ts::temp_dir("service_scan");
  EXPECT_TRUE(scan_data_dir(data).sessions.empty());
  EXPECT_TRUE(scan_data_dir(data / "absent").sessions.empty());
  EXPECT_EQ(json::parse(get_sessions(scan_data_dir(data)).body)["sessions"], json::array());

  const auto dir = analyzed_session(data, "c", "stationary", 10.0);
  write_file(dir / kSummaryName, "{\"session_id\": ");
  const auto snap = scan_data_dir(data);
  ASSERT_EQ(snap.sessions.size(), 1u);
  EXPECT_FALSE(snap.sessions[0].analyzed);
  EXPECT_EQ(get_summary(snap, snap.sessions[0].session_id).status, 404);
  EXPECT_EQ(json::parse(get_sessions(snap).body)["sessions"][0]["analyzed"], false);
  fs::remove_all(data);
}

TEST(Range, PlanExamples) {
  EXPECT_EQ(plan_range(std::nullopt, 5000).status, 200);
  EXPECT_EQ(plan_range(std::nullopt, 5000).length, 5000u);
  auto p = plan_range("bytes=0-1023", 5000);
  EXPECT_EQ(p.status, 206);
  EXPECT_EQ(p.length, 1024u);
  EXPECT_EQ(p.content_range, "bytes 0-1023/5000");
  p = plan_range("bytes=4000-", 5000);
  EXPECT_EQ(p.offset, 4000u);
  EXPECT_EQ(p.length, 1000u);
  p = plan_range("bytes=-100", 5000);
  EXPECT_EQ(p.offset, 4900u);
  EXPECT_EQ(p.length, 100u);
  p = plan_range("bytes=4990-9999", 5000);
  EXPECT_EQ(p.length, 10u);
  EXPECT_EQ(plan_range("bytes=5000-5001", 5000).status, 416);
  EXPECT_EQ(plan_range("bytes=5000-5001", 5000).content_range, "bytes */5000");
  EXPECT_EQ(plan_range("bytes=0-1,5-6", 5000).status, 416);
  EXPECT_EQ(plan_range("items=0-1", 5000).status, 200);
}

TEST(RangeProperty, SatisfiableRangesStayInBounds) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t size = 1 + rng() % 10000;
    const std::size_t a = rng() % 12000, b = rng() % 12000;
    const auto p = plan_range("bytes=" + std::to_string(a) + "-" + std::to_string(b), size);
    if (a >= size) {
      EXPECT_EQ(p.status, 416);
    } else if (b < a) {
      EXPECT_EQ(p.status, 200);
    } else {
      EXPECT_EQ(p.status, 206);
      EXPECT_EQ(p.offset, a);
      EXPECT_EQ(p.offset + p.length - 1, std::min(b, size - 1));
    }
  }
}

// Real HTTP -------------------------------------------------------------------

namespace {

struct Running {
  explicit Running(const fs::path& data) : svc(ServiceOptions{data, std::nullopt, "127.0.0.1", 0}) {
    port = svc.bind();
    thread = std::thread([this] { svc.listen_after_bind(); });
    svc.wait_until_ready();
  }
  ~Running() {
    svc.stop();
    thread.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
  Service svc;
  int port = -1;
  std::thread thread;
};

}  // namespace

TEST_F(ServiceTest, HttpContract) {
  const std::string before = dir_hash(*data_);
  {
    Running srv(*data_);
    ASSERT_GT(srv.port, 0);
    auto cli = srv.client();
    const auto snap = srv.svc.snapshot();
    const std::string id = snap->sessions[0].session_id;
    const std::string base = "/api/sessions/" + id;
    const std::string media = read_file(*data_ / "a" / "media.mp4");

    auto r = cli.Get("/api/sessions");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(json::parse(r->body)["sessions"].size(), 2u);

    r = cli.Get(base + "/summary");
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->body, read_file(*data_ / "a" / kSummaryName));
    EXPECT_EQ(cli.Get("/api/sessions/ghost/summary")->status, 404);

    r = cli.Get(base + "/timeline?from=0&to=30");
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(json::parse(r->body)["windows"].size(), 3u);
    r = cli.Get(base + "/timeline?from=30&to=10");
    EXPECT_EQ(r->status, 400);
    EXPECT_TRUE(json::parse(r->body).contains("error"));

    r = cli.Get(base + "/media");
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->body, media);
    EXPECT_EQ(r->get_header_value("Accept-Ranges"), "bytes");

    r = cli.Get(base + "/media", {{"Range", "bytes=0-1023"}});
    EXPECT_EQ(r->status, 206);
    EXPECT_EQ(r->body.size(), 1024u);
    EXPECT_EQ(r->body, media.substr(0, 1024));
    EXPECT_EQ(r->get_header_value("Content-Range"), "bytes 0-1023/" + std::to_string(media.size()));

    std::mt19937_64 rng(23);
    for (int k = 0; k < 40; ++k) {
      std::size_t a = rng() % media.size(), b = rng() % media.size();
      if (a > b) std::swap(a, b);
      r = cli.Get(base + "/media", {{"Range", "bytes=" + std::to_string(a) + "-" + std::to_string(b)}});
      ASSERT_TRUE(r);
      EXPECT_EQ(r->status, 206);
      EXPECT_EQ(r->body, media.substr(a, b - a + 1));
    }

    r = cli.Get(base + "/media", {{"Range", "bytes=" + std::to_string(media.size()) + "-"}});
    EXPECT_EQ(r->status, 416);
    EXPECT_EQ(r->get_header_value("Content-Range"), "bytes */" + std::to_string(media.size()));
    EXPECT_EQ(cli.Get("/api/sessions/ghost/media")->status, 404);

    // Concurrent identical requests see identical bodies.
    std::vector<std::future<std::string>> jobs;
    for (int k = 0; k < 8; ++k)
      jobs.push_back(std::async(std::launch::async, [&] {
        auto c = srv.client();
        auto res = c.Get(base + "/timeline?from=10&to=70");
        return res ? res->body : std::string();
      }));
    const std::string first = jobs[0].get();
    EXPECT_FALSE(first.empty());
    for (std::size_t k = 1; k < jobs.size(); ++k) EXPECT_EQ(jobs[k].get(), first);
  }
  EXPECT_EQ(dir_hash(*data_), before);  // nothing written by the service
}

TEST(ServiceHttp, ReloadPicksUpNewSessions) {
  const auto data = ts::temp_dir("service_reload");
  Running srv(data);
  auto cli = srv.client();
  EXPECT_EQ(json::parse(cli.Get("/api/sessions")->body)["sessions"].size(), 0u);
  analyzed_session(data, "late", "stationary", 10.0);
  EXPECT_EQ(json::parse(cli.Get("/api/sessions")->body)["sessions"].size(), 0u);
  const auto r = cli.Post("/api/reload");
  ASSERT_TRUE(r);
  EXPECT_EQ(json::parse(r->body)["sessions"], 1);
  EXPECT_EQ(json::parse(cli.Get("/api/sessions")->body)["sessions"].size(), 1u);
  fs::remove_all(data);
}
