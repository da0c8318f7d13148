#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "classlens/analytics.hpp"
#include "classlens/synth.hpp"

using namespace classlens;

namespace {

TeacherTrack track_of(const std::vector<std::tuple<double, double, double>>& pts) {
  TeacherTrack t;
  for (auto [time, x, y] : pts) t.samples.push_back({time, {x, y}, 1});
  return t;
}

TeacherTrack random_track(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TeacherTrack t;
  double time = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    time += 0.05 + u(rng) * 0.2;
    // Include exact edges now and then.
    const double x = i % 17 == 0 ? 1.0 : u(rng), y = i % 23 == 0 ? 1.0 : u(rng);
    t.samples.push_back({time, {x, y}, 1});
  }
  return t;
}

const std::vector<Zone> kZones = synth::detail::default_zones();

}  // namespace

// Heatmap -------------------------------------------------------------------

TEST(Heatmap, Examples) {
  const auto g = compute_heatmap(track_of({{0, 0.5, 0.5}, {1, 0.5, 0.5}, {2, 0.5, 0.5}, {3, 0.5, 0.5}, {4, 0.5, 0.5}}), 2, 2);
  EXPECT_EQ(g.at(1, 1), 5u);
  EXPECT_EQ(g.total, 5u);
  const auto e = compute_heatmap(TeacherTrack{});
  EXPECT_EQ(e.total, 0u);
  EXPECT_FALSE(e.normalized());
  EXPECT_EQ(e.counts.size(), 12u * 20u);
  const auto edge = compute_heatmap(track_of({{0, 1.0, 1.0}, {1, 0.0, 0.0}}), 12, 20);
  EXPECT_EQ(edge.at(11, 19), 1u);
  EXPECT_EQ(edge.at(0, 0), 1u);
}

TEST(Heatmap, UniformSweepIsFlat) {
  // Boustrophedon sweep, 10 samples per cell width, one pass per row centre.
  TeacherTrack t;
  double time = 0.0;
  const std::size_t rows = 12, cols = 20, per = 10;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < cols * per; ++k) {
      const double x = (static_cast<double>(r % 2 ? cols * per - 1 - k : k) + 0.5) / (cols * per);
      t.samples.push_back({time += 0.1, {x, (r + 0.5) / rows}, 1});
    }
  const auto g = compute_heatmap(t, rows, cols);
  const auto [mn, mx] = std::minmax_element(g.counts.begin(), g.counts.end());
  ASSERT_GT(*mn, 0u);
  EXPECT_LE(static_cast<double>(*mx) / static_cast<double>(*mn), 1.2);
}

TEST(HeatmapProperty, ConservationOnRandomTracks) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_track(rng, 1 + trial * 13);
    const auto g = compute_heatmap(t);
    std::size_t sum = 0;
    for (auto c : g.counts) sum += c;
    EXPECT_EQ(sum, t.samples.size());
    EXPECT_EQ(g.total, t.samples.size());
    const auto norm = *g.normalized();
    double s = 0.0;
    for (double v : norm) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

// Zones ---------------------------------------------------------------------

TEST(Zones, Examples) {
  auto all_board = zone_occupancy(track_of({{0, 0.5, 0.3}, {1, 0.4, 0.2}}).samples, kZones);
  EXPECT_EQ(all_board.fractions["board"], 1.0);
  EXPECT_EQ(all_board.fractions["students"], 0.0);
  auto half = zone_occupancy(track_of({{0, 0.5, 0.3}, {1, 0.5, 0.8}}).samples, kZones);
  EXPECT_EQ(half.fractions["board"], 0.5);
  EXPECT_EQ(half.fractions["students"], 0.5);
  // A point on the board zone's lower edge counts as inside.
  auto edge = zone_occupancy(track_of({{0, 0.5, 0.55}}).samples, kZones);
  EXPECT_EQ(edge.fractions["board"], 1.0);
}

TEST(ZonesProperty, OrderIndependentAndBounded) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = random_track(rng, 200);
    const auto a = zone_occupancy(t.samples, kZones);
    std::shuffle(t.samples.begin(), t.samples.end(), rng);
    const auto b = zone_occupancy(t.samples, kZones);
    EXPECT_EQ(a.fractions, b.fractions);
    for (const auto& [k, v] : a.fractions) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

// Trace window --------------------------------------------------------------

TEST(Trace, Examples) {
  TeacherTrack t;
  for (int i = 0; i <= 1000; ++i) t.samples.push_back({i * 0.1, {0.5, 0.5}, 1});
  const auto a = trace_window(t, 30.0);
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a.front().time, 0.0);
  EXPECT_DOUBLE_EQ(a.back().time, 30.0);
  EXPECT_TRUE(trace_window(t, 500.0).empty());
}

TEST(TraceProperty, MatchesLinearScanAndSlides) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> now(0.0, 250.0);
  const auto t = random_track(rng, 2000);
  for (int q = 0; q < 500; ++q) {
    const double n1 = now(rng), n2 = n1 + now(rng) / 5.0;
    std::vector<double> want;
    for (const auto& s : t.samples)
      if (s.time > n1 - 60.0 && s.time <= n1) want.push_back(s.time);
    const auto got = trace_window(t, n1);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].time, want[i]);
    const auto later = trace_window(t, n2);
    for (const auto& s : got)
      if (s.time > n2 - 60.0) {
        EXPECT_TRUE(std::any_of(later.begin(), later.end(), [&](auto& x) { return x.time == s.time; }));
      }
  }
}

// Donut ---------------------------------------------------------------------

namespace {

ActionEvent event(ActionKind k, double a, double b) { return {k, {}, {a, b}, 1.0, EventSource::model}; }

}  // namespace

TEST(Donut, Examples) {
  EventTimeline tl{"s", {event(ActionKind::writing_on_board, 600, 1200)}};
  auto p = action_proportions(tl, {}, kZones, 3600.0);
  EXPECT_NEAR(p.outer["writing_on_board"], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(p.outer["none"], 5.0 / 6.0, 1e-12);

  // Unmerged overlapping same-kind events are not double counted.
  EventTimeline ov{"s", {event(ActionKind::writing_on_board, 0, 5), event(ActionKind::writing_on_board, 4, 9)}};
  EXPECT_NEAR(action_proportions(ov, {}, kZones, 60.0).outer["writing_on_board"], 9.0 / 60.0, 1e-12);

  const auto empty = action_proportions(EventTimeline{"s", {}}, {}, kZones, 60.0);
  ASSERT_EQ(empty.outer.size(), 1u);
  EXPECT_EQ(empty.outer.at("none"), 1.0);
}

TEST(Donut, InnerRingSplitsByZone) {
  // Teacher at the board for [0,10), with students for [10,20].
  TeacherTrack t;
  for (int i = 0; i <= 200; ++i) t.samples.push_back({i * 0.1, {0.5, i * 0.1 < 10.0 - 1e-9 ? 0.3 : 0.8}, 1});
  EventTimeline tl{"s", {event(ActionKind::pointing_at_board, 0, 20)}};
  const auto p = action_proportions(tl, t, kZones, 40.0);
  EXPECT_NEAR(p.outer.at("pointing_at_board"), 0.5, 1e-12);
  EXPECT_NEAR(p.inner.at("pointing_at_board").at("board"), 0.25, 0.01);
  EXPECT_NEAR(p.inner.at("pointing_at_board").at("students"), 0.25, 0.01);
  // A short event takes the zone at its midpoint.
  EventTimeline shortev{"s", {event(ActionKind::hand_gesture, 14.6, 15.2)}};
  const auto q = action_proportions(shortev, t, kZones, 40.0);
  EXPECT_NEAR(q.inner.at("hand_gesture").at("students"), 0.6 / 40.0, 1e-12);
}

TEST(DonutProperty, OuterRingSumsToOne) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(-10.0, 130.0), len(0.0, 30.0);
  std::uniform_int_distribution<int> kind(0, 5);
  for (int trial = 0; trial < 300; ++trial) {
    EventTimeline tl{"s", {}};
    for (int k = 0; k < trial % 20; ++k) {
      const double a = u(rng);
      tl.events.push_back(event(static_cast<ActionKind>(kind(rng)), a, a + len(rng)));
    }
    const auto track = random_track(rng, 300);
    const auto p = action_proportions(tl, track, kZones, 120.0);
    double sum = 0.0;
    for (const auto& [k, v] : p.outer) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
    for (const auto& [k, zones] : p.inner) {
      double z = 0.0;
      for (const auto& [name, v] : zones) z += v;
      EXPECT_NEAR(z, p.outer.at(k), 1e-9) << k;
    }
  }
}

// Speak / pause -------------------------------------------------------------

TEST(SpeakPause, Examples) {
  std::vector<Utterance> utts;
  for (int k = 0; k < 40; ++k) utts.push_back({{k * 90.0, k * 90.0 + 60.0}});
  const auto r = speak_pause_ratio(utts, 3600.0);
  ASSERT_TRUE(r.ratio);
  EXPECT_EQ(*r.ratio, 2.0);
  EXPECT_EQ(*speak_pause_ratio({}, 3600.0).ratio, 0.0);
  const auto full = speak_pause_ratio({{{0.0, 60.0}}}, 60.0);
  EXPECT_TRUE(full.ratio_infinite);
  EXPECT_FALSE(full.ratio);
}

// Teaching style ------------------------------------------------------------

TEST(TeachingStyle, Examples) {
  const std::map<std::string, std::string> map{{"questioning", "active"}, {"lecturing", "passive"}};
  auto manual = [](double a, double b, std::string l) { return RawAnnotation{{a, b}, std::move(l), AnnotationSource::manual}; };
  auto s = teaching_style_balance({manual(0, 1800, "questioning"), manual(1800, 3600, "lecturing")}, map);
  EXPECT_EQ(s.active_fraction, std::optional<double>(0.5));
  EXPECT_EQ(s.passive_fraction, std::optional<double>(0.5));
  s = teaching_style_balance({manual(0, 10, "questioning")}, map);
  EXPECT_EQ(s.active_fraction, std::optional<double>(1.0));
  EXPECT_EQ(s.passive_fraction, std::optional<double>(0.0));
  // Overlap within one class counts once; unmapped labels are ignored.
  s = teaching_style_balance({manual(0, 10, "questioning"), manual(5, 15, "questioning"), manual(15, 30, "lecturing"),
                              manual(0, 100, "drinks water")},
                             map);
  EXPECT_DOUBLE_EQ(*s.active_fraction, 0.5);
  s = teaching_style_balance({manual(0, 10, "drinks water")}, map);
  EXPECT_FALSE(s.active_fraction);
  EXPECT_FALSE(s.passive_fraction);
  // Model-sourced labels never feed the balance.
  s = teaching_style_balance({RawAnnotation{{0, 10}, "questioning", AnnotationSource::model}}, map);
  EXPECT_FALSE(s.active_fraction);
}

// XY series -----------------------------------------------------------------

TEST(XySeries, AtMostTwoSamplesPerSecond) {
  std::mt19937_64 rng(25);
  const auto t = random_track(rng, 3000);
  const double duration = t.samples.back().time;
  const auto xy = downsample_xy(t.samples, duration);
  EXPECT_LE(static_cast<double>(xy.size()), 2.0 * duration + 1.0);
  for (std::size_t i = 1; i < xy.size(); ++i) EXPECT_GT(xy[i].time, xy[i - 1].time);
  // Each kept sample is the nearest one to some 0.5 s tick.
  for (const auto& s : xy) {
    const double tick = std::round(s.time / 0.5) * 0.5;
    for (const auto& o : t.samples) EXPECT_GE(std::abs(o.time - tick) + 1e-12, std::abs(s.time - tick));
  }
}
