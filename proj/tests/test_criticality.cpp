#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "egrt/criticality.hpp"
#include "oracles.hpp"

using namespace egrt::criticality;

TEST(PowerSeries, UnshuffledIsDirectEvaluation) {
  const auto s = gen_power_series(4, 1.0, 0, false);
  EXPECT_EQ(s.samples, (Series{1.0, 0.5, 1.0 / 3.0, 0.25}));
}

TEST(PowerSeries, RankOrderReproducesPowerLaw) {
  for (double e : {0.5, 1.0, 2.0}) {
    const auto s = gen_power_series(100000, e, 99);
    const auto sorted = rank_order(s.samples, true);
    for (std::size_t t = 1; t <= sorted.size(); ++t) {
      const double expect = e == 1.0 ? 1.0 / static_cast<double>(t) : std::pow(static_cast<double>(t), -e);
      ASSERT_NEAR(sorted[t - 1], expect, 1e-12 * expect) << "e=" << e << " t=" << t;
    }
  }
}

TEST(PowerSeries, SeedDeterminismAndShuffling) {
  const auto a = gen_power_series(1000, 1.0, 5);
  const auto b = gen_power_series(1000, 1.0, 5);
  const auto c = gen_power_series(1000, 1.0, 6);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_FALSE(std::is_sorted(a.samples.rbegin(), a.samples.rend()));
}

TEST(PowerSeries, RejectsBadExponents) {
  EXPECT_THROW(gen_power_series(10, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(gen_power_series(10, -1.0, 1), std::invalid_argument);
  try {
    gen_power_series(10, 6.0, 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("black noise"), std::string::npos);
  }
  EXPECT_THROW(gen_power_series(0, 1.0, 1), std::invalid_argument);
}

TEST(PowerSeries, ExponentBehaviour) {
  double prev_mean = std::numeric_limits<double>::infinity();
  double prev_frac = 2.0;
  for (double e : {0.1, 1.0, 5.0}) {
    const auto s = gen_power_series(10000, e, 3);
    EXPECT_EQ(*std::max_element(s.samples.begin(), s.samples.end()), 1.0);
    const double mean = std::accumulate(s.samples.begin(), s.samples.end(), 0.0) / 10000.0;
    const double frac = static_cast<double>(std::count_if(s.samples.begin(), s.samples.end(),
                                                          [](double v) { return v > 0.1; })) / 10000.0;
    EXPECT_LT(mean, prev_mean);
    EXPECT_LT(frac, prev_frac);
    prev_mean = mean;
    prev_frac = frac;
  }
}

TEST(ComparatorMaps, SmallCases) {
  EXPECT_EQ(pfb_map(Series{0, 1, 0}), (Series{0.5, 0.5}));
  EXPECT_EQ(nfb_map(Series{0, 1, 0}), (Series{1, 1}));
  const Series c(20, 0.37);
  for (double v : pfb_map(c)) EXPECT_EQ(v, 0.37);
  for (double v : nfb_map(c)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(pfb_map(Series{1.0}), std::invalid_argument);
  EXPECT_THROW(nfb_map(Series{}), std::invalid_argument);
}

TEST(ComparatorMaps, MatchLoopOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = gen_power_series(1000, 1.0, seed).samples;
    const auto pfb = pfb_map(s), nfb = nfb_map(s);
    const auto opfb = oracle::pfb_loop(s), onfb = oracle::nfb_loop(s);
    ASSERT_EQ(pfb.size(), 999u);
    for (std::size_t i = 0; i < pfb.size(); ++i) {
      ASSERT_NEAR(pfb[i], opfb[i], 1e-15);
      ASSERT_NEAR(nfb[i], onfb[i], 1e-15);
      ASSERT_GE(nfb[i], 0.0);
    }
  }
}

TEST(ComparatorMaps, NfbTelescopesOnMonotoneSeries) {
  const auto sorted = rank_order(gen_power_series(5000, 1.0, 8).samples, true);
  const auto nfb = nfb_map(sorted);
  const double total = std::accumulate(nfb.begin(), nfb.end(), 0.0);
  EXPECT_NEAR(total, std::abs(sorted.back() - sorted.front()), 1e-12);
}

TEST(AccumulateRelease, UnitScheduleIsIdentity) {
  const auto in = uniform_series(300, 4);
  const auto r = accumulate_release(in, {1, 1}, 9);
  EXPECT_EQ(r.bursts, in);
  EXPECT_EQ(r.events.count(), 300u);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(AccumulateRelease, CountBoundsConservationAndIntervals) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto in = uniform_series(1001, 1000 + seed);
    const auto r = accumulate_release(in, {4, 10}, seed);
    EXPECT_GE(r.events.count(), 91u);
    EXPECT_LE(r.events.count(), 251u);
    const double in_sum = std::accumulate(in.begin(), in.end(), 0.0);
    const double out_sum = std::accumulate(r.bursts.begin(), r.bursts.end(), 0.0) + r.residual;
    EXPECT_NEAR(out_sum, in_sum, 1e-12 * in_sum);
    ASSERT_EQ(r.events.intervals.size() + 1, r.events.times.size());
    for (auto gap : r.events.intervals) {
      EXPECT_GE(gap, 4u);
      EXPECT_LE(gap, 10u);
    }
    EXPECT_GE(r.events.times.front(), 3u);
    EXPECT_LE(r.events.times.front(), 9u);
  }
}

TEST(AccumulateRelease, SeedDeterminism) {
  const auto in = uniform_series(500, 1);
  const auto a = accumulate_release(in, {4, 10}, 77);
  const auto b = accumulate_release(in, {4, 10}, 77);
  EXPECT_EQ(a.bursts, b.bursts);
  EXPECT_EQ(a.events.times, b.events.times);
}

TEST(AccumulateRelease, RejectsBadSchedule) {
  const Series in{1.0};
  EXPECT_THROW(accumulate_release(in, {0, 3}, 1), std::invalid_argument);
  EXPECT_THROW(accumulate_release(in, {5, 3}, 1), std::invalid_argument);
  EXPECT_THROW(accumulate_release(Series{}, {1, 3}, 1), std::invalid_argument);
}

TEST(RankOrder, SortsStably) {
  EXPECT_EQ(rank_order(Series{3, 1, 2}, true), (Series{3, 2, 1}));
  EXPECT_EQ(rank_order(Series{3, 1, 2}, false), (Series{1, 2, 3}));
  const auto r = accumulate_release(uniform_series(1001, 2), {4, 10}, 2);
  const auto iv = rank_order(r.events.intervals, true);
  EXPECT_TRUE(std::is_sorted(iv.rbegin(), iv.rend()));
}

TEST(ThresholdModel, ClosedForm) {
  const auto small = threshold_model(3, 1.0);
  EXPECT_EQ(small.curve, (Series{1.0 / 3.0, 0.5, 1.0}));
  const auto m = threshold_model(10000, 0.1);
  for (std::size_t j = 0; j < m.curve.size(); ++j) {
    const double expect = std::pow(static_cast<double>(10000 - j), -0.1);
    ASSERT_NEAR(m.curve[j], expect, 1e-12 * expect);
  }
  EXPECT_TRUE(std::is_sorted(m.curve.begin(), m.curve.end()));
}

TEST(ThresholdModel, CrossingIsFirstAtOrAboveLevel) {
  const auto m = threshold_model(1000, 0.5);
  const double mean = std::accumulate(m.curve.begin(), m.curve.end(), 0.0) / 1000.0;
  EXPECT_DOUBLE_EQ(m.level, mean);
  ASSERT_LT(m.crossing_index, m.curve.size());
  EXPECT_GE(m.curve[m.crossing_index], mean);
  if (m.crossing_index > 0) {
    EXPECT_LT(m.curve[m.crossing_index - 1], mean);
  }
  EXPECT_EQ(threshold_model(10, 1.0, 0.0).crossing_index, 0u);
  EXPECT_EQ(threshold_model(10, 1.0, 2.0).crossing_index, 10u);
}

TEST(SmoothModel, Identities) {
  const auto s = gen_power_series(10000, 1.0, 4).samples;
  EXPECT_EQ(smooth_model(s, 1), s);
  const auto all = smooth_model(s, s.size());
  ASSERT_EQ(all.size(), 1u);
  EXPECT_NEAR(all[0], std::accumulate(s.begin(), s.end(), 0.0) / 10000.0, 1e-12);
  const auto h = smooth_model(s, 100);
  EXPECT_EQ(h.size(), 100u);
  EXPECT_NEAR(std::accumulate(h.begin(), h.end(), 0.0) / 100.0, std::accumulate(s.begin(), s.end(), 0.0) / 10000.0,
              1e-12);
  EXPECT_THROW(smooth_model(s, 3), std::invalid_argument);
  EXPECT_THROW(smooth_model(s, 0), std::invalid_argument);
}

TEST(SmoothModel, ColumnMajorRowMeans) {
  // 6 samples, factor 3 -> 2x3 matrix [[0,2,4],[1,3,5]] -> row means 2, 3
  EXPECT_EQ(smooth_model(Series{0, 1, 2, 3, 4, 5}, 3), (Series{2, 3}));
}

TEST(DetectAvalanches, Levels) {
  const Series s{0.2, 0.9, 0.1, 0.5};
  EXPECT_EQ(detect_avalanches(s, 1.0).count(), 0u);
  const auto all = detect_avalanches(s, -1e300);
  EXPECT_EQ(all.count(), 4u);
  for (auto g : all.intervals) EXPECT_EQ(g, 1u);
  EXPECT_THROW(detect_avalanches(Series{}, 0.0), std::invalid_argument);
}

TEST(DetectAvalanches, RecoversReleaseTicks) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = accumulate_release(uniform_series(1001, seed), {4, 10}, seed + 100);
    const auto ev = detect_avalanches(r.bursts, 0.0);
    EXPECT_EQ(ev.times, r.events.times);
    EXPECT_EQ(ev.magnitudes, r.events.magnitudes);
    EXPECT_EQ(ev.intervals, r.events.intervals);
  }
}
