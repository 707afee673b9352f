#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "egrt/procedural.hpp"
#include "oracles.hpp"

using namespace egrt;
using namespace egrt::procedural;

namespace {

// Vehicle fixtures fixed by a sweep over heading, dt and turn gain.
Vehicle single_target_vehicle() {
  const auto field = CmykField::unit();
  Vehicle v;
  v.position = field.centroid();
  v.heading = std::numbers::pi / 2.0;
  v.sensor_offset = 0.05;
  v.speed_gain = 1.0;
  v.turn_gain = 20.0;
  v.target = CmykPoint::from_cmy(1, 0, 0);
  v.goal_radius = 0.02;
  return v;
}
constexpr double kVehicleDt = 0.01;

Vehicle expanding_vehicle() {
  Vehicle v = single_target_vehicle();
  v.heading = 1.0;
  v.speed_gain = 3.0;
  v.goal_radius = 0.05;
  return v;
}
constexpr double kExpandingDt = 0.005;
constexpr std::size_t kExpandingSteps = 20000;

std::vector<std::vector<CmykPoint>> nested_stages() {
  const auto c = CmykPoint::from_cmy(1, 0, 0), m = CmykPoint::from_cmy(0, 1, 0), y = CmykPoint::from_cmy(0, 0, 1);
  const auto cm = CmykPoint::from_cmy(0.5, 0.5, 0), my = CmykPoint::from_cmy(0, 0.5, 0.5),
             yc = CmykPoint::from_cmy(0.5, 0, 0.5);
  return {{c}, {c, m, y}, {c, m, y, cm, my, yc}};
}

double frob(const Mat2& m) { return m.frobenius(); }

}  // namespace

TEST(FieldForce, ZeroGainGivesZeroForce) {
  const Vec2 f = field_force({0.0, 37.0}, {3.0, -4.0});
  EXPECT_EQ(f.x, 0.0);
  EXPECT_EQ(f.y, 0.0);
}

TEST(FieldForce, NinetyDegreesRotatesVelocity) {
  const Vec2 f = field_force({1.0, 90.0}, {1.0, 0.0});
  EXPECT_NEAR(f.x, 0.0, 1e-15);
  EXPECT_NEAR(f.y, 1.0, 1e-15);
}

TEST(FieldForce, OppositeAnglesCancel) {
  const Vec2 v{0.3, -1.7};
  const Vec2 a = field_force({2.5, 0.0}, v), b = field_force({2.5, 180.0}, v);
  EXPECT_NEAR(a.x + b.x, 0.0, 1e-14);
  EXPECT_NEAR(a.y + b.y, 0.0, 1e-14);
}

TEST(FieldForce, MagnitudeIsGainTimesSpeed) {
  SplitMix64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const CurlField f{rng.uniform() * 5, rng.uniform() * 720 - 360};
    const Vec2 v{rng.uniform() - 0.5, rng.uniform() - 0.5};
    EXPECT_NEAR(norm(field_force(f, v)), f.gain * norm(v), 1e-12);
  }
}

TEST(FieldForce, RejectsNonFiniteVelocity) {
  EXPECT_THROW(field_force({1, 0}, {NAN, 0}), std::invalid_argument);
}

TEST(RunTrial, UnperturbedReachHasNoError) {
  const auto r = run_trial({}, {0.0, 45.0}, {0, 0}, {0.1, 0.05}, 100, 0.01);
  EXPECT_EQ(r.error, 0.0);
}

TEST(RunTrial, PerfectCompensationHasNoError) {
  const CurlField f{1.5, 90.0};
  ReachLearner l{f.matrix(), 0.5};
  const auto r = run_trial(l, f, {0, 0}, {0.1, 0.0}, 100, 0.01);
  EXPECT_NEAR(r.error, 0.0, 1e-15);
  EXPECT_NEAR(frob(r.learner.comp - f.matrix()), 0.0, 1e-15);
}

TEST(RunTrial, RejectsBadArguments) {
  EXPECT_THROW(run_trial({}, {}, {0, 0}, {1, 0}, 0, 0.01), std::invalid_argument);
  EXPECT_THROW(run_trial({}, {}, {0, 0}, {1, 0}, 10, 0.0), std::invalid_argument);
}

TEST(RunTrial, DivergenceGuard) {
  EXPECT_THROW(run_trial({}, {1e9, 0.0}, {0, 0}, {1e3, 0}, 10, 0.01), DivergenceError);
}

TEST(RunTrial, RepeatedTrialsDecreaseErrorStrictly) {
  for (double rate : {0.1, 0.5, 1.0}) {
    ReachLearner l{{}, rate};
    const CurlField f{1.0, 90.0};
    double prev = INFINITY;
    int trials = 0;
    for (; trials < 1000; ++trials) {
      const auto r = run_trial(l, f, {0, 0}, {0.08, 0.06}, 100, 0.01);
      l = r.learner;
      if (r.error < 1e-3) break;
      EXPECT_LT(r.error, prev) << "rate " << rate << " trial " << trials;
      prev = r.error;
    }
    EXPECT_LT(trials, 1000) << "rate " << rate;
  }
}

TEST(RunTrial, CompensatorMatchesLeastSquaresFit) {
  // Fit the field independently from (velocity, force) pairs along the same
  // minimum-jerk profiles, then check the learner lands on it.
  const CurlField f{1.3, 60.0};
  const Mat2 F = f.matrix();
  std::vector<std::array<double, 2>> vs, fs;
  SplitMix64 dirs(11);
  for (int t = 0; t < 20; ++t) {
    const double th = 2 * std::numbers::pi * dirs.uniform();
    const Vec2 target{0.1 * std::cos(th), 0.1 * std::sin(th)};
    Vec2 prev{0, 0};
    for (int k = 0; k < 100; ++k) {
      const double tau = (k + 1) / 100.0;
      const double s = tau * tau * tau * (10 - 15 * tau + 6 * tau * tau);
      const Vec2 cur{s * target.x, s * target.y};
      const Vec2 v{(cur.x - prev.x) / 0.01, (cur.y - prev.y) / 0.01};
      vs.push_back({v.x, v.y});
      fs.push_back({F.a * v.x + F.b * v.y, F.c * v.x + F.d * v.y});
      prev = cur;
    }
  }
  const auto fit = oracle::fit_matrix(vs, fs);
  const Mat2 fitted{fit[0], fit[1], fit[2], fit[3]};
  EXPECT_LT(frob(fitted - F), 1e-9);

  const auto res = run_lur({{}, 0.5}, LurSchedule{{{60.0, 300}}}, {1.3, 0.1, 100, 0.01, 5, std::nullopt});
  EXPECT_LT(frob(res.learner.comp - fitted), 1e-3);
}

TEST(RunTrial, DeltaRuleConvergesOnStationaryField) {
  for (double angle : {0.0, 90.0, 180.0, 270.0, 33.0}) {
    const auto res = run_lur({{}, 0.5}, LurSchedule{{{angle, 300}}}, {2.0, 0.1, 100, 0.01, 9, std::nullopt});
    EXPECT_LT(frob(res.learner.comp - CurlField{2.0, angle}.matrix()), 1e-3) << angle;
  }
}

TEST(RunTrial, RotationalEquivariance) {
  SplitMix64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const double rot = rng.uniform() * 360.0;
    const Mat2 Q = rotation(rot);
    const CurlField f{rng.uniform() * 3, rng.uniform() * 360};
    const Mat2 C{rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
    const Vec2 s{rng.uniform() - 0.5, rng.uniform() - 0.5}, t{rng.uniform() - 0.5, rng.uniform() - 0.5};

    const double base = run_trial({C, 0.1}, f, s, t, 80, 0.01).error;
    const double turned = run_trial({Q * C * Q.transpose(), 0.1}, f, Q * s, Q * t, 80, 0.01).error;
    EXPECT_NEAR(base, turned, 1e-9);

    // Without compensation the field angle can turn along with the geometry.
    const double plain = run_trial({}, f, s, t, 80, 0.01).error;
    const double all = run_trial({}, {f.gain, f.angle_deg + rot}, Q * s, Q * t, 80, 0.01).error;
    EXPECT_NEAR(plain, all, 1e-9);
  }
}

TEST(LurSchedule, ParsesPhases) {
  const auto s = LurSchedule::parse("0:200,90:200,0:200");
  ASSERT_EQ(s.phases.size(), 3u);
  EXPECT_EQ(s.phases[1].angle_deg, 90.0);
  EXPECT_EQ(s.phases[2].trials, 200u);
  EXPECT_THROW(LurSchedule::parse("0:0"), std::invalid_argument);
  EXPECT_THROW(LurSchedule::parse("90"), std::invalid_argument);
  EXPECT_THROW(LurSchedule::parse(""), std::invalid_argument);
}

TEST(RunLur, SameAnglePhasesShowNoInterference) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto res = run_lur({{}, 1.0}, LurSchedule{{{45, 200}, {45, 50}}}, {1.0, 0.1, 100, 0.01, seed, std::nullopt});
    ASSERT_TRUE(res.interference);
    EXPECT_LT(std::abs(*res.interference), 1e-6) << seed;
    EXPECT_FALSE(res.savings);
  }
}

TEST(RunLur, AntiPhaseInterferesAndRelearningSaves) {
  const auto sched = LurSchedule::parse("0:200,90:200,0:200");
  int positive = 0, saved = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto res = run_lur({}, sched, {1.0, 0.1, 100, 0.01, seed, std::nullopt});
    ASSERT_EQ(res.curves.size(), 3u);
    for (const auto& c : res.curves) EXPECT_EQ(c.size(), 200u);
    positive += *res.interference > 0.0;
    saved += *res.savings < 0;
  }
  EXPECT_EQ(positive, 20);
  EXPECT_GE(saved, 16);
}

TEST(RunLur, SeedDeterminesRun) {
  const auto sched = LurSchedule::parse("0:20,90:20");
  const TrialParams p{1.0, 0.1, 50, 0.01, 4, std::nullopt};
  EXPECT_EQ(run_lur({}, sched, p).curves, run_lur({}, sched, p).curves);
}

TEST(TrialsToCriterion, CountsFromOne) {
  EXPECT_EQ(trials_to_criterion({3, 2, 1}, 2.0), 2);
  EXPECT_EQ(trials_to_criterion({3, 2, 1}, 0.5), 4);
}

TEST(Cmyk, VertexAndCentroid) {
  const auto field = CmykField::unit();
  EXPECT_EQ(sample_cmyk(field, field.vertices()[0]).color, (CmykPoint{1, 0, 0, 0}));
  const auto c = sample_cmyk(field, field.centroid());
  EXPECT_FALSE(c.clamped);
  EXPECT_NEAR(c.color.c, 1.0 / 3, 1e-15);
  EXPECT_NEAR(c.color.m, 1.0 / 3, 1e-15);
  EXPECT_NEAR(c.color.y, 1.0 / 3, 1e-15);
  EXPECT_NEAR(c.color.k, 2.0 / 3, 1e-15);
}

TEST(Cmyk, BarycentricIdentity) {
  const CmykField field({0.2, 3.0}, {-1.0, -0.4}, {2.5, 0.1});
  SplitMix64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    double a = rng.uniform(), b = rng.uniform();
    if (a + b > 1) a = 1 - a, b = 1 - b;
    const auto s = sample_cmyk(field, field.point(1 - a - b, a, b));
    EXPECT_NEAR(s.color.c + s.color.m + s.color.y, 1.0, 1e-12);
    EXPECT_NEAR(s.color.m, a, 1e-12);
    EXPECT_NEAR(s.color.y, b, 1e-12);
    EXPECT_NEAR(s.color.k, 1 - std::max({s.color.c, s.color.m, s.color.y}), 1e-15);
  }
}

TEST(Cmyk, OutsidePointsClampToBoundary) {
  const auto field = CmykField::unit();
  const auto s = sample_cmyk(field, {0.0, 5.0});
  EXPECT_TRUE(s.clamped);
  EXPECT_EQ(s.color, (CmykPoint{1, 0, 0, 0}));
  const auto e = sample_cmyk(field, {0.0, -3.0});  // below the M-Y edge midpoint
  EXPECT_TRUE(e.clamped);
  EXPECT_NEAR(e.color.m, 0.5, 1e-12);
  EXPECT_NEAR(e.color.y, 0.5, 1e-12);
  EXPECT_NEAR(e.color.c, 0.0, 1e-12);
}

TEST(Cmyk, CollinearVerticesRejected) {
  EXPECT_THROW(CmykField({0, 0}, {1, 1}, {2, 2}), std::invalid_argument);
}

TEST(Vehicle, AtTargetStaysPut) {
  const auto field = CmykField::unit();
  Vehicle v = single_target_vehicle();
  v.position = field.centroid();
  v.target = sample_cmyk(field, v.position).color;
  v.sensor_offset = 1e-9;
  const auto n = vehicle_step(v, field, 0.01);
  EXPECT_EQ(n.position, v.position);
}

TEST(Vehicle, EqualSensorsKeepHeading) {
  const auto field = CmykField::unit();
  Vehicle v = single_target_vehicle();  // centroid, facing cyan: symmetric readings
  const auto r = read_sensors(v, field);
  EXPECT_NEAR(r.left, r.right, 1e-15);
  const auto n = vehicle_step(v, field, 0.01);
  EXPECT_NEAR(n.heading, v.heading, 1e-12);
  EXPECT_NEAR(n.position.x, v.position.x, 1e-15);
  EXPECT_GT(n.position.y, v.position.y);
}

TEST(Vehicle, NoTurnGainMeansStraightLine) {
  const auto field = CmykField::unit();
  Vehicle v = single_target_vehicle();
  v.turn_gain = 0.0;
  v.heading = 0.3;
  const Vec2 p0 = v.position;
  for (int k = 0; k < 30; ++k) {
    v = vehicle_step(v, field, 0.01);
    EXPECT_NEAR(v.heading, 0.3, 1e-12);
    const Vec2 d = v.position - p0;
    EXPECT_NEAR(d.x * std::sin(0.3) - d.y * std::cos(0.3), 0.0, 1e-12);
  }
}

TEST(Vehicle, SteersTowardCyanMonotonically) {
  const auto field = CmykField::unit();
  const auto run = run_vehicle(single_target_vehicle(), field, 10000, kVehicleDt);
  ASSERT_TRUE(run.reached_step);
  EXPECT_LE(*run.reached_step, 10000u);
  for (std::size_t i = 1; i < run.samples.size(); ++i) EXPECT_LE(run.samples[i].dist, run.samples[i - 1].dist + 1e-15);
  EXPECT_LE(run.samples.back().dist, 0.02);
}

TEST(Vehicle, RejectsBadParameters) {
  Vehicle v = single_target_vehicle();
  v.sensor_offset = 0;
  EXPECT_THROW(run_vehicle(v, CmykField::unit(), 10, 0.01), std::invalid_argument);
  EXPECT_THROW(vehicle_step(single_target_vehicle(), CmykField::unit(), 0.0), std::invalid_argument);
}

TEST(ExpandingGoal, SingleStageMatchesPlainNavigation) {
  const auto field = CmykField::unit();
  const Vehicle v = single_target_vehicle();
  const auto plain = run_vehicle(v, field, 10000, kVehicleDt);
  const auto staged = run_expanding_goal(v, field, {{v.target}}, 10000, kVehicleDt);
  ASSERT_EQ(plain.samples.size(), staged.samples.size());
  for (std::size_t i = 0; i < plain.samples.size(); ++i) {
    EXPECT_EQ(plain.samples[i].position, staged.samples[i].position);
    EXPECT_EQ(plain.samples[i].dist, staged.samples[i].dist);
  }
  EXPECT_EQ(staged.coverage, std::vector<double>{1.0});
}

TEST(ExpandingGoal, NestedStagesAreFullyCovered) {
  const auto run =
      run_expanding_goal(expanding_vehicle(), CmykField::unit(), nested_stages(), kExpandingSteps, kExpandingDt);
  EXPECT_EQ(run.coverage, (std::vector<double>{1.0, 1.0, 1.0}));
  for (std::size_t i = 1; i < run.samples.size(); ++i) EXPECT_GE(run.samples[i].stage, run.samples[i - 1].stage);
}

TEST(ExpandingGoal, RejectsEmptyOrUnnestedStages) {
  const auto field = CmykField::unit();
  auto stages = nested_stages();
  EXPECT_THROW(run_expanding_goal(expanding_vehicle(), field, {stages[0], {}}, 10, 0.01), std::invalid_argument);
  EXPECT_THROW(run_expanding_goal(expanding_vehicle(), field, {stages[1], stages[0]}, 10, 0.01), std::invalid_argument);
  EXPECT_THROW(run_expanding_goal(expanding_vehicle(), field, {}, 10, 0.01), std::invalid_argument);
}
