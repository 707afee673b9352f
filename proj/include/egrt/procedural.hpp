#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "egrt/csv.hpp"
#include "egrt/error.hpp"
#include "egrt/geometry.hpp"
#include "egrt/rng.hpp"

namespace egrt::procedural {

// --- force-field adaptation ----------------------------------------------------

/// Velocity-dependent field F = gain * Rot(angle) * v.
struct CurlField {
  double gain = 1.0;
  double angle_deg = 0.0;

  Mat2 matrix() const { return gain * rotation(angle_deg); }
};

inline Vec2 field_force(const CurlField& f, Vec2 velocity) {
  if (!std::isfinite(velocity.x) || !std::isfinite(velocity.y))
    throw std::invalid_argument("field_force: velocity must be finite");
  return f.matrix() * velocity;
}

/// Linear compensator: predicted field force = comp * v.
struct ReachLearner {
  Mat2 comp{};
  double rate = 0.005;
};

struct TrialResult {
  ReachLearner learner;
  double error;
};

inline constexpr double kPositionBound = 1e6;

/// Minimum-jerk fraction of the path covered at normalized time tau.
inline double min_jerk(double tau) {
  const double t3 = tau * tau * tau;
  return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

/// One reach from start to target along a minimum-jerk straight-line plan.
/// The uncompensated force (field minus comp * v) displaces the hand with unit
/// admittance; the trial error is the mean distance between hand and plan.
/// Afterwards comp takes a normalized delta-rule step toward the residual.
inline TrialResult run_trial(ReachLearner l, const CurlField& f, Vec2 start, Vec2 target, std::size_t steps,
                             double dt) {
  if (steps == 0) throw std::invalid_argument("run_trial: steps must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("run_trial: dt must be > 0");
  const Mat2 field = f.matrix();
  const Vec2 path = target - start;

  Vec2 hand = start;
  Vec2 planned = start;
  double deviation = 0.0;
  double gxx = 0.0, gxy = 0.0, gyx = 0.0, gyy = 0.0;  // sum of residual * v^T
  double vv = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double tau = static_cast<double>(k + 1) / static_cast<double>(steps);
    const Vec2 next_planned = start + min_jerk(tau) * path;
    const Vec2 v = (1.0 / dt) * (next_planned - planned);
    const Vec2 residual = field * v - l.comp * v;
    hand = hand + dt * (v + residual);
    planned = next_planned;
    if (!(std::abs(hand.x) <= kPositionBound && std::abs(hand.y) <= kPositionBound))
      throw DivergenceError("hand position left the workspace", static_cast<long>(k));
    deviation += norm(hand - planned);
    gxx += residual.x * v.x;
    gxy += residual.x * v.y;
    gyx += residual.y * v.x;
    gyy += residual.y * v.y;
    vv += dot(v, v);
  }
  if (vv > 0.0) {
    const double s = l.rate / vv;
    l.comp = {l.comp.a + s * gxx, l.comp.b + s * gxy, l.comp.c + s * gyx, l.comp.d + s * gyy};
  }
  return {l, deviation / static_cast<double>(steps)};
}

struct Phase {
  double angle_deg;
  std::size_t trials;
};

struct LurSchedule {
  std::vector<Phase> phases;

  void validate() const {
    if (phases.empty()) throw std::invalid_argument("schedule needs at least one phase");
    for (const auto& p : phases)
      if (p.trials == 0) throw std::invalid_argument("every phase needs at least one trial");
  }

  /// "angle:trials,angle:trials,..."
  static LurSchedule parse(std::string_view text) {
    LurSchedule s;
    for (const auto& item : csv::split(text)) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("phase '" + item + "' is not angle:trials");
      try {
        const double angle = std::stod(item.substr(0, colon));
        const long trials = std::stol(item.substr(colon + 1));
        if (trials < 1) throw std::invalid_argument("trials");
        s.phases.push_back({angle, static_cast<std::size_t>(trials)});
      } catch (const std::exception&) {
        throw std::invalid_argument("phase '" + item + "' is not angle:trials");
      }
    }
    s.validate();
    return s;
  }
};

/// Reach geometry shared by every trial. Each trial reaches `distance` from
/// the origin in a direction drawn uniformly from SplitMix64(seed), unless
/// `direction_deg` pins it.
struct TrialParams {
  double gain = 1.0;
  double distance = 0.1;
  std::size_t steps = 100;
  double dt = 0.01;
  std::uint64_t seed = 1;
  std::optional<double> direction_deg;
};

struct LurResult {
  std::vector<std::vector<double>> curves;  // per-phase trial errors
  std::optional<double> interference;       // needs >= 2 phases
  std::optional<long> savings;              // needs >= 3 phases
  ReachLearner learner;
};

/// 1-based index of the first trial with error <= criterion, or size+1.
inline long trials_to_criterion(const std::vector<double>& curve, double criterion) {
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve[i] <= criterion) return static_cast<long>(i + 1);
  return static_cast<long>(curve.size() + 1);
}

/// Runs the phases in order with the learner carried over.
/// interference = first error of phase 2 - last error of phase 1.
/// savings = trials phase 3 needs to reach phase 1's final error minus the
/// trials phase 1 needed; negative means faster relearning.
inline LurResult run_lur(ReachLearner l, const LurSchedule& sched, const TrialParams& p) {
  sched.validate();
  SplitMix64 rng(p.seed);
  LurResult res;
  for (const auto& phase : sched.phases) {
    const CurlField field{p.gain, phase.angle_deg};
    std::vector<double> curve;
    curve.reserve(phase.trials);
    for (std::size_t t = 0; t < phase.trials; ++t) {
      const double theta = p.direction_deg ? radians(*p.direction_deg) : 2.0 * std::numbers::pi * rng.uniform();
      const Vec2 target{p.distance * std::cos(theta), p.distance * std::sin(theta)};
      auto tr = run_trial(l, field, {0.0, 0.0}, target, p.steps, p.dt);
      l = tr.learner;
      curve.push_back(tr.error);
    }
    res.curves.push_back(std::move(curve));
  }
  const auto& c = res.curves;
  if (c.size() >= 2) res.interference = c[1].front() - c[0].back();
  if (c.size() >= 3) {
    const double criterion = c[0].back();
    res.savings = trials_to_criterion(c[2], criterion) - trials_to_criterion(c[0], criterion);
  }
  res.learner = l;
  return res;
}

// --- CMYK gradient following ----------------------------------------------------

struct CmykPoint {
  double c = 0.0, m = 0.0, y = 0.0, k = 0.0;

  /// Pure primaries mix with derived key k = 1 - max(c, m, y).
  static CmykPoint from_cmy(double c, double m, double y) { return {c, m, y, 1.0 - std::max({c, m, y})}; }
  friend bool operator==(const CmykPoint&, const CmykPoint&) = default;
};

inline double distance(const CmykPoint& a, const CmykPoint& b) {
  const double dc = a.c - b.c, dm = a.m - b.m, dy = a.y - b.y, dk = a.k - b.k;
  return std::sqrt(dc * dc + dm * dm + dy * dy + dk * dk);
}

struct CmykSample {
  CmykPoint color;
  bool clamped;  // position lay outside the triangle
};

/// Triangle whose vertices carry pure cyan, magenta and yellow. Colors inside
/// are barycentric mixtures.
class CmykField {
 public:
  CmykField(Vec2 cyan, Vec2 magenta, Vec2 yellow) : v_{cyan, magenta, yellow} {
    const double area2 = cross(magenta - cyan, yellow - cyan);
    const double scale = std::max({norm(magenta - cyan), norm(yellow - cyan), norm(yellow - magenta)});
    if (!(std::abs(area2) > 1e-12 * scale * scale)) throw std::invalid_argument("CMYK field vertices are collinear");
    area2_ = area2;
  }

  /// Equilateral triangle with unit circumradius centred on the origin, cyan on top.
  static CmykField unit() {
    const double h = std::sqrt(3.0) / 2.0;
    return CmykField({0.0, 1.0}, {-h, -0.5}, {h, -0.5});
  }

  const std::array<Vec2, 3>& vertices() const noexcept { return v_; }
  Vec2 centroid() const { return (1.0 / 3.0) * (v_[0] + v_[1] + v_[2]); }

  /// Position carrying the given barycentric weights.
  Vec2 point(double c, double m, double y) const { return c * v_[0] + m * v_[1] + y * v_[2]; }

  /// Positions outside the triangle read the color of the nearest boundary point.
  CmykSample sample(Vec2 pos) const {
    auto [c, m, y] = barycentric(pos);
    bool clamped = false;
    if (c < 0.0 || m < 0.0 || y < 0.0) {
      clamped = true;
      std::tie(c, m, y) = barycentric(nearest_boundary_point(pos));
      c = std::max(c, 0.0);
      m = std::max(m, 0.0);
      y = std::max(y, 0.0);
      const double s = c + m + y;
      c /= s;
      m /= s;
      y /= s;
    }
    return {CmykPoint::from_cmy(c, m, y), clamped};
  }

  bool inside(Vec2 pos) const {
    const auto [c, m, y] = barycentric(pos);
    return c >= 0.0 && m >= 0.0 && y >= 0.0;
  }

  /// pos itself when inside, else the nearest boundary point.
  Vec2 project(Vec2 pos) const { return inside(pos) ? pos : nearest_boundary_point(pos); }

  std::tuple<double, double, double> barycentric(Vec2 p) const {
    const double m = cross(p - v_[0], v_[2] - v_[0]) / area2_;
    const double y = cross(v_[1] - v_[0], p - v_[0]) / area2_;
    return {1.0 - m - y, m, y};
  }

 private:
  static double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

  static Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
    return a + t * ab;
  }

  Vec2 nearest_boundary_point(Vec2 p) const {
    Vec2 best = closest_on_segment(p, v_[0], v_[1]);
    for (auto [i, j] : {std::pair{1, 2}, std::pair{2, 0}}) {
      const Vec2 q = closest_on_segment(p, v_[i], v_[j]);
      if (norm(p - q) < norm(p - best)) best = q;
    }
    return best;
  }

  std::array<Vec2, 3> v_;
  double area2_ = 0.0;
};

inline CmykSample sample_cmyk(const CmykField& field, Vec2 pos) { return field.sample(pos); }

/// Two-sensor Braitenberg vehicle steering toward a target color.
struct Vehicle {
  Vec2 position;
  double heading = 0.0;  // radians, counter-clockwise from +x
  double sensor_offset = 0.05;
  double speed_gain = 1.0;
  double turn_gain = 10.0;
  CmykPoint target{1.0, 0.0, 0.0, 0.0};
  double goal_radius = 0.02;

  void validate() const {
    if (!(sensor_offset > 0.0)) throw std::invalid_argument("sensor_offset must be > 0");
    if (!(speed_gain > 0.0)) throw std::invalid_argument("speed_gain must be > 0");
    if (!(turn_gain >= 0.0)) throw std::invalid_argument("turn_gain must be >= 0");
    if (!(goal_radius >= 0.0)) throw std::invalid_argument("goal_radius must be >= 0");
  }
};

struct SensorReading {
  double left;
  double right;
  double center;
};

inline SensorReading read_sensors(const Vehicle& v, const CmykField& field) {
  const Vec2 lateral{-std::sin(v.heading), std::cos(v.heading)};
  const auto dist_at = [&](Vec2 p) { return distance(field.sample(p).color, v.target); };
  return {dist_at(v.position + v.sensor_offset * lateral), dist_at(v.position - v.sensor_offset * lateral),
          dist_at(v.position)};
}

/// One Euler step. The sensor difference (left - right) is a clockwise turn
/// rate scaled by turn_gain, so the vehicle turns toward the closer-matching
/// side; forward speed is speed_gain times the color distance at the body.
/// The triangle is walled: a step that would leave it ends on the boundary.
inline Vehicle vehicle_step(Vehicle v, const CmykField& field, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("vehicle_step: dt must be > 0");
  const auto r = read_sensors(v, field);
  const double speed = v.speed_gain * r.center;
  const double turn = v.turn_gain * (r.left - r.right);
  v.position = field.project(v.position + (dt * speed) * Vec2{std::cos(v.heading), std::sin(v.heading)});
  v.heading -= dt * turn;
  return v;
}

struct VehicleSample {
  std::size_t step;
  std::size_t stage;
  Vec2 position;
  CmykPoint color;
  double dist;
};

struct VehicleRun {
  std::vector<VehicleSample> samples;
  std::optional<std::size_t> reached_step;
  Vehicle vehicle;
};

/// Steps until the body color is within goal_radius of the target (that
/// sample is recorded, no step is taken) or `steps` steps have run.
inline VehicleRun run_vehicle(Vehicle v, const CmykField& field, std::size_t steps, double dt) {
  v.validate();
  VehicleRun run;
  for (std::size_t k = 0; k <= steps; ++k) {
    const auto color = field.sample(v.position).color;
    const double d = distance(color, v.target);
    run.samples.push_back({k, 0, v.position, color, d});
    if (d <= v.goal_radius) {
      run.reached_step = k;
      break;
    }
    if (k == steps) break;
    v = vehicle_step(v, field, dt);
  }
  run.vehicle = v;
  return run;
}

struct ExpandingRun {
  std::vector<VehicleSample> samples;
  std::vector<double> coverage;  // per stage, fraction of targets visited
  Vehicle vehicle;
};

inline bool contains_color(const std::vector<CmykPoint>& set, const CmykPoint& p) {
  return std::any_of(set.begin(), set.end(), [&](const CmykPoint& q) { return distance(p, q) <= 1e-12; });
}

/// Visits each stage's targets in turn, always steering to the nearest
/// unvisited one. A target counts as visited once the body color is within
/// goal_radius of it. Stages must be non-empty and nested.
inline ExpandingRun run_expanding_goal(Vehicle v, const CmykField& field, const std::vector<std::vector<CmykPoint>>& stages,
                                       std::size_t steps_per_stage, double dt) {
  v.validate();
  if (stages.empty()) throw std::invalid_argument("need at least one goal stage");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].empty()) throw std::invalid_argument("goal stage " + std::to_string(s) + " is empty");
    if (s > 0)
      for (const auto& p : stages[s - 1])
        if (!contains_color(stages[s], p))
          throw std::invalid_argument("goal stage " + std::to_string(s) + " does not contain stage " +
                                      std::to_string(s - 1));
  }

  ExpandingRun run;
  std::size_t step = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& targets = stages[s];
    std::vector<bool> visited(targets.size(), false);
    for (std::size_t k = 0; k <= steps_per_stage; ++k) {
      const auto color = field.sample(v.position).color;
      for (std::size_t i = 0; i < targets.size(); ++i)
        if (distance(color, targets[i]) <= v.goal_radius) visited[i] = true;

      std::optional<std::size_t> nearest;
      for (std::size_t i = 0; i < targets.size(); ++i)
        if (!visited[i] && (!nearest || distance(color, targets[i]) < distance(color, targets[*nearest])))
          nearest = i;
      if (nearest) v.target = targets[*nearest];
      run.samples.push_back({step++, s, v.position, color, distance(color, v.target)});
      if (!nearest || k == steps_per_stage) break;
      v = vehicle_step(v, field, dt);
    }
    run.coverage.push_back(static_cast<double>(std::count(visited.begin(), visited.end(), true)) /
                           static_cast<double>(targets.size()));
  }
  run.vehicle = v;
  return run;
}

}  // namespace egrt::procedural
