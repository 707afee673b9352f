#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "egrt/csv.hpp"
#include "egrt/error.hpp"

namespace egrt::pid {

inline constexpr double kDisabled = std::numeric_limits<double>::infinity();

/// kp: proportional gain, ti: integral time (s, infinity disables the
/// integral term), td: derivative time (s).
struct Gains {
  double kp = 1.0;
  double ti = kDisabled;
  double td = 0.0;

  void validate() const {
    if (!std::isfinite(kp)) throw std::invalid_argument("kp must be finite");
    if (!(ti > 0.0)) throw std::invalid_argument("ti must be > 0 (or infinite to disable)");
    if (!(td >= 0.0) || !std::isfinite(td)) throw std::invalid_argument("td must be finite and >= 0");
  }
};

struct State {
  double integral = 0.0;
  double carry = 0.0;  // compensated-summation remainder of integral
  double prev_error = 0.0;
  bool initialized = false;
};

struct StepResult {
  double output;
  State state;
};

// Rectangular integration and a first-difference derivative. The derivative
// term is 0 on the first call. The integral is a Kahan sum, so long runs do
// not drift from the exact running total.
inline StepResult step(const Gains& g, const State& st, double error, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be finite and > 0");
  if (!std::isfinite(error)) throw std::invalid_argument("error input must be finite");

  State next = st;
  const double y = error * dt - st.carry;
  next.integral = st.integral + y;
  next.carry = (next.integral - st.integral) - y;
  const double derivative = st.initialized ? (error - st.prev_error) / dt : 0.0;
  next.prev_error = error;
  next.initialized = true;

  const double out = g.kp * error + next.integral / g.ti + g.td * derivative;
  return {out, next};
}

struct Sample {
  long tick;
  double x;
  double u;
  double e;
};

struct Trajectory {
  std::vector<Sample> samples;
};

struct PlantConfig {
  double plant_gain = 1.0;
  double setpoint = 1.0;
  double x0 = 0.0;
  double disturbance = 0.0;  // constant term added to dx/dt
  double dt = 0.01;
  std::size_t steps = 1000;
};

inline constexpr double kDivergenceBound = 1e12;

/// Closed-loop tracking on x' = plant_gain * u + disturbance, Euler-stepped.
/// Records (tick, x_k, u_k, e_k) with e_k = setpoint - x_k.
inline Trajectory simulate(const Gains& g, const PlantConfig& p) {
  g.validate();
  if (p.steps == 0) throw std::invalid_argument("steps must be >= 1");
  if (!(p.dt > 0.0)) throw std::invalid_argument("dt must be > 0");

  Trajectory traj;
  traj.samples.reserve(p.steps);
  State st;
  double x = p.x0;
  for (std::size_t k = 0; k < p.steps; ++k) {
    const double e = p.setpoint - x;
    const auto [u, next] = step(g, st, e, p.dt);
    st = next;
    traj.samples.push_back({static_cast<long>(k), x, u, e});
    x += p.dt * (p.plant_gain * u + p.disturbance);
    if (!(std::abs(x) <= kDivergenceBound))
      throw DivergenceError("|x| exceeded 1e12 (x = " + csv::num(x) + ")", static_cast<long>(k + 1));
  }
  return traj;
}

inline void write_csv(std::ostream& os, const Trajectory& traj) {
  os << "tick,x,u,e\n";
  for (const auto& s : traj.samples)
    os << s.tick << ',' << csv::num(s.x) << ',' << csv::num(s.u) << ',' << csv::num(s.e) << '\n';
}

}  // namespace egrt::pid
