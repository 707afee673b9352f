#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "egrt/csv.hpp"
#include "egrt/error.hpp"
#include "egrt/geometry.hpp"
#include "egrt/rng.hpp"

namespace egrt::demos {

enum class Role { S, R, M, D, G, Z, Feedback, Feedforward };

inline const char* to_string(Role r) noexcept {
  switch (r) {
    case Role::S: return "S";
    case Role::R: return "R";
    case Role::M: return "M";
    case Role::D: return "D";
    case Role::G: return "G";
    case Role::Z: return "Z";
    case Role::Feedback: return "feedback";
    case Role::Feedforward: return "feedforward";
  }
  return "?";
}

/// Component name -> regulator role. Each component is assigned exactly once.
/// These assignments are an interpretation, not something derived.
class RoleAnnotation {
 public:
  RoleAnnotation(std::initializer_list<std::pair<std::string, Role>> items) {
    for (const auto& [name, role] : items) assign(name, role);
  }

  void assign(const std::string& component, Role role) {
    if (role_of(component)) throw std::invalid_argument("component '" + component + "' already has a role");
    items_.emplace_back(component, role);
  }

  std::optional<Role> role_of(const std::string& component) const {
    for (const auto& [name, role] : items_)
      if (name == component) return role;
    return std::nullopt;
  }

  const std::vector<std::pair<std::string, Role>>& items() const noexcept { return items_; }

 private:
  std::vector<std::pair<std::string, Role>> items_;
};

// --- gradient descent -----------------------------------------------------------

struct GdResult {
  std::vector<Vec2> iterates;  // x_0 .. x_iters
  std::vector<double> errors;  // |x_k - target|
  RoleAnnotation roles;
};

inline RoleAnnotation gd_roles() {
  return {{"objective landscape", Role::S},
          {"update rule", Role::R},
          {"gradient evaluation", Role::Feedback},
          {"iterate", Role::Z},
          {"target", Role::G}};
}

/// Gradient descent on f(x) = |x - target|^2 / 2, so x <- x - lr (x - target).
/// The error contracts by |1 - lr| per step; lr >= 2 cannot converge and is
/// refused up front.
inline GdResult gd_regulate(Vec2 target, Vec2 x0, double lr, std::size_t iters) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (iters == 0) throw std::invalid_argument("iters must be >= 1");
  if (lr >= 2.0)
    throw DivergenceError("learning rate " + csv::num(lr) + " gives contraction factor |1 - lr| = " +
                              csv::num(std::abs(1.0 - lr)) + " >= 1 on the quadratic objective",
                          0);
  GdResult res{{x0}, {norm(x0 - target)}, gd_roles()};
  Vec2 x = x0;
  for (std::size_t k = 0; k < iters; ++k) {
    x = x - lr * (x - target);
    res.iterates.push_back(x);
    res.errors.push_back(norm(x - target));
  }
  return res;
}

// --- tabular Q-learning ------------------------------------------------------------

enum class Action : int { North = 0, East = 1, South = 2, West = 3 };
inline constexpr std::size_t kActions = 4;

inline const char* to_string(Action a) noexcept {
  switch (a) {
    case Action::North: return "N";
    case Action::East: return "E";
    case Action::South: return "S";
    case Action::West: return "W";
  }
  return "?";
}

/// Deterministic gridworld. Cells are (x, y) with y growing southward; moves
/// into a wall leave the agent in place.
struct QConfig {
  std::size_t width = 3;
  std::size_t height = 3;
  std::size_t goal_x = 0;
  std::size_t goal_y = 0;
  double step_reward = -1.0;
  double goal_reward = 0.0;
  double learn_rate = 0.5;
  double discount = 0.9;
  double epsilon = 0.1;
  std::size_t episodes = 500;
  double initial_value = 0.0;
  std::size_t max_steps = 0;  // per episode; 0 means 10 * cells

  std::size_t cells() const noexcept { return width * height; }
  std::size_t goal() const noexcept { return goal_y * width + goal_x; }

  void validate() const {
    if (width == 0 || height == 0) throw std::invalid_argument("grid must be at least 1x1");
    if (goal_x >= width || goal_y >= height) throw std::invalid_argument("goal cell is outside the grid, unreachable");
    if (!(learn_rate > 0.0 && learn_rate <= 1.0)) throw std::invalid_argument("learn rate must lie in (0, 1]");
    if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in [0, 1)");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
};

/// Successor cell of `cell` under `a`, clamped at the walls.
inline std::size_t grid_move(const QConfig& cfg, std::size_t cell, Action a) {
  std::size_t x = cell % cfg.width, y = cell / cfg.width;
  switch (a) {
    case Action::North: if (y > 0) --y; break;
    case Action::East: if (x + 1 < cfg.width) ++x; break;
    case Action::South: if (y + 1 < cfg.height) ++y; break;
    case Action::West: if (x > 0) --x; break;
  }
  return y * cfg.width + x;
}

using QRow = std::array<double, kActions>;

/// Greedy action; values within 1e-9 (relative) of the maximum count as tied
/// and the lowest action index wins.
inline Action greedy_action(const QRow& q) {
  const double best = *std::max_element(q.begin(), q.end());
  const double tol = 1e-9 * std::max(1.0, std::abs(best));
  for (std::size_t a = 0; a < kActions; ++a)
    if (q[a] >= best - tol) return static_cast<Action>(a);
  return Action::North;
}

struct QResult {
  std::vector<std::optional<Action>> policy;  // per cell, row-major; none at the goal
  std::vector<QRow> values;
  RoleAnnotation roles;
};

inline RoleAnnotation q_roles() {
  return {{"environment", Role::S},
          {"Q-table update", Role::R},
          {"Q-table", Role::M},
          {"epsilon-exploration draws", Role::D},
          {"goal cell", Role::G},
          {"temporal-difference error", Role::Feedback},
          {"greedy action selection", Role::Feedforward}};
}

/// Epsilon-greedy tabular Q-learning. Each episode starts in a uniformly drawn
/// non-goal cell and ends on reaching the goal or after max_steps moves.
inline QResult q_regulate(const QConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = cfg.cells(), goal = cfg.goal();
  const std::size_t max_steps = cfg.max_steps ? cfg.max_steps : 10 * n;
  QResult res{std::vector<std::optional<Action>>(n), std::vector<QRow>(n), q_roles()};
  for (auto& row : res.values) row.fill(cfg.initial_value);
  res.values[goal].fill(0.0);

  SplitMix64 rng(seed);
  if (n > 1) {
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
      std::size_t s = rng.below(n - 1);
      if (s >= goal) ++s;
      for (std::size_t t = 0; t < max_steps && s != goal; ++t) {
        const Action a = rng.uniform() < cfg.epsilon ? static_cast<Action>(rng.below(kActions))
                                                     : greedy_action(res.values[s]);
        const std::size_t next = grid_move(cfg, s, a);
        const bool terminal = next == goal;
        const double r = terminal ? cfg.goal_reward : cfg.step_reward;
        const double bootstrap = terminal ? 0.0 : *std::max_element(res.values[next].begin(), res.values[next].end());
        double& q = res.values[s][static_cast<std::size_t>(a)];
        q += cfg.learn_rate * (r + cfg.discount * bootstrap - q);
        s = next;
      }
    }
  }
  for (std::size_t s = 0; s < n; ++s)
    if (s != goal) res.policy[s] = greedy_action(res.values[s]);
  return res;
}

}  // namespace egrt::demos
