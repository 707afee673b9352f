#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library code paths being checked.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

namespace oracle {

inline std::vector<double> pfb_loop(const std::vector<double>& s) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) out.push_back((s[i] + s[i + 1]) / 2.0);
  return out;
}

inline std::vector<double> nfb_loop(const std::vector<double>& s) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    double d = s[i] - s[i + 1];
    if (d < 0) d = -d;
    out.push_back(d);
  }
  return out;
}

/// Shannon entropy in bits of a list of discrete symbols.
inline double entropy_bits(const std::vector<int>& symbols) {
  std::map<int, double> counts;
  for (int s : symbols) counts[s] += 1.0;
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    const double p = c / static_cast<double>(symbols.size());
    h -= p * std::log(p) / std::log(2.0);
  }
  return h;
}

/// Value iteration on the clamped-wall gridworld with actions N, E, S, W.
/// Returns the greedy action per cell (-1 at the goal), ties to the lowest
/// index within 1e-9.
struct GridMdp {
  int width, height, goal_x, goal_y;
  double step_reward, goal_reward, gamma;
};

inline std::vector<int> value_iteration_policy(const GridMdp& m) {
  const int n = m.width * m.height;
  const int goal = m.goal_y * m.width + m.goal_x;
  auto move = [&](int cell, int a) {
    int x = cell % m.width, y = cell / m.width;
    const int dx[4] = {0, 1, 0, -1}, dy[4] = {-1, 0, 1, 0};
    const int nx = x + dx[a], ny = y + dy[a];
    if (nx >= 0 && nx < m.width && ny >= 0 && ny < m.height) {
      x = nx;
      y = ny;
    }
    return y * m.width + x;
  };
  auto qvalue = [&](const std::vector<double>& v, int s, int a) {
    const int next = move(s, a);
    if (next == goal) return m.goal_reward;
    return m.step_reward + m.gamma * v[next];
  };
  std::vector<double> v(n, 0.0);
  for (int sweep = 0; sweep < 10000; ++sweep) {
    std::vector<double> nv(n, 0.0);
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      if (s == goal) continue;
      double best = -1e300;
      for (int a = 0; a < 4; ++a) best = std::max(best, qvalue(v, s, a));
      nv[s] = best;
      delta = std::max(delta, std::abs(nv[s] - v[s]));
    }
    v = nv;
    if (delta == 0.0) break;
  }
  std::vector<int> policy(n, -1);
  for (int s = 0; s < n; ++s) {
    if (s == goal) continue;
    double best = -1e300;
    for (int a = 0; a < 4; ++a) best = std::max(best, qvalue(v, s, a));
    for (int a = 0; a < 4; ++a)
      if (qvalue(v, s, a) >= best - 1e-9 * std::max(1.0, std::abs(best))) {
        policy[s] = a;
        break;
      }
  }
  return policy;
}

/// Breadth-first shortest path lengths to the goal in the same gridworld.
inline std::vector<int> shortest_path_lengths(int width, int height, int goal) {
  std::vector<int> dist(width * height, -1);
  std::vector<int> frontier{goal};
  dist[goal] = 0;
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int c : frontier) {
      const int x = c % width, y = c / width;
      const int nbr[4][2] = {{x, y - 1}, {x + 1, y}, {x, y + 1}, {x - 1, y}};
      for (const auto& p : nbr)
        if (p[0] >= 0 && p[0] < width && p[1] >= 0 && p[1] < height && dist[p[1] * width + p[0]] < 0) {
          dist[p[1] * width + p[0]] = dist[c] + 1;
          next.push_back(p[1] * width + p[0]);
        }
    }
    frontier = next;
  }
  return dist;
}

/// Ordinary least squares for the 2x2 matrix A minimizing sum |A v_i - f_i|^2.
inline std::array<double, 4> fit_matrix(const std::vector<std::array<double, 2>>& v,
                                        const std::vector<std::array<double, 2>>& f) {
  double sxx = 0, sxy = 0, syy = 0, fx_x = 0, fx_y = 0, fy_x = 0, fy_y = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sxx += v[i][0] * v[i][0];
    sxy += v[i][0] * v[i][1];
    syy += v[i][1] * v[i][1];
    fx_x += f[i][0] * v[i][0];
    fx_y += f[i][0] * v[i][1];
    fy_x += f[i][1] * v[i][0];
    fy_y += f[i][1] * v[i][1];
  }
  const double det = sxx * syy - sxy * sxy;
  // A = (F V^T)(V V^T)^-1
  const double i00 = syy / det, i01 = -sxy / det, i11 = sxx / det;
  return {fx_x * i00 + fx_y * i01, fx_x * i01 + fx_y * i11, fy_x * i00 + fy_y * i01, fy_x * i01 + fy_y * i11};
}

}  // namespace oracle
