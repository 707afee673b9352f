#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "egrt/csv.hpp"
#include "egrt/rng.hpp"

namespace egrt::criticality {

using Series = std::vector<double>;

/// Exponents at or above this bound produce a degenerate, black-noise-like
/// series with almost no mass away from the first few samples.
inline constexpr double kMaxExponent = 6.0;

struct PowerSeries {
  Series samples;
  double exponent;
  std::size_t n;
  std::uint64_t seed;
};

/// t^-e for t = 1..n, randomly permuted (Fisher-Yates on SplitMix64(seed)).
inline PowerSeries gen_power_series(std::size_t n, double e, std::uint64_t seed, bool shuffle = true) {
  if (n == 0) throw std::invalid_argument("series length n must be >= 1");
  if (!(e > 0.0)) throw std::invalid_argument("exponent e must be > 0 (got " + csv::num(e) + ")");
  if (!(e < kMaxExponent))
    throw std::invalid_argument("exponent e = " + csv::num(e) +
                                " must be < 6.0; larger exponents give an extremely sparse series "
                                "resembling black noise");
  Series s(n);
  for (std::size_t t = 1; t <= n; ++t) s[t - 1] = std::pow(static_cast<double>(t), -e);
  if (shuffle) {
    SplitMix64 rng(seed);
    egrt::shuffle(std::span<double>(s), rng);
  }
  return {std::move(s), e, n, seed};
}

/// n i.i.d. uniform(0,1) moments.
inline Series uniform_series(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Series s(n);
  for (auto& v : s) v = rng.uniform();
  return s;
}

namespace detail {
template <typename F>
Series adjacent_map(std::span<const double> s, F f, const char* name) {
  if (s.size() < 2) throw std::invalid_argument(std::string(name) + " needs a series of length >= 2");
  Series out(s.size() - 1);
  std::transform(s.begin(), s.end() - 1, s.begin() + 1, out.begin(), f);
  return out;
}
}  // namespace detail

/// Positive-feedback component: adjacent means.
inline Series pfb_map(std::span<const double> s) {
  return detail::adjacent_map(s, [](double a, double b) { return (a + b) / 2.0; }, "pfb_map");
}

/// Negative-feedback component: absolute adjacent differences.
inline Series nfb_map(std::span<const double> s) {
  return detail::adjacent_map(s, [](double a, double b) { return std::abs(a - b); }, "nfb_map");
}

struct AvalancheEvents {
  std::vector<std::size_t> times;
  std::vector<double> magnitudes;
  std::vector<std::size_t> intervals;

  std::size_t count() const noexcept { return times.size(); }
};

namespace detail {
inline std::vector<std::size_t> gaps(const std::vector<std::size_t>& times) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < times.size(); ++i) out.push_back(times[i] - times[i - 1]);
  return out;
}
}  // namespace detail

struct BurstSchedule {
  std::size_t interval_min = 4;
  std::size_t interval_max = 10;

  void validate() const {
    if (interval_min < 1 || interval_min > interval_max)
      throw std::invalid_argument("burst schedule requires 1 <= interval_min <= interval_max");
  }
};

struct BurstResult {
  Series bursts;
  AvalancheEvents events;
  double residual;  // accumulated but never released
};

/// Accumulates the input and releases the total at gaps drawn uniformly from
/// [interval_min, interval_max]. The first release happens after the first gap
/// has elapsed, i.e. at tick gap-1.
inline BurstResult accumulate_release(std::span<const double> input, const BurstSchedule& sched,
                                      std::uint64_t seed) {
  sched.validate();
  if (input.empty()) throw std::invalid_argument("accumulate_release needs a non-empty input");
  SplitMix64 rng(seed);
  BurstResult res{Series(input.size(), 0.0), {}, 0.0};
  double acc = 0.0;
  std::size_t next = rng.between(sched.interval_min, sched.interval_max) - 1;
  for (std::size_t t = 0; t < input.size(); ++t) {
    acc += input[t];
    if (t == next) {
      res.bursts[t] = acc;
      res.events.times.push_back(t);
      res.events.magnitudes.push_back(acc);
      acc = 0.0;
      next += rng.between(sched.interval_min, sched.interval_max);
    }
  }
  res.residual = acc;
  res.events.intervals = detail::gaps(res.events.times);
  return res;
}

/// Stable sort by value.
template <typename T>
std::vector<T> rank_order(std::span<const T> s, bool descending = true) {
  std::vector<T> out(s.begin(), s.end());
  if (descending)
    std::stable_sort(out.begin(), out.end(), std::greater<T>{});
  else
    std::stable_sort(out.begin(), out.end());
  return out;
}

template <typename T>
std::vector<T> rank_order(const std::vector<T>& s, bool descending = true) {
  return rank_order(std::span<const T>(s), descending);
}

struct ThresholdModel {
  Series curve;
  double level;
  std::size_t crossing_index;  // 0-based position of the first curve value >= level
};

/// t^-e_model for t = 1..n sorted ascending, so curve[j] = (n - j)^-e_model.
/// The detection level defaults to the curve mean.
inline ThresholdModel threshold_model(std::size_t n, double e_model,
                                      std::optional<double> level = std::nullopt) {
  if (n == 0) throw std::invalid_argument("threshold model needs n >= 1");
  if (!(e_model > 0.0)) throw std::invalid_argument("threshold exponent must be > 0");
  Series curve(n);
  for (std::size_t t = 1; t <= n; ++t) curve[t - 1] = std::pow(static_cast<double>(t), -e_model);
  std::sort(curve.begin(), curve.end());
  const double lvl = level.value_or(std::accumulate(curve.begin(), curve.end(), 0.0) / static_cast<double>(n));
  const auto idx = static_cast<std::size_t>(std::lower_bound(curve.begin(), curve.end(), lvl) - curve.begin());
  return {std::move(curve), lvl, idx};
}

/// Fills an (n/factor) x factor matrix column-major with the series and
/// returns the row means, giving n/factor smoothed observations. factor = 1
/// is the identity; factor = n returns the grand mean.
inline Series smooth_model(std::span<const double> s, std::size_t factor) {
  if (factor == 0 || s.empty() || s.size() % factor != 0)
    throw std::invalid_argument("smoothing factor " + std::to_string(factor) +
                                " does not divide series length " + std::to_string(s.size()));
  const std::size_t rows = s.size() / factor;
  Series out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < factor; ++c) sum += s[r + rows * c];
    out[r] = sum / static_cast<double>(factor);
  }
  return out;
}

/// Every tick whose sample exceeds `level` is an event.
inline AvalancheEvents detect_avalanches(std::span<const double> s, double level) {
  if (s.empty()) throw std::invalid_argument("detect_avalanches needs a non-empty series");
  AvalancheEvents ev;
  for (std::size_t t = 0; t < s.size(); ++t)
    if (s[t] > level) {
      ev.times.push_back(t);
      ev.magnitudes.push_back(s[t]);
    }
  ev.intervals = detail::gaps(ev.times);
  return ev;
}

}  // namespace egrt::criticality
