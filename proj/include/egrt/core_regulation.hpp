#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "egrt/csv.hpp"
#include "egrt/error.hpp"

namespace egrt {

using StateIndex = std::size_t;
using Symbol = std::size_t;

/// Non-empty set of pairwise distinct state (or symbol) labels. States are
/// addressed by their position in the set.
class StateSet {
 public:
  explicit StateSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw std::invalid_argument("state set must be non-empty");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_)
      if (!seen.insert(l).second) throw std::invalid_argument("duplicate state label '" + l + "'");
  }

  StateSet(std::initializer_list<std::string> labels)
      : StateSet(std::vector<std::string>(labels)) {}

  /// {prefix0, prefix1, ...}
  static StateSet numbered(const std::string& prefix, std::size_t n) {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i));
    return StateSet(std::move(labels));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::optional<std::size_t> index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return i;
    return std::nullopt;
  }
  bool contains(std::string_view label) const { return index_of(label).has_value(); }

  bool operator==(const StateSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// Moore-style finite-state system S. The transition receives the regulator's
/// control symbol, or nullopt when the feedback leg is open.
struct DiscreteSystem {
  StateSet states;
  StateSet inputs;        // control alphabet accepted from R
  StateSet disturbances;  // phi alphabet
  std::function<StateIndex(StateIndex, std::optional<Symbol>, Symbol)> transition;
  std::function<double(StateIndex)> emission;
  StateIndex state = 0;
};

struct Response {
  StateIndex next;
  Symbol control;
};

/// Finite-state regulator R. It can only respond to the output values listed
/// in `observations`; anything else exceeds its variety.
struct Regulator {
  StateSet states;
  std::vector<double> observations;
  StateSet disturbances;  // rho alphabet
  std::function<Response(std::size_t observation, StateIndex own, Symbol rho)> policy;
  bool comparator_enabled = true;
  StateIndex state = 0;
};

/// Sliding-window visitation frequencies of S-states (the internal model M).
class InternalModel {
 public:
  InternalModel(std::size_t num_states, std::size_t horizon)
      : counts_(num_states, 0), horizon_(horizon) {
    if (num_states == 0) throw std::invalid_argument("internal model needs at least one state");
    if (horizon == 0) throw std::invalid_argument("internal model horizon must be >= 1");
  }

  void observe(StateIndex s) {
    if (s >= counts_.size()) throw std::invalid_argument("internal model: state index out of range");
    window_.push_back(s);
    ++counts_[s];
    if (window_.size() > horizon_) {
      --counts_[window_.front()];
      window_.pop_front();
    }
  }

  std::size_t observations() const noexcept { return window_.size(); }
  std::size_t horizon() const noexcept { return horizon_; }

  /// Empty before the first observation.
  std::vector<double> frequencies() const {
    std::vector<double> f;
    if (window_.empty()) return f;
    f.reserve(counts_.size());
    const double n = static_cast<double>(window_.size());
    for (auto c : counts_) f.push_back(static_cast<double>(c) / n);
    return f;
  }

 private:
  std::vector<std::size_t> counts_;
  std::deque<StateIndex> window_;
  std::size_t horizon_;
};

/// Goal region G as a closed interval of the output domain Z.
struct Goal {
  double lo;
  double hi;

  bool contains(double y) const noexcept { return y >= lo && y <= hi; }
  /// Distance from y to the region; 0 inside.
  double error(double y) const noexcept {
    if (y < lo) return lo - y;
    if (y > hi) return y - hi;
    return 0.0;
  }
  static Goal point(double v) { return {v, v}; }
};

enum class LoopMode { ClosedLoop, OpenLoopFeedforward };

struct ClosedLoopRelation {
  DiscreteSystem system;
  Regulator regulator;
  std::optional<InternalModel> model;
  Goal goal;
  LoopMode mode = LoopMode::ClosedLoop;
  long tick = 0;

  bool feedback_active() const noexcept {
    return mode == LoopMode::ClosedLoop && regulator.comparator_enabled;
  }
};

struct Disturbance {
  Symbol phi = 0;
  Symbol rho = 0;
};

struct TickRecord {
  long tick;
  std::string s_state;
  std::string r_state;
  double output;
  double error;
  std::string phi;
  std::string rho;

  bool operator==(const TickRecord&) const = default;
};

struct Trajectory {
  std::vector<TickRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::vector<double> outputs() const {
    std::vector<double> y;
    y.reserve(records.size());
    for (const auto& r : records) y.push_back(r.output);
    return y;
  }
  bool operator==(const Trajectory&) const = default;
};

inline constexpr const char* kTrajectoryHeader = "tick,s_state,r_state,output,error,phi,rho";

inline void write_csv(std::ostream& os, const Trajectory& traj) {
  os << kTrajectoryHeader << '\n';
  for (const auto& r : traj.records)
    os << r.tick << ',' << r.s_state << ',' << r.r_state << ',' << csv::num(r.output) << ','
       << csv::num(r.error) << ',' << r.phi << ',' << r.rho << '\n';
}

/// Executes one tick in place: S emits (acquisition), R observes and updates,
/// the control symbol reaches S only when the feedback leg is active, then M
/// records the emitting S-state.
inline TickRecord advance(ClosedLoopRelation& rel, Disturbance d) {
  auto& sys = rel.system;
  auto& reg = rel.regulator;
  if (d.phi >= sys.disturbances.size())
    throw std::invalid_argument("phi symbol index " + std::to_string(d.phi) + " out of range");
  if (d.rho >= reg.disturbances.size())
    throw std::invalid_argument("rho symbol index " + std::to_string(d.rho) + " out of range");

  const StateIndex s = sys.state;
  const double y = sys.emission(s);

  const auto obs = std::find(reg.observations.begin(), reg.observations.end(), y);
  if (obs == reg.observations.end())
    throw VarietyError("observation " + csv::num(y) + " from S-state '" + sys.states.label(s) +
                           "' is outside the regulator's declared range",
                       rel.tick);
  const auto obs_index = static_cast<std::size_t>(obs - reg.observations.begin());

  const Response resp = reg.policy(obs_index, reg.state, d.rho);
  if (resp.next >= reg.states.size())
    throw std::logic_error("regulator policy returned an out-of-range state");
  if (resp.control >= sys.inputs.size())
    throw std::logic_error("regulator policy returned an out-of-range control symbol");
  reg.state = resp.next;

  const std::optional<Symbol> control =
      rel.feedback_active() ? std::optional<Symbol>(resp.control) : std::nullopt;
  const StateIndex next = sys.transition(s, control, d.phi);
  if (next >= sys.states.size()) throw std::logic_error("system transition returned an out-of-range state");
  sys.state = next;

  if (rel.model) rel.model->observe(s);

  TickRecord rec{rel.tick,
                 sys.states.label(s),
                 reg.states.label(reg.state),
                 y,
                 rel.goal.error(y),
                 sys.disturbances.label(d.phi),
                 reg.disturbances.label(d.rho)};
  ++rel.tick;
  return rec;
}

inline std::pair<ClosedLoopRelation, TickRecord> step_relation(ClosedLoopRelation rel, Disturbance d) {
  TickRecord rec = advance(rel, d);
  return {std::move(rel), std::move(rec)};
}

/// Runs `ticks` steps in place, carrying state forward. Errors carry the tick.
inline Trajectory continue_relation(ClosedLoopRelation& rel, std::span<const Disturbance> stream,
                                    std::size_t ticks) {
  if (ticks == 0) throw std::invalid_argument("tick count must be >= 1");
  if (stream.size() < ticks)
    throw std::invalid_argument("disturbance stream has " + std::to_string(stream.size()) +
                                " entries, need " + std::to_string(ticks));
  Trajectory traj;
  traj.records.reserve(ticks);
  for (std::size_t i = 0; i < ticks; ++i) {
    try {
      traj.records.push_back(advance(rel, stream[i]));
    } catch (const VarietyError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("tick " + std::to_string(rel.tick) + ": " + e.what());
    }
  }
  return traj;
}

inline Trajectory run_relation(ClosedLoopRelation rel, std::span<const Disturbance> stream,
                               std::size_t ticks) {
  return continue_relation(rel, stream, ticks);
}

// --- regulation metrics ----------------------------------------------------

namespace detail {

inline std::vector<std::size_t> equal_width_bins(std::span<const double> values, int bins) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::size_t> out(values.size(), 0);
  if (!(hi > lo)) return out;
  const double width = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto b = static_cast<long>(std::floor((values[i] - lo) / width * bins));
    out[i] = static_cast<std::size_t>(std::clamp(b, 0L, static_cast<long>(bins) - 1));
  }
  return out;
}

template <typename Key>
double plugin_entropy(const std::map<Key, std::size_t>& counts, std::size_t total) {
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

// Plug-in conditional entropy of the symbol following each length-`k`
// context, over the n - k windows of the series.
inline double conditional_block_entropy(const std::vector<std::size_t>& sym, std::size_t k) {
  std::map<std::vector<std::size_t>, std::size_t> blocks, contexts;
  const std::size_t windows = sym.size() - k;
  for (std::size_t i = 0; i < windows; ++i) {
    std::vector<std::size_t> block(sym.begin() + static_cast<std::ptrdiff_t>(i),
                                   sym.begin() + static_cast<std::ptrdiff_t>(i + k + 1));
    ++blocks[block];
    block.pop_back();
    ++contexts[block];
  }
  return plugin_entropy(blocks, windows) - plugin_entropy(contexts, windows);
}

}  // namespace detail

/// Plug-in Shannon entropy (bits) of values histogrammed into `bins`
/// equal-width bins over their observed range.
inline double binned_entropy(std::span<const double> values, int bins) {
  if (bins < 2) throw std::invalid_argument("bins must be >= 2");
  if (values.empty()) throw std::invalid_argument("cannot score an empty trajectory");
  const auto sym = detail::equal_width_bins(values, bins);
  std::map<std::size_t, std::size_t> counts;
  for (auto s : sym) ++counts[s];
  return detail::plugin_entropy(counts, sym.size());
}

/// Entropy-rate estimate: entropy of the next binned value given the previous
/// `order` values. Near the ends of short series the plug-in estimate can
/// overshoot the marginal entropy, so it is capped there.
inline double binned_entropy_rate(std::span<const double> values, int order, int bins) {
  if (bins < 2) throw std::invalid_argument("bins must be >= 2");
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  if (values.size() < static_cast<std::size_t>(order) + 1)
    throw std::invalid_argument("trajectory of length " + std::to_string(values.size()) +
                                " is shorter than order+1 = " + std::to_string(order + 1));
  const auto sym = detail::equal_width_bins(values, bins);
  const double rate = detail::conditional_block_entropy(sym, static_cast<std::size_t>(order));
  std::map<std::size_t, std::size_t> counts;
  for (auto s : sym) ++counts[s];
  return std::clamp(rate, 0.0, detail::plugin_entropy(counts, sym.size()));
}

inline double point_regulation_score(const Trajectory& traj, int bins) {
  const auto y = traj.outputs();
  return binned_entropy(y, bins);
}

inline double path_regulation_score(const Trajectory& traj, int order, int bins) {
  const auto y = traj.outputs();
  return binned_entropy_rate(y, order, bins);
}

// --- canned relations --------------------------------------------------------

/// Two-state toggle: S flips every tick unless told to hold; a "kick"
/// disturbance adds an extra flip. The regulator holds when the output is in
/// the goal (1) and flips otherwise.
inline ClosedLoopRelation make_toggle_relation(LoopMode mode, StateIndex initial = 0,
                                               std::optional<std::size_t> model_horizon = std::nullopt) {
  DiscreteSystem sys{StateSet{"off", "on"}, StateSet{"hold", "flip"}, StateSet{"calm", "kick"},
                     [](StateIndex s, std::optional<Symbol> u, Symbol phi) -> StateIndex {
                       StateIndex next = u ? (*u == 0 ? s : 1 - s) : 1 - s;
                       if (phi == 1) next = 1 - next;
                       return next;
                     },
                     [](StateIndex s) { return static_cast<double>(s); }, initial};
  Regulator reg{StateSet{"idle", "correcting"}, {0.0, 1.0}, StateSet{"none"},
                [](std::size_t obs, StateIndex, Symbol) -> Response {
                  return obs == 1 ? Response{0, 0} : Response{1, 1};
                },
                true, 0};
  std::optional<InternalModel> model;
  if (model_horizon) model.emplace(2, *model_horizon);
  return ClosedLoopRelation{std::move(sys), std::move(reg), std::move(model), Goal::point(1.0), mode, 0};
}

}  // namespace egrt
