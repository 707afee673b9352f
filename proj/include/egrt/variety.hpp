#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "egrt/core_regulation.hpp"
#include "egrt/csv.hpp"

namespace egrt {

inline std::size_t variety(const StateSet& s) noexcept { return s.size(); }

/// Relation between R-states and S-states (psi). One-to-one is the special
/// case, not the rule.
class StateMapping {
 public:
  StateMapping(StateSet r_states, StateSet s_states,
               std::vector<std::pair<std::string, std::string>> pairs)
      : r_(std::move(r_states)), s_(std::move(s_states)), images_(r_.size()), preimages_(s_.size()) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& [rl, sl] : pairs) {
      const auto ri = r_.index_of(rl);
      if (!ri) throw std::invalid_argument("pair names unknown R-state '" + rl + "'");
      const auto si = s_.index_of(sl);
      if (!si) throw std::invalid_argument("pair names unknown S-state '" + sl + "'");
      if (!seen.insert({*ri, *si}).second)
        throw std::invalid_argument("duplicate pair (" + rl + ", " + sl + ")");
      pairs_.emplace_back(*ri, *si);
      images_[*ri].push_back(*si);
      preimages_[*si].push_back(*ri);
    }
  }

  const StateSet& r_states() const noexcept { return r_; }
  const StateSet& s_states() const noexcept { return s_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept { return pairs_; }

  const std::vector<std::size_t>& images(std::size_t r) const { return images_.at(r); }
  const std::vector<std::size_t>& preimages(std::size_t s) const { return preimages_.at(s); }

 private:
  StateSet r_;
  StateSet s_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::vector<std::size_t>> images_;
  std::vector<std::vector<std::size_t>> preimages_;
};

/// f: R -> S, the feedforward image of an R-state.
inline std::set<std::string> forward_apply(const StateMapping& m, const std::string& r) {
  const auto ri = m.r_states().index_of(r);
  if (!ri) throw std::invalid_argument("unknown R-state '" + r + "'");
  std::set<std::string> out;
  for (auto s : m.images(*ri)) out.insert(m.s_states().label(s));
  return out;
}

/// f^-1, the feedback preimage of an S-state.
inline std::set<std::string> inverse_apply(const StateMapping& m, const std::string& s) {
  const auto si = m.s_states().index_of(s);
  if (!si) throw std::invalid_argument("unknown S-state '" + s + "'");
  std::set<std::string> out;
  for (auto r : m.preimages(*si)) out.insert(m.r_states().label(r));
  return out;
}

enum class MappingTag { Isomorphic, Underspecified, Aliased, Mixed };

inline const char* to_string(MappingTag t) noexcept {
  switch (t) {
    case MappingTag::Isomorphic: return "Isomorphic";
    case MappingTag::Underspecified: return "Underspecified";
    case MappingTag::Aliased: return "Aliased";
    case MappingTag::Mixed: return "Mixed";
  }
  return "?";
}

/// |R| / |S| in lowest terms.
struct VarietyRatio {
  std::size_t num;
  std::size_t den;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const VarietyRatio&) const = default;
};

struct MappingClass {
  MappingTag tag;
  VarietyRatio variety_ratio;
};

inline MappingClass classify_mapping(const StateMapping& m) {
  if (m.pairs().empty()) throw std::invalid_argument("mapping has no pairs");
  const std::size_t nr = m.r_states().size(), ns = m.s_states().size();
  const std::size_t g = std::gcd(nr, ns);
  const VarietyRatio ratio{nr / g, ns / g};

  bool every_r_mapped = true, every_r_single = true;
  for (std::size_t r = 0; r < nr; ++r) {
    every_r_mapped = every_r_mapped && !m.images(r).empty();
    every_r_single = every_r_single && m.images(r).size() == 1;
  }
  bool every_s_covered = true, no_s_shared = true;
  for (std::size_t s = 0; s < ns; ++s) {
    every_s_covered = every_s_covered && !m.preimages(s).empty();
    no_s_shared = no_s_shared && m.preimages(s).size() <= 1;
  }

  MappingTag tag = MappingTag::Mixed;
  if (nr == ns && every_r_single && every_s_covered && no_s_shared)
    tag = MappingTag::Isomorphic;
  else if (nr < ns && every_r_mapped && no_s_shared)
    tag = MappingTag::Underspecified;
  else if (nr > ns && every_s_covered)
    tag = MappingTag::Aliased;
  return {tag, ratio};
}

struct VarietyVerdict {
  bool satisfied = true;
  std::string reason;  // empty when satisfied
  std::string label;   // offending state label, if any

  static VarietyVerdict ok() { return {}; }
};

/// Satisfied unless the mapping aliases R onto S. The violation names the
/// first S-state shared by several R-states, or else the first R-state with
/// no counterpart.
inline VarietyVerdict requisite_variety_check(const StateMapping& m) {
  const auto cls = classify_mapping(m);
  if (cls.tag != MappingTag::Aliased) return VarietyVerdict::ok();
  for (std::size_t s = 0; s < m.s_states().size(); ++s)
    if (m.preimages(s).size() > 1) return {false, "aliasing", m.s_states().label(s)};
  for (std::size_t r = 0; r < m.r_states().size(); ++r)
    if (m.images(r).empty()) return {false, "aliasing", m.r_states().label(r)};
  return {false, "aliasing", {}};
}

/// Reads `r_state,s_state` rows. A row with one empty field declares a state
/// that takes part in no pair, so unmatched S- or R-states survive the file.
inline StateMapping load_mapping_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("mapping CSV is empty");
  if (csv::trim(line) != "r_state,s_state")
    throw std::invalid_argument("mapping CSV header must be 'r_state,s_state'");

  std::vector<std::string> r_labels, s_labels;
  std::vector<std::pair<std::string, std::string>> pairs;
  auto remember = [](std::vector<std::string>& v, const std::string& l) {
    if (!l.empty() && std::find(v.begin(), v.end(), l) == v.end()) v.push_back(l);
  };
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const auto t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = csv::split(t);
    if (fields.size() != 2)
      throw std::invalid_argument("mapping CSV row " + std::to_string(row) + ": expected 2 fields");
    const std::string r{csv::trim(fields[0])}, s{csv::trim(fields[1])};
    if (r.empty() && s.empty())
      throw std::invalid_argument("mapping CSV row " + std::to_string(row) + ": both fields empty");
    remember(r_labels, r);
    remember(s_labels, s);
    if (!r.empty() && !s.empty()) pairs.emplace_back(r, s);
  }
  if (r_labels.empty() || s_labels.empty())
    throw std::invalid_argument("mapping CSV declares no R-states or no S-states");
  return StateMapping(StateSet(std::move(r_labels)), StateSet(std::move(s_labels)), std::move(pairs));
}

/// Three R-states matched one-to-one into six S-states.
inline StateMapping underspecified_example() {
  return StateMapping(StateSet::numbered("r", 3), StateSet::numbered("s", 6),
                      {{"r0", "s0"}, {"r1", "s2"}, {"r2", "s4"}});
}

/// Twenty R-states collapsing onto three S-states.
inline StateMapping aliased_example() {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t r = 0; r < 20; ++r) pairs.emplace_back("r" + std::to_string(r), "s" + std::to_string(r % 3));
  return StateMapping(StateSet::numbered("r", 20), StateSet::numbered("s", 3), std::move(pairs));
}

}  // namespace egrt
