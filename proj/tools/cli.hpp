#pragma once

// Batch front end. Every subcommand renders its outputs in memory, writes
// them atomically, then writes one JSON-lines manifest describing the run.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "egrt/egrt.hpp"

namespace egrt::cli {

inline constexpr const char* kToolName = "egrt";
inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kRngName = "splitmix64";

using Params = std::vector<std::pair<std::string, std::string>>;

/// One invocation: the resolved parameters and where outputs went.
struct Run {
  std::string subcommand;  // e.g. "avalanche gen"
  Params params;
  std::uint64_t seed = 1;
  std::string output;  // empty means stdout
  std::vector<std::string> written;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;

  bool to_stdout() const { return output.empty() || output == "-"; }
};

// --- output plumbing ------------------------------------------------------------

inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeError("cannot open '" + tmp.string() + "' for writing");
    f << content;
    f.flush();
    if (!f) throw RuntimeError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw RuntimeError("cannot move output into place at '" + path + "'");
  }
}

inline std::string params_line(const Run& run) {
  std::string s = "# params: command=" + run.subcommand;
  for (const auto& [k, v] : run.params) s += " " + k + "=" + v;
  return s + "\n";
}

/// `# params:` line, header, rows.
inline std::string csv_doc(const Run& run, const std::string& header, const std::string& rows) {
  return params_line(run) + header + "\n" + rows;
}

/// The primary output goes to --output or stdout.
inline void emit_primary(Run& run, const std::string& content) {
  if (run.to_stdout()) {
    *run.out << content;
    run.out->flush();
    return;
  }
  write_atomic(run.output, content);
  run.written.push_back(run.output);
}

inline void emit_file(Run& run, const std::string& path, const std::string& content) {
  write_atomic(path, content);
  run.written.push_back(path);
}

/// A JSON-lines side record (role annotations), beside the output or on stderr.
inline void emit_side_record(Run& run, const std::string& suffix, const nlohmann::ordered_json& rec) {
  if (run.to_stdout()) {
    *run.err << rec.dump() << '\n';
    return;
  }
  emit_file(run, run.output + suffix, rec.dump() + "\n");
}

inline std::string manifest_path(const std::string& output) { return output + ".manifest.jsonl"; }

inline nlohmann::ordered_json manifest_record(const Run& run, double wall_time) {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [k, v] : run.params) params[k] = v;
  return {{"tool", kToolName},    {"version", kVersion}, {"subcommand", run.subcommand},
          {"params", params},     {"seed", run.seed},    {"rng", kRngName},
          {"outputs", run.written}, {"wall_time", wall_time}};
}

inline void emit_manifest(const Run& run, double wall_time) {
  const auto rec = manifest_record(run, wall_time);
  if (run.to_stdout())
    *run.err << rec.dump() << '\n';
  else
    write_atomic(manifest_path(run.output), rec.dump() + "\n");
}

// --- parameter collection ----------------------------------------------------------

inline bool is_plumbing(const CLI::Option* opt) {
  const auto name = opt->get_single_name();
  return name == "help" || name == "output" || name == "config" || name.empty();
}

/// Resolved long-name parameters of a leaf subcommand, given values first
/// falling back to captured defaults. Unset options without defaults are omitted.
inline Params collect_params(const CLI::App* leaf) {
  Params p;
  for (const CLI::Option* opt : leaf->get_options()) {
    if (is_plumbing(opt)) continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
      if (value.empty()) continue;
    }
    p.emplace_back(opt->get_single_name(), value);
  }
  return p;
}

// --- config file --------------------------------------------------------------------

/// Reads `key = value` lines ('#' comments, blank lines ignored).
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(row) + " is not key=value");
    out.emplace_back(std::string(csv::trim(t.substr(0, eq))), std::string(csv::trim(t.substr(eq + 1))));
  }
  return out;
}

/// Appends `--key=value` for config entries the command line did not set, so
/// flags win over the file and the file wins over defaults.
inline std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  for (const auto& [key, value] : read_config(path)) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

// --- helpers ----------------------------------------------------------------------------

inline double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(what + " '" + text + "' is not a number");
  }
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : csv::split(text)) out.push_back(parse_double(std::string(csv::trim(item)), what));
  if (out.empty()) throw std::invalid_argument(what + " list is empty");
  return out;
}

template <typename T>
std::string series_rows(const std::vector<T>& s, std::size_t base = 0) {
  std::string rows;
  for (std::size_t i = 0; i < s.size(); ++i) rows += std::to_string(i + base) + "," + csv::num(s[i]) + "\n";
  return rows;
}

inline std::string stem_of(const std::string& output) {
  const std::filesystem::path p(output);
  return (p.parent_path() / p.stem()).string();
}

// --- subcommands -------------------------------------------------------------------------

struct RelationOpts {
  std::size_t ticks = 100;
  std::string mode = "closed";
  double kick_prob = 0.2;
  std::size_t horizon = 0;
  std::size_t initial = 0;
  int bins = 2;
  int order = 1;
};

inline void run_relation_cmd(Run& run, const RelationOpts& o) {
  if (o.mode != "closed" && o.mode != "open")
    throw std::invalid_argument("mode must be 'closed' or 'open' (got '" + o.mode + "')");
  if (!(o.kick_prob >= 0.0 && o.kick_prob <= 1.0)) throw std::invalid_argument("kick-prob must lie in [0,1]");
  if (o.initial > 1) throw std::invalid_argument("initial state must be 0 or 1");
  const auto mode = o.mode == "closed" ? LoopMode::ClosedLoop : LoopMode::OpenLoopFeedforward;
  auto rel = make_toggle_relation(mode, o.initial, o.horizon ? std::optional<std::size_t>(o.horizon) : std::nullopt);

  SplitMix64 rng(run.seed);
  std::vector<Disturbance> stream(o.ticks);
  for (auto& d : stream) d.phi = rng.uniform() < o.kick_prob ? 1 : 0;
  const auto traj = run_relation(std::move(rel), stream, o.ticks);

  std::ostringstream body;
  write_csv(body, traj);
  emit_primary(run, params_line(run) + body.str());
  *run.err << "point_score=" << csv::num(point_regulation_score(traj, o.bins))
           << " path_score=" << csv::num(path_regulation_score(traj, o.order, o.bins)) << '\n';
}

struct VarietyOpts {
  std::string mapping;
  std::string example = "underspecified";
};

inline void run_variety_cmd(Run& run, const VarietyOpts& o) {
  auto load = [&]() {
    if (!o.mapping.empty()) {
      std::ifstream in(o.mapping);
      if (!in) throw std::invalid_argument("cannot read mapping file '" + o.mapping + "'");
      return load_mapping_csv(in);
    }
    if (o.example == "underspecified") return underspecified_example();
    if (o.example == "aliased") return aliased_example();
    throw std::invalid_argument("example must be 'underspecified' or 'aliased' (got '" + o.example + "')");
  };
  const StateMapping m = load();
  const auto cls = classify_mapping(m);
  const auto verdict = requisite_variety_check(m);
  const std::string row = std::to_string(m.r_states().size()) + "," + std::to_string(m.s_states().size()) + "," +
                          to_string(cls.tag) + "," + std::to_string(cls.variety_ratio.num) + "/" +
                          std::to_string(cls.variety_ratio.den) + "," +
                          (verdict.satisfied ? "satisfied" : "violated") + "," + verdict.reason + "," +
                          verdict.label + "\n";
  emit_primary(run, csv_doc(run, "r_variety,s_variety,tag,variety_ratio,requisite_variety,reason,label", row));
}

struct PidOpts {
  double kp = 1.0;
  std::string ti = "inf";
  double td = 0.0;
  double dt = 0.01;
  std::size_t steps = 1000;
  double setpoint = 1.0;
  double plant_gain = 1.0;
  double x0 = 0.0;
  double disturbance = 0.0;
};

inline void run_pid_cmd(Run& run, const PidOpts& o) {
  const pid::Gains g{o.kp, parse_double(o.ti, "ti"), o.td};
  const auto traj = pid::simulate(g, {o.plant_gain, o.setpoint, o.x0, o.disturbance, o.dt, o.steps});
  std::ostringstream body;
  pid::write_csv(body, traj);
  emit_primary(run, params_line(run) + body.str());
}

struct SeriesOpts {
  std::size_t n = 1000;
  double e = 1.0;
  bool no_shuffle = false;
};

inline criticality::Series make_series(const Run& run, const SeriesOpts& o) {
  return criticality::gen_power_series(o.n, o.e, run.seed, !o.no_shuffle).samples;
}

inline void run_avalanche_gen(Run& run, const SeriesOpts& o) {
  emit_primary(run, csv_doc(run, "t,value", series_rows(make_series(run, o), 1)));
}

inline void run_avalanche_map(Run& run, const SeriesOpts& o, bool positive) {
  const auto s = make_series(run, o);
  const auto mapped = positive ? criticality::pfb_map(s) : criticality::nfb_map(s);
  emit_primary(run, csv_doc(run, "t,value", series_rows(mapped, 1)));
}

struct BurstOpts {
  SeriesOpts series;
  std::string input = "uniform";
  std::size_t interval_min = 4;
  std::size_t interval_max = 10;
};

inline void run_avalanche_bursts(Run& run, const BurstOpts& o) {
  criticality::Series in;
  if (o.input == "uniform")
    in = criticality::uniform_series(o.series.n, run.seed);
  else if (o.input == "power")
    in = make_series(run, o.series);
  else
    throw std::invalid_argument("input must be 'uniform' or 'power' (got '" + o.input + "')");
  // The release schedule draws from its own stream, split off the run seed.
  SplitMix64 root(run.seed);
  const auto sched_seed = root.split().next();
  const auto res = criticality::accumulate_release(in, {o.interval_min, o.interval_max}, sched_seed);
  std::string rows;
  for (std::size_t t = 0; t < in.size(); ++t)
    rows += std::to_string(t) + "," + csv::num(in[t]) + "," + csv::num(res.bursts[t]) + "\n";
  emit_primary(run, csv_doc(run, "t,input,burst", rows));
  *run.err << "releases=" << res.events.count() << " residual=" << csv::num(res.residual) << '\n';
}

inline void run_avalanche_rank(Run& run, const SeriesOpts& o) {
  const auto ranked = criticality::rank_order(make_series(run, o));
  emit_primary(run, csv_doc(run, "rank,value", series_rows(ranked, 1)));
}

struct ThresholdOpts {
  std::size_t n = 10000;
  double e = 0.1;
  std::optional<double> level;
};

inline void run_avalanche_threshold(Run& run, const ThresholdOpts& o) {
  const auto m = criticality::threshold_model(o.n, o.e, o.level);
  std::string rows;
  for (std::size_t i = 0; i < m.curve.size(); ++i)
    rows += std::to_string(i) + "," + csv::num(m.curve[i]) + "," + (i >= m.crossing_index ? "1" : "0") + "\n";
  emit_primary(run, csv_doc(run, "index,value,above", rows));
  *run.err << "level=" << csv::num(m.level) << " crossing_index=" << m.crossing_index << '\n';
}

struct SmoothOpts {
  SeriesOpts series;
  std::size_t factor = 10;
};

inline void run_avalanche_smooth(Run& run, const SmoothOpts& o) {
  const auto smoothed = criticality::smooth_model(make_series(run, o.series), o.factor);
  emit_primary(run, csv_doc(run, "i,value", series_rows(smoothed)));
}

struct DiffuseOpts {
  std::string input;
  std::size_t width = 64;
  std::size_t height = 64;
  std::string mode = "uniform";
  std::string levels;
  double alpha = 0.75;
  bool cumulative = false;
  bool ascii = false;
};

inline void run_diffuse_cmd(Run& run, const DiffuseOpts& o) {
  if (run.to_stdout()) throw std::invalid_argument("diffuse writes images and needs --output");
  const diffusion::GrayImage img = [&] {
    if (o.input.empty()) return diffusion::gradient_image(o.width, o.height);
    std::ifstream in(o.input, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read input image '" + o.input + "'");
    return diffusion::read_pnm(in);
  }();

  diffusion::NoiseSchedule sched;
  if (o.mode == "uniform") {
    sched = o.levels.empty() ? diffusion::uniform_schedule() : diffusion::NoiseSchedule{};
    if (!o.levels.empty())
      for (double a : parse_list(o.levels, "level")) sched.push_back(diffusion::UniformBlend{a});
  } else if (o.mode == "power") {
    sched = o.levels.empty() ? diffusion::power_schedule({0.8, 0.6, 0.4, 0.2, 0.01}, o.alpha)
                             : diffusion::power_schedule(parse_list(o.levels, "level"), o.alpha);
  } else {
    throw std::invalid_argument("mode must be 'uniform' or 'power' (got '" + o.mode + "')");
  }

  const auto steps = diffusion::run_schedule(img, sched, run.seed, o.cumulative);
  const std::string stem = stem_of(run.output);
  std::string rows;
  for (std::size_t i = 0; i <= steps.size(); ++i) {
    const auto& frame = i == 0 ? img : steps[i - 1];
    std::ostringstream pgm;
    diffusion::write_pgm(pgm, frame, o.ascii);
    const std::string path = stem + "_step" + std::to_string(i) + ".pgm";
    emit_file(run, path, pgm.str());
    const auto st = diffusion::image_stats(frame);
    rows += std::to_string(i) + "," + csv::num(st.mean) + "," + csv::num(st.variance) + "," +
            std::filesystem::path(path).filename().string() + "\n";
  }
  emit_primary(run, csv_doc(run, "step,mean,variance,image", rows));
}

struct LurOpts {
  std::string phases = "0:200,90:200,0:200";
  double gain = 1.0;
  double rate = 0.005;
  double distance = 0.1;
  std::size_t steps = 100;
  double dt = 0.01;
  std::optional<double> direction;
};

inline void run_lur_cmd(Run& run, const LurOpts& o) {
  if (!(o.rate > 0.0)) throw std::invalid_argument("rate must be > 0");
  const auto sched = procedural::LurSchedule::parse(o.phases);
  const auto res = procedural::run_lur({{}, o.rate}, sched, {o.gain, o.distance, o.steps, o.dt, run.seed, o.direction});
  std::string rows;
  for (std::size_t p = 0; p < res.curves.size(); ++p)
    for (std::size_t t = 0; t < res.curves[p].size(); ++t)
      rows += std::to_string(p + 1) + "," + std::to_string(t + 1) + "," + csv::num(res.curves[p][t]) + "\n";
  emit_primary(run, csv_doc(run, "phase,trial,error", rows));
  if (res.interference) *run.err << "interference=" << csv::num(*res.interference);
  if (res.savings) *run.err << " savings=" << *res.savings;
  if (res.interference) *run.err << '\n';
}

struct VehicleOpts {
  std::size_t steps = 10000;
  double dt = 0.01;
  double heading = std::numbers::pi / 2.0;
  double sensor_offset = 0.05;
  double speed_gain = 1.0;
  double turn_gain = 20.0;
  double goal_radius = 0.02;
  std::string target = "1,0,0";
  bool expanding = false;
};

inline void run_vehicle_cmd(Run& run, const VehicleOpts& o) {
  using namespace procedural;
  const auto field = CmykField::unit();
  const auto cmy = parse_list(o.target, "target");
  if (cmy.size() != 3) throw std::invalid_argument("target needs three values c,m,y");
  const double sum = cmy[0] + cmy[1] + cmy[2];
  if (std::min({cmy[0], cmy[1], cmy[2]}) < 0.0 || std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("target c,m,y must be non-negative and sum to 1");

  Vehicle v;
  v.position = field.centroid();
  v.heading = o.heading;
  v.sensor_offset = o.sensor_offset;
  v.speed_gain = o.speed_gain;
  v.turn_gain = o.turn_gain;
  v.goal_radius = o.goal_radius;
  v.target = CmykPoint::from_cmy(cmy[0], cmy[1], cmy[2]);

  std::vector<VehicleSample> samples;
  if (o.expanding) {
    const auto c = CmykPoint::from_cmy(1, 0, 0), m = CmykPoint::from_cmy(0, 1, 0), y = CmykPoint::from_cmy(0, 0, 1);
    const std::vector<std::vector<CmykPoint>> stages{
        {c},
        {c, m, y},
        {c, m, y, CmykPoint::from_cmy(0.5, 0.5, 0), CmykPoint::from_cmy(0, 0.5, 0.5), CmykPoint::from_cmy(0.5, 0, 0.5)}};
    const auto res = run_expanding_goal(v, field, stages, o.steps, o.dt);
    samples = res.samples;
    *run.err << "coverage=";
    for (std::size_t i = 0; i < res.coverage.size(); ++i) *run.err << (i ? "," : "") << csv::num(res.coverage[i]);
    *run.err << '\n';
  } else {
    const auto res = run_vehicle(v, field, o.steps, o.dt);
    samples = res.samples;
    *run.err << "reached_step=" << (res.reached_step ? std::to_string(*res.reached_step) : "none") << '\n';
  }
  std::string rows;
  for (const auto& s : samples)
    rows += std::to_string(s.step) + "," + csv::num(s.position.x) + "," + csv::num(s.position.y) + "," +
            csv::num(s.color.c) + "," + csv::num(s.color.m) + "," + csv::num(s.color.y) + "," + csv::num(s.color.k) +
            "," + csv::num(s.dist) + "\n";
  emit_primary(run, csv_doc(run, "step,x,y,c,m,y,k,dist", rows));
}

inline nlohmann::ordered_json roles_record(const std::string& demo, const demos::RoleAnnotation& roles) {
  nlohmann::ordered_json map = nlohmann::ordered_json::object();
  for (const auto& [name, role] : roles.items()) map[name] = demos::to_string(role);
  return {{"demo", demo}, {"interpretive", true}, {"roles", map}};
}

struct GdOpts {
  double lr = 0.5;
  std::size_t iters = 20;
  double target_x = 0.0, target_y = 0.0;
  double x0_x = 1.0, x0_y = 1.0;
};

inline void run_demo_gd(Run& run, const GdOpts& o) {
  const auto res = demos::gd_regulate({o.target_x, o.target_y}, {o.x0_x, o.x0_y}, o.lr, o.iters);
  std::string rows;
  for (std::size_t k = 0; k < res.iterates.size(); ++k)
    rows += std::to_string(k) + "," + csv::num(res.iterates[k].x) + "," + csv::num(res.iterates[k].y) + "," +
            csv::num(res.errors[k]) + "\n";
  emit_primary(run, csv_doc(run, "iter,x,y,error", rows));
  emit_side_record(run, ".roles.jsonl", roles_record("gd", res.roles));
}

struct QOpts {
  std::string grid = "3x3";
  std::size_t goal_x = 0, goal_y = 0;
  std::size_t episodes = 2000;
  double learn_rate = 0.5;
  double discount = 0.9;
  double epsilon = 0.2;
  double step_reward = -1.0;
  double goal_reward = 0.0;
  double initial_value = 0.0;
  std::size_t max_steps = 0;
};

inline void run_demo_q(Run& run, const QOpts& o) {
  demos::QConfig cfg;
  const auto x = o.grid.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument("grid");
    std::size_t used = 0;
    cfg.width = std::stoul(o.grid.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("grid");
    cfg.height = std::stoul(o.grid.substr(x + 1), &used);
    if (used != o.grid.size() - x - 1) throw std::invalid_argument("grid");
  } catch (const std::exception&) {
    throw std::invalid_argument("grid must look like WxH (got '" + o.grid + "')");
  }
  cfg.goal_x = o.goal_x;
  cfg.goal_y = o.goal_y;
  cfg.episodes = o.episodes;
  cfg.learn_rate = o.learn_rate;
  cfg.discount = o.discount;
  cfg.epsilon = o.epsilon;
  cfg.step_reward = o.step_reward;
  cfg.goal_reward = o.goal_reward;
  cfg.initial_value = o.initial_value;
  cfg.max_steps = o.max_steps;
  const auto res = demos::q_regulate(cfg, run.seed);
  std::string rows;
  for (std::size_t s = 0; s < cfg.cells(); ++s) {
    rows += std::to_string(s % cfg.width) + "," + std::to_string(s / cfg.width) + "," +
            (res.policy[s] ? demos::to_string(*res.policy[s]) : "goal");
    for (double q : res.values[s]) rows += "," + csv::num(q);
    rows += "\n";
  }
  emit_primary(run, csv_doc(run, "x,y,action,q_n,q_e,q_s,q_w", rows));
  emit_side_record(run, ".roles.jsonl", roles_record("q", res.roles));
}

// --- dispatch ----------------------------------------------------------------------------

namespace detail {

struct Leaf {
  CLI::App* app;
  std::function<void(Run&)> body;
};

/// Adds an option whose default is recorded exactly (doubles at full
/// precision) so parameter records replay to the same values.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, T& target, const std::string& desc = "") {
  auto* o = app->add_option(name, target, desc);
  if constexpr (std::is_floating_point_v<T>) {
    char buf[64];
    const auto end = std::to_chars(buf, buf + sizeof buf, target).ptr;  // shortest round-trip form
    o->default_str(std::string(buf, end));
  }
  else if constexpr (!requires { target.has_value(); })
    o->capture_default_str();
  return o;
}

inline CLI::App* leaf(CLI::App* parent, const std::string& name, const std::string& desc, std::string& output,
                      std::uint64_t& seed, std::string& config) {
  auto* app = parent->add_subcommand(name, desc);
  app->add_option("-o,--output", output, "output path (default: stdout)");
  opt(app, "--seed", seed, "RNG seed");
  app->add_option("--config", config, "key=value file; flags override it");
  return app;
}

inline void series_flags(CLI::App* app, SeriesOpts& o) {
  opt(app, "--n", o.n, "series length");
  opt(app, "--e", o.e, "power-law exponent");
  app->add_flag("--no-shuffle", o.no_shuffle, "keep t^-e in time order");
}

}  // namespace detail

inline int run_replay(const std::string& manifest, const std::string& output, std::ostream& out, std::ostream& err);

/// Parses argv and runs one subcommand. 0 success, 2 usage or precondition
/// error, 1 runtime failure.
inline int dispatch(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const auto started = std::chrono::steady_clock::now();
  std::string output, config, replay_manifest, replay_output;
  std::uint64_t seed = 1;

  CLI::App app{"Good-regulator simulation laboratory", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::vector<detail::Leaf> leaves;
  auto add = [&](CLI::App* parent, const std::string& name, const std::string& desc) {
    return detail::leaf(parent, name, desc, output, seed, config);
  };

  RelationOpts rel;
  {
    auto* a = add(&app, "relation", "run the toggle S-R relation and write its trajectory");
    detail::opt(a, "--ticks", rel.ticks);
    detail::opt(a, "--mode", rel.mode, "closed | open");
    detail::opt(a, "--kick-prob", rel.kick_prob, "probability of a phi kick per tick");
    detail::opt(a, "--horizon", rel.horizon, "internal model window (0: none)");
    detail::opt(a, "--initial", rel.initial);
    detail::opt(a, "--bins", rel.bins);
    detail::opt(a, "--order", rel.order);
    leaves.push_back({a, [&](Run& r) { run_relation_cmd(r, rel); }});
  }

  VarietyOpts var;
  {
    auto* a = add(&app, "variety", "classify an R-S state mapping");
    detail::opt(a, "--mapping", var.mapping, "CSV with header r_state,s_state");
    detail::opt(a, "--example", var.example, "underspecified | aliased");
    leaves.push_back({a, [&](Run& r) { run_variety_cmd(r, var); }});
  }

  PidOpts pidopt;
  {
    auto* a = add(&app, "pid", "PID setpoint tracking on an integrator plant");
    detail::opt(a, "--kp", pidopt.kp);
    detail::opt(a, "--ti", pidopt.ti, "integral time, inf disables");
    detail::opt(a, "--td", pidopt.td);
    detail::opt(a, "--dt", pidopt.dt);
    detail::opt(a, "--steps", pidopt.steps);
    detail::opt(a, "--setpoint", pidopt.setpoint);
    detail::opt(a, "--plant-gain", pidopt.plant_gain);
    detail::opt(a, "--x0", pidopt.x0);
    detail::opt(a, "--disturbance", pidopt.disturbance);
    leaves.push_back({a, [&](Run& r) { run_pid_cmd(r, pidopt); }});
  }

  auto* aval = app.add_subcommand("avalanche", "criticality series tools");
  aval->require_subcommand(1);
  SeriesOpts gen, pfb, nfb, rank;
  BurstOpts bursts;
  ThresholdOpts thr;
  SmoothOpts smooth;
  {
    auto* a = add(aval, "gen", "shuffled power-law series");
    detail::series_flags(a, gen);
    leaves.push_back({a, [&](Run& r) { run_avalanche_gen(r, gen); }});
    a = add(aval, "pfb", "adjacent means of a power-law series");
    detail::series_flags(a, pfb);
    leaves.push_back({a, [&](Run& r) { run_avalanche_map(r, pfb, true); }});
    a = add(aval, "nfb", "absolute adjacent differences of a power-law series");
    detail::series_flags(a, nfb);
    leaves.push_back({a, [&](Run& r) { run_avalanche_map(r, nfb, false); }});
    a = add(aval, "bursts", "accumulate and release at random intervals");
    detail::series_flags(a, bursts.series);
    bursts.series.n = 1001;
    a->get_option("--n")->default_val(1001);
    detail::opt(a, "--input", bursts.input, "uniform | power");
    detail::opt(a, "--interval-min", bursts.interval_min);
    detail::opt(a, "--interval-max", bursts.interval_max);
    leaves.push_back({a, [&](Run& r) { run_avalanche_bursts(r, bursts); }});
    a = add(aval, "rank", "power-law series sorted descending");
    detail::series_flags(a, rank);
    leaves.push_back({a, [&](Run& r) { run_avalanche_rank(r, rank); }});
    a = add(aval, "threshold", "sorted power-law detection curve");
    detail::opt(a, "--n", thr.n);
    detail::opt(a, "--e", thr.e);
    detail::opt(a, "--level", thr.level, "detection level (default: curve mean)");
    leaves.push_back({a, [&](Run& r) { run_avalanche_threshold(r, thr); }});
    a = add(aval, "smooth", "strided block means of a power-law series");
    detail::series_flags(a, smooth.series);
    smooth.series.n = 10000;
    a->get_option("--n")->default_val(10000);
    detail::opt(a, "--factor", smooth.factor);
    leaves.push_back({a, [&](Run& r) { run_avalanche_smooth(r, smooth); }});
  }

  DiffuseOpts dif;
  {
    auto* a = add(&app, "diffuse", "forward noising schedule on a PGM image");
    detail::opt(a, "--input", dif.input, "PGM/PPM input (default: gradient card)");
    detail::opt(a, "--width", dif.width);
    detail::opt(a, "--height", dif.height);
    detail::opt(a, "--mode", dif.mode, "uniform | power");
    detail::opt(a, "--levels", dif.levels, "comma list: blend alphas (uniform) or shapes (power)");
    detail::opt(a, "--alpha", dif.alpha, "blend weight of power masks");
    a->add_flag("--cumulative", dif.cumulative, "noise each step's output instead of the original");
    a->add_flag("--ascii", dif.ascii, "write P2 instead of P5");
    leaves.push_back({a, [&](Run& r) { run_diffuse_cmd(r, dif); }});
  }

  LurOpts lur;
  {
    auto* g = app.add_subcommand("lur", "learning-unlearning-relearning under curl fields");
    g->require_subcommand(1);
    auto* a = add(g, "run", "run a phase schedule");
    detail::opt(a, "--phases", lur.phases, "angle:trials,...");
    detail::opt(a, "--gain", lur.gain);
    detail::opt(a, "--rate", lur.rate);
    detail::opt(a, "--distance", lur.distance);
    detail::opt(a, "--steps", lur.steps);
    detail::opt(a, "--dt", lur.dt);
    detail::opt(a, "--direction", lur.direction, "fixed reach direction in degrees");
    leaves.push_back({a, [&](Run& r) { run_lur_cmd(r, lur); }});
  }

  VehicleOpts veh;
  {
    auto* g = app.add_subcommand("vehicle", "Braitenberg vehicle in the CMYK triangle");
    g->require_subcommand(1);
    auto* a = add(g, "run", "drive from the centroid toward a target color");
    detail::opt(a, "--steps", veh.steps, "steps (per stage with --expanding)");
    detail::opt(a, "--dt", veh.dt);
    detail::opt(a, "--heading", veh.heading);
    detail::opt(a, "--sensor-offset", veh.sensor_offset);
    detail::opt(a, "--speed-gain", veh.speed_gain);
    detail::opt(a, "--turn-gain", veh.turn_gain);
    detail::opt(a, "--goal-radius", veh.goal_radius);
    detail::opt(a, "--target", veh.target, "c,m,y");
    a->add_flag("--expanding", veh.expanding, "visit goal stages {C}, {C,M,Y}, {C,M,Y and edge midpoints}");
    leaves.push_back({a, [&](Run& r) { run_vehicle_cmd(r, veh); }});
  }

  GdOpts gd;
  QOpts q;
  {
    auto* g = app.add_subcommand("demo", "worked regulator examples");
    g->require_subcommand(1);
    auto* a = add(g, "gd", "gradient descent on a quadratic bowl");
    detail::opt(a, "--lr", gd.lr);
    detail::opt(a, "--iters", gd.iters);
    detail::opt(a, "--target-x", gd.target_x);
    detail::opt(a, "--target-y", gd.target_y);
    detail::opt(a, "--x0-x", gd.x0_x);
    detail::opt(a, "--x0-y", gd.x0_y);
    leaves.push_back({a, [&](Run& r) { run_demo_gd(r, gd); }});
    a = add(g, "q", "tabular Q-learning on a gridworld");
    detail::opt(a, "--grid", q.grid, "WxH");
    detail::opt(a, "--goal-x", q.goal_x);
    detail::opt(a, "--goal-y", q.goal_y);
    detail::opt(a, "--episodes", q.episodes);
    detail::opt(a, "--learn-rate", q.learn_rate);
    detail::opt(a, "--discount", q.discount);
    detail::opt(a, "--epsilon", q.epsilon);
    detail::opt(a, "--step-reward", q.step_reward);
    detail::opt(a, "--goal-reward", q.goal_reward);
    detail::opt(a, "--initial-value", q.initial_value);
    detail::opt(a, "--max-steps", q.max_steps, "per episode, 0: 10 x cells");
    leaves.push_back({a, [&](Run& r) { run_demo_q(r, q); }});
  }

  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("--manifest", replay_manifest, "manifest .jsonl file")->required();
  replay->add_option("-o,--output", replay_output, "output path (default: stdout)");

  try {
    args = apply_config(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  if (replay->parsed()) return run_replay(replay_manifest, replay_output, out, err);

  const detail::Leaf* chosen = nullptr;
  for (const auto& l : leaves)
    if (l.app->parsed()) chosen = &l;
  if (!chosen) {
    err << "error: a subcommand is required\n";
    return 2;
  }

  Run run;
  for (const CLI::App* a = chosen->app; a && a != &app; a = a->get_parent())
    run.subcommand = a->get_name() + (run.subcommand.empty() ? "" : " " + run.subcommand);
  run.params = collect_params(chosen->app);
  run.seed = seed;
  run.output = output;
  run.out = &out;
  run.err = &err;
  try {
    chosen->body(run);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    emit_manifest(run, wall);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

/// Rebuilds the argument list from a manifest line (the last one) and runs it.
inline int run_replay(const std::string& manifest, const std::string& output, std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest);
  if (!in) {
    err << "error: cannot read manifest '" << manifest << "'\n";
    return 2;
  }
  std::string line, last;
  while (std::getline(in, line))
    if (!csv::trim(line).empty()) last = line;
  std::vector<std::string> args;
  try {
    const auto rec = nlohmann::ordered_json::parse(last);
    for (const auto& word : csv::split(rec.at("subcommand").get<std::string>(), ' ')) args.push_back(word);
    for (const auto& [k, v] : rec.at("params").items()) args.push_back("--" + k + "=" + v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    err << "error: manifest '" << manifest << "' is malformed: " << e.what() << '\n';
    return 2;
  }
  if (!output.empty()) args.push_back("--output=" + output);
  return dispatch(std::move(args), out, err);
}

}  // namespace egrt::cli
