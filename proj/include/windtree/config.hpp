#pragma once

// Run configuration: a flat key = value file (TOML subset) overridden by flags.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "windtree/errors.hpp"
#include "windtree/geom.hpp"
#include "windtree/sampling.hpp"
#include "windtree/windtree.hpp"

namespace windtree {

enum class Mode { TracePlane, TraceSurface, Compare, Renorm, Analyze, Sweep };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::TracePlane: return "trace-plane";
    case Mode::TraceSurface: return "trace-surface";
    case Mode::Compare: return "compare";
    case Mode::Renorm: return "renorm";
    case Mode::Analyze: return "analyze";
    case Mode::Sweep: return "sweep";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::TracePlane, Mode::TraceSurface, Mode::Compare, Mode::Renorm, Mode::Analyze, Mode::Sweep})
    if (s == to_string(m)) return m;
  throw Error(ErrorKind::ParseError, "unknown command '" + s + "'");
}

struct RunConfig {
  SystemParams params;
  Mode mode = Mode::Analyze;
  std::int64_t max_events = 100000;
  double checkpoint_stride = 0.0;  // 0: chosen from the run length
  std::uint64_t seed = 1;
  double epsilon = 0.05;
  std::string output_dir = ".";
  std::optional<Vec2> start;
  bool down = false;
  int samples = 10;
  int threads = 0;  // 0: hardware concurrency
  int renorm_steps = 120;
  bool check = false;
  SampleRanges ranges;
};

/// Keys accepted in config files; flags use the same names with "--".
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "a",       "b",      "theta",   "e1",      "e2",           "start",      "down",
      "events",  "stride", "seed",    "epsilon", "out",          "samples",    "threads",
      "steps",   "check",  "range_r", "range_side", "range_theta", "range_arg1", "range_arg2"};
  return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t i = 0, j = s.size();
  while (i < j && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  while (j > i && std::isspace(static_cast<unsigned char>(s[j - 1]))) --j;
  return s.substr(i, j - i);
}

inline double parse_real(const std::string& raw, const std::string& ctx) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error(ErrorKind::ParseError, ctx + ": expected a number, got '" + raw + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& raw, const std::string& ctx) {
  const std::string s = trim(raw);
  Int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error(ErrorKind::ParseError, ctx + ": expected an integer, got '" + raw + "'");
  return v;
}

inline bool parse_bool(const std::string& raw, const std::string& ctx) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error(ErrorKind::ParseError, ctx + ": expected true or false, got '" + raw + "'");
}

/// "x,y", "\"x,y\"" or "[x, y]".
inline std::pair<double, double> parse_pair(const std::string& raw, const std::string& ctx) {
  std::string s = trim(raw);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw Error(ErrorKind::ParseError, ctx + ": unterminated array");
    s = s.substr(1, s.size() - 2);
  }
  const auto comma = s.find(',');
  if (comma == std::string::npos || s.find(',', comma + 1) != std::string::npos)
    throw Error(ErrorKind::ParseError, ctx + ": expected two comma-separated numbers, got '" + raw + "'");
  return {parse_real(s.substr(0, comma), ctx), parse_real(s.substr(comma + 1), ctx)};
}

inline std::string parse_string(const std::string& raw, const std::string& ctx) {
  const std::string s = trim(raw);
  if (s.size() >= 2 && s.front() == '"') {
    if (s.back() != '"') throw Error(ErrorKind::ParseError, ctx + ": unterminated string");
    return s.substr(1, s.size() - 2);
  }
  if (s.empty()) throw Error(ErrorKind::ParseError, ctx + ": empty value");
  return s;
}

}  // namespace detail

/// Sets one key; ctx names the source for error messages.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value, const std::string& ctx) {
  using namespace detail;
  const std::string where = ctx + " (" + key + ")";
  auto range = [&](double& lo, double& hi) {
    const auto [x, y] = parse_pair(value, where);
    if (!(x <= y)) throw Error(ErrorKind::ValidationError, where + ": range must satisfy lo <= hi");
    lo = x;
    hi = y;
  };
  if (key == "a") c.params.a = parse_real(value, where);
  else if (key == "b") c.params.b = parse_real(value, where);
  else if (key == "theta") c.params.theta = parse_real(value, where);
  else if (key == "e1") { const auto [x, y] = parse_pair(value, where); c.params.e1 = {x, y}; }
  else if (key == "e2") { const auto [x, y] = parse_pair(value, where); c.params.e2 = {x, y}; }
  else if (key == "start") { const auto [x, y] = parse_pair(value, where); c.start = Vec2{x, y}; }
  else if (key == "down") c.down = parse_bool(value, where);
  else if (key == "events") c.max_events = parse_int<std::int64_t>(value, where);
  else if (key == "stride") c.checkpoint_stride = parse_real(value, where);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(value, where);
  else if (key == "epsilon") c.epsilon = parse_real(value, where);
  else if (key == "out") c.output_dir = parse_string(value, where);
  else if (key == "samples") c.samples = parse_int<int>(value, where);
  else if (key == "threads") c.threads = parse_int<int>(value, where);
  else if (key == "steps") c.renorm_steps = parse_int<int>(value, where);
  else if (key == "check") c.check = parse_bool(value, where);
  else if (key == "range_r") range(c.ranges.r_min, c.ranges.r_max);
  else if (key == "range_side") range(c.ranges.side_min, c.ranges.side_max);
  else if (key == "range_theta") range(c.ranges.theta_min, c.ranges.theta_max);
  else if (key == "range_arg1") range(c.ranges.arg1_min, c.ranges.arg1_max);
  else if (key == "range_arg2") range(c.ranges.arg2_min, c.ranges.arg2_max);
  else throw Error(ErrorKind::ParseError, ctx + ": unknown key '" + key + "'");
}

/// Key/value pairs of a config file in order, with their line numbers.
struct ConfigEntry {
  std::string key, value;
  int line = 0;
};

inline std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& source = "config") {
  std::vector<ConfigEntry> out;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string ctx = source + ":" + std::to_string(no);
    // Strip comments outside quoted strings.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '[') throw Error(ErrorKind::ParseError, ctx + ": tables are not supported");
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ParseError, ctx + ": expected key = value");
    ConfigEntry e{detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)), no};
    if (e.key.empty()) throw Error(ErrorKind::ParseError, ctx + ": missing key");
    for (const auto& prev : out)
      if (prev.key == e.key) throw Error(ErrorKind::ParseError, ctx + ": duplicate key '" + e.key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& source = "config") {
  for (const auto& e : parse_config_text(text, source))
    apply_setting(c, e.key, e.value, source + ":" + std::to_string(e.line));
}

/// Checks the invariants of a fully assembled configuration.
inline void validate_config(const RunConfig& c) {
  if (c.max_events < 1) throw Error(ErrorKind::ValidationError, "events must be at least 1");
  if (!(c.checkpoint_stride >= 0.0) || !std::isfinite(c.checkpoint_stride))
    throw Error(ErrorKind::ValidationError, "stride must be finite and non-negative");
  if (!(c.epsilon >= 0.0) || !std::isfinite(c.epsilon))
    throw Error(ErrorKind::ValidationError, "epsilon must be finite and non-negative");
  if (c.samples < 1) throw Error(ErrorKind::ValidationError, "samples must be at least 1");
  if (c.threads < 0) throw Error(ErrorKind::ValidationError, "threads must be non-negative");
  if (c.renorm_steps < 1) throw Error(ErrorKind::ValidationError, "steps must be at least 1");
  if (c.start && !finite(*c.start)) throw Error(ErrorKind::ValidationError, "start must be finite");
  if (c.mode == Mode::Sweep) return;
  const SystemParams& p = c.params;
  if (p.theta == 0.0)
    throw Error(ErrorKind::ValidationError,
                "theta = 0 is excluded: the obstacle sides are vertical and the dynamics degenerates");
  try {
    if (!admissible(p)) throw Error(ErrorKind::ValidationError, "not admissible: rectangles overlap or touch");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ValidationError) throw;
    throw Error(ErrorKind::ValidationError, e.what());
  }
}

}  // namespace windtree
