#pragma once

// Artifact emission: trajectory CSV, surface and report JSON, renormalization
// JSONL and SVG plots. Every file carries the parameter tuple and version.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "windtree/errors.hpp"
#include "windtree/geom.hpp"
#include "windtree/renorm.hpp"
#include "windtree/slit.hpp"
#include "windtree/windtree.hpp"

namespace windtree {

using json = nlohmann::json;

inline constexpr const char* kVersion = "windtree 0.1.0";

inline json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

inline Vec2 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::ParseError, "expected a pair [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json params_json(const SystemParams& p) {
  return {{"e1", vec_json(p.e1)}, {"e2", vec_json(p.e2)}, {"a", p.a}, {"b", p.b}, {"theta", p.theta}};
}

inline SystemParams params_from_json(const json& j) {
  try {
    SystemParams p;
    p.e1 = vec_from_json(j.at("e1"));
    p.e2 = vec_from_json(j.at("e2"));
    p.a = j.at("a").get<double>();
    p.b = j.at("b").get<double>();
    p.theta = j.at("theta").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("params: ") + e.what());
  }
}

/// Header fields shared by all JSON outputs.
inline json stamp(const SystemParams& p) { return {{"version", kVersion}, {"params", params_json(p)}}; }

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  return f;
}

inline void check_written(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw Error(ErrorKind::IoError, "write failed for " + path);
}

inline void write_json(const std::string& path, const json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
  check_written(f, path);
}

inline json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

/// Shortest decimal form that reads back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Trajectory CSV

/// One row per event and per checkpoint, after two comment lines with the
/// version and the parameter tuple.
inline void write_trajectory_csv(const std::string& path, const TrajectoryRecord& rec) {
  auto f = open_out(path);
  f << "# " << kVersion << '\n';
  f << "# params " << params_json(rec.params).dump() << '\n';
  f << "# start " << fmt_double(rec.start.x) << ',' << fmt_double(rec.start.y)
    << " dir " << (rec.initial_dir == DirAngle::up() ? "up" : "down") << " stop " << to_string(rec.stop) << '\n';
  f << "record,kind,i,j,x,y,dir,arclength,n1,n2\n";
  std::size_t ei = 0, ci = 0;
  const auto& ev = rec.events;
  const auto& cp = rec.checkpoints;
  while (ei < ev.size() || ci < cp.size()) {
    const bool take_cp = ci < cp.size() && (ei == ev.size() || cp[ci].arclength < ev[ei].arclength);
    if (take_cp) {
      const Checkpoint& c = cp[ci++];
      f << "checkpoint,,,," << fmt_double(c.pos.x) << ',' << fmt_double(c.pos.y) << ",,"
        << fmt_double(c.arclength) << ',' << c.n.n1 << ',' << c.n.n2 << '\n';
    } else {
      const TraceEvent& e = ev[ei++];
      f << "event," << to_string(e.kind) << ',' << e.obstacle_i << ',' << e.obstacle_j << ','
        << fmt_double(e.point.x) << ',' << fmt_double(e.point.y) << ',' << fmt_double(e.dir_after.phi()) << ','
        << fmt_double(e.arclength) << ",,\n";
    }
  }
  check_written(f, path);
}

// ---------------------------------------------------------------------------
// Surface JSON

inline json surface_json(const SlitTorus& t, double epsilon) {
  json j = stamp(t.params);
  j["case"] = to_string(t.slit.kind);
  j["family"] = t.family == SFamily::S1 ? "S1" : "S2";
  j["S"] = {{"h1", t.h1}, {"v1", t.v1}, {"h2", t.h2}, {"v2", t.v2},
            {"h3", t.h3}, {"h4", t.h4}, {"v3", t.v3}, {"v4", t.v4}};
  j["slit"] = {{"eta", t.slit.eta},
               {"length", t.slit.length},
               {"x_len", t.slit.x_len},
               {"y_len", t.slit.y_len},
               {"endpoints", json::array({vec_json(t.slit.endpoints[0]), vec_json(t.slit.endpoints[1])})}};
  j["to_params"] = json::array({t.to_params.a, t.to_params.b, t.to_params.c, t.to_params.d});
  json census = json::array();
  for (const auto& s : singularity_census(t.slit)) census.push_back(s.angle);
  j["census"] = census;
  const OEpsilonCheck oc = t.o_epsilon(epsilon);
  j["o_epsilon"] = {{"epsilon", epsilon}, {"cond1", oc.cond1}, {"cond2", oc.cond2},
                    {"cond3", oc.cond3},  {"cond4", oc.cond4}, {"all", oc.all()}};
  return j;
}

// ---------------------------------------------------------------------------
// Renormalization log

inline json renorm_step_json(const RenormStep& s) {
  return {{"k", s.k},
          {"t", s.t},
          {"B", json::array({s.B.a, s.B.b, s.B.c, s.B.d})},
          {"theta_top", s.theta_top},
          {"contracted_dir", json::array({s.contracted_dir[0], s.contracted_dir[1]})}};
}

/// First line: version and params; then one line per induction step.
inline void write_renorm_jsonl(const std::string& path, const SystemParams& p, const std::vector<RenormStep>& log) {
  auto f = open_out(path);
  f << stamp(p).dump() << '\n';
  for (const auto& s : log) f << renorm_step_json(s).dump() << '\n';
  check_written(f, path);
}

// ---------------------------------------------------------------------------
// SVG

struct SvgBand {
  double Theta = 0.0;
  double center_offset = 0.0;
  double width = 0.0;
};

struct SvgInput {
  SystemParams params;
  std::vector<Vec2> path;
  std::optional<SvgBand> band;
};

inline constexpr std::size_t kSvgMaxVertices = 10000;

/// Keeps the first and last points and an even subsample, at most max_n points.
inline std::vector<Vec2> decimate(const std::vector<Vec2>& p, std::size_t max_n = kSvgMaxVertices) {
  if (p.size() <= max_n) return p;
  std::vector<Vec2> out;
  out.reserve(max_n);
  const double step = double(p.size() - 1) / double(max_n - 1);
  for (std::size_t k = 0; k < max_n; ++k) out.push_back(p[std::min(p.size() - 1, std::size_t(std::llround(k * step)))]);
  return out;
}

namespace detail {

/// Lattice points whose obstacle may lie within r of some path vertex.
inline std::vector<Vec2> obstacle_centres(const SystemParams& p, const std::vector<Vec2>& pts) {
  const double det = cross(p.e1, p.e2);
  std::set<std::pair<std::int64_t, std::int64_t>> cells;
  for (const auto& q : pts) {
    const double c1 = cross(q, p.e2) / det, c2 = cross(p.e1, q) / det;
    const auto i0 = std::int64_t(std::floor(c1)), j0 = std::int64_t(std::floor(c2));
    for (std::int64_t i = i0 - 1; i <= i0 + 2; ++i)
      for (std::int64_t j = j0 - 1; j <= j0 + 2; ++j) cells.insert({i, j});
  }
  std::vector<Vec2> out;
  out.reserve(cells.size());
  for (const auto& [i, j] : cells) out.push_back(double(i) * p.e1 + double(j) * p.e2);
  return out;
}

}  // namespace detail

/// Obstacles near the path, the decimated path and the strip band. The plane
/// is drawn with y pointing up.
inline std::string render_svg(const SvgInput& in) {
  const std::vector<Vec2> path = decimate(in.path);
  std::vector<Vec2> anchors = path;
  if (anchors.empty()) anchors.push_back({0.0, 0.0});
  const auto centres = detail::obstacle_centres(in.params, anchors);
  const ObstacleShape sh(in.params.a, in.params.b, in.params.theta);

  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  auto grow = [&](Vec2 q) {
    x0 = std::min(x0, q.x);
    x1 = std::max(x1, q.x);
    y0 = std::min(y0, q.y);
    y1 = std::max(y1, q.y);
  };
  for (const auto& q : path) grow(q);
  if (path.empty())
    for (const auto& c : centres) grow(c);
  const double pad = 0.02 * std::max({x1 - x0, y1 - y0, in.params.lattice_scale()});
  x0 -= pad;
  x1 += pad;
  y0 -= pad;
  y1 += pad;
  const double w = x1 - x0, h = y1 - y0;
  const double stroke = 0.002 * std::max(w, h);

  std::ostringstream s;
  auto pt = [&](Vec2 q) { s << fmt_double(q.x) << ',' << fmt_double(-q.y); };
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << fmt_double(x0) << ' ' << fmt_double(-y1) << ' '
    << fmt_double(w) << ' ' << fmt_double(h) << "\" width=\"800\" height=\""
    << std::max(1.0, std::round(800.0 * h / w)) << "\">\n";
  s << "<metadata id=\"windtree\" data-version=\"" << kVersion << "\">" << params_json(in.params).dump()
    << "</metadata>\n";
  if (in.band) {
    const Vec2 u{std::cos(in.band->Theta), std::sin(in.band->Theta)};
    const Vec2 z{-u.y, u.x};
    const Vec2 mid{0.5 * (x0 + x1), 0.5 * (y0 + y1)};
    const double L = std::hypot(w, h);
    const Vec2 c = dot(u, mid) * u + in.band->center_offset * z;
    const double hw = 0.5 * in.band->width;
    s << "<polygon class=\"band\" fill=\"#4a90d9\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    pt(c - L * u - hw * z);
    s << ' ';
    pt(c + L * u - hw * z);
    s << ' ';
    pt(c + L * u + hw * z);
    s << ' ';
    pt(c - L * u + hw * z);
    s << "\"/>\n";
  }
  s << "<g class=\"obstacles\" fill=\"#888888\" stroke=\"none\">\n";
  for (const auto& c : centres) {
    s << "<polygon points=\"";
    for (int k = 0; k < 4; ++k) {
      if (k) s << ' ';
      pt(c + sh.corner[k]);
    }
    s << "\"/>\n";
  }
  s << "</g>\n";
  if (!path.empty()) {
    s << "<polyline class=\"trajectory\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"" << fmt_double(stroke)
      << "\" points=\"";
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (k) s << ' ';
      pt(path[k]);
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void write_svg(const std::string& path, const SvgInput& in) {
  auto f = open_out(path);
  f << render_svg(in);
  check_written(f, path);
}

/// Parameter tuple embedded in an SVG written by write_svg.
inline SystemParams svg_params(const std::string& svg) {
  const auto open = svg.find("<metadata id=\"windtree\"");
  if (open == std::string::npos) throw Error(ErrorKind::ParseError, "no windtree metadata");
  const auto start = svg.find('>', open);
  const auto end = svg.find("</metadata>", start);
  if (start == std::string::npos || end == std::string::npos) throw Error(ErrorKind::ParseError, "bad metadata");
  try {
    return params_from_json(json::parse(svg.substr(start + 1, end - start - 1)));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

}  // namespace windtree
