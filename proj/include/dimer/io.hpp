#pragma once

// Serialisation of trajectories, bifurcation diagrams and hysteresis reports
// (CSV / JSON), SVG line plots, and the flat key = value config format.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dimer/bifurcation.hpp"
#include "dimer/core.hpp"
#include "dimer/dynamics.hpp"
#include "dimer/hysteresis.hpp"

namespace dimer::io {

using json = nlohmann::json;

class FormatError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Decimal text with 15 significant digits.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline constexpr const char* kTrajectoryHeader = "tau,eta,z,theta,H,E";
inline constexpr const char* kBranchHeader = "branch_id,kind,theta_star,eta,z_star,stability";

inline void write_trajectory_csv(std::ostream& os, const std::vector<Sample>& samples) {
  os << kTrajectoryHeader << '\n';
  for (const Sample& s : samples) {
    os << format_number(s.tau) << ',' << format_number(s.eta) << ',' << format_number(s.z) << ','
       << format_number(wrap_phase(s.theta)) << ',' << format_number(s.H) << ','
       << format_number(s.E) << '\n';
  }
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  write_trajectory_csv(os, traj.samples);
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw FormatError("cannot parse " + what + " value '" + text + "'");
  }
  if (used != text.size()) throw FormatError("trailing characters in " + what + " value '" + text + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses a trajectory CSV as written by write_trajectory_csv. theta comes
/// back wrapped.
inline std::vector<Sample> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kTrajectoryHeader) {
    throw FormatError(std::string("trajectory CSV must start with header '") + kTrajectoryHeader + "'");
  }
  std::vector<Sample> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(detail::trim(line), ',');
    if (f.size() != 6) {
      throw FormatError("line " + std::to_string(lineno) + ": expected 6 fields, got " +
                        std::to_string(f.size()));
    }
    Sample s;
    s.tau = detail::parse_double(f[0], "tau");
    s.eta = detail::parse_double(f[1], "eta");
    s.z = detail::parse_double(f[2], "z");
    s.theta = detail::parse_double(f[3], "theta");
    s.H = detail::parse_double(f[4], "H");
    s.E = detail::parse_double(f[5], "E");
    out.push_back(s);
  }
  return out;
}

inline void write_branches_csv(std::ostream& os, const BifurcationDiagram& d) {
  os << kBranchHeader << '\n';
  for (std::size_t b = 0; b < d.branches.size(); ++b) {
    const Branch& br = d.branches[b];
    for (const BranchPoint& p : br.points) {
      os << b << ',' << to_string(br.kind) << ',' << format_number(br.theta_star) << ','
         << format_number(p.eta) << ',' << format_number(p.z_star) << ',' << to_string(p.stability)
         << '\n';
    }
  }
}

inline json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

/// One record of the critical-values table.
inline json critical_json(double r) {
  return {{"r", r},
          {"eta_star", find_eta_star(r)},
          {"eta_plus", optional_number(find_eta_plus(r))},
          {"classification", to_string(classify_pitchfork(r))}};
}

inline json diagram_json(const BifurcationDiagram& d, const json& config = json::object()) {
  std::size_t points = 0;
  for (const auto& b : d.branches) points += b.points.size();
  return {{"r", d.r},
          {"eta_star", d.eta_star},
          {"eta_plus", optional_number(d.eta_plus)},
          {"classification", to_string(d.classification)},
          {"branches", d.branches.size()},
          {"points", points},
          {"config", config}};
}

inline json report_json(const HysteresisReport& rep, const json& config = json::object()) {
  json fwd = json::array(), bwd = json::array();
  for (const auto& p : rep.forward_trace) fwd.push_back({p.abs_eta, p.z_avg});
  for (const auto& p : rep.backward_trace) bwd.push_back({p.abs_eta, p.z_avg});
  json window = nullptr;
  if (rep.window) window = {rep.window->first, rep.window->second};
  return {{"r", rep.r},
          {"nu", rep.nu},
          {"loop_area", rep.loop_area},
          {"detected", rep.detected},
          {"window", window},
          {"area_threshold", kAreaThreshold},
          {"z_gap_threshold", kZGapThreshold},
          {"reference",
           {{"eta_star", rep.reference.eta_star},
            {"eta_plus", optional_number(rep.reference.eta_plus)}}},
          {"final_state", {{"z", rep.final_state.z}, {"theta", wrap_phase(rep.final_state.theta)}}},
          {"clamp_events", rep.clamp_events},
          {"forward_trace", fwd},
          {"backward_trace", bwd},
          {"config", config}};
}

/// Reads `key = value` lines; `#` starts a comment. Keys outside `allowed`
/// are rejected with a message naming the key.
inline std::map<std::string, std::string> parse_config(std::istream& is,
                                                       const std::set<std::string>& allowed) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!allowed.contains(key)) {
      throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
  std::string label;
};

struct Panel {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  std::vector<double> vlines;  // reference verticals, e.g. critical couplings
};

namespace detail {

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void render_panel(std::ostream& os, const Panel& p, double ox, double oy, double w, double h) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : p.series) {
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double l = ox + 60, t = oy + 30, pw = w - 80, ph = h - 70;
  auto X = [&](double x) { return l + (x - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double y) { return t + ph - (y - ymin) / (ymax - ymin) * ph; };

  os << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0, yv = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << X(xv) << "\" y=\"" << t + ph + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
       << fmt_tick(xv) << "</text>\n";
    os << "<text x=\"" << l - 6 << "\" y=\"" << Y(yv) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
       << fmt_tick(yv) << "</text>\n";
  }
  os << "<text x=\"" << l + pw / 2 << "\" y=\"" << oy + 18 << "\" font-size=\"13\" text-anchor=\"middle\">"
     << escape(p.title) << "</text>\n";
  os << "<text x=\"" << l + pw / 2 << "\" y=\"" << t + ph + 34 << "\" font-size=\"12\" text-anchor=\"middle\">"
     << escape(p.xlabel) << "</text>\n";
  os << "<text x=\"" << ox + 14 << "\" y=\"" << t + ph / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 " << ox + 14 << ' ' << t + ph / 2 << ")\">" << escape(p.ylabel)
     << "</text>\n";
  for (double v : p.vlines) {
    if (v < xmin || v > xmax) continue;
    os << "<line x1=\"" << X(v) << "\" y1=\"" << t << "\" x2=\"" << X(v) << "\" y2=\"" << t + ph
       << "\" stroke=\"#999\" stroke-dasharray=\"2,3\"/>\n";
  }
  for (const auto& s : p.series) {
    if (s.x.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\"";
    if (s.dashed) os << " stroke-dasharray=\"5,4\"";
    os << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(s.x[i]), Y(s.y[i]));
      os << buf;
    }
    os << "\"/>\n";
  }
}

}  // namespace detail

/// Panels stacked vertically.
inline void write_svg(std::ostream& os, const std::vector<Panel>& panels, double width = 720,
                      double panel_height = 320) {
  const double height = panel_height * static_cast<double>(panels.size());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    detail::render_panel(os, panels[i], 0, panel_height * static_cast<double>(i), width, panel_height);
  }
  os << "</svg>\n";
}

/// z against tau, and z against |eta|.
inline void write_trajectory_svg(std::ostream& os, const Trajectory& traj) {
  Series vs_tau, vs_eta;
  for (const Sample& s : traj.samples) {
    vs_tau.x.push_back(s.tau);
    vs_tau.y.push_back(s.z);
    vs_eta.x.push_back(std::abs(s.eta));
    vs_eta.y.push_back(s.z);
  }
  vs_eta.color = "#d62728";
  const double r = traj.params.r;
  Panel a{"z(tau), r = " + detail::fmt_tick(r), "tau", "z", {vs_tau}, {}};
  Panel b{"z against |eta|", "|eta|", "z", {vs_eta}, {find_eta_star(r)}};
  if (auto plus = find_eta_plus(r)) b.vlines.push_back(*plus);
  write_svg(os, {a, b});
}

/// Stable branches solid, unstable dashed, marginal points grey.
inline void write_diagram_svg(std::ostream& os, const BifurcationDiagram& d) {
  Panel p{"stationary states, r = " + detail::fmt_tick(d.r), "|eta|", "z*", {}, {d.eta_star}};
  if (d.eta_plus) p.vlines.push_back(*d.eta_plus);
  for (const Branch& br : d.branches) {
    // Split each branch into runs of constant stability.
    std::size_t i = 0;
    while (i < br.points.size()) {
      Series s;
      const Stability st = br.points[i].stability;
      s.dashed = st != Stability::stable;
      s.color = st == Stability::stable ? "#1f77b4" : st == Stability::unstable ? "#d62728" : "#888";
      if (br.theta_star != 0.0) s.color = st == Stability::stable ? "#2ca02c" : "#ff7f0e";
      std::size_t j = i;
      while (j < br.points.size() && br.points[j].stability == st) {
        s.x.push_back(std::abs(br.points[j].eta));
        s.y.push_back(br.points[j].z_star);
        ++j;
      }
      // Join to the next run so the curve stays continuous.
      if (j < br.points.size()) {
        s.x.push_back(std::abs(br.points[j].eta));
        s.y.push_back(br.points[j].z_star);
      }
      p.series.push_back(std::move(s));
      i = j;
    }
  }
  write_svg(os, {p});
}

}  // namespace dimer::io
