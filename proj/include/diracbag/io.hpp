#pragma once

// Flat key=value configuration files and CSV output.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ball_spectrum.hpp"
#include "bie_spectrum.hpp"
#include "surface.hpp"

namespace diracbag {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class Mode { curves, first, bie, rayleigh, verify };

inline Mode parse_mode(const std::string& s, int line = 0) {
  if (s == "curves") return Mode::curves;
  if (s == "first") return Mode::first;
  if (s == "bie") return Mode::bie;
  if (s == "rayleigh") return Mode::rayleigh;
  if (s == "verify") return Mode::verify;
  throw ConfigError("unknown mode '" + s + "'", line);
}

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::curves: return "curves";
    case Mode::first: return "first";
    case Mode::bie: return "bie";
    case Mode::rayleigh: return "rayleigh";
    case Mode::verify: return "verify";
  }
  return "?";
}

struct RunConfig {
  Mode mode = Mode::curves;
  std::optional<BallModel> ball;
  std::optional<SurfaceParams> surface;
  double m = 1.0;
  double tau_min = -6.0, tau_max = 6.0, tau_step = 0.5;
  int j_max2 = 7;  // twice j_max
  int k_max = 2;
  std::string out;
  std::vector<int> ladder{16, 24, 32};  // n_theta values, n_phi = 2 n_theta
  double lambda_max = -1.0;
  double tau_probe = -6.0;
  int threads = 1;
  std::string cache_dir;

  // tau_min, tau_min + step, ... <= tau_max (+ round-off); empty when max < min.
  std::vector<double> taus() const {
    std::vector<double> t;
    if (!(tau_step > 0.0)) throw ConfigError("tau_step must be positive", 0);
    if (tau_max < tau_min) return t;
    const long n = static_cast<long>(std::floor((tau_max - tau_min) / tau_step + 1e-9));
    for (long i = 0; i <= n; ++i) t.push_back(tau_min + i * tau_step);
    return t;
  }
};

namespace io_detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v, int line) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError("'" + key + "' expects a number, got '" + v + "'", line);
  return x;
}

inline int to_int(const std::string& key, const std::string& v, int line) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') throw ConfigError("'" + key + "' expects an integer, got '" + v + "'", line);
  return static_cast<int>(x);
}

// "7/2" or "3.5" -> 7
inline int to_twice_half(const std::string& key, const std::string& v, int line) {
  const auto slash = v.find('/');
  if (slash != std::string::npos) {
    const int num = to_int(key, trim(v.substr(0, slash)), line);
    const int den = to_int(key, trim(v.substr(slash + 1)), line);
    if (den != 2 || num < 1 || (num & 1) == 0) throw ConfigError("'" + key + "' must be a half-odd integer", line);
    return num;
  }
  const double x = to_double(key, v, line);
  const double t = 2.0 * x;
  if (std::abs(t - std::round(t)) > 1e-12 || (static_cast<long>(std::round(t)) & 1) == 0 || t < 1)
    throw ConfigError("'" + key + "' must be a half-odd integer", line);
  return static_cast<int>(std::round(t));
}

}  // namespace io_detail

inline RunConfig parse_config(std::istream& in) {
  using namespace io_detail;
  RunConfig c;
  std::map<std::string, int> seen;
  std::string raw;
  int line = 0;
  bool have_mode = false;
  double radius = 1.0;
  bool have_radius = false;
  SurfaceParams surf;
  bool have_surface = false;
  bool eqvol = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value", line);
    const std::string key = trim(s.substr(0, eq)), val = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line);
    if (seen.count(key)) throw ConfigError("duplicate key '" + key + "' (first on line " +
                                           std::to_string(seen[key]) + ")", line);
    seen[key] = line;
    if (key == "mode") {
      c.mode = parse_mode(val, line);
      have_mode = true;
    } else if (key == "R") {
      radius = to_double(key, val, line);
      have_radius = true;
    } else if (key == "m") {
      c.m = to_double(key, val, line);
    } else if (key == "surface") {
      if (val != "sphere" && val != "ellipsoid") throw ConfigError("unknown surface '" + val + "'", line);
      surf.kind = val;
      have_surface = true;
    } else if (key == "a") {
      surf.a = to_double(key, val, line);
    } else if (key == "b") {
      surf.b = to_double(key, val, line);
    } else if (key == "c") {
      surf.c = to_double(key, val, line);
    } else if (key == "equal_volume") {
      if (val != "true" && val != "false") throw ConfigError("'equal_volume' expects true or false", line);
      eqvol = val == "true";
    } else if (key == "n_theta") {
      surf.n_theta = to_int(key, val, line);
    } else if (key == "n_phi") {
      surf.n_phi = to_int(key, val, line);
    } else if (key == "tau_min") {
      c.tau_min = to_double(key, val, line);
    } else if (key == "tau_max") {
      c.tau_max = to_double(key, val, line);
    } else if (key == "tau_step") {
      c.tau_step = to_double(key, val, line);
      if (!(c.tau_step > 0.0)) throw ConfigError("tau_step must be positive", line);
    } else if (key == "j_max") {
      c.j_max2 = to_twice_half(key, val, line);
    } else if (key == "k_max") {
      c.k_max = to_int(key, val, line);
      if (c.k_max < 0) throw ConfigError("k_max must be >= 0", line);
    } else if (key == "out") {
      c.out = val;
    } else if (key == "ladder") {
      c.ladder.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) c.ladder.push_back(to_int(key, trim(item), line));
      if (c.ladder.empty()) throw ConfigError("empty ladder", line);
    } else if (key == "lambda_max") {
      c.lambda_max = to_double(key, val, line);
    } else if (key == "tau_probe") {
      c.tau_probe = to_double(key, val, line);
    } else if (key == "threads") {
      c.threads = to_int(key, val, line);
    } else if (key == "cache_dir") {
      c.cache_dir = val;
    } else {
      throw ConfigError("unknown key '" + key + "'", line);
    }
  }
  if (!have_mode) throw ConfigError("missing 'mode'", 0);
  if (!have_surface)
    for (const char* k : {"a", "b", "c", "n_theta", "n_phi", "equal_volume"})
      if (seen.count(k)) throw ConfigError("'" + std::string(k) + "' needs 'surface'", seen[k]);
  // R is the ball radius, or the sphere radius when a surface is given
  if (have_radius && !have_surface) {
    BallModel ball{radius, c.m};
    ball.validate();
    c.ball = ball;
  }
  if (have_surface) {
    surf.R = radius;
    if (surf.kind == "ellipsoid" && eqvol) {
      const double s = equal_volume_scale(surf.a, surf.b, surf.c);
      surf.a *= s;
      surf.b *= s;
      surf.c *= s;
    }
    c.surface = surf;
  }
  const bool wants_ball = c.mode == Mode::curves || c.mode == Mode::first;
  const bool wants_surface = c.mode == Mode::bie || c.mode == Mode::rayleigh;
  if (wants_ball && c.surface) throw ConfigError("mode " + mode_name(c.mode) + " takes a ball (R), not a surface", 0);
  if (wants_surface && !c.surface) throw ConfigError("mode " + mode_name(c.mode) + " needs 'surface'", 0);
  if (wants_ball && !c.ball) {
    BallModel b;
    b.m = c.m;
    c.ball = b;
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'", 0);
  return parse_config(in);
}

// CSV with doubles at 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
    out_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... xs) {
    bool first = true;
    ((out_ << (first ? "" : ",") << xs, first = false), ...);
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

inline std::vector<std::string> curve_header() {
  return {"tau", "lambda", "j2", "branch", "k", "residual", "multiplicity", "offset", "anchor", "limit_regime",
          "mirrored"};
}

inline void write_curve_csv(std::ostream& out, const std::vector<EigenCurveSample>& samples) {
  CsvWriter w(out, curve_header());
  for (const auto& s : samples)
    w.row(s.tau, s.lambda, s.channel.j.twice_value(), s.channel.branch_char(), s.channel.k, s.residual, s.multiplicity,
          s.offset, s.anchor, static_cast<int>(s.limit_regime), static_cast<int>(s.mirrored));
}

inline void write_bie_csv(std::ostream& out, const std::vector<BieEigenpair>& pairs) {
  auto h = curve_header();
  h.push_back("sigma_min");
  h.push_back("cross_residual");
  CsvWriter w(out, h);
  for (const auto& p : pairs)
    w.row(p.tau, p.lambda, -1, -1, -1, p.residual, p.multiplicity, p.lambda - p.m, p.m, 0, 0, p.sigma_min,
          p.cross_residual);
}

inline void write_scan_csv(std::ostream& out, double tau, const std::vector<SigmaSample>& scan) {
  CsvWriter w(out, {"tau", "lambda", "sigma_min", "sigma_min_M1", "block"});
  for (const auto& s : scan) w.row(tau, s.lambda, s.sigma_min, s.sigma_m1, s.block);
}

}  // namespace diracbag
