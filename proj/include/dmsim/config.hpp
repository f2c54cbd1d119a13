#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dmsim/error.hpp"
#include "dmsim/grid.hpp"
#include "dmsim/motility.hpp"
#include "dmsim/scheme.hpp"
#include "dmsim/snapshot_io.hpp"

namespace dmsim {

/// Shortest text form that parses back to the identical double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& text) {
  double x = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
  return x;
}

inline long parse_long(const std::string& key, const std::string& text) {
  long x = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + text + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using KeyValues = std::map<std::string, std::string>;

/// Flat "key = value" text; '#' starts a comment, dotted keys name sections.
inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  return parse_key_values(f);
}

struct GridConfig {
  int dim = 1;
  double lx = 1.0, ly = 1.0;
  int nx = 64, ny = 64;

  Grid make() const { return dim == 1 ? Grid::line(lx, nx) : Grid::rect(lx, nx, ly, ny); }
  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct MotilityConfig {
  std::string form = "prototype";
  double alpha = 1.0;
  double xi0 = 1.0;

  MotilitySpec make() const { return make_motility(form, alpha, xi0); }
  friend bool operator==(const MotilityConfig&, const MotilityConfig&) = default;
};

/// Initial u: constant | gaussian | cosine | random | file.
struct UInitConfig {
  std::string kind = "constant";
  double value = 1.0;  ///< constant level
  double base = 0.0;   ///< background of gaussian / cosine / random
  double amp = 1.0;
  double sigma = 0.1;
  double cx = 0.5, cy = 0.5;  ///< bump centre as a fraction of the side lengths
  int mode = 1;
  long seed = 1;
  friend bool operator==(const UInitConfig&, const UInitConfig&) = default;
};

/// Initial v: constant | cosine | file.
struct VInitConfig {
  std::string kind = "constant";
  double value = 1.0;
  double mean = 1.0;
  double amp = 0.5;
  int mode = 1;
  friend bool operator==(const VInitConfig&, const VInitConfig&) = default;
};

struct RunConfig {
  GridConfig grid;
  MotilityConfig motility;
  double eps = 0.1;
  UInitConfig init_u;
  VInitConfig init_v;
  std::string init_file;
  std::string dt_policy = "fixed";
  double dt = 1e-3;
  double dt_cap = 1e-2;
  double dt_cfl = 2.0;
  double t_end = 1.0;
  int record_every = 1;
  bool keep_snapshots = true;
  std::string output_dir = "run";
  int threads = 1;
  double audit_margin = 0.1;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  SimParams sim_params() const {
    SimParams p;
    p.eps = eps;
    p.motility = motility.make();
    p.dt = dt_policy == "adaptive" ? DtPolicy::adaptive(dt_cap, dt_cfl) : DtPolicy::fixed(dt);
    p.t_end = t_end;
    p.record_every = record_every;
    return p;
  }

  /// Checks every module precondition that can be checked before computing.
  void validate() const {
    (void)grid.make();
    if (dt_policy != "fixed" && dt_policy != "adaptive") throw ConfigError("dt.policy must be fixed or adaptive");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(audit_margin >= 0.0)) throw ConfigError("audit.margin must be nonnegative");
    try {
      sim_params().validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
};

inline std::vector<std::string> config_keys() {
  return {"grid.dim",      "grid.lx",     "grid.ly",        "grid.nx",         "grid.ny",     "motility.form",
          "motility.alpha", "motility.xi0", "eps",           "init.u.kind",     "init.u.value", "init.u.base",
          "init.u.amp",    "init.u.sigma", "init.u.cx",      "init.u.cy",       "init.u.mode", "init.u.seed",
          "init.v.kind",   "init.v.value", "init.v.mean",    "init.v.amp",      "init.v.mode", "init.file",
          "dt.policy",     "dt.value",    "dt.cap",         "dt.cfl",          "time.end",    "record.every",
          "record.snapshots", "output.dir", "threads",      "audit.margin"};
}

/// Builds a config from parsed keys. Keys not in config_keys() are an error
/// unless `extra_prefix` is non-empty and the key starts with it.
inline RunConfig config_from_keys(const KeyValues& kv, const std::string& extra_prefix = "") {
  RunConfig c;
  const auto known = config_keys();
  for (const auto& [k, v] : kv) {
    if (std::find(known.begin(), known.end(), k) != known.end()) continue;
    if (!extra_prefix.empty() && k.rfind(extra_prefix, 0) == 0) continue;
    throw ConfigError("unknown config key '" + k + "'");
  }
  auto num = [&](const char* k, double& out) {
    if (auto it = kv.find(k); it != kv.end()) out = parse_double(k, it->second);
  };
  auto integer = [&](const char* k, auto& out) {
    if (auto it = kv.find(k); it != kv.end()) out = static_cast<std::remove_reference_t<decltype(out)>>(parse_long(k, it->second));
  };
  auto text = [&](const char* k, std::string& out) {
    if (auto it = kv.find(k); it != kv.end()) out = it->second;
  };
  integer("grid.dim", c.grid.dim);
  num("grid.lx", c.grid.lx);
  num("grid.ly", c.grid.ly);
  integer("grid.nx", c.grid.nx);
  integer("grid.ny", c.grid.ny);
  text("motility.form", c.motility.form);
  num("motility.alpha", c.motility.alpha);
  num("motility.xi0", c.motility.xi0);
  num("eps", c.eps);
  text("init.u.kind", c.init_u.kind);
  num("init.u.value", c.init_u.value);
  num("init.u.base", c.init_u.base);
  num("init.u.amp", c.init_u.amp);
  num("init.u.sigma", c.init_u.sigma);
  num("init.u.cx", c.init_u.cx);
  num("init.u.cy", c.init_u.cy);
  integer("init.u.mode", c.init_u.mode);
  integer("init.u.seed", c.init_u.seed);
  text("init.v.kind", c.init_v.kind);
  num("init.v.value", c.init_v.value);
  num("init.v.mean", c.init_v.mean);
  num("init.v.amp", c.init_v.amp);
  integer("init.v.mode", c.init_v.mode);
  text("init.file", c.init_file);
  text("dt.policy", c.dt_policy);
  num("dt.value", c.dt);
  num("dt.cap", c.dt_cap);
  num("dt.cfl", c.dt_cfl);
  num("time.end", c.t_end);
  integer("record.every", c.record_every);
  if (auto it = kv.find("record.snapshots"); it != kv.end()) c.keep_snapshots = parse_bool("record.snapshots", it->second);
  text("output.dir", c.output_dir);
  integer("threads", c.threads);
  num("audit.margin", c.audit_margin);
  if (c.grid.dim != 1 && c.grid.dim != 2) throw ConfigError("grid.dim must be 1 or 2");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) { return config_from_keys(read_key_values(path)); }

/// Canonical text form; config_from_keys(parse(echo(c))) == c.
inline std::string echo_config(const RunConfig& c) {
  std::ostringstream o;
  auto line = [&](const char* k, const std::string& v) { o << k << " = " << v << "\n"; };
  auto num = [&](const char* k, double v) { line(k, format_double(v)); };
  line("grid.dim", std::to_string(c.grid.dim));
  num("grid.lx", c.grid.lx);
  num("grid.ly", c.grid.ly);
  line("grid.nx", std::to_string(c.grid.nx));
  line("grid.ny", std::to_string(c.grid.ny));
  line("motility.form", c.motility.form);
  num("motility.alpha", c.motility.alpha);
  num("motility.xi0", c.motility.xi0);
  num("eps", c.eps);
  line("init.u.kind", c.init_u.kind);
  num("init.u.value", c.init_u.value);
  num("init.u.base", c.init_u.base);
  num("init.u.amp", c.init_u.amp);
  num("init.u.sigma", c.init_u.sigma);
  num("init.u.cx", c.init_u.cx);
  num("init.u.cy", c.init_u.cy);
  line("init.u.mode", std::to_string(c.init_u.mode));
  line("init.u.seed", std::to_string(c.init_u.seed));
  line("init.v.kind", c.init_v.kind);
  num("init.v.value", c.init_v.value);
  num("init.v.mean", c.init_v.mean);
  num("init.v.amp", c.init_v.amp);
  line("init.v.mode", std::to_string(c.init_v.mode));
  if (!c.init_file.empty()) line("init.file", c.init_file);
  line("dt.policy", c.dt_policy);
  num("dt.value", c.dt);
  num("dt.cap", c.dt_cap);
  num("dt.cfl", c.dt_cfl);
  num("time.end", c.t_end);
  line("record.every", std::to_string(c.record_every));
  line("record.snapshots", c.keep_snapshots ? "true" : "false");
  line("output.dir", c.output_dir);
  line("threads", std::to_string(c.threads));
  num("audit.margin", c.audit_margin);
  return o.str();
}

/// Samples the configured presets on the configured grid and validates them.
inline InitialData make_initial_data(const RunConfig& c) {
  const Grid g = c.grid.make();
  const double lx = c.grid.lx, ly = c.grid.ly;
  const bool two_d = g.dim() == 2;
  auto cosine = [&](int mode) {
    return [=](double x, double y) {
      const double cx = std::cos(mode * M_PI * x / lx);
      return two_d ? cx * std::cos(mode * M_PI * y / ly) : cx;
    };
  };
  InitialData d;
  if (!c.init_file.empty()) {
    auto [u, v] = snapshot_fields(read_snapshot(c.init_file), g);
    d.u0 = std::move(u);
    d.v0 = std::move(v);
  }
  const auto& iu = c.init_u;
  if (iu.kind == "constant") {
    d.u0 = Field(g, iu.value);
  } else if (iu.kind == "gaussian") {
    const double x0 = iu.cx * lx, y0 = iu.cy * ly, s2 = 2.0 * iu.sigma * iu.sigma;
    d.u0 = Field::sample(g, [&](double x, double y) {
      const double r2 = (x - x0) * (x - x0) + (two_d ? (y - y0) * (y - y0) : 0.0);
      return iu.base + iu.amp * std::exp(-r2 / s2);
    });
  } else if (iu.kind == "cosine") {
    auto cf = cosine(iu.mode);
    d.u0 = Field::sample(g, [&](double x, double y) { return iu.base + iu.amp * cf(x, y); });
  } else if (iu.kind == "random") {
    std::mt19937_64 rng(static_cast<std::uint64_t>(iu.seed));
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    d.u0 = Field(g, 0.0);
    for (auto& x : d.u0.values()) x = iu.base + iu.amp * dist(rng);
  } else if (iu.kind != "file") {
    throw ConfigError("init.u.kind must be constant, gaussian, cosine, random or file");
  }
  const auto& iv = c.init_v;
  if (iv.kind == "constant") {
    d.v0 = Field(g, iv.value);
  } else if (iv.kind == "cosine") {
    auto cf = cosine(iv.mode);
    d.v0 = Field::sample(g, [&](double x, double y) { return iv.mean + iv.amp * cf(x, y); });
  } else if (iv.kind != "file") {
    throw ConfigError("init.v.kind must be constant, cosine or file");
  }
  if ((iu.kind == "file" || iv.kind == "file") && c.init_file.empty())
    throw ConfigError("init kind 'file' requires init.file");
  d.validate();
  return d;
}

}  // namespace dmsim
