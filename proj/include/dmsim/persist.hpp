#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dmsim/config.hpp"
#include "dmsim/report.hpp"
#include "dmsim/run.hpp"
#include "dmsim/series.hpp"
#include "dmsim/snapshot_io.hpp"

namespace dmsim {

namespace fs = std::filesystem;

// Run directory layout:
//   config.echo            canonical key = value config
//   series.csv             header "t,<channel>...", one row per record, %.17g
//   snapshots/index.csv    "index,t" per stored snapshot
//   snapshots/NNNNNN.fld   binary fields (see snapshot_io.hpp)
//   audit/<name>.txt       one text block per audit report
//   audit/residuals.csv    "audit,t,residual" rows
//   meta.txt               version, threads, wall time, steps, completion flag

inline std::string series_csv(const FunctionalSeries& s) {
  std::ostringstream o;
  o << "t";
  for (const auto& n : s.names()) o << "," << n;
  o << "\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    o << fmt17(s.times()[k]);
    for (const auto& n : s.names()) o << "," << fmt17(s.at(n, k));
    o << "\n";
  }
  return o.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline FunctionalSeries parse_series_csv(std::istream& in, SeriesMeta meta = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("series.csv: empty file");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "t") throw ConfigError("series.csv: header must start with t");
  std::vector<std::string> names(header.begin() + 1, header.end());
  FunctionalSeries s(names, std::move(meta));
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError("series.csv: row " + std::to_string(row) + " has the wrong number of cells");
    std::vector<double> values;
    for (std::size_t k = 1; k < cells.size(); ++k) values.push_back(parse_double(header[k], cells[k]));
    s.append(parse_double("t", cells[0]), values);
  }
  return s;
}

inline std::string snapshot_filename(long index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06ld.fld", index);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

inline void write_audits(const fs::path& dir, const std::vector<AuditReport>& audits) {
  fs::create_directories(dir / "audit");
  std::ostringstream csv;
  csv << "audit,t,residual\n";
  for (const auto& r : audits) {
    write_text(dir / "audit" / (r.name + ".txt"), report_text(r));
    for (std::size_t k = 0; k < r.residuals.size(); ++k) {
      const double t = k < r.residual_times.size() ? r.residual_times[k] : static_cast<double>(k);
      csv << r.name << "," << fmt17(t) << "," << fmt17(r.residuals[k]) << "\n";
    }
  }
  write_text(dir / "audit" / "residuals.csv", csv.str());
}

inline std::string meta_text(const RunRecord& r) {
  std::ostringstream o;
  o << "version = " << r.version << "\n";
  o << "threads = " << r.threads << "\n";
  o << "wall_seconds = " << fmt17(r.wall_seconds) << "\n";
  o << "steps = " << r.steps << "\n";
  o << "complete = " << (r.complete ? "true" : "false") << "\n";
  if (!r.failure.empty()) o << "failure = " << r.failure << "\n";
  return o.str();
}

/// Writes the record under `dir` (created if needed).
inline void write_run_dir(const fs::path& dir, const RunRecord& r) {
  fs::create_directories(dir / "snapshots");
  write_text(dir / "config.echo", echo_config(r.config));
  write_text(dir / "series.csv", series_csv(r.series));
  std::ostringstream index;
  index << "index,t\n";
  for (const auto& s : r.snapshots) {
    write_snapshot(dir / "snapshots" / snapshot_filename(s.index), s.u, s.v);
    index << s.index << "," << fmt17(s.t) << "\n";
  }
  write_text(dir / "snapshots" / "index.csv", index.str());
  if (!r.audits.empty()) write_audits(dir, r.audits);
  write_text(dir / "meta.txt", meta_text(r));
}

/// Reloads a record written by write_run_dir; channel values and fields come back bitwise.
/// Audit reports are not reloaded (they are derived data).
inline RunRecord load_run_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a run directory: " + dir.string());
  RunRecord r;
  r.config = load_config(dir / "config.echo");
  const Grid g = r.config.grid.make();
  {
    std::ifstream f(dir / "series.csv");
    if (!f) throw ConfigError("missing series.csv in " + dir.string());
    const double dt = r.config.dt_policy == "fixed" ? r.config.dt : r.config.dt_cap;
    r.series = parse_series_csv(f, SeriesMeta{r.config.eps, r.config.motility.alpha, g.describe(), dt});
  }
  {
    std::istringstream in(read_text(dir / "snapshots" / "index.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != 2) throw ConfigError("snapshots/index.csv: malformed row");
      Snapshot s;
      s.index = parse_long("index", cells[0]);
      s.t = parse_double("t", cells[1]);
      auto [u, v] = snapshot_fields(read_snapshot(dir / "snapshots" / snapshot_filename(s.index)), g);
      s.u = std::move(u);
      s.v = std::move(v);
      r.snapshots.push_back(std::move(s));
    }
  }
  if (fs::exists(dir / "meta.txt")) {
    std::ifstream f(dir / "meta.txt");
    const KeyValues kv = parse_key_values(f);
    if (auto it = kv.find("version"); it != kv.end()) r.version = it->second;
    if (auto it = kv.find("threads"); it != kv.end()) r.threads = static_cast<int>(parse_long("threads", it->second));
    if (auto it = kv.find("wall_seconds"); it != kv.end()) r.wall_seconds = parse_double("wall_seconds", it->second);
    if (auto it = kv.find("steps"); it != kv.end()) r.steps = parse_long("steps", it->second);
    if (auto it = kv.find("complete"); it != kv.end()) r.complete = parse_bool("complete", it->second);
    if (auto it = kv.find("failure"); it != kv.end()) r.failure = it->second;
  }
  return r;
}

}  // namespace dmsim
