#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "dmsim/config.hpp"
#include "dmsim/error.hpp"
#include "dmsim/functionals.hpp"
#include "dmsim/report.hpp"
#include "dmsim/scheme.hpp"
#include "dmsim/series.hpp"

namespace dmsim {

inline constexpr const char* kVersion = "dmsim 1.0.0";

struct Snapshot {
  long index = 0;  ///< recording ordinal, also the file number
  double t = 0.0;
  Field u;
  Field v;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

/// Everything a run produced. Snapshots hold every record when the config
/// keeps them, otherwise only the first and last.
struct RunRecord {
  RunConfig config;
  FunctionalSeries series;
  std::vector<Snapshot> snapshots;
  std::vector<AuditReport> audits;
  bool complete = false;
  std::string failure;
  std::string version = kVersion;
  int threads = 1;
  double wall_seconds = 0.0;
  long steps = 0;

  Grid grid() const { return config.grid.make(); }
  double ubar0() const {
    if (series.empty()) throw ContractError("run record has no series");
    return series.at("mass", 0) / grid().measure();
  }
  const Snapshot& first() const { return snapshots.at(0); }
  const Snapshot& last() const { return snapshots.at(snapshots.size() - 1); }
};

namespace detail {

inline void check_state(const SimState& s) {
  if (!s.u.all_finite() || !s.v.all_finite()) throw SolverError("non-finite values after step", 0.0, 0);
  if (s.u.min() < 0.0) throw SolverError("negative density after step", s.u.min(), 0);
  if (!(s.v.min() > 0.0)) throw SolverError("nonpositive v after step", s.v.min(), 0);
}

}  // namespace detail

/// Runs from explicit initial data. Fixed steps land on t = n dt exactly and
/// the last step is shortened to hit t_end. Records are taken at step 0,
/// every record_every steps, and at the final step. A step failure leaves a
/// partial record with complete = false and the reason in `failure`.
inline RunRecord run(const RunConfig& cfg, const InitialData& init) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const SimParams p = cfg.sim_params();
  RunRecord rec;
  rec.config = cfg;
  rec.threads = cfg.threads;
  SimState s = SimState::initial(init);
  const Grid& g = s.u.grid();
  const double ubar0 = integrate(g, s.u) / g.measure();
  rec.series = FunctionalSeries(channel_names(), SeriesMeta{p.eps, p.motility.alpha, g.describe(), p.dt.dt});

  std::optional<PreviousRecord> prev;
  long record_index = 0;
  auto record = [&](double dt_used, bool force_snapshot) {
    rec.series.append(s.t, evaluate_channels(s, p, ubar0, dt_used, prev));
    if (cfg.keep_snapshots || force_snapshot) rec.snapshots.push_back({record_index, s.t, s.u, s.v});
    prev = PreviousRecord{s.t, s.v};
    ++record_index;
  };

  const double base_dt = p.dt.kind == DtPolicy::Kind::fixed ? p.dt.dt : p.dt.cap;
  record(0.0, true);
  bool last_recorded = true;
  double last_dt = 0.0;
  try {
    while (s.t < cfg.t_end) {
      const double remaining = cfg.t_end - s.t;
      if (remaining <= 1e-9 * base_dt) break;
      double dt = std::min(select_dt(s, p), remaining);
      const bool final_step = remaining - dt <= 1e-9 * base_dt;
      if (final_step) dt = remaining;
      SimState next = advance(s, p, dt);
      if (final_step) {
        next.t = cfg.t_end;
      } else if (p.dt.kind == DtPolicy::Kind::fixed) {
        next.t = static_cast<double>(next.step) * p.dt.dt;
      }
      detail::check_state(next);
      s = std::move(next);
      last_dt = dt;
      last_recorded = false;
      if (s.step % cfg.record_every == 0 || final_step) {
        const bool is_last = final_step || s.t >= cfg.t_end;
        record(dt, is_last);
        last_recorded = true;
      }
    }
    if (!last_recorded) record(last_dt, true);
    rec.complete = true;
  } catch (const SolverError& e) {
    rec.failure = e.what();
    if (!last_recorded) {
      try {
        record(last_dt, true);
      } catch (const std::exception&) {
      }
    }
  } catch (const DomainError& e) {
    rec.failure = e.what();
  }
  if (!cfg.keep_snapshots && rec.snapshots.size() > 2) rec.snapshots.erase(rec.snapshots.begin() + 1, rec.snapshots.end() - 1);
  rec.steps = s.step;
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// Runs with the configured initial-data presets.
inline RunRecord run(const RunConfig& cfg) { return run(cfg, make_initial_data(cfg)); }

}  // namespace dmsim
