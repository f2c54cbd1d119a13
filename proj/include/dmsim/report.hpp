#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dmsim {

enum class AuditVerdict { pass, order_confirmed, fail, inconclusive, skipped };

inline const char* to_string(AuditVerdict v) {
  switch (v) {
    case AuditVerdict::pass: return "pass";
    case AuditVerdict::order_confirmed: return "order-confirmed";
    case AuditVerdict::fail: return "fail";
    case AuditVerdict::inconclusive: return "inconclusive";
    case AuditVerdict::skipped: return "skipped";
  }
  return "?";
}

/// Only pass and order-confirmed count as success; skipped checks are neutral.
inline bool is_success(AuditVerdict v) { return v == AuditVerdict::pass || v == AuditVerdict::order_confirmed; }
inline bool is_failure(AuditVerdict v) { return v == AuditVerdict::fail || v == AuditVerdict::inconclusive; }

/// One check: what was tested, the numbers behind the verdict, and the verdict.
struct AuditReport {
  std::string name;
  std::string statement;  ///< the relation being checked, in words
  AuditVerdict verdict = AuditVerdict::inconclusive;
  double tolerance = 0.0;
  std::vector<std::pair<std::string, double>> scalars;   ///< named evidence, insertion order
  std::vector<double> residual_times;                    ///< residual time series (may be empty)
  std::vector<double> residuals;
  std::vector<double> slopes;                            ///< observed orders between consecutive levels
  std::string witness;                                   ///< first violation, if any
  std::vector<std::string> notes;

  void set(const std::string& key, double value) {
    for (auto& kv : scalars)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    scalars.emplace_back(key, value);
  }

  double get(const std::string& key) const {
    for (const auto& kv : scalars)
      if (kv.first == key) return kv.second;
    return std::numeric_limits<double>::quiet_NaN();
  }

  bool has(const std::string& key) const {
    for (const auto& kv : scalars)
      if (kv.first == key) return true;
    return false;
  }
};

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Human-readable block, one per report.
inline std::string report_text(const AuditReport& r) {
  std::ostringstream o;
  o << "[" << r.name << "]\n";
  o << "statement: " << r.statement << "\n";
  o << "verdict: " << to_string(r.verdict) << "\n";
  o << "tolerance: " << fmt17(r.tolerance) << "\n";
  for (const auto& [k, v] : r.scalars) o << k << ": " << fmt17(v) << "\n";
  if (!r.slopes.empty()) {
    o << "slopes:";
    for (double s : r.slopes) o << " " << fmt17(s);
    o << "\n";
  }
  if (!r.witness.empty()) o << "witness: " << r.witness << "\n";
  for (const auto& n : r.notes) o << "note: " << n << "\n";
  if (!r.residuals.empty()) {
    double worst = 0.0;
    for (double x : r.residuals) worst = std::max(worst, std::abs(x));
    o << "residual_points: " << r.residuals.size() << "\n";
    o << "residual_max_abs: " << fmt17(worst) << "\n";
  }
  return o.str();
}

}  // namespace dmsim
