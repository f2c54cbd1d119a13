#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dmsim/error.hpp"

namespace dmsim {

struct SeriesMeta {
  double eps = 0.0;
  double alpha = 1.0;
  std::string grid;
  double dt = 0.0;

  friend bool operator==(const SeriesMeta&, const SeriesMeta&) = default;
};

/// Time-stamped columns of monitored scalars, one value per channel per record.
class FunctionalSeries {
 public:
  FunctionalSeries() = default;
  explicit FunctionalSeries(std::vector<std::string> names, SeriesMeta meta = {})
      : names_(std::move(names)), columns_(names_.size()), meta_(std::move(meta)) {}

  void append(double t, const std::vector<double>& values) {
    if (values.size() != names_.size()) throw ContractError("series: channel count mismatch");
    if (!times_.empty() && !(t > times_.back())) throw ContractError("series: times must increase strictly");
    times_.push_back(t);
    for (std::size_t k = 0; k < values.size(); ++k) columns_[k].push_back(values[k]);
  }

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }
  const SeriesMeta& meta() const noexcept { return meta_; }
  SeriesMeta& meta() noexcept { return meta_; }

  bool has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  const std::vector<double>& channel(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ContractError("series: no channel named " + name);
    return columns_[static_cast<std::size_t>(it - names_.begin())];
  }

  std::vector<double>& channel(const std::string& name) {
    return const_cast<std::vector<double>&>(std::as_const(*this).channel(name));
  }

  double at(const std::string& name, std::size_t record) const { return channel(name).at(record); }

  friend bool operator==(const FunctionalSeries&, const FunctionalSeries&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> times_;
  std::vector<std::vector<double>> columns_;
  SeriesMeta meta_;
};

/// Trapezoidal time integral of a channel over the records.
inline double time_integral(const FunctionalSeries& s, const std::string& name) {
  const auto& t = s.times();
  const auto& c = s.channel(name);
  double acc = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) acc += 0.5 * (c[k] + c[k - 1]) * (t[k] - t[k - 1]);
  return acc;
}

/// Budget 1 + eps T + int_0^T int eps u^2 v/(1+eps u), by quadrature of the
/// recorded density over the record cadence.
inline double budget_I(const FunctionalSeries& s) {
  if (s.empty()) throw ContractError("budget_I: empty series");
  const double t_end = s.times().back() - s.times().front();
  return 1.0 + s.meta().eps * t_end + time_integral(s, "budget_density");
}

}  // namespace dmsim
