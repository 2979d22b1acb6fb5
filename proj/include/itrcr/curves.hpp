#pragma once

// Exact step-function curves and the nonparametric estimators built on them:
// weighted Kaplan-Meier, weighted Aalen-Johansen cumulative incidence,
// truncated area under the curve, and pointwise curve averaging.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itrcr/detail/check.hpp"
#include "itrcr/detail/io.hpp"
#include "itrcr/detail/numeric.hpp"

#include "json.hpp"

namespace itrcr {

enum class CurveKind { Survival, Cif };

// Event status of one observation: 0 censored, 1 priority cause, 2 other.
enum class Status : int { Censored = 0, Cause1 = 1, Cause2 = 2 };

inline Status status_from_int(int v) {
  if (v < 0 || v > 2)
    throw std::invalid_argument("status must be 0, 1, or 2 (got " +
                                std::to_string(v) + ")");
  return static_cast<Status>(v);
}

struct WeightedSample {
  double time = 0.0;
  Status status = Status::Censored;
  double weight = 1.0;
};

// Right-continuous piecewise-constant function with left limits. The curve
// holds initial_value on [0, t_1) and values[k] on [t_k, t_{k+1}).
class StepCurve {
 public:
  StepCurve(CurveKind kind, std::vector<double> jump_times,
            std::vector<double> values)
      : kind_(kind),
        initial_(kind == CurveKind::Survival ? 1.0 : 0.0),
        times_(std::move(jump_times)),
        values_(std::move(values)) {
    validate();
  }

  static StepCurve constant(CurveKind kind) { return StepCurve(kind, {}, {}); }

  CurveKind kind() const { return kind_; }
  double initial_value() const { return initial_; }
  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t n_jumps() const { return times_.size(); }

  // Value at t (right-continuous).
  double value(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
  }

  // Left limit at t: the value held strictly before t.
  double value_before(double t) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
  }

  bool operator==(const StepCurve&) const = default;

 private:
  void validate() const {
    if (times_.size() != values_.size())
      throw std::invalid_argument("StepCurve: times/values size mismatch");
    double prev_t = -1.0;
    double prev_v = initial_;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      double t = times_[i];
      double v = values_[i];
      if (!std::isfinite(t) || t < 0.0)
        throw std::invalid_argument("StepCurve: jump times must be >= 0");
      if (!(t > prev_t))
        throw std::invalid_argument(
            "StepCurve: jump times must be strictly increasing");
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw std::invalid_argument("StepCurve: values must lie in [0, 1]");
      if (kind_ == CurveKind::Survival ? v > prev_v : v < prev_v)
        throw std::invalid_argument(
            kind_ == CurveKind::Survival
                ? "StepCurve: survival values must be nonincreasing"
                : "StepCurve: CIF values must be nondecreasing");
      prev_t = t;
      prev_v = v;
    }
  }

  CurveKind kind_;
  double initial_;
  std::vector<double> times_;
  std::vector<double> values_;
};

namespace detail {

// Distinct-time summary of a weighted sample: total weight, all-cause event
// weight and per-cause event weight at each observed time, ascending.
struct TimeRow {
  double time = 0.0;
  double w_all = 0.0;   // weight observed at this time (events + censored)
  double w_evt = 0.0;   // all-cause event weight
  double w_evt1 = 0.0;  // cause-1 event weight
  double w_evt2 = 0.0;  // cause-2 event weight
};

struct GroupedSample {
  std::vector<TimeRow> rows;
  double total_weight = 0.0;
};

inline GroupedSample group_by_time(std::span<const WeightedSample> samples) {
  std::vector<std::size_t> order;
  order.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.time) || s.time < 0.0)
      throw std::invalid_argument("sample time must be finite and >= 0");
    if (!std::isfinite(s.weight) || s.weight < 0.0)
      throw std::invalid_argument("sample weight must be finite and >= 0");
    if (s.weight > 0.0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return samples[a].time < samples[b].time;
                   });

  GroupedSample out;
  for (std::size_t k = 0; k < order.size();) {
    TimeRow row;
    row.time = samples[order[k]].time;
    while (k < order.size() && samples[order[k]].time == row.time) {
      const auto& s = samples[order[k]];
      row.w_all += s.weight;
      if (s.status != Status::Censored) {
        row.w_evt += s.weight;
        if (s.status == Status::Cause1) row.w_evt1 += s.weight;
        if (s.status == Status::Cause2) row.w_evt2 += s.weight;
      }
      ++k;
    }
    out.total_weight += row.w_all;
    out.rows.push_back(row);
  }
  return out;
}

// One product-limit step. The clamp guards against sub-ulp weight-sum
// mismatches between the event and risk accumulators.
inline double survival_step(double survival, double w_evt, double risk) {
  double factor = 1.0 - w_evt / risk;
  if (factor < 0.0) factor = 0.0;
  if (factor > 1.0) factor = 1.0;
  return survival * factor;
}

}  // namespace detail

// Weighted Kaplan-Meier product-limit estimator over all-cause events.
// Observations tied at a time are treated as events before censorings (the
// censored ones stay in the risk set at that time).
inline StepCurve kaplan_meier(std::span<const WeightedSample> samples) {
  auto grouped = detail::group_by_time(samples);
  if (!(grouped.total_weight > 0.0))
    throw std::invalid_argument("empty risk set");

  std::vector<double> times;
  std::vector<double> values;
  double survival = 1.0;
  double risk = grouped.total_weight;
  for (const auto& row : grouped.rows) {
    if (row.w_evt > 0.0) {
      survival = detail::survival_step(survival, row.w_evt, risk);
      times.push_back(row.time);
      values.push_back(survival);
    }
    risk -= row.w_all;
  }
  return StepCurve(CurveKind::Survival, std::move(times), std::move(values));
}

// Weighted Aalen-Johansen estimator of the cause-specific cumulative
// incidence: accumulates S(u-) * dN_j(u) / Y(u) over distinct event times,
// with S the Kaplan-Meier of the same samples. When the sample contains no
// events of any other cause the accumulation telescopes to 1 - S, and the
// curve is computed through that complement so the reduction is exact.
inline StepCurve aalen_johansen(std::span<const WeightedSample> samples,
                                int cause) {
  if (cause != 1 && cause != 2)
    throw std::invalid_argument("cause must be 1 or 2");
  auto grouped = detail::group_by_time(samples);
  if (!(grouped.total_weight > 0.0))
    throw std::invalid_argument("empty risk set");

  double other_mass = 0.0;
  for (const auto& row : grouped.rows)
    other_mass += (cause == 1) ? row.w_evt2 : row.w_evt1;
  const bool single_cause = other_mass == 0.0;

  std::vector<double> times;
  std::vector<double> values;
  double survival = 1.0;
  double cif = 0.0;
  double risk = grouped.total_weight;
  for (const auto& row : grouped.rows) {
    double w_cause = (cause == 1) ? row.w_evt1 : row.w_evt2;
    if (row.w_evt > 0.0) {
      if (single_cause) {
        survival = detail::survival_step(survival, row.w_evt, risk);
        cif = 1.0 - survival;
      } else {
        if (w_cause > 0.0) cif += survival * (w_cause / risk);
        if (cif > 1.0) cif = 1.0;
        survival = detail::survival_step(survival, row.w_evt, risk);
      }
      if (w_cause > 0.0) {
        times.push_back(row.time);
        values.push_back(cif);
      }
    }
    risk -= row.w_all;
  }
  return StepCurve(CurveKind::Cif, std::move(times), std::move(values));
}

// Exact area under the step function on [0, tau]; the curve extends
// constantly beyond its last jump.
inline double truncated_auc(const StepCurve& curve, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("tau must be positive and finite");
  double area = 0.0;
  double t_prev = 0.0;
  double v = curve.initial_value();
  const auto& times = curve.jump_times();
  const auto& values = curve.values();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= tau) break;
    area += v * (times[i] - t_prev);
    t_prev = times[i];
    v = values[i];
  }
  area += v * (tau - t_prev);
  return area;
}

// Pointwise weighted mean of curves of one kind, evaluated on the union of
// their jump times. Empty weights mean equal weights; otherwise weights must
// be nonnegative and sum to 1. The mean is computed as deviations from the
// first curve, so averaging identical curves reproduces them bit for bit.
inline StepCurve average_curves(std::span<const StepCurve* const> curves,
                                std::span<const double> weights = {}) {
  if (curves.empty())
    throw std::invalid_argument("average_curves: empty curve list");
  const std::size_t n = curves.size();
  CurveKind kind = curves[0]->kind();
  for (const StepCurve* c : curves)
    if (c->kind() != kind)
      throw std::invalid_argument("average_curves: mixed curve kinds");
  if (!weights.empty()) {
    if (weights.size() != n)
      throw std::invalid_argument("average_curves: weight count mismatch");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0))
        throw std::invalid_argument("average_curves: negative weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("average_curves: weights must sum to 1");
  }

  std::vector<double> grid;
  std::size_t total = 0;
  for (const StepCurve* c : curves) total += c->n_jumps();
  grid.reserve(total);
  for (const StepCurve* c : curves)
    grid.insert(grid.end(), c->jump_times().begin(), c->jump_times().end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  // Per-curve cursor into its jump list; advanced monotonically over grid.
  std::vector<std::size_t> cursor(n, 0);
  std::vector<double> current(n);
  for (std::size_t i = 0; i < n; ++i) current[i] = curves[i]->initial_value();

  double prev = curves[0]->initial_value();
  std::vector<double> values;
  values.reserve(grid.size());
  for (double t : grid) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& jt = curves[i]->jump_times();
      const auto& jv = curves[i]->values();
      std::size_t& k = cursor[i];
      while (k < jt.size() && jt[k] <= t) {
        current[i] = jv[k];
        ++k;
      }
    }
    double base = current[0];
    double mean;
    if (weights.empty()) {
      double dev = 0.0;
      for (std::size_t i = 1; i < n; ++i) dev += current[i] - base;
      mean = base + dev / static_cast<double>(n);
    } else {
      double dev = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        dev += weights[i] * (current[i] - base);
      mean = base + dev;
    }
    if (mean < 0.0) mean = 0.0;
    if (mean > 1.0) mean = 1.0;
    // Projection onto the kind's monotone cone; only ever clips sub-ulp
    // wobble introduced by the shifted summation.
    if (kind == CurveKind::Survival ? mean > prev : mean < prev) mean = prev;
    values.push_back(mean);
    prev = mean;
  }
  return StepCurve(kind, std::move(grid), std::move(values));
}

inline StepCurve average_curves(const std::vector<StepCurve>& curves,
                                std::span<const double> weights = {}) {
  std::vector<const StepCurve*> ptrs;
  ptrs.reserve(curves.size());
  for (const auto& c : curves) ptrs.push_back(&c);
  return average_curves(std::span<const StepCurve* const>(ptrs), weights);
}

// --- curve serialization: two-column CSV plus a JSON sidecar for the kind ---

inline std::string curve_kind_name(CurveKind kind) {
  return kind == CurveKind::Survival ? "survival" : "cif";
}

inline CurveKind curve_kind_from_name(const std::string& name) {
  if (name == "survival") return CurveKind::Survival;
  if (name == "cif") return CurveKind::Cif;
  throw DataError("unknown curve kind: " + name);
}

inline void save_curve(const std::filesystem::path& path,
                       const StepCurve& curve) {
  std::ostringstream csv;
  csv << "time,value\n";
  csv << "0," << detail::format_double(curve.initial_value()) << "\n";
  for (std::size_t i = 0; i < curve.n_jumps(); ++i) {
    csv << detail::format_double(curve.jump_times()[i]) << ","
        << detail::format_double(curve.values()[i]) << "\n";
  }
  detail::atomic_write_file(path, csv.str());

  nlohmann::json meta{{"schema_version", 1},
                      {"kind", curve_kind_name(curve.kind())}};
  std::filesystem::path side = path;
  side += ".meta.json";
  detail::atomic_write_file(side, meta.dump(2) + "\n");
}

inline StepCurve load_curve(const std::filesystem::path& path) {
  std::filesystem::path side = path;
  side += ".meta.json";
  nlohmann::json meta = nlohmann::json::parse(detail::read_file(side));
  if (meta.value("schema_version", -1) != 1)
    throw DataError("unsupported curve schema version in " + side.string());
  CurveKind kind = curve_kind_from_name(meta.at("kind").get<std::string>());

  auto lines = detail::read_lines(path);
  if (lines.size() < 2 || lines[0] != "time,value")
    throw DataError("malformed curve file: " + path.string());
  {
    auto first = detail::split(lines[1], ',');
    if (first.size() != 2 ||
        detail::parse_double(first[0], path.string()) != 0.0)
      throw DataError("curve file missing initial (0, value) row: " +
                      path.string());
  }
  std::vector<double> times;
  std::vector<double> values;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cells = detail::split(lines[i], ',');
    if (cells.size() != 2)
      throw DataError("malformed curve row in " + path.string());
    times.push_back(detail::parse_double(cells[0], path.string()));
    values.push_back(detail::parse_double(cells[1], path.string()));
  }
  return StepCurve(kind, std::move(times), std::move(values));
}

}  // namespace itrcr
