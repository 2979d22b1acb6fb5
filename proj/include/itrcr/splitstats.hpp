#pragma once

// Two-sample splitting statistics: the standardized log-rank score for
// overall survival and the unstandardized Gray score comparing priority-cause
// cumulative incidence between two groups.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "itrcr/curves.hpp"
#include "itrcr/detail/check.hpp"

namespace itrcr {

struct SplitScore {
  double value = 0.0;
  double abs_value = 0.0;
  bool valid = false;
};

namespace detail {

// Per-time counts seen by the sweep kernels. `l_*` is the left group,
// `a_*` both groups pooled.
struct SweepRow {
  double time = 0.0;
  double l_all = 0.0;
  double l_evt = 0.0;
  double l_evt1 = 0.0;
  double a_all = 0.0;
  double a_evt = 0.0;
  double a_evt1 = 0.0;
};

// Standardized log-rank statistic U / sqrt(V) over the pooled distinct event
// times, signed by (left observed - expected). Rows must be ascending in
// time; row(k) is called once for k = 0..n_rows-1.
template <typename RowFn>
SplitScore logrank_sweep(std::size_t n_rows, double total_left,
                         double total_all, RowFn&& row) {
  if (!(total_left > 0.0) || !(total_all - total_left > 0.0)) return {};
  double y_left = total_left;
  double y_all = total_all;
  double u = 0.0;
  double v = 0.0;
  for (std::size_t k = 0; k < n_rows; ++k) {
    SweepRow r = row(k);
    if (r.a_evt > 0.0 && y_all > 0.0) {
      double frac_left = y_left / y_all;
      u += r.l_evt - r.a_evt * frac_left;
      if (y_all > 1.0) {
        v += r.a_evt * frac_left * (1.0 - frac_left) * (y_all - r.a_evt) /
             (y_all - 1.0);
      }
    }
    y_left -= r.l_all;
    y_all -= r.a_all;
  }
  if (!(v > 0.0)) return {};
  double value = u / std::sqrt(v);
  return {value, std::abs(value), true};
}

// One side's contribution to the Gray score: the sum over its cause-1 jumps
// of dF1(t) / (1 - F1(t-)), truncated at tau, with F1 the Aalen-Johansen
// estimate on that side.
template <typename RowFn>
double gray_side_sum(std::size_t n_rows, double total, double tau,
                     RowFn&& row) {
  double survival = 1.0;
  double cif = 0.0;
  double risk = total;
  double sum = 0.0;
  for (std::size_t k = 0; k < n_rows; ++k) {
    auto [time, w_all, w_evt, w_evt1] = row(k);
    if (time > tau) break;
    if (w_evt > 0.0 && risk > 0.0) {
      if (w_evt1 > 0.0) {
        ITRCR_CHECK(1.0 - cif > 0.0,
                    "cause-1 jump after CIF mass exhausted");
        double increment = survival * (w_evt1 / risk);
        sum += increment / (1.0 - cif);
        cif += increment;
        if (cif > 1.0) cif = 1.0;
      }
      survival = survival_step(survival, w_evt, risk);
    }
    risk -= w_all;
  }
  return sum;
}

struct GraySideRow {
  double time;
  double w_all;
  double w_evt;
  double w_evt1;
};

// Gray score across rows carrying both sides' counts.
template <typename RowFn>
SplitScore gray_sweep(std::size_t n_rows, double total_left, double total_all,
                      double tau, RowFn&& row) {
  double total_right = total_all - total_left;
  if (!(total_left > 0.0) || !(total_right > 0.0)) return {};
  double left = gray_side_sum(n_rows, total_left, tau, [&](std::size_t k) {
    SweepRow r = row(k);
    return GraySideRow{r.time, r.l_all, r.l_evt, r.l_evt1};
  });
  double right = gray_side_sum(n_rows, total_right, tau, [&](std::size_t k) {
    SweepRow r = row(k);
    return GraySideRow{r.time, r.a_all - r.l_all, r.a_evt - r.l_evt,
                       r.a_evt1 - r.l_evt1};
  });
  double value = left - right;
  return {value, std::abs(value), true};
}

// Merges two per-group time tables onto the union of their distinct times.
inline std::vector<SweepRow> merge_rows(const GroupedSample& left,
                                        const GroupedSample& right) {
  std::vector<SweepRow> rows;
  rows.reserve(left.rows.size() + right.rows.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < left.rows.size() || j < right.rows.size()) {
    SweepRow r;
    bool take_left =
        j >= right.rows.size() ||
        (i < left.rows.size() && left.rows[i].time <= right.rows[j].time);
    bool take_right =
        i >= left.rows.size() ||
        (j < right.rows.size() && right.rows[j].time <= left.rows[i].time);
    if (take_left) {
      const auto& lr = left.rows[i++];
      r.time = lr.time;
      r.l_all = lr.w_all;
      r.l_evt = lr.w_evt;
      r.l_evt1 = lr.w_evt1;
      r.a_all = lr.w_all;
      r.a_evt = lr.w_evt;
      r.a_evt1 = lr.w_evt1;
    }
    if (take_right) {
      const auto& rr = right.rows[j++];
      r.time = rr.time;
      r.a_all += rr.w_all;
      r.a_evt += rr.w_evt;
      r.a_evt1 += rr.w_evt1;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace detail

// Standardized two-sample log-rank score on all-cause events. Returns an
// invalid score when either side has no positive weight or the
// hypergeometric variance is zero.
inline SplitScore logrank_score(std::span<const WeightedSample> left,
                                std::span<const WeightedSample> right) {
  auto gl = detail::group_by_time(left);
  auto gr = detail::group_by_time(right);
  auto rows = detail::merge_rows(gl, gr);
  return detail::logrank_sweep(
      rows.size(), gl.total_weight, gl.total_weight + gr.total_weight,
      [&](std::size_t k) { return rows[k]; });
}

// Gray's two-sample score with unit weight: the difference between the two
// sides' accumulated subdistribution-hazard increments up to tau.
inline SplitScore gray_score(std::span<const WeightedSample> left,
                             std::span<const WeightedSample> right,
                             double tau) {
  if (!(tau > 0.0))
    throw std::invalid_argument("gray_score: tau must be positive");
  auto gl = detail::group_by_time(left);
  auto gr = detail::group_by_time(right);
  auto rows = detail::merge_rows(gl, gr);
  return detail::gray_sweep(rows.size(), gl.total_weight,
                            gl.total_weight + gr.total_weight, tau,
                            [&](std::size_t k) { return rows[k]; });
}

}  // namespace itrcr
