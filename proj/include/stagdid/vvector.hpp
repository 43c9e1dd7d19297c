#pragma once

#include <cmath>
#include <vector>

#include "stagdid/common.hpp"
#include "stagdid/panel.hpp"

namespace stagdid {

// Scaled moment representation of the true-switcher estimator. Every entry is
// a (1/G)-scaled indicator-weighted sum over groups; the estimator is an exact
// algebraic function of these 13 numbers per period, which gives an
// independent evaluation route used as a consistency oracle.
//
// Per period t in {2..T}:
//   p_10, p_00          cell mass switching at t / comparison mass at t
//   p1_10, p1_00, p1_11 period-(t-1) mass by the (d_t, d_{t-1}) pattern
//   q_10, q_00          mass-weighted outcome changes (t-1 -> t)
//   qs_10, qs_00        mass-weighted backward changes (t-2 -> t-1); zero at t=2
//   qss_10, qss_00      forward-contrast sums at t (zero at t=T)
//   qsss_10, qsss_11    switcher / already-treated sums for period t-1
struct VRow {
  double p_10 = 0, p_00 = 0;
  double p1_10 = 0, p1_00 = 0, p1_11 = 0;
  double q_10 = 0, q_00 = 0;
  double qs_10 = 0, qs_00 = 0;
  double qss_10 = 0, qss_00 = 0;
  double qsss_10 = 0, qsss_11 = 0;
};

struct VVector {
  int periods = 0;
  int g = 0;                // number of groups used for the 1/G scaling
  std::vector<VRow> rows;   // indexed by 1-based period; entries 0,1 unused
};

inline VVector assemble_v(const Panel& panel) {
  require_valid(panel);
  const int T = panel.periods;
  const auto G = static_cast<double>(panel.groups.size());
  VVector v;
  v.periods = T;
  v.g = static_cast<int>(panel.groups.size());
  v.rows.assign(T + 1, VRow{});

  for (int t = 2; t <= T; ++t) {
    std::vector<double> acc[13];
    for (const auto& g : panel.groups) {
      const bool d1 = g.d[t - 1] != 0, d0 = g.d[t - 2] != 0;
      const auto w = static_cast<double>(g.n[t - 1]);
      const auto w_prev = static_cast<double>(g.n[t - 2]);
      const double dy = g.y[t - 1] - g.y[t - 2];
      if (d1 && !d0) {
        acc[0].push_back(w);             // p_10
        acc[2].push_back(w_prev);        // p1_10 (pattern at (t, t-1))
        acc[5].push_back(w * dy);        // q_10
        if (t >= 3) acc[7].push_back(w * (g.y[t - 2] - g.y[t - 3]));  // qs_10
        acc[11].push_back(w_prev * dy);  // qsss_10
      } else if (!d1 && !d0) {
        acc[1].push_back(w);             // p_00
        acc[3].push_back(w_prev);        // p1_00
        acc[6].push_back(w * dy);        // q_00
        if (t >= 3) acc[8].push_back(w * (g.y[t - 2] - g.y[t - 3]));  // qs_00
      } else if (d1 && d0) {
        acc[4].push_back(w_prev);        // p1_11
        acc[12].push_back(w_prev * dy);  // qsss_11
      }
      // forward sums at index t use the (t+1, t) pattern with period-t weights
      if (t < T) {
        const bool e1 = g.d[t] != 0, e0 = g.d[t - 1] != 0;
        const double dy_next_base = g.y[t - 1] - g.y[t - 2];
        if (e1 && !e0) acc[9].push_back(w * dy_next_base);   // qss_10
        if (!e1 && !e0) acc[10].push_back(w * dy_next_base); // qss_00
      }
    }
    VRow& r = v.rows[t];
    r.p_10 = pairwise_sum(acc[0]) / G;
    r.p_00 = pairwise_sum(acc[1]) / G;
    r.p1_10 = pairwise_sum(acc[2]) / G;
    r.p1_00 = pairwise_sum(acc[3]) / G;
    r.p1_11 = pairwise_sum(acc[4]) / G;
    r.q_10 = pairwise_sum(acc[5]) / G;
    r.q_00 = pairwise_sum(acc[6]) / G;
    r.qs_10 = pairwise_sum(acc[7]) / G;
    r.qs_00 = pairwise_sum(acc[8]) / G;
    r.qss_10 = pairwise_sum(acc[9]) / G;
    r.qss_00 = pairwise_sum(acc[10]) / G;
    r.qsss_10 = pairwise_sum(acc[11]) / G;
    r.qsss_11 = pairwise_sum(acc[12]) / G;
  }
  return v;
}

namespace detail {

// q/p with the estimator's zero conventions: an empty cell (p == 0 with q == 0)
// is an undefined component; p == 0 against a nonzero numerator means the
// vector is internally inconsistent.
inline Component v_ratio(double q, double p) {
  if (p > 0.0) return {q / p, true};
  if (q == 0.0) return {0.0, false};
  throw EstimatorError("undefined f(V) component");
}

}  // namespace detail

// Evaluates the true-switcher estimator from the moment vector alone.
inline double f_of_v(const VVector& v) {
  const int T = v.periods;
  if (T < 2) throw EstimatorError("f_of_v: vector has no periods");
  std::vector<double> num_terms, den_terms;
  for (int t = 2; t <= T; ++t) {
    const VRow& r = v.rows[t];

    // contrasts entering the early-switch share (period t-1)
    Component fwd_prev{0.0, false};
    if (t - 1 >= 2) {
      const VRow& rp = v.rows[t - 1];
      // forward sums at t-1 live in row t-1; their masses are the
      // period-(t-1) masses recorded in row t.
      const auto a = detail::v_ratio(rp.qss_10, r.p1_10);
      const auto b = detail::v_ratio(rp.qss_00, r.p1_00);
      if (a.defined && b.defined) fwd_prev = {a.value - b.value, true};
    }
    Component vs_treated{0.0, false};
    {
      const auto a = detail::v_ratio(r.qsss_10, r.p1_10);
      const auto b = detail::v_ratio(r.qsss_11, r.p1_11);
      if (a.defined && b.defined) vs_treated = {a.value - b.value, true};
    }
    const double pre_sum = fwd_prev.value + vs_treated.value;
    const double lam = pre_sum == 0.0 ? 0.0 : fwd_prev.value / pre_sum;

    // on-time per-period sum
    Component dt{0.0, false}, ds{0.0, false}, dds{0.0, false};
    {
      const auto a = detail::v_ratio(r.q_10, r.p_10);
      const auto b = detail::v_ratio(r.q_00, r.p_00);
      if (a.defined && b.defined) dt = {a.value - b.value, true};
    }
    if (t >= 3) {
      const auto a = detail::v_ratio(r.qs_10, r.p_10);
      const auto b = detail::v_ratio(r.qs_00, r.p_00);
      if (a.defined && b.defined) ds = {a.value - b.value, true};
    }
    if (t < T) {
      const VRow& rn = v.rows[t + 1];
      const auto a = detail::v_ratio(r.qss_10, rn.p1_10);
      const auto b = detail::v_ratio(r.qss_00, rn.p1_00);
      if (a.defined && b.defined) dds = {a.value - b.value, true};
    }
    double on_time = r.p_10 * dt.value + r.p_10 * ds.value;
    if (r.p_00 > 0.0 && t < T) on_time += v.rows[t + 1].p1_10 * r.p_10 / r.p_00 * dds.value;

    const double early = r.p1_10 * (fwd_prev.value + vs_treated.value);
    num_terms.push_back(lam * early + (1.0 - lam) * on_time);
    den_terms.push_back(lam * r.p1_10 + (1.0 - lam) * r.p_10);
  }
  const double den = pairwise_sum(den_terms);
  if (den <= 0.0) throw EstimatorError("degenerate switcher mass");
  return pairwise_sum(num_terms) / den;
}

}  // namespace stagdid
