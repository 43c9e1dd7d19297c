#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stagdid/common.hpp"
#include "stagdid/panel.hpp"

namespace stagdid {

// Estimators for staggered-adoption panels whose recorded treatment may start
// one period after the true switch (late coding / anticipation).
//
// Per-period building blocks, all weighted by cell sizes:
//   did        switch-period contrast: outcome changes of newly treated vs
//              untreated comparison groups.
//   did_star   backward placebo contrast on the same groups one period
//              earlier; corrects contamination of the switchers' base period.
//   did_dstar  forward contrast among still-untreated groups that differ in
//              whether they switch next period; corrects contamination of the
//              comparison cells. Zero at the first and last period.
//   did_tstar  contrast of next period's switchers against already-treated
//              groups; together with did_dstar it identifies the share of
//              units whose true switch precedes the recorded one.
//
// Any contrast whose defining group set is empty is set to 0 and flagged
// undefined (zero convention).

namespace detail {

template <typename Pred>
Component weighted_mean_diff(const Panel& panel, Pred&& in_set, int weight_t, int t_hi,
                             int t_lo) {
  std::vector<double> terms;
  std::vector<double> weights;
  terms.reserve(panel.groups.size());
  weights.reserve(panel.groups.size());
  for (const auto& g : panel.groups) {
    if (!in_set(g)) continue;
    const auto w = static_cast<double>(g.n[weight_t - 1]);
    terms.push_back(w * (g.y[t_hi - 1] - g.y[t_lo - 1]));
    weights.push_back(w);
  }
  if (terms.empty()) return {0.0, false};
  return {pairwise_sum(terms) / pairwise_sum(weights), true};
}

inline Component contrast(Component a, Component b) {
  if (!a.defined || !b.defined) return {0.0, false};
  return {a.value - b.value, true};
}

}  // namespace detail

// Switch-period contrast at t in {2..T}.
inline Component did_t(const Panel& panel, const CellCounts&, int t) {
  if (t < 2 || t > panel.periods) throw EstimatorError("did_t: period outside {2..T}");
  auto sw = [&](const GroupSeries& g) { return g.d[t - 1] == 1 && g.d[t - 2] == 0; };
  auto cmp = [&](const GroupSeries& g) { return g.d[t - 1] == 0 && g.d[t - 2] == 0; };
  return detail::contrast(detail::weighted_mean_diff(panel, sw, t, t, t - 1),
                          detail::weighted_mean_diff(panel, cmp, t, t, t - 1));
}

// Backward placebo contrast at t; zero by convention at t = 2.
inline Component did_star_t(const Panel& panel, const CellCounts&, int t) {
  if (t < 2 || t > panel.periods) throw EstimatorError("did_star_t: period outside {2..T}");
  if (t == 2) return {0.0, false};
  auto sw = [&](const GroupSeries& g) { return g.d[t - 1] == 1 && g.d[t - 2] == 0; };
  auto cmp = [&](const GroupSeries& g) { return g.d[t - 1] == 0 && g.d[t - 2] == 0; };
  return detail::contrast(detail::weighted_mean_diff(panel, sw, t, t - 1, t - 2),
                          detail::weighted_mean_diff(panel, cmp, t, t - 1, t - 2));
}

// Forward contrast at t in {1..T}; zero by convention at t = 1 and t = T.
inline Component did_dstar_t(const Panel& panel, const CellCounts&, int t) {
  if (t < 1 || t > panel.periods) throw EstimatorError("did_dstar_t: period outside {1..T}");
  if (t == 1 || t == panel.periods) return {0.0, false};
  auto next_sw = [&](const GroupSeries& g) { return g.d[t] == 1 && g.d[t - 1] == 0; };
  auto next_un = [&](const GroupSeries& g) { return g.d[t] == 0 && g.d[t - 1] == 0; };
  return detail::contrast(detail::weighted_mean_diff(panel, next_sw, t, t, t - 1),
                          detail::weighted_mean_diff(panel, next_un, t, t, t - 1));
}

// Contrast of period-t switchers against already-treated groups, evaluated on
// the change from t-1 to t with period-(t-1) weights. Indexed by t in {2..T};
// the result refers to period t-1.
inline Component did_tstar_tm1(const Panel& panel, const CellCounts&, int t) {
  if (t < 2 || t > panel.periods) throw EstimatorError("did_tstar_tm1: period outside {2..T}");
  auto sw = [&](const GroupSeries& g) { return g.d[t - 1] == 1 && g.d[t - 2] == 0; };
  auto treated = [&](const GroupSeries& g) { return g.d[t - 1] == 1 && g.d[t - 2] == 1; };
  return detail::contrast(detail::weighted_mean_diff(panel, sw, t - 1, t, t - 1),
                          detail::weighted_mean_diff(panel, treated, t - 1, t, t - 1));
}

struct LambdaHat {
  double value = 0.0;
  bool out_of_range = false;       // raw value outside [0,1]
  bool zero_by_convention = false;  // both contrasts zero, or denominator zero
};

// Estimated share of a switching cohort whose true switch happened one period
// before the recorded one. Indexed by t in {2..T}; the share refers to t-1.
// Convention: 0 when both contrasts are zero. A zero denominator with nonzero
// numerator (exact cancellation) also maps to 0, with the convention flag set;
// the raw quotient would be infinite.
inline LambdaHat lambda_hat(const Panel& panel, const CellCounts& cc, int t) {
  const double fwd = (t - 1 >= 2) ? did_dstar_t(panel, cc, t - 1).value : 0.0;
  const double vs_treated = did_tstar_tm1(panel, cc, t).value;
  const double denom = fwd + vs_treated;
  if (denom == 0.0) return {0.0, false, true};
  const double v = fwd / denom;
  return {v, v < 0.0 || v > 1.0, false};
}

struct DidComponents {
  int periods = 0;
  // Indexed by 1-based period t; entries below index 2 are unused except for
  // did_dstar, which is defined on {1..T}.
  std::vector<Component> did;          // switch-period contrast at t
  std::vector<Component> did_star;     // backward placebo at t
  std::vector<Component> did_dstar;    // forward contrast at t
  std::vector<Component> did_tstar_prev;  // switchers-vs-treated contrast for t-1
  std::vector<Component> did_s;        // unscaled per-period corrected sum at t
  std::vector<Component> did_sdagger_prev;  // unscaled early-switch sum for t-1
  std::vector<double> lambda_prev;     // estimated early-switch share for t-1
  std::vector<std::uint8_t> lambda_oor;
};

inline DidComponents compute_components(const Panel& panel, const CellCounts& cc) {
  const int T = panel.periods;
  DidComponents c;
  c.periods = T;
  c.did.resize(T + 1);
  c.did_star.resize(T + 1);
  c.did_dstar.resize(T + 1);
  c.did_tstar_prev.resize(T + 1);
  c.did_s.resize(T + 1);
  c.did_sdagger_prev.resize(T + 1);
  c.lambda_prev.assign(T + 1, 0.0);
  c.lambda_oor.assign(T + 1, 0);
  for (int t = 1; t <= T; ++t) c.did_dstar[t] = did_dstar_t(panel, cc, t);
  for (int t = 2; t <= T; ++t) {
    c.did[t] = did_t(panel, cc, t);
    c.did_star[t] = did_star_t(panel, cc, t);
    c.did_tstar_prev[t] = did_tstar_tm1(panel, cc, t);

    const double fwd_prev = (t - 1 >= 2) ? c.did_dstar[t - 1].value : 0.0;
    const bool any_defined =
        (t - 1 >= 2 && c.did_dstar[t - 1].defined) || c.did_tstar_prev[t].defined;
    c.did_sdagger_prev[t] = {cc.n1_10[t - 1] * (fwd_prev + c.did_tstar_prev[t].value),
                             any_defined};

    const auto lam = lambda_hat(panel, cc, t);
    c.lambda_prev[t] = lam.value;
    c.lambda_oor[t] = lam.out_of_range ? 1 : 0;

    double v = cc.n10[t] * c.did[t].value + cc.n10[t] * c.did_star[t].value;
    if (cc.n00[t] > 0.0)
      v += cc.n1_10[t] * cc.n10[t] / cc.n00[t] * c.did_dstar[t].value;
    c.did_s[t] = {v, c.did[t].defined};
  }
  return c;
}

struct EstimateResult {
  std::string estimator_name;
  double point = 0.0;
  DidComponents components;
  double n_s = 0.0;
  double n_s_star_hat = 0.0;  // only for the true-switcher estimator
  std::optional<double> se, ci_low, ci_high, p_value_ate_zero;
  std::vector<std::string> flags;
};

struct EstimatorOptions {
  bool clamp_lambda = false;               // clamp the early-switch share to [0,1]
  std::optional<double> trim_threshold;    // drop periods with |fwd + vs_treated| <= c
};

namespace detail {

inline void add_zero_convention_flags(const DidComponents& c, std::vector<std::string>& flags) {
  bool fired = false;
  for (int t = 2; t <= c.periods; ++t)
    if (!c.did[t].defined || !c.did_star[t].defined || !c.did_dstar[t].defined ||
        !c.did_tstar_prev[t].defined)
      fired = true;
  if (fired) flags.push_back("zero_convention_fired");
}

}  // namespace detail

// Uncorrected estimator: switching-mass weighted average of the per-period
// switch contrasts.
inline EstimateResult did(const Panel& panel) {
  require_valid(panel);
  const auto cc = cell_counts(panel);
  if (cc.n_s <= 0.0) throw EstimatorError("no observed switchers");
  const auto comps = compute_components(panel, cc);
  std::vector<double> terms;
  for (int t = 2; t <= panel.periods; ++t) terms.push_back(cc.n10[t] * comps.did[t].value);
  EstimateResult r;
  r.estimator_name = "did";
  r.point = pairwise_sum(terms) / cc.n_s;
  r.components = comps;
  r.n_s = cc.n_s;
  detail::add_zero_convention_flags(comps, r.flags);
  return r;
}

// Corrected estimator targeting the ATE of cells where treatment is recorded
// to begin.
inline EstimateResult did_s(const Panel& panel) {
  require_valid(panel);
  const auto cc = cell_counts(panel);
  if (cc.n_s <= 0.0) throw EstimatorError("no observed switchers");
  const auto comps = compute_components(panel, cc);
  std::vector<double> terms;
  for (int t = 2; t <= panel.periods; ++t) terms.push_back(comps.did_s[t].value);
  EstimateResult r;
  r.estimator_name = "did_s";
  r.point = pairwise_sum(terms) / cc.n_s;
  r.components = comps;
  r.n_s = cc.n_s;
  detail::add_zero_convention_flags(comps, r.flags);
  return r;
}

// Estimator targeting the ATE of units at the period they truly switch, which
// may precede the recorded switch. Each period blends the early-switch and
// on-time sums with the estimated early-switch share; the divisor re-weights
// switching cells accordingly.
inline EstimateResult did_s_star(const Panel& panel, const EstimatorOptions& opts = {}) {
  require_valid(panel);
  const auto cc = cell_counts(panel);
  if (cc.n_s <= 0.0) throw EstimatorError("no observed switchers");
  const auto comps = compute_components(panel, cc);
  const int T = panel.periods;

  EstimateResult r;
  r.estimator_name = "did_s_star";
  r.components = comps;
  r.n_s = cc.n_s;

  bool any_oor = false, any_clamped = false, any_trimmed = false;
  std::vector<double> num_terms, den_terms;
  for (int t = 2; t <= T; ++t) {
    const double fwd_prev = (t - 1 >= 2) ? comps.did_dstar[t - 1].value : 0.0;
    const double pre_sum = fwd_prev + comps.did_tstar_prev[t].value;
    if (opts.trim_threshold && std::abs(pre_sum) <= *opts.trim_threshold) {
      any_trimmed = true;
      continue;  // period excluded from both the sum and the divisor
    }
    double lam = comps.lambda_prev[t];
    if (comps.lambda_oor[t]) any_oor = true;
    if (opts.clamp_lambda && (lam < 0.0 || lam > 1.0)) {
      lam = std::min(1.0, std::max(0.0, lam));
      any_clamped = true;
    }
    num_terms.push_back(lam * comps.did_sdagger_prev[t].value +
                        (1.0 - lam) * comps.did_s[t].value);

    std::vector<double> w_terms;
    for (const auto& g : panel.groups)
      if (g.d[t - 1] == 1 && g.d[t - 2] == 0)
        w_terms.push_back(lam * static_cast<double>(g.n[t - 2]) +
                          (1.0 - lam) * static_cast<double>(g.n[t - 1]));
    den_terms.push_back(pairwise_sum(w_terms));
  }
  const double n_star = pairwise_sum(den_terms);
  if (n_star <= 0.0) throw EstimatorError("degenerate switcher mass");
  r.point = pairwise_sum(num_terms) / n_star;
  r.n_s_star_hat = n_star;
  if (any_oor) r.flags.push_back("lambda_out_of_range");
  if (any_clamped) r.flags.push_back("lambda_clamped");
  if (any_trimmed) r.flags.push_back("trimming_applied");
  detail::add_zero_convention_flags(comps, r.flags);
  return r;
}

// ---------------------------------------------------------------------------
// Two-way fixed effects benchmark
// ---------------------------------------------------------------------------

// Cell-size weighted least squares of y on group indicators, period indicators
// and the observed treatment status. Small panels use an exact dense solve of
// the dummy regression; larger ones use alternating weighted demeaning of y
// and d followed by the ratio of weighted cross-products.
inline double twfe(const Panel& panel) {
  require_valid(panel);
  const int T = panel.periods;
  const auto G = static_cast<int>(panel.groups.size());
  const long cells = static_cast<long>(G) * T;

  if (cells <= 20000 && G + T <= 1600) {
    // Exact dummy solve: intercept, G-1 group dummies, T-1 time dummies, d.
    const int k = 1 + (G - 1) + (T - 1) + 1;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(k);
    for (int gi = 0; gi < G; ++gi) {
      const auto& g = panel.groups[gi];
      for (int t = 1; t <= T; ++t) {
        row.setZero();
        row[0] = 1.0;
        if (gi >= 1) row[gi] = 1.0;  // group dummy occupies column gi
        if (t >= 2) row[G - 1 + t - 1] = 1.0;
        row[k - 1] = static_cast<double>(g.d[t - 1]);
        const auto w = static_cast<double>(g.n[t - 1]);
        xtx.selfadjointView<Eigen::Lower>().rankUpdate(row, w);
        xty += w * g.y[t - 1] * row;
      }
    }
    xtx = xtx.selfadjointView<Eigen::Lower>();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    if (ldlt.info() != Eigen::Success) throw EstimatorError("no identifying variation");
    const Eigen::VectorXd beta = ldlt.solve(xty);
    // Residual variance of d after partialling out the fixed effects; if the
    // treatment indicator lies in their span the coefficient is meaningless.
    Eigen::VectorXd ed = ldlt.solve(Eigen::VectorXd::Unit(k, k - 1));
    const double dd = xtx(k - 1, k - 1);
    double w_scale = 0.0, d_resid_ss = 0.0;
    {
      // d'Wd - d'WX (X'WX)^-1 X'Wd over the FE-only columns, computed from the
      // full normal equations via the Schur complement: 1 / [(xtx^-1)_{dd}].
      const double inv_dd = ed[k - 1];
      if (!(inv_dd > 0.0) || !std::isfinite(inv_dd))
        throw EstimatorError("no identifying variation");
      d_resid_ss = 1.0 / inv_dd;
      w_scale = dd > 0.0 ? dd : 1.0;
    }
    if (d_resid_ss <= 1e-10 * std::max(1.0, w_scale))
      throw EstimatorError("no identifying variation");
    return beta[k - 1];
  }

  // Alternating weighted demeaning, iterated to convergence.
  auto demean = [&](std::vector<std::vector<double>>& x) {
    for (int iter = 0; iter < 20000; ++iter) {
      double shift = 0.0;
      for (int gi = 0; gi < G; ++gi) {
        const auto& g = panel.groups[gi];
        double sw = 0.0, sx = 0.0;
        for (int t = 0; t < T; ++t) {
          const auto w = static_cast<double>(g.n[t]);
          sw += w;
          sx += w * x[gi][t];
        }
        const double m = sx / sw;
        shift = std::max(shift, std::abs(m));
        for (int t = 0; t < T; ++t) x[gi][t] -= m;
      }
      for (int t = 0; t < T; ++t) {
        double sw = 0.0, sx = 0.0;
        for (int gi = 0; gi < G; ++gi) {
          const auto w = static_cast<double>(panel.groups[gi].n[t]);
          sw += w;
          sx += w * x[gi][t];
        }
        const double m = sx / sw;
        shift = std::max(shift, std::abs(m));
        for (int gi = 0; gi < G; ++gi) x[gi][t] -= m;
      }
      if (shift < 1e-13) break;
    }
  };
  std::vector<std::vector<double>> yd(G, std::vector<double>(T));
  std::vector<std::vector<double>> dd(G, std::vector<double>(T));
  for (int gi = 0; gi < G; ++gi)
    for (int t = 0; t < T; ++t) {
      yd[gi][t] = panel.groups[gi].y[t];
      dd[gi][t] = static_cast<double>(panel.groups[gi].d[t]);
    }
  demean(yd);
  demean(dd);
  std::vector<double> num, den;
  for (int gi = 0; gi < G; ++gi)
    for (int t = 0; t < T; ++t) {
      const auto w = static_cast<double>(panel.groups[gi].n[t]);
      num.push_back(w * dd[gi][t] * yd[gi][t]);
      den.push_back(w * dd[gi][t] * dd[gi][t]);
    }
  const double dvar = pairwise_sum(den);
  if (dvar <= 1e-10) throw EstimatorError("no identifying variation");
  return pairwise_sum(num) / dvar;
}

}  // namespace stagdid
