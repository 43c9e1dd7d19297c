#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stagdid/common.hpp"
#include "stagdid/estimators.hpp"
#include "stagdid/inference.hpp"
#include "stagdid/panel.hpp"
#include "stagdid/parallel.hpp"
#include "stagdid/rng.hpp"

namespace stagdid {

// Two-step moment-equality specification tests.
//
// tau_00(t,l) compares changes between two pre-switch periods (t-2 minus t-l)
// of groups switching at t against comparison groups: nonzero values indicate
// a trend violation in periods known to be clean. tau_10(t,l) anchors the
// comparison at t-1, the one period that late coding or anticipation can
// contaminate, so it reacts to both trend violations and miscoding. Index
// pairs run over l in {2..T-1}, t in {l+1..T}; the tau_00 entries with l = 2
// are identically zero and kept only so both tests share one index set.

enum class TauKind { kMisclassification, kPreTrend };  // tau_10 / tau_00
enum class StatKind { kSum, kMax };

inline const char* tau_kind_name(TauKind k) {
  return k == TauKind::kMisclassification ? "mc" : "pt";
}
inline const char* stat_kind_name(StatKind k) { return k == StatKind::kSum ? "sum" : "max"; }

namespace detail {

inline void check_tau_index(int T, int t, int l) {
  if (l < 2 || l > T - 1 || t < l + 1 || t > T)
    throw EstimatorError("tau index (t=" + std::to_string(t) + ", l=" + std::to_string(l) +
                         ") outside the admissible set");
}

inline Component tau_impl(const Panel& panel, int t, int l, int anchor) {
  auto sw = [&](const GroupSeries& g) { return g.d[t - 1] == 1 && g.d[t - 2] == 0; };
  auto cmp = [&](const GroupSeries& g) { return g.d[t - 1] == 0 && g.d[t - 2] == 0; };
  return contrast(weighted_mean_diff(panel, sw, t, anchor, t - l),
                  weighted_mean_diff(panel, cmp, t, anchor, t - l));
}

}  // namespace detail

inline Component tau_10(const Panel& panel, int t, int l) {
  detail::check_tau_index(panel.periods, t, l);
  return detail::tau_impl(panel, t, l, t - 1);
}

inline Component tau_00(const Panel& panel, int t, int l) {
  detail::check_tau_index(panel.periods, t, l);
  return detail::tau_impl(panel, t, l, t - 2);
}

struct TauWindow {
  int min_lag = 2;  // earliest lag kappa; raise it to skip possibly-contaminated lags
  int max_lag = 0;  // 0 means T-1
  bool drop_degenerate_pt = false;  // exclude the identically-zero l=2 pre-trend entries
};

struct TauEntry {
  int t = 0, l = 0;
  double value = 0.0;
  bool defined = false;
};

struct TauGrid {
  TauKind kind = TauKind::kMisclassification;
  int g = 0;          // group count, enters the statistics through sqrt(G)
  int periods = 0;
  std::vector<TauEntry> entries;  // ordered by (l, t)
};

inline TauGrid tau_grid(const Panel& panel, TauKind kind, const TauWindow& window = {}) {
  require_valid(panel);
  const int T = panel.periods;
  if (T < 3) throw EstimatorError("tau grid needs at least 3 periods");
  const int lmax = window.max_lag > 0 ? std::min(window.max_lag, T - 1) : T - 1;
  TauGrid grid;
  grid.kind = kind;
  grid.g = static_cast<int>(panel.groups.size());
  grid.periods = T;
  for (int l = std::max(2, window.min_lag); l <= lmax; ++l) {
    if (kind == TauKind::kPreTrend && window.drop_degenerate_pt && l == 2) continue;
    for (int t = l + 1; t <= T; ++t) {
      const Component c = kind == TauKind::kMisclassification ? tau_10(panel, t, l)
                                                              : tau_00(panel, t, l);
      grid.entries.push_back({t, l, c.value, c.defined});
    }
  }
  if (grid.entries.empty()) throw EstimatorError("empty tau index set");
  return grid;
}

// Sum statistic: sum over defined entries of (sqrt(G) tau)^2. Undefined
// entries do not contribute.
inline double t_sum(const TauGrid& grid) {
  std::vector<double> terms;
  for (const auto& e : grid.entries)
    if (e.defined) terms.push_back(e.value * e.value);
  return static_cast<double>(grid.g) * pairwise_sum(terms);
}

// Max statistic: max over defined entries of |sqrt(G) tau|.
inline double t_max(const TauGrid& grid) {
  double m = 0.0;
  for (const auto& e : grid.entries)
    if (e.defined) m = std::max(m, std::abs(e.value));
  return std::sqrt(static_cast<double>(grid.g)) * m;
}

inline double tau_statistic(const TauGrid& grid, StatKind stat) {
  return stat == StatKind::kSum ? t_sum(grid) : t_max(grid);
}

// Recentered statistic for one resample: entries defined in the original grid
// contribute (tau_b - tau); entries the resample cannot form contribute
// nothing.
inline double recentered_statistic(const TauGrid& original, const Panel& resampled,
                                   StatKind stat) {
  const auto g = static_cast<double>(original.g);
  std::vector<double> sq;
  double mx = 0.0;
  for (const auto& e : original.entries) {
    if (!e.defined) continue;
    const Component cb = original.kind == TauKind::kMisclassification
                             ? tau_10(resampled, e.t, e.l)
                             : tau_00(resampled, e.t, e.l);
    if (!cb.defined) continue;
    const double d = cb.value - e.value;
    sq.push_back(d * d);
    mx = std::max(mx, std::abs(d));
  }
  return stat == StatKind::kSum ? g * pairwise_sum(sq) : std::sqrt(g) * mx;
}

struct TestOutcome {
  TauKind kind = TauKind::kMisclassification;
  StatKind statistic_kind = StatKind::kSum;
  double value = 0.0;
  double critical_value = 0.0;
  double level = 0.0;
  bool reject = false;
  int b_used = 0;
  double pvalue = 1.0;  // share of recentered draws >= value
};

// Bootstrap moment-equality test: the critical value is the (1 - level)
// quantile of the recentered statistics over group resamples.
inline TestOutcome bootstrap_test(const Panel& panel, TauKind kind, StatKind stat,
                                  double level, const BootstrapConfig& cfg,
                                  const TauWindow& window = {}) {
  cfg.check();
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("test level must lie in (0,1)");
  const TauGrid grid = tau_grid(panel, kind, window);

  constexpr std::uint64_t kDrawTag = 0x7e57;
  std::vector<double> draws(static_cast<std::size_t>(cfg.b));
  parallel_for(static_cast<std::size_t>(cfg.b), cfg.threads, [&](std::size_t j) {
    auto rng = make_engine(derive_seed(cfg.seed, kDrawTag, static_cast<std::uint64_t>(kind), j));
    const Panel re = resample_groups(panel, rng);
    draws[j] = recentered_statistic(grid, re, stat);
  });

  TestOutcome out;
  out.kind = kind;
  out.statistic_kind = stat;
  out.value = tau_statistic(grid, stat);
  out.level = level;
  out.b_used = cfg.b;
  out.critical_value = quantile_higher(draws, 1.0 - level);
  out.reject = out.value > out.critical_value;
  std::size_t ge = 0;
  for (double d : draws)
    if (d >= out.value) ++ge;
  out.pvalue = static_cast<double>(ge) / static_cast<double>(draws.size());
  return out;
}

enum class VerdictOutcome { kTrendViolation, kCleanNoMiscoding, kCleanWithMiscoding };

inline const char* verdict_name(VerdictOutcome v) {
  switch (v) {
    case VerdictOutcome::kTrendViolation: return "TV";
    case VerdictOutcome::kCleanNoMiscoding: return "PTN";
    case VerdictOutcome::kCleanWithMiscoding: return "PTM";
  }
  return "?";
}

struct Verdict {
  VerdictOutcome outcome = VerdictOutcome::kCleanNoMiscoding;
  TestOutcome pt_test;
  std::optional<TestOutcome> mc_test;
  double alpha = 0.0, gamma = 0.0;
};

// Two-step decision rule. Step 1 tests the pre-trend moments at level alpha;
// rejection ends the procedure (trends are violated, estimation is off the
// table). Otherwise step 2 tests the contaminated-period moments at level
// gamma: rejection calls for the corrected estimators, acceptance for the
// standard one.
inline Verdict decision_rule(const Panel& panel, double alpha, double gamma,
                             const BootstrapConfig& cfg, const TauWindow& window = {},
                             StatKind stat = StatKind::kSum) {
  Verdict v;
  v.alpha = alpha;
  v.gamma = gamma;
  BootstrapConfig pt_cfg = cfg;
  pt_cfg.seed = derive_seed(cfg.seed, 0x0f1);
  v.pt_test = bootstrap_test(panel, TauKind::kPreTrend, stat, alpha, pt_cfg, window);
  if (v.pt_test.reject) {
    v.outcome = VerdictOutcome::kTrendViolation;
    return v;
  }
  BootstrapConfig mc_cfg = cfg;
  mc_cfg.seed = derive_seed(cfg.seed, 0x0f2);
  v.mc_test = bootstrap_test(panel, TauKind::kMisclassification, stat, gamma, mc_cfg, window);
  v.outcome = v.mc_test->reject ? VerdictOutcome::kCleanWithMiscoding
                                : VerdictOutcome::kCleanNoMiscoding;
  return v;
}

}  // namespace stagdid
