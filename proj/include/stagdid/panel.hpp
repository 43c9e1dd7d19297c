#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stagdid/common.hpp"

namespace stagdid {

// Panel data model. A group's record holds its full time series of cell sizes,
// outcome means and the observed binary treatment status. Treatment must be
// absorbing: once a group is observed treated it stays treated. The latent
// vectors (d_true, s_true, effect) are populated only by the simulator and by
// hand-built test fixtures; they are empty on panels read from disk unless the
// file carries the optional columns.
//
// Periods are 1-based throughout, matching the on-disk format.
struct GroupSeries {
  std::string id;
  std::vector<std::int64_t> n;  // cell sizes, > 0
  std::vector<double> y;        // outcome means
  std::vector<std::uint8_t> d;  // observed treatment, 0/1, nondecreasing

  // Latent truth, simulation only. Empty when absent.
  std::vector<double> d_true;  // fraction of truly treated units per cell
  std::vector<double> s_true;  // fraction of units truly switching this period
  std::vector<double> effect;  // per-cell treatment effect Y(1)-Y(0)

  // First period with d == 1 (1-based), or 0 for a never-treated group.
  int first_treated() const {
    for (std::size_t t = 0; t < d.size(); ++t)
      if (d[t] != 0) return static_cast<int>(t) + 1;
    return 0;
  }
};

struct Panel {
  int periods = 0;  // T
  std::vector<GroupSeries> groups;

  bool has_truth() const {
    for (const auto& g : groups)
      if (g.d_true.empty() || g.s_true.empty() || g.effect.empty()) return false;
    return !groups.empty();
  }
};

struct ValidationIssue {
  std::string code;     // stable machine-readable tag
  std::string message;  // human-readable detail
  std::string group_id;
  int period = 0;  // 0 when not period-specific
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;
  // group id -> first observed treatment period, 0 for never treated
  std::map<std::string, int> cohort_table;

  bool ok() const { return errors.empty(); }
};

// Checks the hard requirements (positive cell sizes, absorbing treatment,
// consistent lengths, unique ids, at least two groups and two periods) and the
// soft ones (a comparison group for every observed switch; no observed switch
// between the first two periods). Hard violations land in `errors`, soft ones
// in `warnings`.
inline ValidationReport validate(const Panel& panel) {
  ValidationReport rep;
  auto error = [&](std::string code, std::string msg, std::string gid = "", int t = 0) {
    rep.errors.push_back({std::move(code), std::move(msg), std::move(gid), t});
  };
  auto warn = [&](std::string code, std::string msg, std::string gid = "", int t = 0) {
    rep.warnings.push_back({std::move(code), std::move(msg), std::move(gid), t});
  };

  const int T = panel.periods;
  if (T < 2) error("too_few_periods", "panel needs at least 2 periods");
  if (panel.groups.size() < 2) error("too_few_groups", "panel needs at least 2 groups");

  std::map<std::string, int> seen;
  for (const auto& g : panel.groups) {
    if (++seen[g.id] == 2)
      error("duplicate_group_id", "group id '" + g.id + "' appears more than once", g.id);

    const auto ts = static_cast<std::size_t>(T);
    if (g.n.size() != ts || g.y.size() != ts || g.d.size() != ts) {
      error("length_mismatch", "group '" + g.id + "' series length differs from T", g.id);
      continue;
    }
    for (auto& latent : {g.d_true, g.s_true, g.effect})
      if (!latent.empty() && latent.size() != ts)
        error("length_mismatch", "group '" + g.id + "' latent series length differs from T", g.id);

    for (int t = 1; t <= T; ++t) {
      if (g.n[t - 1] <= 0)
        error("nonpositive_cell", "group '" + g.id + "' has cell size <= 0", g.id, t);
      if (g.d[t - 1] != 0 && g.d[t - 1] != 1)
        error("non_binary_treatment", "group '" + g.id + "' has d outside {0,1}", g.id, t);
      if (t >= 2 && g.d[t - 1] < g.d[t - 2])
        error("non_monotone_treatment",
              "group '" + g.id + "' switches out of treatment (treatment must be absorbing)",
              g.id, t);
    }
    rep.cohort_table[g.id] = g.first_treated();

    if (T >= 2 && g.d.size() == ts && g.d[1] > g.d[0])
      warn("initial_period_switch",
           "group '" + g.id + "' is observed switching between periods 1 and 2", g.id, 2);
  }

  if (!rep.errors.empty()) return rep;

  // Comparison-group existence: every observed switch at t needs some other
  // group untreated at both t-1 and t.
  for (int t = 2; t <= T; ++t) {
    bool has_comparison = false;
    for (const auto& g : panel.groups)
      if (g.d[t - 1] == 0 && g.d[t - 2] == 0) {
        has_comparison = true;
        break;
      }
    if (has_comparison) continue;
    for (const auto& g : panel.groups)
      if (g.d[t - 1] == 1 && g.d[t - 2] == 0)
        warn("no_comparison_group",
             "group '" + g.id + "' switches at t=" + std::to_string(t) +
                 " but no comparison group exists at that period",
             g.id, t);
  }
  return rep;
}

// Throws PanelError when the panel fails hard validation. Estimator entry
// points call this; it is a linear scan and cheap next to any estimation.
inline void require_valid(const Panel& panel) {
  const auto rep = validate(panel);
  if (!rep.ok()) throw PanelError("invalid panel: " + rep.errors.front().message);
}

// Aggregate cell counts entering every estimator. Indexed by 1-based period;
// index 0 is unused. Conventions:
//   n10[t]    observations in cells switching into treatment at t      (t >= 2)
//   n00[t]    observations in comparison cells at t                    (t >= 2)
//   n1_10[t]  period-t observations of groups that switch at t+1       (0 at T)
//   n1_00[t]  period-t observations of groups still untreated at t+1   (0 at T)
//   n1_11[t]  period-t observations of groups treated at both t, t+1   (0 at T)
struct CellCounts {
  int periods = 0;
  std::vector<double> n10, n00, n1_10, n1_00, n1_11;
  double n_s = 0.0;  // total switching-cell observations, sum over t of n10[t]
};

inline CellCounts cell_counts(const Panel& panel) {
  const int T = panel.periods;
  CellCounts cc;
  cc.periods = T;
  cc.n10.assign(T + 1, 0.0);
  cc.n00.assign(T + 1, 0.0);
  cc.n1_10.assign(T + 1, 0.0);
  cc.n1_00.assign(T + 1, 0.0);
  cc.n1_11.assign(T + 1, 0.0);
  for (const auto& g : panel.groups) {
    for (int t = 2; t <= T; ++t) {
      const bool d1 = g.d[t - 1] != 0;
      const bool d0 = g.d[t - 2] != 0;
      const auto w = static_cast<double>(g.n[t - 1]);
      if (d1 && !d0) cc.n10[t] += w;
      if (!d1 && !d0) cc.n00[t] += w;
      // prospective counts carry the period-(t-1) cell size
      const auto w_prev = static_cast<double>(g.n[t - 2]);
      if (d1 && !d0) cc.n1_10[t - 1] += w_prev;
      if (!d1 && !d0) cc.n1_00[t - 1] += w_prev;
      if (d1 && d0) cc.n1_11[t - 1] += w_prev;
    }
  }
  std::vector<double> per_t(cc.n10.begin() + 1, cc.n10.end());
  cc.n_s = pairwise_sum(per_t);
  return cc;
}

enum class ComparisonKind { kNeverTreated, kNotYetTreated };

// Sub-panel of the groups observed switching exactly at cohort_t plus the
// selected kind of comparison groups. The time axis is unchanged.
inline Panel restrict_to_cohort(const Panel& panel, int cohort_t, ComparisonKind comparison) {
  if (cohort_t < 2 || cohort_t > panel.periods)
    throw PanelError("cohort period outside {2..T}");
  Panel out;
  out.periods = panel.periods;
  std::size_t n_cohort = 0, n_comparison = 0;
  for (const auto& g : panel.groups) {
    const int ft = g.first_treated();
    if (ft == cohort_t) {
      out.groups.push_back(g);
      ++n_cohort;
    } else if (comparison == ComparisonKind::kNeverTreated ? ft == 0
                                                           : (ft == 0 || ft > cohort_t)) {
      out.groups.push_back(g);
      ++n_comparison;
    }
  }
  if (n_cohort == 0) throw PanelError("no groups in cohort");
  if (n_comparison == 0) throw PanelError("no comparison groups");
  return out;
}

// Drops groups observed switching between periods 1 and 2; offered as the
// remedy for initial-period switches.
inline Panel drop_initial_switchers(const Panel& panel) {
  Panel out;
  out.periods = panel.periods;
  for (const auto& g : panel.groups)
    if (!(g.d.size() >= 2 && g.d[1] > g.d[0])) out.groups.push_back(g);
  return out;
}

}  // namespace stagdid
