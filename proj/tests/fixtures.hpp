#pragma once

// Shared hand-built panels for the unit and acceptance suites.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stagdid/panel.hpp"
#include "stagdid/rng.hpp"

namespace fixtures {

using stagdid::GroupSeries;
using stagdid::Panel;

inline GroupSeries group(std::string id, std::vector<double> y, std::vector<std::uint8_t> d,
                         std::vector<std::int64_t> n = {}) {
  GroupSeries g;
  g.id = std::move(id);
  g.y = std::move(y);
  g.d = std::move(d);
  g.n = n.empty() ? std::vector<std::int64_t>(g.y.size(), 1) : std::move(n);
  return g;
}

// Three groups over three periods, all cells of size one. Used for the
// hand-evaluated component values.
inline Panel f1() {
  Panel p;
  p.periods = 3;
  p.groups = {
      group("A", {0, 1, 5}, {0, 0, 1}),
      group("B", {0, 4, 5}, {0, 1, 1}),
      group("C", {0, 1, 2}, {0, 0, 0}),
  };
  return p;
}

// Noiseless panel: common trend y0(t) = t, homogeneous effect `delta` from the
// true adoption period onward. `late` marks groups whose recorded switch lags
// the true one by a period. Latent truth is attached.
struct AdoptionPlan {
  int true_period = 0;  // 0 = never treated
  bool late = false;
  std::int64_t cell = 1;
};

inline Panel noiseless_panel(int T, double delta, const std::vector<AdoptionPlan>& plans,
                             std::vector<double> effect_path = {}) {
  if (effect_path.empty()) effect_path.assign(T + 1, delta);
  Panel p;
  p.periods = T;
  int idx = 0;
  for (const auto& plan : plans) {
    GroupSeries g;
    g.id = "g" + std::to_string(++idx);
    const int s = plan.true_period;
    const int s_obs = s > 0 && plan.late ? s + 1 : s;
    for (int t = 1; t <= T; ++t) {
      const bool treated = s > 0 && t >= s;
      g.n.push_back(plan.cell);
      g.y.push_back(static_cast<double>(t) + (treated ? effect_path[t] : 0.0));
      g.d.push_back(static_cast<std::uint8_t>(s > 0 && t >= s_obs ? 1 : 0));
      g.d_true.push_back(treated ? 1.0 : 0.0);
      g.s_true.push_back(s > 0 && t == s ? 1.0 : 0.0);
      g.effect.push_back(effect_path[t]);
    }
    p.groups.push_back(std::move(g));
  }
  return p;
}

// Six groups over five periods, half of each switching cohort recorded one
// period late; the exactness fixture for the corrected estimator.
inline Panel late_coding_panel(double delta = 2.0) {
  return noiseless_panel(5, delta,
                         {
                             {3, false}, {3, true},  // cohort with true switch at 3
                             {4, false}, {4, true},  // cohort with true switch at 4
                             {0, false}, {0, false}, // never treated
                         });
}

// Random valid staggered panel: at least one never-treated group, at least one
// switcher, optional variation in cell sizes.
inline Panel random_panel(std::uint64_t seed, int G = 12, int T = 6, bool vary_cells = false) {
  auto rng = stagdid::make_engine(stagdid::derive_seed(seed, 0xf1c));
  std::uniform_int_distribution<int> adopt(2, T);
  std::uniform_int_distribution<std::int64_t> cell(1, 5);
  std::normal_distribution<double> noise(0.0, 1.0);
  Panel p;
  p.periods = T;
  for (int i = 0; i < G; ++i) {
    GroupSeries g;
    g.id = "g" + std::to_string(i + 1);
    const bool never = i < 2;  // keep comparisons available everywhere
    const int s = never ? 0 : adopt(rng);
    const std::int64_t base_cell = vary_cells ? cell(rng) : 1;
    for (int t = 1; t <= T; ++t) {
      const std::int64_t c = vary_cells && t % 2 == 0 ? base_cell + 1 : base_cell;
      g.n.push_back(c);
      g.y.push_back(0.5 * t + noise(rng));
      g.d.push_back(static_cast<std::uint8_t>(s > 0 && t >= s ? 1 : 0));
    }
    p.groups.push_back(std::move(g));
  }
  return p;
}

// Four groups over five periods with an anticipation bump of size `a` in the
// period before the recorded switch of the cohort adopting at t = 4.
inline Panel anticipation_bump_panel(double a) {
  Panel p;
  p.periods = 5;
  p.groups = {
      group("W", {1, 2, 3 + a, 4 + 3, 5 + 3}, {0, 0, 0, 1, 1}),  // bump at 3, effect 3 from 4
      group("X", {1, 2, 3, 4, 5 + 3}, {0, 0, 0, 0, 1}),          // adopts at 5, no bump
      group("C1", {1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}),
      group("C2", {1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}),
  };
  return p;
}

}  // namespace fixtures
