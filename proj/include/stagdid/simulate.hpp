#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stagdid/common.hpp"
#include "stagdid/estimators.hpp"
#include "stagdid/inference.hpp"
#include "stagdid/panel.hpp"
#include "stagdid/parallel.hpp"
#include "stagdid/rng.hpp"
#include "stagdid/spectest.hpp"

namespace stagdid {

// Synthetic staggered-adoption panels. Group-level outcomes, one unit per
// cell:
//
//   y[g,t] = intercept + time_slope*t + group_slope*g + effect_t*treated + noise
//
// True adoption periods are drawn uniformly on {2..T} for treated groups and
// assigned in sorted order, so the group index rises with the adoption period.
// The trend violation adds t*g/G, which is a real pre-trend break only
// because of that ordering; with timing independent of the index its
// between-group differences would average out and no test could see it.
// Late coding delays the recorded switch of affected groups by one period;
// groups truly adopting in the last period stay correctly coded, since their
// delayed switch would fall outside the panel.
enum class TeMode { kConstant, kTimeVarying };

struct DgpSpec {
  int g = 100;
  int t = 15;
  double never_treated_share = 0.05;
  double intercept = 10.0;
  double time_slope = -0.4;
  double group_slope = 0.1;
  TeMode te_mode = TeMode::kConstant;
  double te_mean = 4.0;
  double te_sd = 1.0;
  double ramp_lo = 0.2, ramp_hi = 1.8;  // endpoints of the time-varying multiplier
  double noise_sd = 1.0;
  double misclass_prob = 0.5;  // share of switching groups coded one period late
  bool last_period_exempt = true;
  bool trend_violation = false;
  bool per_group_te = false;  // draw the effect scale per group instead of per replication
  std::uint64_t seed = 0;

  void check() const {
    if (g < 2 || t < 3) throw ConfigError("DGP needs g >= 2 and t >= 3");
    for (double p : {never_treated_share, misclass_prob})
      if (p < 0.0 || p > 1.0) throw ConfigError("shares must lie in [0,1]");
  }
};

// One generated panel plus the quantities the Monte Carlo benchmark needs.
struct SimDraw {
  Panel panel;
  double te_scale = 0.0;         // effect scale of this replication (mean over groups
                                 // when drawn per group)
  std::vector<double> te_path;   // effect at each period, 1-based, index 0 unused
};

inline double benchmark_ate(const SimDraw& draw, TeMode mode) {
  if (mode == TeMode::kConstant) return draw.te_scale;
  std::vector<double> tail(draw.te_path.begin() + 2, draw.te_path.end());
  return mean(tail);
}

namespace detail {

// Distinct stream per purpose so scenario toggles (late coding on/off, trend
// on/off) never shift the draws behind the latent panel: two scenarios with
// the same seed share outcomes and true adoption periods exactly.
enum : std::uint64_t {
  kStreamNever = 1,
  kStreamTiming = 2,
  kStreamTe = 3,
  kStreamMisclass = 4,
  kStreamNoise = 5,
  kStreamWarp = 6,
};

}  // namespace detail

inline SimDraw gen_panel(const DgpSpec& spec, std::uint64_t replicate_index) {
  spec.check();
  const int G = spec.g, T = spec.t;
  const std::uint64_t base = derive_seed(spec.seed, 0x517, replicate_index);

  // Never-treated set: the first n_never entries of a seeded shuffle.
  std::vector<int> order(G);
  std::iota(order.begin(), order.end(), 0);
  {
    auto rng = make_engine(derive_seed(base, detail::kStreamNever));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const int n_never = static_cast<int>(std::lround(spec.never_treated_share * G));
  std::vector<std::uint8_t> never(G, 0);
  for (int i = 0; i < n_never && i < G; ++i) never[order[i]] = 1;

  // True adoption periods, uniform on {2..T}, assigned to treated groups in
  // ascending group order after sorting.
  std::vector<int> adoption(G, 0);  // 0 = never treated
  {
    auto rng = make_engine(derive_seed(base, detail::kStreamTiming));
    std::uniform_int_distribution<int> uni(2, T);
    std::vector<int> draws;
    draws.reserve(G);
    for (int g = 0; g < G; ++g) draws.push_back(uni(rng));  // fixed consumption
    std::vector<int> treated_draws;
    for (int g = 0; g < G; ++g)
      if (!never[g]) treated_draws.push_back(draws[g]);
    std::sort(treated_draws.begin(), treated_draws.end());
    std::size_t k = 0;
    for (int g = 0; g < G; ++g)
      if (!never[g]) adoption[g] = treated_draws[k++];
  }

  // Effect scale and path.
  std::vector<double> scale(G, 0.0);
  double scale_mean = 0.0;
  {
    auto rng = make_engine(derive_seed(base, detail::kStreamTe));
    std::normal_distribution<double> dist(spec.te_mean, spec.te_sd);
    const double shared = dist(rng);
    for (int g = 0; g < G; ++g) scale[g] = spec.per_group_te ? dist(rng) : shared;
    scale_mean = spec.per_group_te ? mean(scale) : shared;
  }
  auto ramp = [&](int t) {
    if (spec.te_mode == TeMode::kConstant) return 1.0;
    return spec.ramp_lo + (spec.ramp_hi - spec.ramp_lo) * static_cast<double>(t - 1) /
                              static_cast<double>(T - 1);
  };

  // Late-coding lottery, drawn for every group regardless of eligibility to
  // keep stream positions fixed across scenarios.
  std::vector<std::uint8_t> late(G, 0);
  {
    auto rng = make_engine(derive_seed(base, detail::kStreamMisclass));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int g = 0; g < G; ++g) {
      const bool hit = u(rng) < spec.misclass_prob;
      const bool eligible =
          !never[g] && adoption[g] >= 2 && !(spec.last_period_exempt && adoption[g] == T);
      late[g] = (hit && eligible) ? 1 : 0;
    }
  }

  SimDraw out;
  out.te_scale = scale_mean;
  out.te_path.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) out.te_path[t] = scale_mean * ramp(t);

  Panel& panel = out.panel;
  panel.periods = T;
  panel.groups.resize(G);
  auto noise_rng = make_engine(derive_seed(base, detail::kStreamNoise));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int g = 0; g < G; ++g) {
    GroupSeries& gs = panel.groups[g];
    gs.id = "g" + std::to_string(g + 1);
    gs.n.assign(T, 1);
    gs.y.resize(T);
    gs.d.resize(T);
    gs.d_true.resize(T);
    gs.s_true.resize(T);
    gs.effect.resize(T);
    const int s_true = adoption[g];               // 0 when never treated
    const int s_obs = s_true + (late[g] ? 1 : 0);  // recorded adoption
    const double gid = static_cast<double>(g + 1);
    for (int t = 1; t <= T; ++t) {
      const double eps = noise(noise_rng);  // drawn for every cell, every scenario
      const bool treated = s_true > 0 && t >= s_true;
      const double eff = scale[g] * ramp(t);
      double y = spec.intercept + spec.time_slope * t + spec.group_slope * gid +
                 (treated ? eff : 0.0) + spec.noise_sd * eps;
      if (spec.trend_violation) y += static_cast<double>(t) * gid / static_cast<double>(G);
      gs.y[t - 1] = y;
      gs.d[t - 1] = static_cast<std::uint8_t>(s_true > 0 && t >= s_obs ? 1 : 0);
      gs.d_true[t - 1] = treated ? 1.0 : 0.0;
      gs.s_true[t - 1] = (s_true > 0 && t == s_true) ? 1.0 : 0.0;
      gs.effect[t - 1] = eff;
    }
  }
  return out;
}

// Finite-sample estimand targets computed from the latent truth by direct
// summation; the Monte Carlo benchmark for hand-built fixtures.
struct EstimandOracle {
  double delta_s = 0.0;       // ATE of cells where treatment is recorded to begin
  double delta_s_star = 0.0;  // ATE of units at their true switch period
};

inline EstimandOracle true_estimand_oracle(const Panel& panel) {
  if (!panel.has_truth())
    throw EstimatorError("estimand oracle needs d_true, s_true and effect");
  std::vector<double> s_num, s_den, ss_num, ss_den;
  for (const auto& g : panel.groups) {
    for (int t = 2; t <= panel.periods; ++t) {
      const auto w = static_cast<double>(g.n[t - 1]);
      if (g.d[t - 1] == 1 && g.d[t - 2] == 0) {
        s_num.push_back(w * g.effect[t - 1]);
        s_den.push_back(w);
      }
      const double sw = g.s_true[t - 1];
      if (sw > 0.0) {
        ss_num.push_back(w * sw * g.effect[t - 1]);
        ss_den.push_back(w * sw);
      }
    }
  }
  EstimandOracle o;
  const double sd = pairwise_sum(s_den);
  if (sd <= 0.0) throw EstimatorError("no recorded switching cells");
  o.delta_s = pairwise_sum(s_num) / sd;
  const double ssd = pairwise_sum(ss_den);
  if (ssd <= 0.0) throw EstimatorError("no true switchers");
  o.delta_s_star = pairwise_sum(ss_num) / ssd;
  return o;
}

// ---------------------------------------------------------------------------
// Monte Carlo drivers
// ---------------------------------------------------------------------------

struct EstimatorMcRow {
  std::string estimator;
  double mean_bias = 0.0;
  double rmse = 0.0;
  int reps_used = 0;
  int failures = 0;
};

struct TestMcRow {
  std::string scenario;   // PTM / TVM / PTN / TVN
  std::string statistic;  // sum_pt / max_pt / sum_mc / max_mc
  double rejection_rate = 0.0;
  int reps = 0;
};

struct McSummary {
  int g = 0, t = 0;
  int replications = 0;
  std::uint64_t seed = 0;
  std::string te_mode;
  std::string benchmark;  // which target the bias is measured against
  std::vector<EstimatorMcRow> estimators;
  std::vector<TestMcRow> tests;
};

struct McOptions {
  int threads = 1;
  EstimatorOptions estimator;  // raw early-switch share by default
};

inline McSummary run_mc_estimators(const DgpSpec& spec, int reps, const McOptions& opts = {}) {
  if (reps < 1) throw ConfigError("replications must be >= 1");
  struct Rep {
    double err[3] = {0, 0, 0};
    bool ok[3] = {false, false, false};
  };
  std::vector<Rep> rows(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), opts.threads, [&](std::size_t r) {
    const SimDraw draw = gen_panel(spec, r);
    const double bench = benchmark_ate(draw, spec.te_mode);
    auto run = [&](int k, auto&& fn) {
      try {
        rows[r].err[k] = fn() - bench;
        rows[r].ok[k] = true;
      } catch (const EstimatorError&) {
        rows[r].ok[k] = false;
      }
    };
    run(0, [&] { return did(draw.panel).point; });
    run(1, [&] { return did_s(draw.panel).point; });
    run(2, [&] { return did_s_star(draw.panel, opts.estimator).point; });
  });

  McSummary s;
  s.g = spec.g;
  s.t = spec.t;
  s.replications = reps;
  s.seed = spec.seed;
  s.te_mode = spec.te_mode == TeMode::kConstant ? "constant" : "time_varying";
  s.benchmark = spec.te_mode == TeMode::kConstant ? "te_scale" : "mean_te_path";
  const char* names[3] = {"did", "did_s", "did_s_star"};
  for (int k = 0; k < 3; ++k) {
    std::vector<double> errs, sqs;
    int failures = 0;
    for (const auto& row : rows) {
      if (!row.ok[k]) {
        ++failures;
        continue;
      }
      errs.push_back(row.err[k]);
      sqs.push_back(row.err[k] * row.err[k]);
    }
    EstimatorMcRow out;
    out.estimator = names[k];
    out.reps_used = static_cast<int>(errs.size());
    out.failures = failures;
    if (!errs.empty()) {
      out.mean_bias = mean(errs);
      out.rmse = std::sqrt(mean(sqs));
    }
    s.estimators.push_back(out);
  }
  return s;
}

struct Scenario {
  std::string name;
  double misclass_prob = 0.0;
  bool trend_violation = false;
};

inline std::vector<Scenario> standard_scenarios(double misclass_prob = 0.5) {
  return {{"PTM", misclass_prob, false},
          {"TVM", misclass_prob, true},
          {"PTN", 0.0, false},
          {"TVN", 0.0, true}};
}

struct TestMcConfig {
  double level = 0.05;
  bool warp = true;  // one recentered draw per replication, pooled critical values
  int b = 199;       // per-replication draws when warp is off
  TauWindow window;
  int threads = 1;
};

// Rejection rates of the four statistics under each scenario. The warp scheme
// draws a single resample per replication and pools the recentered statistics
// into one critical-value distribution per statistic and scenario.
inline McSummary run_mc_tests(const DgpSpec& spec_base, const std::vector<Scenario>& scenarios,
                              int reps, const TestMcConfig& cfg) {
  if (reps < 1) throw ConfigError("replications must be >= 1");
  McSummary s;
  s.g = spec_base.g;
  s.t = spec_base.t;
  s.replications = reps;
  s.seed = spec_base.seed;
  s.te_mode = spec_base.te_mode == TeMode::kConstant ? "constant" : "time_varying";
  s.benchmark = "rejection_rate";

  constexpr int kStats = 4;  // sum_pt, max_pt, sum_mc, max_mc
  const char* stat_names[kStats] = {"sum_pt", "max_pt", "sum_mc", "max_mc"};

  for (const auto& scen : scenarios) {
    DgpSpec spec = spec_base;
    spec.misclass_prob = scen.misclass_prob;
    spec.trend_violation = scen.trend_violation;

    std::vector<std::array<double, kStats>> stat_rows(reps);
    std::vector<std::array<double, kStats>> draw_rows(reps);
    std::vector<std::array<std::uint8_t, kStats>> reject_rows;
    if (!cfg.warp) reject_rows.resize(reps);

    parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t r) {
      const SimDraw draw = gen_panel(spec, r);
      const TauGrid grid_mc = tau_grid(draw.panel, TauKind::kMisclassification, cfg.window);
      const TauGrid grid_pt = tau_grid(draw.panel, TauKind::kPreTrend, cfg.window);
      stat_rows[r] = {t_sum(grid_pt), t_max(grid_pt), t_sum(grid_mc), t_max(grid_mc)};
      if (cfg.warp) {
        const std::uint64_t base = derive_seed(spec.seed, 0x517, static_cast<std::uint64_t>(r));
        auto rng = make_engine(derive_seed(base, detail::kStreamWarp));
        const Panel re = resample_groups(draw.panel, rng);
        draw_rows[r] = {recentered_statistic(grid_pt, re, StatKind::kSum),
                        recentered_statistic(grid_pt, re, StatKind::kMax),
                        recentered_statistic(grid_mc, re, StatKind::kSum),
                        recentered_statistic(grid_mc, re, StatKind::kMax)};
      } else {
        BootstrapConfig bc;
        bc.b = cfg.b;
        bc.seed = derive_seed(spec.seed, 0xb00, static_cast<std::uint64_t>(r));
        bc.threads = 1;
        const TauKind kinds[kStats] = {TauKind::kPreTrend, TauKind::kPreTrend,
                                       TauKind::kMisclassification,
                                       TauKind::kMisclassification};
        const StatKind stats[kStats] = {StatKind::kSum, StatKind::kMax, StatKind::kSum,
                                        StatKind::kMax};
        for (int k = 0; k < kStats; ++k) {
          const auto outcome =
              bootstrap_test(draw.panel, kinds[k], stats[k], cfg.level, bc, cfg.window);
          reject_rows[r][k] = outcome.reject ? 1 : 0;
        }
      }
    });

    for (int k = 0; k < kStats; ++k) {
      double rate = 0.0;
      if (cfg.warp) {
        std::vector<double> pool(reps);
        for (int r = 0; r < reps; ++r) pool[r] = draw_rows[r][k];
        const double crit = quantile_higher(pool, 1.0 - cfg.level);
        int rej = 0;
        for (int r = 0; r < reps; ++r)
          if (stat_rows[r][k] > crit) ++rej;
        rate = static_cast<double>(rej) / static_cast<double>(reps);
      } else {
        int rej = 0;
        for (int r = 0; r < reps; ++r)
          if (reject_rows[r][k]) ++rej;
        rate = static_cast<double>(rej) / static_cast<double>(reps);
      }
      s.tests.push_back({scen.name, stat_names[k], rate, reps});
    }
  }
  return s;
}

}  // namespace stagdid
