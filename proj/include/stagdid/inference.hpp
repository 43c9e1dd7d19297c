#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stagdid/common.hpp"
#include "stagdid/estimators.hpp"
#include "stagdid/panel.hpp"
#include "stagdid/parallel.hpp"
#include "stagdid/rng.hpp"

namespace stagdid {

struct BootstrapConfig {
  int b = 999;  // number of draws
  std::uint64_t seed = 0;
  double level = 0.95;  // CI coverage / one minus test level
  int threads = 1;

  void check() const {
    if (b < 1) throw ConfigError("bootstrap draws must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
  }
};

struct BootstrapDraws {
  std::vector<double> values;  // statistic per usable draw, in draw order
  int skipped = 0;             // draws where the statistic was undefined
};

// Group-block resample: G i.i.d. uniform group indices, each drawn group's
// entire series copied intact. Per-group structure (and hence validity) is
// preserved; ids are relabeled to stay unique.
inline Panel resample_groups(const Panel& panel, std::mt19937_64& rng) {
  if (panel.groups.size() < 2) throw PanelError("resampling needs at least 2 groups");
  std::uniform_int_distribution<std::size_t> pick(0, panel.groups.size() - 1);
  Panel out;
  out.periods = panel.periods;
  out.groups.reserve(panel.groups.size());
  for (std::size_t slot = 0; slot < panel.groups.size(); ++slot) {
    GroupSeries g = panel.groups[pick(rng)];
    g.id = "b" + std::to_string(slot) + ":" + g.id;
    out.groups.push_back(std::move(g));
  }
  return out;
}

// Applies `statistic` to cfg.b independent resamples. Draw j uses its own
// stream derived from (seed, j), so results do not depend on the thread
// count. Draws where the statistic is undefined (e.g. a resample without any
// switching group) are counted as skipped.
inline BootstrapDraws bootstrap_statistic(const Panel& panel,
                                          const std::function<double(const Panel&)>& statistic,
                                          const BootstrapConfig& cfg) {
  cfg.check();
  constexpr std::uint64_t kDrawTag = 0xb007;
  std::vector<std::optional<double>> slots(static_cast<std::size_t>(cfg.b));
  parallel_for(static_cast<std::size_t>(cfg.b), cfg.threads, [&](std::size_t j) {
    auto rng = make_engine(derive_seed(cfg.seed, kDrawTag, j));
    const Panel re = resample_groups(panel, rng);
    try {
      slots[j] = statistic(re);
    } catch (const EstimatorError&) {
      slots[j] = std::nullopt;
    }
  });
  BootstrapDraws out;
  out.values.reserve(slots.size());
  for (const auto& s : slots) {
    if (s)
      out.values.push_back(*s);
    else
      ++out.skipped;
  }
  if (out.values.empty()) throw EstimatorError("bootstrap degenerate: all draws skipped");
  return out;
}

enum class EstimatorKind { kDid, kDidS, kDidSStar, kTwfe };

inline const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kDid: return "did";
    case EstimatorKind::kDidS: return "did_s";
    case EstimatorKind::kDidSStar: return "did_s_star";
    case EstimatorKind::kTwfe: return "twfe";
  }
  return "?";
}

inline double point_estimate(const Panel& panel, EstimatorKind kind,
                             const EstimatorOptions& opts) {
  switch (kind) {
    case EstimatorKind::kDid: return did(panel).point;
    case EstimatorKind::kDidS: return did_s(panel).point;
    case EstimatorKind::kDidSStar: return did_s_star(panel, opts).point;
    case EstimatorKind::kTwfe: return twfe(panel);
  }
  throw ConfigError("unknown estimator");
}

// Point estimate on the original panel plus bootstrap standard error,
// percentile confidence interval, and a p-value for ATE = 0 based on the
// recentered draws |theta_b - theta| compared against |theta|.
inline EstimateResult estimate_with_ci(const Panel& panel, EstimatorKind kind,
                                       const BootstrapConfig& cfg,
                                       const EstimatorOptions& opts = {}) {
  EstimateResult r;
  switch (kind) {
    case EstimatorKind::kDid: r = did(panel); break;
    case EstimatorKind::kDidS: r = did_s(panel); break;
    case EstimatorKind::kDidSStar: r = did_s_star(panel, opts); break;
    case EstimatorKind::kTwfe:
      r.estimator_name = "twfe";
      r.point = twfe(panel);
      break;
  }
  const auto draws = bootstrap_statistic(
      panel, [&](const Panel& p) { return point_estimate(p, kind, opts); }, cfg);
  const auto m = draws.values.size();
  if (draws.skipped > 0) r.flags.push_back("bootstrap_draws_skipped");
  if (m >= 2) {
    r.se = sample_sd(draws.values);
    double lo = quantile_higher(draws.values, (1.0 - cfg.level) / 2.0);
    double hi = quantile_higher(draws.values, (1.0 + cfg.level) / 2.0);
    // The interval must bracket the point estimate; widen if a skewed
    // bootstrap distribution leaves it outside.
    if (lo > r.point || hi < r.point) {
      lo = std::min(lo, r.point);
      hi = std::max(hi, r.point);
      r.flags.push_back("ci_widened_to_include_point");
    }
    r.ci_low = lo;
    r.ci_high = hi;
  } else {
    r.flags.push_back("se_undefined");
  }
  std::size_t at_least = 0;
  for (double v : draws.values)
    if (std::abs(v - r.point) >= std::abs(r.point)) ++at_least;
  r.p_value_ate_zero = static_cast<double>(at_least) / static_cast<double>(m);
  return r;
}

}  // namespace stagdid
