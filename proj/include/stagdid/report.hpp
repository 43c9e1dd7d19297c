#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "stagdid/common.hpp"
#include "stagdid/estimators.hpp"
#include "stagdid/panel.hpp"
#include "stagdid/simulate.hpp"
#include "stagdid/spectest.hpp"

namespace stagdid {

// JSON views of the result types. Keys keep insertion order and doubles print
// with shortest round-trip formatting, so serialization is deterministic;
// reports deliberately carry no timestamps, runtimes or thread counts so
// reruns are byte-identical.
using json = nlohmann::ordered_json;

inline json to_json(const ValidationIssue& i) {
  json j;
  j["code"] = i.code;
  j["message"] = i.message;
  if (!i.group_id.empty()) j["group"] = i.group_id;
  if (i.period > 0) j["period"] = i.period;
  return j;
}

inline json to_json(const ValidationReport& rep) {
  json j;
  j["valid"] = rep.ok();
  j["errors"] = json::array();
  for (const auto& e : rep.errors) j["errors"].push_back(to_json(e));
  j["warnings"] = json::array();
  for (const auto& w : rep.warnings) j["warnings"].push_back(to_json(w));
  json cohorts = json::object();
  for (const auto& [gid, t] : rep.cohort_table)
    cohorts[gid] = t == 0 ? json("never") : json(t);
  j["cohorts"] = cohorts;
  return j;
}

inline json component_series(const std::vector<Component>& xs, int from_t) {
  json j = json::array();
  for (std::size_t t = static_cast<std::size_t>(from_t); t < xs.size(); ++t) {
    json e;
    e["t"] = static_cast<int>(t);
    e["value"] = xs[t].value;
    e["defined"] = xs[t].defined;
    j.push_back(e);
  }
  return j;
}

inline json to_json(const EstimateResult& r, bool with_components = true) {
  json j;
  j["estimator"] = r.estimator_name;
  j["point"] = r.point;
  j["n_s"] = r.n_s;
  if (r.estimator_name == "did_s_star") j["n_s_star_hat"] = r.n_s_star_hat;
  if (r.se) j["se"] = *r.se;
  if (r.ci_low) j["ci_low"] = *r.ci_low;
  if (r.ci_high) j["ci_high"] = *r.ci_high;
  if (r.p_value_ate_zero) j["p_value_ate_zero"] = *r.p_value_ate_zero;
  j["flags"] = r.flags;
  if (with_components && r.components.periods >= 2) {
    json c;
    c["did"] = component_series(r.components.did, 2);
    c["did_star"] = component_series(r.components.did_star, 2);
    c["did_dstar"] = component_series(r.components.did_dstar, 1);
    c["did_tstar_prev"] = component_series(r.components.did_tstar_prev, 2);
    c["did_s"] = component_series(r.components.did_s, 2);
    c["did_sdagger_prev"] = component_series(r.components.did_sdagger_prev, 2);
    json lam = json::array();
    for (int t = 2; t <= r.components.periods; ++t) {
      json e;
      e["t"] = t;
      e["value"] = r.components.lambda_prev[t];
      e["out_of_range"] = r.components.lambda_oor[t] != 0;
      lam.push_back(e);
    }
    c["lambda_prev"] = lam;
    j["components"] = c;
  }
  return j;
}

inline json to_json(const TestOutcome& t) {
  json j;
  j["kind"] = tau_kind_name(t.kind);
  j["statistic"] = stat_kind_name(t.statistic_kind);
  j["value"] = t.value;
  j["critical_value"] = t.critical_value;
  j["level"] = t.level;
  j["reject"] = t.reject;
  j["b_used"] = t.b_used;
  j["pvalue"] = t.pvalue;
  return j;
}

inline json to_json(const Verdict& v) {
  json j;
  j["outcome"] = verdict_name(v.outcome);
  j["alpha"] = v.alpha;
  j["gamma"] = v.gamma;
  j["pt_test"] = to_json(v.pt_test);
  if (v.mc_test) j["mc_test"] = to_json(*v.mc_test);
  return j;
}

inline json to_json(const TauGrid& g) {
  json j;
  j["kind"] = tau_kind_name(g.kind);
  j["g"] = g.g;
  j["entries"] = json::array();
  for (const auto& e : g.entries) {
    json je;
    je["t"] = e.t;
    je["l"] = e.l;
    je["value"] = e.value;
    je["defined"] = e.defined;
    j["entries"].push_back(je);
  }
  return j;
}

inline json to_json(const McSummary& s) {
  json j;
  j["g"] = s.g;
  j["t"] = s.t;
  j["replications"] = s.replications;
  j["seed"] = s.seed;
  j["te_mode"] = s.te_mode;
  j["benchmark"] = s.benchmark;
  if (!s.estimators.empty()) {
    json rows = json::array();
    for (const auto& e : s.estimators) {
      json r;
      r["estimator"] = e.estimator;
      r["mean_bias"] = e.mean_bias;
      r["rmse"] = e.rmse;
      r["reps_used"] = e.reps_used;
      r["failures"] = e.failures;
      rows.push_back(r);
    }
    j["estimators"] = rows;
  }
  if (!s.tests.empty()) {
    json rows = json::array();
    for (const auto& t : s.tests) {
      json r;
      r["scenario"] = t.scenario;
      r["statistic"] = t.statistic;
      r["rejection_rate"] = t.rejection_rate;
      r["reps"] = t.reps;
      rows.push_back(r);
    }
    j["tests"] = rows;
  }
  return j;
}

// Delimited table mirroring the layout of the simulation summaries: one row
// per estimator cell, or scenario columns per statistic for test runs.
inline std::string mc_table(const std::vector<McSummary>& summaries) {
  std::string out;
  bool any_est = false, any_test = false;
  for (const auto& s : summaries) {
    any_est = any_est || !s.estimators.empty();
    any_test = any_test || !s.tests.empty();
  }
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  if (any_est) {
    out += "g\tte_mode\testimator\tmean_bias\trmse\treps\n";
    for (const auto& s : summaries)
      for (const auto& e : s.estimators)
        out += std::to_string(s.g) + "\t" + s.te_mode + "\t" + e.estimator + "\t" +
               fmt(e.mean_bias) + "\t" + fmt(e.rmse) + "\t" + std::to_string(e.reps_used) + "\n";
  }
  if (any_test) {
    // columns per scenario, in the order they were run
    std::vector<std::string> scenarios;
    for (const auto& s : summaries)
      for (const auto& t : s.tests)
        if (std::find(scenarios.begin(), scenarios.end(), t.scenario) == scenarios.end())
          scenarios.push_back(t.scenario);
    out += "g\tstatistic";
    for (const auto& sc : scenarios) out += "\t" + sc;
    out += "\n";
    for (const auto& s : summaries) {
      std::vector<std::string> stats;
      for (const auto& t : s.tests)
        if (std::find(stats.begin(), stats.end(), t.statistic) == stats.end())
          stats.push_back(t.statistic);
      for (const auto& st : stats) {
        out += std::to_string(s.g) + "\t" + st;
        for (const auto& sc : scenarios) {
          double v = 0.0;
          for (const auto& t : s.tests)
            if (t.scenario == sc && t.statistic == st) v = t.rejection_rate;
          out += "\t" + fmt(v);
        }
        out += "\n";
      }
    }
  }
  return out;
}

}  // namespace stagdid
