// stagdid: batch front end for staggered-adoption DiD estimation with
// misclassification/anticipation corrections, specification tests, and the
// Monte Carlo harness.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation
// error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stagdid/common.hpp"
#include "stagdid/inference.hpp"
#include "stagdid/io.hpp"
#include "stagdid/report.hpp"
#include "stagdid/simulate.hpp"
#include "stagdid/spectest.hpp"
#include "stagdid/vvector.hpp"

namespace {

using stagdid::json;

// Reproducible experiment configurations. table1/table2 run the estimator
// study (bias and RMSE are both always reported; the two names exist because
// the corresponding summary tables emphasize different columns). table3 runs
// the specification-test study, twfe-bias the two-way fixed-effects bias
// demonstration on noiseless panels.
const std::map<std::string, const char*> kPresets = {
    {"table1", R"json({
      "command": "simulate", "mode": "estimators",
      "g_list": [100, 300, 600], "t": 15, "reps": 2000,
      "te_mode": "both", "misclass": 0.5, "noise_sd": 1.0,
      "never_share": 0.05, "seed": 20240101
    })json"},
    {"table2", R"json({
      "command": "simulate", "mode": "estimators",
      "g_list": [100, 300, 600], "t": 15, "reps": 2000,
      "te_mode": "both", "misclass": 0.5, "noise_sd": 1.0,
      "never_share": 0.05, "seed": 20240101
    })json"},
    {"table3", R"json({
      "command": "simulate", "mode": "tests",
      "g_list": [100, 300, 600], "t": 10, "reps": 2000,
      "te_mode": "constant", "misclass": 0.5, "noise_sd": 1.0,
      "never_share": 0.05, "warp": true, "level": 0.05, "seed": 20240103
    })json"},
    {"twfe-bias", R"json({
      "command": "simulate", "mode": "twfe_bias",
      "g_list": [300], "t": 15, "reps": 50,
      "te_mode": "constant", "te_sd": 0.0, "misclass": 0.5, "noise_sd": 0.0,
      "never_share": 0.05, "seed": 20240104
    })json"}};

struct Cli {
  std::string command;
  std::string input, output, config, preset;
  std::string format = "json";
  std::optional<std::uint64_t> seed;
  int threads = 1;

  // estimate
  std::string estimator = "did_s";
  int bootstrap = 0;
  double level = 0.95;
  std::optional<double> trim;
  bool clamp_lambda = false;
  int cohort = 0;
  std::string comparison = "never";
  bool drop_initial = false;

  // test
  std::string kind = "pt";
  std::string stat = "sum";
  double alpha = 0.05, gamma = 0.05;
  std::string window;

  // simulate
  std::string mode;
  std::vector<int> g_list;
  int t = 0, reps = 0;
  std::string te_mode;
  std::optional<double> misclass, noise_sd, never_share, te_mean, te_sd, sim_level;
  std::optional<bool> warp, trend_violation;
  std::string scenarios;
};

std::uint64_t require_seed(const Cli& cli) {
  if (!cli.seed) throw stagdid::ConfigError("--seed is required for stochastic commands");
  return *cli.seed;
}

stagdid::TauWindow parse_window(const std::string& w) {
  stagdid::TauWindow win;
  if (w.empty()) return win;
  const auto colon = w.find(':');
  try {
    if (colon == std::string::npos) {
      win.max_lag = std::stoi(w);
    } else {
      win.min_lag = std::stoi(w.substr(0, colon));
      win.max_lag = std::stoi(w.substr(colon + 1));
    }
  } catch (const std::exception&) {
    throw stagdid::ConfigError("cannot parse --window '" + w + "' (use MAXLAG or MIN:MAX)");
  }
  return win;
}

stagdid::Panel load_input(const Cli& cli) {
  if (cli.input.empty()) throw stagdid::ConfigError("--input is required");
  stagdid::LoadOptions opts;
  opts.drop_initial_switchers = cli.drop_initial;
  stagdid::Panel panel = stagdid::load_panel(cli.input, opts);
  if (cli.cohort > 0) {
    const auto kind = cli.comparison == "notyet" ? stagdid::ComparisonKind::kNotYetTreated
                                                 : stagdid::ComparisonKind::kNeverTreated;
    panel = stagdid::restrict_to_cohort(panel, cli.cohort, kind);
  }
  return panel;
}

json input_metadata(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  j["path"] = path;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(stagdid::fnv1a(ss.str())));
  j["digest"] = buf;
  return j;
}

void emit(const Cli& cli, const json& report, const std::string& table) {
  std::string payload =
      cli.format == "table" && !table.empty() ? table : report.dump(2) + "\n";
  if (cli.output.empty()) {
    std::cout << payload;
  } else {
    std::ofstream out(cli.output, std::ios::binary);
    if (!out) throw stagdid::ConfigError("cannot open output file '" + cli.output + "'");
    out << payload;
  }
}

json base_report(const Cli& cli) {
  json j;
  j["version"] = stagdid::kVersion;
  j["command"] = cli.command;
  if (cli.seed) j["seed"] = *cli.seed;
  return j;
}

int cmd_validate(const Cli& cli) {
  if (cli.input.empty()) throw stagdid::ConfigError("--input is required");
  stagdid::LoadOptions opts;
  opts.drop_initial_switchers = cli.drop_initial;
  const auto panel = stagdid::load_panel(cli.input, opts);
  const auto rep = stagdid::validate(panel);
  json j = base_report(cli);
  j["input"] = input_metadata(cli.input);
  j["groups"] = panel.groups.size();
  j["periods"] = panel.periods;
  j["validation"] = stagdid::to_json(rep);
  emit(cli, j, "");
  return rep.ok() ? 0 : 3;
}

int cmd_estimate(const Cli& cli) {
  const auto panel = load_input(cli);
  const auto vrep = stagdid::validate(panel);
  if (!vrep.ok()) throw stagdid::PanelError("invalid panel: " + vrep.errors.front().message);

  stagdid::EstimatorKind kind;
  if (cli.estimator == "did") kind = stagdid::EstimatorKind::kDid;
  else if (cli.estimator == "did_s") kind = stagdid::EstimatorKind::kDidS;
  else if (cli.estimator == "did_s_star") kind = stagdid::EstimatorKind::kDidSStar;
  else if (cli.estimator == "twfe") kind = stagdid::EstimatorKind::kTwfe;
  else throw stagdid::ConfigError("unknown estimator '" + cli.estimator + "'");

  stagdid::EstimatorOptions eopts;
  eopts.clamp_lambda = cli.clamp_lambda;
  eopts.trim_threshold = cli.trim;

  json j = base_report(cli);
  j["input"] = input_metadata(cli.input);
  json cfg;
  cfg["estimator"] = cli.estimator;
  cfg["bootstrap"] = cli.bootstrap;
  cfg["level"] = cli.level;
  cfg["clamp_lambda"] = cli.clamp_lambda;
  if (cli.trim) cfg["trim"] = *cli.trim;
  if (cli.cohort > 0) {
    cfg["cohort"] = cli.cohort;
    cfg["comparison"] = cli.comparison;
  }
  j["config"] = cfg;
  j["warnings"] = stagdid::to_json(vrep)["warnings"];

  stagdid::EstimateResult res;
  if (cli.bootstrap > 0) {
    stagdid::BootstrapConfig bc;
    bc.b = cli.bootstrap;
    bc.seed = require_seed(cli);
    bc.level = cli.level;
    bc.threads = cli.threads;
    res = stagdid::estimate_with_ci(panel, kind, bc, eopts);
  } else {
    switch (kind) {
      case stagdid::EstimatorKind::kDid: res = stagdid::did(panel); break;
      case stagdid::EstimatorKind::kDidS: res = stagdid::did_s(panel); break;
      case stagdid::EstimatorKind::kDidSStar: res = stagdid::did_s_star(panel, eopts); break;
      case stagdid::EstimatorKind::kTwfe:
        res.estimator_name = "twfe";
        res.point = stagdid::twfe(panel);
        break;
    }
  }
  j["result"] = stagdid::to_json(res);
  emit(cli, j, "");
  return 0;
}

int cmd_test(const Cli& cli) {
  const auto panel = load_input(cli);
  const auto vrep = stagdid::validate(panel);
  if (!vrep.ok()) throw stagdid::PanelError("invalid panel: " + vrep.errors.front().message);

  stagdid::BootstrapConfig bc;
  bc.b = cli.bootstrap > 0 ? cli.bootstrap : 499;
  bc.seed = require_seed(cli);
  bc.threads = cli.threads;
  const auto window = parse_window(cli.window);
  const auto stat = cli.stat == "max" ? stagdid::StatKind::kMax : stagdid::StatKind::kSum;

  json j = base_report(cli);
  j["input"] = input_metadata(cli.input);
  json cfg;
  cfg["kind"] = cli.kind;
  cfg["stat"] = cli.stat;
  cfg["alpha"] = cli.alpha;
  cfg["gamma"] = cli.gamma;
  cfg["b"] = bc.b;
  if (!cli.window.empty()) cfg["window"] = cli.window;
  if (cli.cohort > 0) {
    cfg["cohort"] = cli.cohort;
    cfg["comparison"] = cli.comparison;
  }
  j["config"] = cfg;

  if (cli.kind == "decision") {
    const auto verdict =
        stagdid::decision_rule(panel, cli.alpha, cli.gamma, bc, window, stat);
    j["verdict"] = stagdid::to_json(verdict);
  } else if (cli.kind == "pt" || cli.kind == "mc") {
    const auto kind = cli.kind == "pt" ? stagdid::TauKind::kPreTrend
                                       : stagdid::TauKind::kMisclassification;
    const double level = cli.kind == "pt" ? cli.alpha : cli.gamma;
    const auto outcome = stagdid::bootstrap_test(panel, kind, stat, level, bc, window);
    j["test"] = stagdid::to_json(outcome);
    j["tau_grid"] = stagdid::to_json(stagdid::tau_grid(panel, kind, window));
  } else {
    throw stagdid::ConfigError("unknown test kind '" + cli.kind + "' (pt|mc|decision)");
  }
  emit(cli, j, "");
  return 0;
}

int cmd_simulate(const Cli& cli) {
  // Preset (or config file) first, explicit flags override.
  json cfg = json::object();
  if (!cli.preset.empty()) {
    const auto it = kPresets.find(cli.preset);
    if (it == kPresets.end()) throw stagdid::ConfigError("unknown preset '" + cli.preset + "'");
    cfg = json::parse(it->second);
  }
  if (!cli.config.empty()) {
    std::ifstream in(cli.config);
    if (!in) throw stagdid::ConfigError("cannot open config file '" + cli.config + "'");
    try {
      json file_cfg = json::parse(in);
      for (auto& [k, v] : file_cfg.items()) cfg[k] = v;
    } catch (const json::parse_error& e) {
      throw stagdid::ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  auto override_if = [&](const char* key, const auto& opt) {
    if (opt) cfg[key] = *opt;
  };
  if (!cli.mode.empty()) cfg["mode"] = cli.mode;
  if (!cli.g_list.empty()) cfg["g_list"] = cli.g_list;
  if (cli.t > 0) cfg["t"] = cli.t;
  if (cli.reps > 0) cfg["reps"] = cli.reps;
  if (!cli.te_mode.empty()) cfg["te_mode"] = cli.te_mode;
  override_if("misclass", cli.misclass);
  override_if("noise_sd", cli.noise_sd);
  override_if("never_share", cli.never_share);
  override_if("te_mean", cli.te_mean);
  override_if("te_sd", cli.te_sd);
  override_if("warp", cli.warp);
  override_if("trend_violation", cli.trend_violation);
  if (!cli.scenarios.empty()) cfg["scenarios"] = cli.scenarios;
  if (cli.seed) cfg["seed"] = *cli.seed;
  if (cli.trim) cfg["trim"] = *cli.trim;
  if (cli.clamp_lambda) cfg["clamp_lambda"] = true;
  if (!cli.window.empty()) cfg["window"] = cli.window;
  override_if("level", cli.sim_level);

  if (!cfg.contains("seed")) throw stagdid::ConfigError("--seed is required for simulate");
  if (!cfg.contains("mode")) throw stagdid::ConfigError("simulate needs --mode or a preset");

  const std::string mode = cfg["mode"];
  std::vector<int> g_list = cfg.value("g_list", std::vector<int>{100});
  const int reps = cfg.value("reps", 100);

  stagdid::DgpSpec base;
  base.t = cfg.value("t", 15);
  base.never_treated_share = cfg.value("never_share", 0.05);
  base.te_mean = cfg.value("te_mean", 4.0);
  base.te_sd = cfg.value("te_sd", 1.0);
  base.noise_sd = cfg.value("noise_sd", 1.0);
  base.misclass_prob = cfg.value("misclass", 0.5);
  base.trend_violation = cfg.value("trend_violation", false);
  base.seed = cfg["seed"].get<std::uint64_t>();

  std::vector<stagdid::McSummary> summaries;
  if (mode == "estimators") {
    const std::string tm = cfg.value("te_mode", "both");
    std::vector<stagdid::TeMode> modes;
    if (tm == "constant") modes = {stagdid::TeMode::kConstant};
    else if (tm == "time_varying") modes = {stagdid::TeMode::kTimeVarying};
    else modes = {stagdid::TeMode::kConstant, stagdid::TeMode::kTimeVarying};
    stagdid::McOptions mopts;
    mopts.threads = cli.threads;
    mopts.estimator.clamp_lambda = cfg.value("clamp_lambda", false);
    if (cfg.contains("trim")) mopts.estimator.trim_threshold = cfg["trim"].get<double>();
    for (int g : g_list)
      for (auto m : modes) {
        stagdid::DgpSpec spec = base;
        spec.g = g;
        spec.te_mode = m;
        summaries.push_back(stagdid::run_mc_estimators(spec, reps, mopts));
      }
  } else if (mode == "tests") {
    stagdid::TestMcConfig tcfg;
    tcfg.level = cfg.value("level", 0.05);
    tcfg.warp = cfg.value("warp", true);
    tcfg.b = cfg.value("b", 199);
    tcfg.threads = cli.threads;
    if (cfg.contains("window")) tcfg.window = parse_window(cfg["window"].get<std::string>());
    auto scens = stagdid::standard_scenarios(cfg.value("misclass", 0.5));
    if (cfg.contains("scenarios")) {
      std::vector<stagdid::Scenario> chosen;
      std::stringstream ss(cfg["scenarios"].get<std::string>());
      std::string name;
      while (std::getline(ss, name, ',')) {
        bool found = false;
        for (const auto& s : scens)
          if (s.name == name) {
            chosen.push_back(s);
            found = true;
          }
        if (!found) throw stagdid::ConfigError("unknown scenario '" + name + "'");
      }
      scens = chosen;
    }
    for (int g : g_list) {
      stagdid::DgpSpec spec = base;
      spec.g = g;
      spec.te_mode = cfg.value("te_mode", std::string("constant")) == "time_varying"
                         ? stagdid::TeMode::kTimeVarying
                         : stagdid::TeMode::kConstant;
      summaries.push_back(stagdid::run_mc_tests(spec, scens, reps, tcfg));
    }
  } else if (mode == "twfe_bias") {
    // Noiseless demonstration: the fixed-effects estimate against the exact
    // attenuation ratio implied by the recorded-vs-true treatment gap.
    for (int g : g_list) {
      stagdid::DgpSpec spec = base;
      spec.g = g;
      spec.te_mode = stagdid::TeMode::kConstant;
      stagdid::McSummary s;
      s.g = g;
      s.t = spec.t;
      s.replications = reps;
      s.seed = spec.seed;
      s.te_mode = "constant";
      s.benchmark = "te_scale";
      std::vector<double> tw_err, did_err;
      for (int r = 0; r < reps; ++r) {
        const auto draw = stagdid::gen_panel(spec, static_cast<std::uint64_t>(r));
        tw_err.push_back(stagdid::twfe(draw.panel) - draw.te_scale);
        did_err.push_back(stagdid::did(draw.panel).point - draw.te_scale);
      }
      auto mk = [&](const char* name, const std::vector<double>& errs) {
        stagdid::EstimatorMcRow row;
        row.estimator = name;
        row.reps_used = static_cast<int>(errs.size());
        row.mean_bias = stagdid::mean(errs);
        std::vector<double> sq;
        for (double e : errs) sq.push_back(e * e);
        row.rmse = std::sqrt(stagdid::mean(sq));
        return row;
      };
      s.estimators.push_back(mk("twfe", tw_err));
      s.estimators.push_back(mk("did", did_err));
      summaries.push_back(s);
    }
  } else {
    throw stagdid::ConfigError("unknown simulate mode '" + mode + "'");
  }

  json j = base_report(cli);
  if (!cli.preset.empty()) j["preset"] = cli.preset;
  cfg.erase("command");
  j["config"] = cfg;
  json rows = json::array();
  for (const auto& s : summaries) rows.push_back(stagdid::to_json(s));
  j["results"] = rows;
  emit(cli, j, stagdid::mc_table(summaries));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  CLI::App app{"staggered-adoption DiD with misclassification/anticipation corrections"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--input", cli.input, "long-format panel file (group,time,n,y,d[,d_true,s_true])");
    sub->add_option("--output", cli.output, "write the report here instead of stdout");
    sub->add_option("--seed", cli.seed, "RNG seed (required for stochastic commands)");
    sub->add_option("--threads", cli.threads, "worker threads")->default_val(1);
    sub->add_option("--format", cli.format, "json|table")->default_val("json");
  };

  auto* v = app.add_subcommand("validate", "check a panel file against the design assumptions");
  add_common(v);
  v->add_flag("--drop-initial-switchers", cli.drop_initial,
              "drop groups observed switching between periods 1 and 2");

  auto* e = app.add_subcommand("estimate", "run one estimator, optionally with bootstrap inference");
  add_common(e);
  e->add_option("--estimator", cli.estimator, "did|did_s|did_s_star|twfe")->default_val("did_s");
  e->add_option("-b,--bootstrap", cli.bootstrap, "bootstrap draws (0 = point estimate only)");
  e->add_option("--level", cli.level, "confidence level")->default_val(0.95);
  e->add_option("--trim", cli.trim, "trimming threshold for the true-switcher estimator");
  e->add_flag("--clamp-lambda", cli.clamp_lambda, "clamp the early-switch share to [0,1]");
  e->add_option("--cohort", cli.cohort, "restrict to the cohort switching at this period");
  e->add_option("--comparison", cli.comparison, "never|notyet")->default_val("never");
  e->add_flag("--drop-initial-switchers", cli.drop_initial, "");

  auto* t = app.add_subcommand("test", "moment-equality specification tests");
  add_common(t);
  t->add_option("--kind", cli.kind, "pt|mc|decision")->default_val("pt");
  t->add_option("--stat", cli.stat, "sum|max")->default_val("sum");
  t->add_option("--alpha", cli.alpha, "level of the pre-trend test")->default_val(0.05);
  t->add_option("--gamma", cli.gamma, "level of the miscoding test")->default_val(0.05);
  t->add_option("-b,--bootstrap", cli.bootstrap, "bootstrap draws")->default_val(499);
  t->add_option("--window", cli.window, "lag window, MAXLAG or MIN:MAX");
  t->add_option("--cohort", cli.cohort, "restrict to the cohort switching at this period");
  t->add_option("--comparison", cli.comparison, "never|notyet")->default_val("never");
  t->add_flag("--drop-initial-switchers", cli.drop_initial, "");

  auto* s = app.add_subcommand("simulate", "Monte Carlo studies of the estimators and tests");
  add_common(s);
  s->add_option("--preset", cli.preset, "table1|table2|table3|twfe-bias");
  s->add_option("--config", cli.config, "JSON config file (flags override)");
  s->add_option("--mode", cli.mode, "estimators|tests|twfe_bias");
  s->add_option("--g", cli.g_list, "group counts to run");
  s->add_option("--t", cli.t, "number of periods");
  s->add_option("--reps", cli.reps, "Monte Carlo replications");
  s->add_option("--te-mode", cli.te_mode, "constant|time_varying|both");
  s->add_option("--misclass", cli.misclass, "late-coding probability");
  s->add_option("--noise-sd", cli.noise_sd, "idiosyncratic noise sd");
  s->add_option("--never-share", cli.never_share, "never-treated share");
  s->add_option("--te-mean", cli.te_mean, "effect scale mean");
  s->add_option("--te-sd", cli.te_sd, "effect scale sd");
  s->add_option("--scenarios", cli.scenarios, "comma list of PTM,TVM,PTN,TVN");
  s->add_option("--warp", cli.warp, "pool one draw per replication for critical values");
  s->add_option("--trend-violation", cli.trend_violation, "add the group-trend break");
  s->add_option("--level", cli.sim_level, "test level for the rejection rates");
  s->add_option("--trim", cli.trim, "trimming threshold for the true-switcher estimator");
  s->add_flag("--clamp-lambda", cli.clamp_lambda, "clamp the early-switch share to [0,1]");
  s->add_option("--window", cli.window, "lag window for the tau grids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (v->parsed()) { cli.command = "validate"; return cmd_validate(cli); }
    if (e->parsed()) { cli.command = "estimate"; return cmd_estimate(cli); }
    if (t->parsed()) { cli.command = "test"; return cmd_test(cli); }
    if (s->parsed()) { cli.command = "simulate"; return cmd_simulate(cli); }
  } catch (const stagdid::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const stagdid::PanelError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 3;
  } catch (const stagdid::EstimatorError& err) {
    std::cerr << "estimation error: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
  return 2;
}
