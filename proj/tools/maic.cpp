// maic: command-line front end for anchored MAIC / 2SMAIC analyses and the
// simulation harness.
//
// Exit codes
//   0  success
//   1  usage, I/O or input validation failure
//   2  no balancing weights exist (infeasible trial-assignment model)
//   3  estimation failure (non-convergence, separation, too many failed
//      bootstrap resamples)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maic/maic.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kInputError = 1, kInfeasible = 2, kEstimationError = 3 };

// Values from a --config JSON file that no flag overrode. Flag-wins.
template <typename T>
void take_from_config(const nlohmann::json& cfg, const char* key, const CLI::Option* opt, T& target) {
  if (opt->count() > 0) return;
  if (auto it = cfg.find(key); it != cfg.end()) target = it->get<T>();
}

nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(maic::io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw maic::ValidationError(path + ": invalid JSON: " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = std::string(maic::io::trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

ordered_json summary_json(const maic::Vector& w) {
  ordered_json j;
  j["min"] = w.minCoeff();
  j["max"] = w.maxCoeff();
  j["ess"] = maic::ess(w);
  return j;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::string ipd_path;
  std::string ald_path;
  std::string config_path;
  std::string method = "2SMAIC";
  std::string effect_modifiers;
  int bootstrap = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double max_failure_rate = 0.05;
  double truncation_percentile = 95.0;
  double grad_tol = 1e-10;
  double balance_tol = 1e-8;
  int max_iter = 500;
  double level = 0.95;
  std::string out = "-";
  std::string diagnostics;
};

void write_output(const std::string& target, const std::string& text) {
  if (target == "-" || target.empty()) {
    std::cout << text;
  } else {
    maic::io::write_file_atomic(target, text);
  }
}

void write_diagnostics(const std::string& path, const maic::AnalysisData& data,
                       const maic::TrialWeightFit& trial,
                       const std::optional<maic::PropensityFit>& ps,
                       const maic::WeightVector& final_weights) {
  using maic::io::format_double;
  std::optional<maic::Vector> ipt, combined;
  if (ps) {
    ipt = maic::ipt_weights(*ps, data.t);
    combined = trial.weights.values().cwiseProduct(*ipt);
  }
  std::string out = "subject,treatment,trial_weight,propensity,ipt_weight,combined_weight,final_weight\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out += std::to_string(i + 1) + "," + std::to_string(data.t[i]) + "," +
           format_double(trial.weights[i]) + ",";
    if (ps) {
      out += format_double(ps->propensity_scores[i]) + "," + format_double((*ipt)[i]) + "," +
             format_double((*combined)[i]);
    } else {
      out += ",,";
    }
    out += "," + format_double(final_weights[i]) + "\n";
  }
  maic::io::write_file_atomic(path, out);

  std::string summary = "quantity,min,max,ess\n";
  auto row = [&](const char* name, const maic::Vector& v) {
    summary += std::string(name) + "," + format_double(v.minCoeff()) + "," +
               format_double(v.maxCoeff()) + "," + format_double(maic::ess(v)) + "\n";
  };
  row("trial_weight", trial.weights.values());
  if (ps) {
    summary += "propensity," + format_double(ps->propensity_scores.minCoeff()) + "," +
               format_double(ps->propensity_scores.maxCoeff()) + ",\n";
    row("ipt_weight", *ipt);
    row("combined_weight", *combined);
  }
  row("final_weight", final_weights.values());
  fs::path summary_path(path);
  summary_path.replace_extension();
  summary_path += "_summary.csv";
  maic::io::write_file_atomic(summary_path, summary);
}

int run_analyze(const AnalyzeOptions& o) {
  const auto method = maic::parse_method(o.method);
  if (!method) {
    std::cerr << "error: unknown method '" << o.method << "' (expected MAIC, 2SMAIC, T-MAIC or T-2SMAIC)\n";
    return kInputError;
  }
  const auto ipd = maic::load_ipd(o.ipd_path, split_list(o.effect_modifiers));
  const auto ald = maic::load_ald(o.ald_path);
  const auto data = maic::AnalysisData::from(ipd, ald);

  std::vector<std::string> em_names;
  for (auto c : ipd.effect_modifier_columns()) em_names.push_back(ipd.covariate_names()[c]);
  const auto report = maic::check_feasibility(data.z_star);
  if (!report.feasible()) {
    std::cerr << "error: no balancing weights exist\n" << report.describe(em_names);
    return kInfeasible;
  }

  maic::MethodSettings ms;
  ms.trial.grad_tol = o.grad_tol;
  ms.trial.max_iter = o.max_iter;
  ms.truncation_percentile = o.truncation_percentile;

  const auto fit = maic::fit_method(data, *method, ms);
  const double imbalance = maic::max_weighted_imbalance(data.z_star, fit.trial.weights.values());
  if (imbalance > o.balance_tol) {
    throw maic::NonConvergence("weighted effect-modifier means miss their targets by " +
                               maic::io::format_double(imbalance));
  }

  // the propensity model is reported for every method
  std::optional<maic::PropensityFit> ps = fit.propensity;
  if (!ps) {
    try {
      ps = maic::fit_propensity(data.x, data.t, ms.propensity);
    } catch (const maic::Error&) {
    }
  }

  ordered_json out;
  out["method"] = std::string(maic::to_string(*method));
  out["n"] = ipd.n();
  out["effect_modifiers"] = em_names;
  out["delta_10_plugin"] = fit.delta_10;

  if (o.bootstrap > 0) {
    const maic::BootstrapSettings bs{o.bootstrap, o.seed, o.threads, o.max_failure_rate};
    const auto boot = maic::bootstrap_effect(ipd, ald, *method, bs, ms);
    const auto d10 = maic::wald_estimate(boot.point, boot.se * boot.se, o.level);
    const auto d12 = maic::anchored_comparison(d10, ald.effect_estimate(), ald.effect_variance(), o.level);
    out["delta_10"] = d10.point;
    out["var_10"] = d10.variance;
    out["delta_12"] = d12.point;
    out["var_12"] = d12.variance;
    out["ci"] = {d12.ci_lower, d12.ci_upper};
    out["bootstrap"] = {{"requested", boot.requested}, {"n_failed", boot.n_failed}, {"seed", o.seed}};
  } else {
    out["delta_10"] = fit.delta_10;
    out["var_10"] = nullptr;
    out["delta_12"] = fit.delta_10 - ald.effect_estimate();
    out["var_12"] = nullptr;
    out["ci"] = nullptr;
    out["bootstrap"] = nullptr;
  }
  out["level"] = o.level;
  out["delta_20"] = ald.effect_estimate();
  out["var_20"] = ald.effect_variance();
  out["ess_trial"] = fit.trial.ess;
  if (ps) {
    out["ess_combined"] = maic::ess(maic::combine_weights(fit.trial.weights, *ps, data.t));
  } else {
    out["ess_combined"] = nullptr;
  }
  out["ess_final"] = maic::ess(fit.final_weights);
  out["alpha1"] = std::vector<double>(fit.trial.alpha1.data(), fit.trial.alpha1.data() + fit.trial.alpha1.size());
  out["optimizer"] = {{"iterations", fit.trial.iterations},
                      {"gradient_norm", fit.trial.final_gradient_norm},
                      {"max_imbalance", imbalance}};
  out["weights"] = {{"trial", summary_json(fit.trial.weights.values())},
                    {"final", summary_json(fit.final_weights.values())},
                    {"trial_values", std::vector<double>(fit.trial.weights.values().data(),
                                                         fit.trial.weights.values().data() + ipd.n())}};
  if (ps) {
    out["propensity"] = {{"beta0", ps->beta0},
                         {"beta1", std::vector<double>(ps->beta1.data(), ps->beta1.data() + ps->beta1.size())},
                         {"min", ps->propensity_scores.minCoeff()},
                         {"max", ps->propensity_scores.maxCoeff()}};
  } else {
    out["propensity"] = nullptr;
  }

  write_output(o.out, out.dump(2) + "\n");
  if (!o.diagnostics.empty()) write_diagnostics(o.diagnostics, data, fit.trial, ps, fit.final_weights);
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string config_path;
  std::string out_dir = "sim_out";
  std::string scenarios;
  int replicates = 0;
  int bootstrap = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double truncation_percentile = 0.0;
  double max_failure_rate = -1.0;
  std::string allocation;
  bool desk = false;
  bool quiet = false;
};

int run_simulate(const SimulateOptions& o, const CLI::App& cmd) {
  maic::ScenarioConfig base;
  nlohmann::json config_doc = nlohmann::json::object();
  if (!o.config_path.empty()) {
    config_doc = read_json_file(o.config_path);
    maic::apply_config_json(base, config_doc);
  }
  if (o.desk) {
    base.n_replicates = 1000;
    base.bootstrap_B = 500;
  }
  if (cmd.count("--replicates")) base.n_replicates = o.replicates;
  if (cmd.count("--bootstrap")) base.bootstrap_B = o.bootstrap;
  if (cmd.count("--seed")) base.base_seed = o.seed;
  if (cmd.count("--truncation-percentile")) base.truncation_percentile = o.truncation_percentile;
  if (cmd.count("--max-failure-rate")) base.max_failure_rate = o.max_failure_rate;
  if (cmd.count("--allocation")) {
    if (o.allocation == "fixed") base.allocation = maic::Allocation::FixedSplit;
    else if (o.allocation == "bernoulli") base.allocation = maic::Allocation::Bernoulli;
    else throw maic::ValidationError("--allocation must be fixed or bernoulli");
  }

  // A config that pins n_index / index_cov_means describes a single custom
  // scenario; otherwise the factorial grid is run.
  std::vector<maic::ScenarioConfig> scenarios;
  if (config_doc.contains("n_index") || config_doc.contains("index_cov_means")) {
    scenarios.push_back(base);
  } else {
    scenarios = maic::default_grid(base);
  }
  if (!o.scenarios.empty()) {
    std::vector<maic::ScenarioConfig> picked;
    for (const auto& key : split_list(o.scenarios)) {
      auto it = std::find_if(scenarios.begin(), scenarios.end(), [&](const auto& c) {
        return c.name == key || std::to_string(c.scenario_id) == key;
      });
      if (it == scenarios.end()) throw maic::ValidationError("unknown scenario '" + key + "'");
      picked.push_back(*it);
    }
    scenarios = std::move(picked);
  }
  for (const auto& s : scenarios) s.validate();

  std::size_t last_pct = 101;
  maic::ProgressFn progress;
  std::mutex progress_mutex;
  if (!o.quiet) {
    progress = [&](std::size_t done, std::size_t total) {
      const std::size_t pct = done * 100 / total;
      std::lock_guard lock(progress_mutex);
      if (pct != last_pct) {
        last_pct = pct;
        std::cerr << "\rsimulating: " << pct << "% (" << done << "/" << total << " replicates)" << std::flush;
      }
    };
  }
  const auto runs = maic::run_grid(scenarios, o.threads, progress);
  if (!o.quiet) std::cerr << "\n";

  const auto metrics = maic::metrics_csv(runs);
  const auto estimates = maic::estimates_csv(runs);
  ordered_json manifest;
  manifest["tool"] = "maic";
  manifest["version"] = kVersion;
  manifest["base_seed"] = base.base_seed;
  ordered_json cfgs = ordered_json::array();
  for (const auto& s : scenarios) cfgs.push_back(maic::config_to_json(s));
  const auto cfg_text = cfgs.dump();
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(maic::io::fnv1a64(cfg_text)));
  manifest["config_hash_fnv1a64"] = hash;
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  manifest["scenarios"] = cfgs;

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  std::vector<fs::path> written;
  try {
    for (const auto& [name, text] : {std::pair{"metrics.csv", std::string_view(metrics)},
                                     std::pair{"estimates.csv", std::string_view(estimates)}}) {
      maic::io::write_file_atomic(dir / name, text);
      written.push_back(dir / name);
    }
    maic::io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
  if (!o.quiet) std::cerr << "wrote " << (dir / "metrics.csv").string() << " and " << (dir / "estimates.csv").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// metrics / validate

int run_metrics(const std::string& estimates_path, double true_delta, const std::string& out) {
  const auto text = maic::io::read_file(estimates_path);
  write_output(out, maic::metrics_from_estimates(text, true_delta));
  return kOk;
}

int run_validate(const std::string& ipd_path, const std::string& ald_path, const std::string& ems,
                 const std::string& config_path) {
  if (!config_path.empty()) {
    maic::ScenarioConfig cfg;
    maic::apply_config_json(cfg, read_json_file(config_path));
    cfg.validate();
    std::cout << "config ok: " << config_path << "\n";
    if (ipd_path.empty() && ald_path.empty()) return kOk;
  }
  if (ipd_path.empty() || ald_path.empty()) {
    std::cerr << "error: validate needs --ipd and --ald (or --config)\n";
    return kInputError;
  }
  const auto ipd = maic::load_ipd(ipd_path, split_list(ems));
  const auto ald = maic::load_ald(ald_path);
  const auto z_star = maic::center_covariates(ipd, ald);
  const auto treated = ipd.treatment().sum();
  std::cout << "ipd ok: n=" << ipd.n() << " (treated " << treated << ", control " << ipd.n() - treated
            << "), k=" << ipd.k() << "\n";
  std::cout << "ald ok: effect_estimate=" << maic::io::format_double(ald.effect_estimate())
            << ", effect_variance=" << maic::io::format_double(ald.effect_variance()) << "\n";
  std::vector<std::string> em_names;
  for (auto c : ipd.effect_modifier_columns()) em_names.push_back(ipd.covariate_names()[c]);
  const auto report = maic::check_feasibility(z_star);
  if (!report.feasible()) {
    std::cerr << "infeasible: no balancing weights exist\n" << report.describe(em_names);
    return kInfeasible;
  }
  std::cout << "feasible: every effect modifier has index-trial values on both sides of its target\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchored matching-adjusted indirect comparison (MAIC, 2SMAIC, truncated variants)\n"
               "and Monte Carlo simulation harness.\n\n"
               "Exit codes: 0 success, 1 usage/I-O/validation error, 2 infeasible weights,\n"
               "3 estimation failure.",
               "maic"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  AnalyzeOptions ao;
  auto* analyze = app.add_subcommand("analyze", "Estimate A vs B from index-trial IPD and competitor ALD");
  analyze->add_option("--ipd", ao.ipd_path, "IPD CSV: treatment,outcome,<covariates...>")->required()->check(CLI::ExistingFile);
  analyze->add_option("--ald", ao.ald_path, "ALD JSON: covariate_means, effect_estimate, effect_variance[, sample_size]")->required()->check(CLI::ExistingFile);
  analyze->add_option("--config", ao.config_path, "JSON file with default values for the flags below (flags win)")->check(CLI::ExistingFile);
  auto* o_method = analyze->add_option("--method", ao.method, "MAIC | 2SMAIC | T-MAIC | T-2SMAIC")->capture_default_str();
  auto* o_em = analyze->add_option("--effect-modifiers", ao.effect_modifiers, "Comma-separated effect-modifier columns (default: all covariates)");
  auto* o_boot = analyze->add_option("--bootstrap", ao.bootstrap, "Bootstrap resamples B (0 = plug-in estimate only)")->capture_default_str();
  auto* o_seed = analyze->add_option("--seed", ao.seed, "Bootstrap seed")->capture_default_str();
  auto* o_thr = analyze->add_option("--threads", ao.threads, "Worker threads (0 = all cores; does not change results)")->capture_default_str();
  auto* o_mfr = analyze->add_option("--max-failure-rate", ao.max_failure_rate, "Largest tolerated share of failed resamples")->capture_default_str();
  auto* o_tp = analyze->add_option("--truncation-percentile", ao.truncation_percentile, "Percentile cutoff for T-methods")->capture_default_str();
  auto* o_gt = analyze->add_option("--grad-tol", ao.grad_tol, "Optimizer tolerance on ||grad Q||_inf")->capture_default_str();
  auto* o_bt = analyze->add_option("--balance-tol", ao.balance_tol, "Largest accepted weighted-mean imbalance")->capture_default_str();
  auto* o_mi = analyze->add_option("--max-iter", ao.max_iter, "Optimizer iteration limit")->capture_default_str();
  auto* o_lv = analyze->add_option("--level", ao.level, "Confidence level")->capture_default_str();
  analyze->add_option("--out", ao.out, "Analysis JSON path ('-' = stdout)")->capture_default_str();
  analyze->add_option("--diagnostics", ao.diagnostics, "Per-subject weight diagnostics CSV (a *_summary.csv is written alongside)");

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Run the simulation grid and write metrics.csv, estimates.csv, manifest.json");
  simulate->add_option("--config", so.config_path, "Scenario config JSON (keys mirror ScenarioConfig)")->check(CLI::ExistingFile);
  simulate->add_option("--out", so.out_dir, "Output directory")->capture_default_str();
  simulate->add_option("--scenarios", so.scenarios, "Comma-separated scenario names or ids (default: all six)");
  simulate->add_option("--replicates", so.replicates, "Replicates per scenario (default 5000)");
  simulate->add_option("--bootstrap", so.bootstrap, "Bootstrap resamples per replicate (default 2000)");
  simulate->add_option("--seed", so.seed, "Base seed");
  simulate->add_option("--threads", so.threads, "Worker threads (0 = all cores; does not change results)")->capture_default_str();
  simulate->add_option("--truncation-percentile", so.truncation_percentile, "Percentile cutoff for T-methods (default 95)");
  simulate->add_option("--max-failure-rate", so.max_failure_rate, "Largest tolerated share of failed resamples (default 0.05)");
  simulate->add_option("--allocation", so.allocation, "fixed | bernoulli (default fixed)");
  simulate->add_flag("--desk", so.desk, "Desk scale: 1000 replicates, B = 500 (explicit flags still win)");
  simulate->add_flag("--quiet", so.quiet, "No progress output");

  std::string est_path, metrics_out = "-";
  double true_delta = 0.0;
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics.csv from an estimates.csv");
  metrics->add_option("--estimates", est_path, "estimates.csv from simulate")->required()->check(CLI::ExistingFile);
  metrics->add_option("--true-delta", true_delta, "True A vs B effect")->capture_default_str();
  metrics->add_option("--out", metrics_out, "Output path ('-' = stdout)")->capture_default_str();

  std::string v_ipd, v_ald, v_em, v_cfg;
  auto* validate = app.add_subcommand("validate", "Check input files (and feasibility of balancing)");
  validate->add_option("--ipd", v_ipd, "IPD CSV")->check(CLI::ExistingFile);
  validate->add_option("--ald", v_ald, "ALD JSON")->check(CLI::ExistingFile);
  validate->add_option("--effect-modifiers", v_em, "Comma-separated effect-modifier columns");
  validate->add_option("--config", v_cfg, "Scenario config JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*analyze) {
      if (!ao.config_path.empty()) {
        const auto cfg = read_json_file(ao.config_path);
        take_from_config(cfg, "method", o_method, ao.method);
        take_from_config(cfg, "effect_modifiers", o_em, ao.effect_modifiers);
        take_from_config(cfg, "bootstrap", o_boot, ao.bootstrap);
        take_from_config(cfg, "seed", o_seed, ao.seed);
        take_from_config(cfg, "threads", o_thr, ao.threads);
        take_from_config(cfg, "max_failure_rate", o_mfr, ao.max_failure_rate);
        take_from_config(cfg, "truncation_percentile", o_tp, ao.truncation_percentile);
        take_from_config(cfg, "grad_tol", o_gt, ao.grad_tol);
        take_from_config(cfg, "balance_tol", o_bt, ao.balance_tol);
        take_from_config(cfg, "max_iter", o_mi, ao.max_iter);
        take_from_config(cfg, "level", o_lv, ao.level);
      }
      return run_analyze(ao);
    }
    if (*simulate) return run_simulate(so, *simulate);
    if (*metrics) return run_metrics(est_path, true_delta, metrics_out);
    if (*validate) return run_validate(v_ipd, v_ald, v_em, v_cfg);
  } catch (const maic::InfeasibleBalance& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const maic::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const maic::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEstimationError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
