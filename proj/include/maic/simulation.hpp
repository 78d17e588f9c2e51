/**
 * simulation.hpp
 *
 * Monte Carlo harness: data-generating mechanism for the index RCT (IPD)
 * and competitor RCT (reduced to published aggregates), per-replicate
 * analysis with all four estimators, the 2 x 3 scenario grid and the CSV
 * reports consumed by the plotting scripts.
 *
 * Random streams: replicate r of scenario s uses
 *   key = derive_key(base_seed, {s, r})
 * and sub-streams derive_key(key, {purpose}) for the index trial, the
 * competitor trial and the bootstrap. Within a trial stream, draws are
 * consumed in a fixed order: k normals per subject for covariates
 * (x_i = mu + L z_i, L the Cholesky factor of the covariance), then the
 * allocation, then one normal per subject for the outcome error.
 */

#ifndef MAIC_SIMULATION_HPP
#define MAIC_SIMULATION_HPP

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maic/bootstrap.hpp"
#include "maic/data_model.hpp"
#include "maic/estimation.hpp"
#include "maic/io.hpp"
#include "maic/methods.hpp"
#include "maic/metrics.hpp"
#include "maic/parallel.hpp"
#include "maic/rng.hpp"

namespace maic {

enum class Allocation { FixedSplit, Bernoulli };

struct ScenarioConfig {
  int scenario_id = 1;
  std::string name = "custom";
  int n_index = 140;
  int n_competitor = 300;
  int k = 3;
  std::vector<double> index_cov_means = {0.5, 0.5, 0.5};
  std::vector<double> competitor_cov_means = {0.6, 0.6, 0.6};
  double cov_sd = 0.4;
  double pairwise_corr = 0.2;
  double beta0 = 5.0;
  std::vector<double> beta1 = {2.0, 2.0, 2.0};
  std::vector<double> beta2 = {1.0, 1.0, 1.0};
  double beta_t = -2.0;
  double error_sd = 1.0;
  int n_replicates = 5000;
  int bootstrap_B = 2000;
  double truncation_percentile = 95.0;
  std::uint64_t base_seed = 20220811;
  double true_delta_12 = 0.0;
  Allocation allocation = Allocation::FixedSplit;
  double max_failure_rate = 0.05;

  void validate() const {
    const auto ku = static_cast<std::size_t>(k);
    if (k < 1) throw ValidationError("k must be at least 1");
    if (index_cov_means.size() != ku || competitor_cov_means.size() != ku || beta1.size() != ku ||
        beta2.size() != ku) {
      throw ValidationError("covariate-indexed vectors must have length k");
    }
    if (n_index < 2 || n_competitor < 2) throw ValidationError("trials need at least 2 subjects");
    if (!(cov_sd > 0.0)) throw ValidationError("cov_sd must be positive");
    if (!(std::abs(pairwise_corr) < 1.0)) throw ValidationError("|pairwise_corr| must be < 1");
    // equicorrelation matrix is positive definite iff -1/(k-1) < rho < 1
    if (k > 1 && !(pairwise_corr > -1.0 / (k - 1))) {
      throw ValidationError("covariance matrix is not positive definite");
    }
    if (!(error_sd >= 0.0)) throw ValidationError("error_sd must be non-negative");
    if (n_replicates < 1) throw ValidationError("n_replicates must be positive");
    if (bootstrap_B < 2) throw ValidationError("bootstrap_B must be at least 2");
    if (!(truncation_percentile > 0.0 && truncation_percentile <= 100.0)) {
      throw ValidationError("truncation_percentile must lie in (0, 100]");
    }
    if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) {
      throw ValidationError("max_failure_rate must lie in [0, 1]");
    }
  }

  Matrix covariance() const {
    Matrix sigma = Matrix::Constant(k, k, pairwise_corr * cov_sd * cov_sd);
    sigma.diagonal().setConstant(cov_sd * cov_sd);
    return sigma;
  }

  /// True marginal A-vs-C (and B-vs-C) mean difference in the competitor
  /// population: beta_t + sum_j beta2_j * competitor mean_j.
  double true_delta_10() const {
    double d = beta_t;
    for (int j = 0; j < k; ++j) d += beta2[static_cast<std::size_t>(j)] * competitor_cov_means[static_cast<std::size_t>(j)];
    return d;
  }
};

inline std::vector<std::string> default_covariate_names(int k) {
  std::vector<std::string> names;
  for (int j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

// ---------------------------------------------------------------------------
// Config files: flat JSON object whose keys mirror ScenarioConfig fields.
// Covariate-indexed fields accept an array or a scalar broadcast to length k.

inline void apply_config_json(ScenarioConfig& cfg, const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  auto num = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ValidationError("config key '" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ValidationError("config key '" + key + "' must be an integer");
    return v.get<long long>();
  };
  if (auto it = doc.find("k"); it != doc.end()) cfg.k = static_cast<int>(integer(*it, "k"));
  auto vec = [&](const nlohmann::json& v, const std::string& key) {
    std::vector<double> out;
    if (v.is_number()) {
      out.assign(static_cast<std::size_t>(cfg.k), v.get<double>());
    } else if (v.is_array()) {
      for (const auto& e : v) out.push_back(num(e, key));
    } else {
      throw ValidationError("config key '" + key + "' must be a number or an array");
    }
    return out;
  };
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& key = it.key();
    const auto& v = it.value();
    if (key == "k") continue;
    if (key == "scenario_id") cfg.scenario_id = static_cast<int>(integer(v, key));
    else if (key == "name") {
      if (!v.is_string()) throw ValidationError("config key 'name' must be a string");
      cfg.name = v.get<std::string>();
    }
    else if (key == "n_index") cfg.n_index = static_cast<int>(integer(v, key));
    else if (key == "n_competitor") cfg.n_competitor = static_cast<int>(integer(v, key));
    else if (key == "index_cov_means") cfg.index_cov_means = vec(v, key);
    else if (key == "competitor_cov_means") cfg.competitor_cov_means = vec(v, key);
    else if (key == "cov_sd") cfg.cov_sd = num(v, key);
    else if (key == "pairwise_corr") cfg.pairwise_corr = num(v, key);
    else if (key == "beta0") cfg.beta0 = num(v, key);
    else if (key == "beta1") cfg.beta1 = vec(v, key);
    else if (key == "beta2") cfg.beta2 = vec(v, key);
    else if (key == "beta_t") cfg.beta_t = num(v, key);
    else if (key == "error_sd") cfg.error_sd = num(v, key);
    else if (key == "n_replicates") cfg.n_replicates = static_cast<int>(integer(v, key));
    else if (key == "bootstrap_B") cfg.bootstrap_B = static_cast<int>(integer(v, key));
    else if (key == "truncation_percentile") cfg.truncation_percentile = num(v, key);
    else if (key == "base_seed") {
      if (!v.is_number_unsigned() && !v.is_number_integer()) {
        throw ValidationError("config key 'base_seed' must be an integer");
      }
      cfg.base_seed = v.get<std::uint64_t>();
    }
    else if (key == "true_delta_12") cfg.true_delta_12 = num(v, key);
    else if (key == "max_failure_rate") cfg.max_failure_rate = num(v, key);
    else if (key == "allocation") {
      const auto s = v.is_string() ? v.get<std::string>() : std::string();
      if (s == "fixed") cfg.allocation = Allocation::FixedSplit;
      else if (s == "bernoulli") cfg.allocation = Allocation::Bernoulli;
      else throw ValidationError("config key 'allocation' must be \"fixed\" or \"bernoulli\"");
    }
    else throw ValidationError("unknown config key '" + key + "'");
  }
  // a changed k with untouched defaults broadcasts the first default entry
  auto fit_k = [&](std::vector<double>& v) {
    if (v.size() != static_cast<std::size_t>(cfg.k) && !v.empty()) v.assign(static_cast<std::size_t>(cfg.k), v.front());
  };
  if (!doc.contains("index_cov_means")) fit_k(cfg.index_cov_means);
  if (!doc.contains("competitor_cov_means")) fit_k(cfg.competitor_cov_means);
  if (!doc.contains("beta1")) fit_k(cfg.beta1);
  if (!doc.contains("beta2")) fit_k(cfg.beta2);
}

inline nlohmann::ordered_json config_to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["scenario_id"] = c.scenario_id;
  j["name"] = c.name;
  j["n_index"] = c.n_index;
  j["n_competitor"] = c.n_competitor;
  j["k"] = c.k;
  j["index_cov_means"] = c.index_cov_means;
  j["competitor_cov_means"] = c.competitor_cov_means;
  j["cov_sd"] = c.cov_sd;
  j["pairwise_corr"] = c.pairwise_corr;
  j["beta0"] = c.beta0;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["beta_t"] = c.beta_t;
  j["error_sd"] = c.error_sd;
  j["n_replicates"] = c.n_replicates;
  j["bootstrap_B"] = c.bootstrap_B;
  j["truncation_percentile"] = c.truncation_percentile;
  j["base_seed"] = c.base_seed;
  j["true_delta_12"] = c.true_delta_12;
  j["allocation"] = c.allocation == Allocation::FixedSplit ? "fixed" : "bernoulli";
  j["max_failure_rate"] = c.max_failure_rate;
  return j;
}

/// The 2 (index n) x 3 (overlap) factorial grid, ordered strong -> moderate
/// -> poor overlap with ascending n inside each overlap level.
inline std::vector<ScenarioConfig> default_grid(const ScenarioConfig& base) {
  struct Level {
    const char* label;
    double mean;
  };
  constexpr Level levels[] = {{"strong", 0.5}, {"moderate", 0.4}, {"poor", 0.3}};
  constexpr int sizes[] = {140, 200};
  std::vector<ScenarioConfig> grid;
  int id = 1;
  for (const auto& lv : levels) {
    for (int n : sizes) {
      ScenarioConfig c = base;
      c.scenario_id = id++;
      c.n_index = n;
      c.index_cov_means.assign(static_cast<std::size_t>(c.k), lv.mean);
      c.name = std::string(lv.label) + "_n" + std::to_string(n);
      grid.push_back(std::move(c));
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Data-generating mechanism

struct SimulatedTrial {
  Matrix x;
  Eigen::VectorXi t;
  Vector y;
};

inline Eigen::VectorXi allocate(int n, Allocation scheme, CounterRng& rng) {
  Eigen::VectorXi t(n);
  if (scheme == Allocation::FixedSplit) {
    // n/2 treated, labels permuted by Fisher-Yates
    for (int i = 0; i < n; ++i) t[i] = i < n / 2 ? 1 : 0;
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(t[i], t[j]);
    }
    return t;
  }
  for (;;) {
    for (int i = 0; i < n; ++i) t[i] = rng.uniform_open() < 0.5 ? 1 : 0;
    const int treated = t.sum();
    if (treated > 0 && treated < n) return t;
  }
}

inline SimulatedTrial simulate_trial(const ScenarioConfig& cfg, int n, const std::vector<double>& means,
                                     CounterRng& rng) {
  const Eigen::LLT<Matrix> llt(cfg.covariance());
  if (llt.info() != Eigen::Success) throw ValidationError("covariance matrix is not positive definite");
  const Matrix L = llt.matrixL();
  const auto k = static_cast<Eigen::Index>(cfg.k);
  const Eigen::Map<const Vector> mu(means.data(), k);
  const Eigen::Map<const Vector> b1(cfg.beta1.data(), k);
  const Eigen::Map<const Vector> b2(cfg.beta2.data(), k);

  SimulatedTrial s{Matrix(n, k), Eigen::VectorXi(n), Vector(n)};
  Vector z(k);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) z[j] = rng.normal();
    s.x.row(i) = (mu + L * z).transpose();
  }
  s.t = allocate(n, cfg.allocation, rng);
  for (int i = 0; i < n; ++i) {
    const double eps = rng.normal();
    const auto xi = s.x.row(i);
    s.y[i] = cfg.beta0 + xi.dot(b1) + (cfg.beta_t + xi.dot(b2)) * s.t[i] + cfg.error_sd * eps;
  }
  return s;
}

/// Index (A vs C) trial; every covariate is an effect modifier.
inline IndexPatientData generate_index_trial(const ScenarioConfig& cfg, CounterRng& rng) {
  auto s = simulate_trial(cfg, cfg.n_index, cfg.index_cov_means, rng);
  IndexVector em(static_cast<std::size_t>(cfg.k));
  for (std::size_t j = 0; j < em.size(); ++j) em[j] = j;
  return IndexPatientData::create(std::move(s.x), std::move(s.t), std::move(s.y), std::move(em),
                                  default_covariate_names(cfg.k));
}

/// OLS of y on (1, t): coefficient and its classical (homoskedastic) variance.
struct OlsTreatmentEffect {
  double estimate = 0.0;
  double variance = 0.0;
};

inline OlsTreatmentEffect ols_treatment_effect(const Eigen::VectorXi& t, const Vector& y) {
  double n_a[2] = {0, 0}, sum[2] = {0, 0};
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    n_a[t[i]] += 1.0;
    sum[t[i]] += y[i];
  }
  if (n_a[0] == 0 || n_a[1] == 0) throw ValidationError("empty arm");
  const double m1 = sum[1] / n_a[1], m0 = sum[0] / n_a[0];
  double rss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = y[i] - (t[i] == 1 ? m1 : m0);
    rss += r * r;
  }
  const double s2 = rss / (static_cast<double>(y.size()) - 2.0);
  return {m1 - m0, s2 * (1.0 / n_a[1] + 1.0 / n_a[0])};
}

/// Competitor (B vs C) trial reduced to covariate means and the unadjusted
/// OLS treatment effect with its nominal variance.
inline AggregateSummary generate_competitor_ald(const ScenarioConfig& cfg, CounterRng& rng) {
  const auto s = simulate_trial(cfg, cfg.n_competitor, cfg.competitor_cov_means, rng);
  const Vector means = s.x.colwise().mean().transpose();
  const auto ols = ols_treatment_effect(s.t, s.y);
  return AggregateSummary::create(default_covariate_names(cfg.k), means, ols.estimate, ols.variance,
                                  cfg.n_competitor);
}

// ---------------------------------------------------------------------------
// One replicate

struct MethodRecord {
  bool ok = false;
  std::string reason;
  double delta_10 = 0.0;
  double var_10 = 0.0;
  double delta_12 = 0.0;
  double var_12 = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool covered = false;
  int n_failed_resamples = 0;
};

struct ReplicateRecord {
  int replicate = 0;
  bool discarded = false;
  std::string reason;
  std::array<MethodRecord, 4> methods;
};

inline std::uint64_t replicate_key(const ScenarioConfig& cfg, int replicate) {
  return derive_key(cfg.base_seed, {static_cast<std::uint64_t>(cfg.scenario_id),
                                    static_cast<std::uint64_t>(replicate)});
}

struct ReplicateData {
  IndexPatientData ipd;
  AggregateSummary ald;
};

inline ReplicateData generate_replicate_data(const ScenarioConfig& cfg, int replicate) {
  const auto key = replicate_key(cfg, replicate);
  CounterRng index_rng(derive_key(key, {static_cast<std::uint64_t>(StreamPurpose::IndexTrial)}));
  CounterRng comp_rng(derive_key(key, {static_cast<std::uint64_t>(StreamPurpose::CompetitorTrial)}));
  auto ipd = generate_index_trial(cfg, index_rng);
  auto ald = generate_competitor_ald(cfg, comp_rng);
  return {std::move(ipd), std::move(ald)};
}

/// Generate one dataset pair and analyse it with all four methods over one
/// shared set of bootstrap resamples. A replicate whose full-data trial
/// weights cannot be estimated is discarded for every method.
inline ReplicateRecord run_replicate(const ScenarioConfig& cfg, int replicate, unsigned threads = 1,
                                     const MethodSettings& ms_base = {}) {
  ReplicateRecord rec;
  rec.replicate = replicate;
  const auto [ipd, ald] = generate_replicate_data(cfg, replicate);
  const auto data = AnalysisData::from(ipd, ald);
  MethodSettings ms = ms_base;
  ms.truncation_percentile = cfg.truncation_percentile;
  try {
    (void)fit_trial_weights(data.z_star, ms.trial);
  } catch (const Error& e) {
    rec.discarded = true;
    rec.reason = e.what();
    for (auto& m : rec.methods) m.reason = rec.reason;
    return rec;
  }

  const BootstrapSettings bs{cfg.bootstrap_B,
                             derive_key(replicate_key(cfg, replicate),
                                        {static_cast<std::uint64_t>(StreamPurpose::Bootstrap)}),
                             threads, cfg.max_failure_rate};
  const auto boot = bootstrap_methods(data, kAllMethods, bs, ms);
  for (Method m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    auto& r = rec.methods[mi];
    r.n_failed_resamples = boot[mi].result.n_failed;
    if (boot[mi].failure) {
      r.reason = *boot[mi].failure;
      continue;
    }
    const auto& b = boot[mi].result;
    const auto d10 = wald_estimate(b.point, b.se * b.se);
    const auto d12 = anchored_comparison(d10, ald.effect_estimate(), ald.effect_variance());
    r.ok = true;
    r.delta_10 = d10.point;
    r.var_10 = d10.variance;
    r.delta_12 = d12.point;
    r.var_12 = d12.variance;
    r.ci_lower = d12.ci_lower;
    r.ci_upper = d12.ci_upper;
    r.covered = d12.ci_lower <= cfg.true_delta_12 && cfg.true_delta_12 <= d12.ci_upper;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Grid

struct ScenarioRun {
  ScenarioConfig cfg;
  std::vector<ReplicateRecord> records;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Run every replicate of every scenario. Replicates are the parallel work
/// unit; results are stored by (scenario, replicate) index.
inline std::vector<ScenarioRun> run_grid(const std::vector<ScenarioConfig>& scenarios,
                                         unsigned threads = 0, const ProgressFn& progress = {}) {
  std::vector<ScenarioRun> runs;
  std::vector<std::pair<std::size_t, int>> jobs;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    scenarios[s].validate();
    runs.push_back({scenarios[s], std::vector<ReplicateRecord>(static_cast<std::size_t>(scenarios[s].n_replicates))});
    for (int r = 0; r < scenarios[s].n_replicates; ++r) jobs.emplace_back(s, r);
  }
  std::atomic<std::size_t> done{0};
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto [s, r] = jobs[j];
    runs[s].records[static_cast<std::size_t>(r)] = run_replicate(runs[s].cfg, r, 1);
    const auto d = done.fetch_add(1) + 1;
    if (progress) progress(d, jobs.size());
  });
  return runs;
}

/// Metrics per method; rows with fewer than two usable replicates are NaN.
inline MethodMetrics metrics_or_nan(Method m, const std::vector<EstimateRecord>& records, double truth,
                                    int n_discarded) {
  if (records.size() < 2) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {m, nan, nan, nan, nan, nan, nan, nan, nan, static_cast<int>(records.size()), n_discarded};
  }
  return compute_metrics(m, records, truth, n_discarded);
}

inline std::array<MethodMetrics, 4> scenario_metrics(const ScenarioRun& run) {
  std::array<MethodMetrics, 4> out;
  for (Method m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    std::vector<EstimateRecord> usable;
    for (const auto& rec : run.records) {
      if (rec.methods[mi].ok) usable.push_back({rec.methods[mi].delta_12, rec.methods[mi].covered});
    }
    const int discarded = static_cast<int>(run.records.size() - usable.size());
    out[mi] = metrics_or_nan(m, usable, run.cfg.true_delta_12, discarded);
  }
  return out;
}

inline constexpr std::string_view kMetricsHeader =
    "scenario,method,bias,bias_mcse,ese,ese_mcse,mse,mse_mcse,coverage,coverage_mcse,n_used,n_discarded\n";
inline constexpr std::string_view kEstimatesHeader = "scenario,method,replicate,delta_12,ci_lower,ci_upper\n";

inline void append_metrics_row(std::string& out, const std::string& scenario, const MethodMetrics& m) {
  using io::format_double;
  out += scenario + "," + std::string(to_string(m.method)) + "," + format_double(m.bias) + "," +
         format_double(m.bias_mcse) + "," + format_double(m.ese) + "," + format_double(m.ese_mcse) +
         "," + format_double(m.mse) + "," + format_double(m.mse_mcse) + "," +
         format_double(m.coverage) + "," + format_double(m.coverage_mcse) + "," +
         std::to_string(m.n_used) + "," + std::to_string(m.n_discarded) + "\n";
}

inline std::string metrics_csv(const std::vector<ScenarioRun>& runs) {
  std::string out(kMetricsHeader);
  for (const auto& run : runs) {
    for (const auto& m : scenario_metrics(run)) append_metrics_row(out, run.cfg.name, m);
  }
  return out;
}

/// One row per (scenario, method, replicate); unusable replicates keep their
/// row with empty estimate fields.
inline std::string estimates_csv(const std::vector<ScenarioRun>& runs) {
  std::string out(kEstimatesHeader);
  for (const auto& run : runs) {
    for (Method m : kAllMethods) {
      const auto mi = static_cast<std::size_t>(m);
      for (const auto& rec : run.records) {
        const auto& r = rec.methods[mi];
        out += run.cfg.name + "," + std::string(to_string(m)) + "," + std::to_string(rec.replicate) + ",";
        if (r.ok) {
          out += io::format_double(r.delta_12) + "," + io::format_double(r.ci_lower) + "," +
                 io::format_double(r.ci_upper);
        } else {
          out += ",,";
        }
        out += "\n";
      }
    }
  }
  return out;
}

/// Recompute metrics.csv from an estimates.csv text. Scenario and method
/// order follow first appearance in the file.
inline std::string metrics_from_estimates(std::string_view text, double true_delta) {
  struct Acc {
    std::vector<EstimateRecord> usable;
    int discarded = 0;
  };
  std::vector<std::string> scenario_order;
  std::map<std::string, std::vector<std::pair<Method, Acc>>> acc;

  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("estimates file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line + "\n" != kEstimatesHeader) throw ValidationError("unexpected estimates header: " + line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (io::trim(line).empty()) continue;
    const auto f = io::split_csv_line(line);
    const std::string where = "estimates row " + std::to_string(row);
    if (f.size() != 6) throw ValidationError(where + ": expected 6 fields");
    const auto method = parse_method(f[1]);
    if (!method) throw ValidationError(where + ": unknown method '" + f[1] + "'");
    if (!acc.count(f[0])) scenario_order.push_back(f[0]);
    auto& per_method = acc[f[0]];
    auto it = std::find_if(per_method.begin(), per_method.end(),
                           [&](const auto& p) { return p.first == *method; });
    if (it == per_method.end()) {
      per_method.emplace_back(*method, Acc{});
      it = std::prev(per_method.end());
    }
    auto& a = it->second;
    if (io::trim(f[3]).empty()) {
      ++a.discarded;
      continue;
    }
    const auto d = io::parse_double(f[3]);
    const auto lo = io::parse_double(f[4]);
    const auto hi = io::parse_double(f[5]);
    if (!d || !lo || !hi) throw ValidationError(where + ": non-numeric estimate");
    a.usable.push_back({*d, *lo <= true_delta && true_delta <= *hi});
  }
  std::string out(kMetricsHeader);
  for (const auto& s : scenario_order) {
    for (const auto& [m, a] : acc[s]) {
      append_metrics_row(out, s, metrics_or_nan(m, a.usable, true_delta, a.discarded));
    }
  }
  return out;
}

}  // namespace maic

#endif  // MAIC_SIMULATION_HPP
