/**
 * data_model.hpp
 *
 * The two-study data model: individual patient data (IPD) for the index
 * A-vs-C trial and the published aggregate summary (ALD) of the competitor
 * B-vs-C trial, plus the positive weight vectors produced by the estimators.
 *
 * Covariates are identified by name at file boundaries and by column index
 * everywhere else.
 */

#ifndef MAIC_DATA_MODEL_HPP
#define MAIC_DATA_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "maic/error.hpp"
#include "maic/io.hpp"

namespace maic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexVector = std::vector<std::size_t>;

inline constexpr std::string_view kTreatmentColumn = "treatment";
inline constexpr std::string_view kOutcomeColumn = "outcome";

class IndexPatientData {
 public:
  /// Validating factory. Throws ValidationError on any invariant violation.
  /// Empty `covariate_names` defaults to x1..xk.
  static IndexPatientData create(Matrix covariates, Eigen::VectorXi treatment, Vector outcome,
                                 IndexVector effect_modifier_columns,
                                 std::vector<std::string> covariate_names = {}) {
    const auto n = covariates.rows();
    const auto k = covariates.cols();
    if (n < 2) throw ValidationError("index trial needs at least 2 subjects");
    if (k < 1) throw ValidationError("index trial needs at least 1 covariate");
    if (treatment.size() != n || outcome.size() != n) {
      throw ValidationError("covariates, treatment and outcome lengths differ");
    }
    if (!covariates.allFinite()) throw ValidationError("non-finite covariate value");
    if (!outcome.allFinite()) throw ValidationError("non-finite outcome value");
    Eigen::Index treated = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (treatment[i] != 0 && treatment[i] != 1) {
        throw ValidationError("treatment must be 0 or 1 (subject " + std::to_string(i + 1) + ")");
      }
      treated += treatment[i];
    }
    if (treated == 0) throw ValidationError("treatment arm empty");
    if (treated == n) throw ValidationError("comparator arm empty");

    if (effect_modifier_columns.empty()) throw ValidationError("no effect modifiers given");
    auto sorted = effect_modifier_columns;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("duplicate effect-modifier column");
    }
    if (sorted.back() >= static_cast<std::size_t>(k)) {
      throw ValidationError("effect-modifier column index out of range");
    }

    if (covariate_names.empty()) {
      for (Eigen::Index j = 0; j < k; ++j) covariate_names.push_back("x" + std::to_string(j + 1));
    }
    if (covariate_names.size() != static_cast<std::size_t>(k)) {
      throw ValidationError("covariate name count does not match column count");
    }

    IndexPatientData d;
    d.x_ = std::move(covariates);
    d.t_ = std::move(treatment);
    d.y_ = std::move(outcome);
    d.em_ = std::move(effect_modifier_columns);
    d.names_ = std::move(covariate_names);
    return d;
  }

  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index k() const noexcept { return x_.cols(); }
  const Matrix& covariates() const noexcept { return x_; }
  const Eigen::VectorXi& treatment() const noexcept { return t_; }
  const Vector& outcome() const noexcept { return y_; }
  const IndexVector& effect_modifier_columns() const noexcept { return em_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  /// The effect-modifier submatrix z (n x p).
  Matrix effect_modifiers() const {
    Matrix z(n(), static_cast<Eigen::Index>(em_.size()));
    for (std::size_t j = 0; j < em_.size(); ++j) {
      z.col(static_cast<Eigen::Index>(j)) = x_.col(static_cast<Eigen::Index>(em_[j]));
    }
    return z;
  }

  /// Rows selected by `rows` (repeats allowed). Throws ValidationError if the
  /// selection leaves an arm empty.
  IndexPatientData subset(std::span<const std::size_t> rows) const {
    const auto m = static_cast<Eigen::Index>(rows.size());
    Matrix x(m, k());
    Eigen::VectorXi t(m);
    Vector y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
      x.row(i) = x_.row(r);
      t[i] = t_[r];
      y[i] = y_[r];
    }
    return create(std::move(x), std::move(t), std::move(y), em_, names_);
  }

 private:
  IndexPatientData() = default;

  Matrix x_;
  Eigen::VectorXi t_;
  Vector y_;
  IndexVector em_;
  std::vector<std::string> names_;
};

class AggregateSummary {
 public:
  static AggregateSummary create(std::vector<std::string> covariate_names, Vector covariate_means,
                                 double effect_estimate, double effect_variance,
                                 std::optional<long long> sample_size = std::nullopt) {
    if (covariate_names.size() != static_cast<std::size_t>(covariate_means.size())) {
      throw ValidationError("covariate name count does not match mean count");
    }
    if (!covariate_means.allFinite()) throw ValidationError("non-finite covariate mean");
    if (!std::isfinite(effect_estimate)) throw ValidationError("effect_estimate must be finite");
    if (!std::isfinite(effect_variance) || effect_variance < 0.0) {
      throw ValidationError("effect_variance must be finite and non-negative");
    }
    if (sample_size && *sample_size <= 0) throw ValidationError("sample_size must be positive");
    AggregateSummary s;
    s.names_ = std::move(covariate_names);
    s.means_ = std::move(covariate_means);
    s.estimate_ = effect_estimate;
    s.variance_ = effect_variance;
    s.sample_size_ = sample_size;
    return s;
  }

  const std::vector<std::string>& covariate_names() const noexcept { return names_; }
  const Vector& covariate_means() const noexcept { return means_; }
  double effect_estimate() const noexcept { return estimate_; }
  double effect_variance() const noexcept { return variance_; }
  std::optional<long long> sample_size() const noexcept { return sample_size_; }

  std::optional<double> mean_for(std::string_view name) const {
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (names_[j] == name) return means_[static_cast<Eigen::Index>(j)];
    }
    return std::nullopt;
  }

 private:
  AggregateSummary() = default;

  std::vector<std::string> names_;
  Vector means_;
  double estimate_ = 0.0;
  double variance_ = 0.0;
  std::optional<long long> sample_size_;
};

enum class WeightKind { TrialOdds, Combined, TruncatedTrialOdds, TruncatedCombined };

constexpr WeightKind truncated_kind(WeightKind k) noexcept {
  switch (k) {
    case WeightKind::TrialOdds:
    case WeightKind::TruncatedTrialOdds:
      return WeightKind::TruncatedTrialOdds;
    case WeightKind::Combined:
    case WeightKind::TruncatedCombined:
      return WeightKind::TruncatedCombined;
  }
  return k;
}

constexpr std::string_view to_string(WeightKind k) noexcept {
  switch (k) {
    case WeightKind::TrialOdds: return "trial_odds";
    case WeightKind::Combined: return "combined";
    case WeightKind::TruncatedTrialOdds: return "truncated_trial_odds";
    case WeightKind::TruncatedCombined: return "truncated_combined";
  }
  return "unknown";
}

/// Strictly positive, finite weights. Only ratios matter downstream.
class WeightVector {
 public:
  WeightVector(Vector values, WeightKind kind) : values_(std::move(values)), kind_(kind) {
    if (values_.size() == 0) throw ValidationError("empty weight vector");
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]) || !(values_[i] > 0.0)) {
        throw ValidationError("weights must be finite and strictly positive");
      }
    }
  }

  const Vector& values() const noexcept { return values_; }
  WeightKind kind() const noexcept { return kind_; }
  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const noexcept { return values_[i]; }

 private:
  Vector values_;
  WeightKind kind_;
};

/// z* = z - theta_z, matching effect modifiers to summary means by name.
inline Matrix center_covariates(const IndexPatientData& ipd, const AggregateSummary& summary) {
  const auto& em = ipd.effect_modifier_columns();
  Matrix z_star(ipd.n(), static_cast<Eigen::Index>(em.size()));
  for (std::size_t j = 0; j < em.size(); ++j) {
    const auto& name = ipd.covariate_names()[em[j]];
    const auto theta = summary.mean_for(name);
    if (!theta) {
      throw ValidationError("effect modifier '" + name + "' has no mean in the aggregate summary");
    }
    z_star.col(static_cast<Eigen::Index>(j)) =
        ipd.covariates().col(static_cast<Eigen::Index>(em[j])).array() - *theta;
  }
  return z_star;
}

// ---------------------------------------------------------------------------
// File formats

/// Parse IPD CSV text: header `treatment,outcome,<cov>...` (column order of
/// treatment/outcome is free; covariates keep file order). Empty
/// `effect_modifier_names` selects every covariate.
inline IndexPatientData parse_ipd_csv(std::string_view text,
                                      const std::vector<std::string>& effect_modifier_names = {}) {
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
  }
  // a UTF-8 byte-order mark on the header is tolerated
  if (!lines.empty() && lines[0].rfind("\xEF\xBB\xBF", 0) == 0) lines[0].erase(0, 3);
  while (!lines.empty() && io::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ValidationError("IPD file is empty");

  auto header = io::split_csv_line(lines[0]);
  for (auto& h : header) h = std::string(io::trim(h));
  std::optional<std::size_t> t_col, y_col;
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == kTreatmentColumn) {
      t_col = c;
    } else if (header[c] == kOutcomeColumn) {
      y_col = c;
    } else {
      if (header[c].empty()) throw ValidationError("empty column name in IPD header");
      if (std::find(cov_names.begin(), cov_names.end(), header[c]) != cov_names.end()) {
        throw ValidationError("duplicate column '" + header[c] + "' in IPD header");
      }
      cov_cols.push_back(c);
      cov_names.push_back(header[c]);
    }
  }
  if (!t_col) throw ValidationError("missing column 'treatment'");
  if (!y_col) throw ValidationError("missing column 'outcome'");
  if (cov_cols.empty()) throw ValidationError("IPD has no covariate columns");

  const auto n = static_cast<Eigen::Index>(lines.size() - 1);
  Matrix x(n, static_cast<Eigen::Index>(cov_cols.size()));
  Eigen::VectorXi t(n);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto fields = io::split_csv_line(lines[static_cast<std::size_t>(i) + 1]);
    const std::string row = "row " + std::to_string(i + 1);
    if (fields.size() != header.size()) {
      throw ValidationError(row + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    }
    auto cell = [&](std::size_t c) {
      if (io::trim(fields[c]).empty()) {
        throw ValidationError(row + ", column '" + header[c] + "': missing value");
      }
      const auto v = io::parse_double(fields[c]);
      if (!v) {
        throw ValidationError(row + ", column '" + header[c] + "': non-numeric value '" +
                              fields[c] + "'");
      }
      return *v;
    };
    const double tv = cell(*t_col);
    if (tv != 0.0 && tv != 1.0) {
      throw ValidationError(row + ", column 'treatment': must be 0 or 1");
    }
    t[i] = static_cast<int>(tv);
    y[i] = cell(*y_col);
    for (std::size_t j = 0; j < cov_cols.size(); ++j) x(i, static_cast<Eigen::Index>(j)) = cell(cov_cols[j]);
  }

  IndexVector em;
  if (effect_modifier_names.empty()) {
    for (std::size_t j = 0; j < cov_names.size(); ++j) em.push_back(j);
  } else {
    for (const auto& name : effect_modifier_names) {
      auto it = std::find(cov_names.begin(), cov_names.end(), name);
      if (it == cov_names.end()) {
        throw ValidationError("effect modifier '" + name + "' is not a covariate column");
      }
      em.push_back(static_cast<std::size_t>(it - cov_names.begin()));
    }
  }
  return IndexPatientData::create(std::move(x), std::move(t), std::move(y), std::move(em),
                                  std::move(cov_names));
}

inline IndexPatientData load_ipd(const std::filesystem::path& path,
                                 const std::vector<std::string>& effect_modifier_names = {}) {
  const auto text = io::read_file(path);
  try {
    return parse_ipd_csv(text, effect_modifier_names);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

/// Serialize IPD with shortest round-trip number formatting.
inline std::string write_ipd_csv(const IndexPatientData& ipd) {
  std::string out = "treatment,outcome";
  for (const auto& name : ipd.covariate_names()) out += "," + name;
  out += "\n";
  for (Eigen::Index i = 0; i < ipd.n(); ++i) {
    out += std::to_string(ipd.treatment()[i]);
    out += ",";
    out += io::format_double(ipd.outcome()[i]);
    for (Eigen::Index j = 0; j < ipd.k(); ++j) {
      out += ",";
      out += io::format_double(ipd.covariates()(i, j));
    }
    out += "\n";
  }
  return out;
}

inline AggregateSummary ald_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) throw ValidationError("ALD document must be a JSON object");
  auto require = [&](const char* key) -> const nlohmann::ordered_json& {
    auto it = doc.find(key);
    if (it == doc.end()) throw ValidationError(std::string("missing required field '") + key + "'");
    return *it;
  };
  const auto& means = require("covariate_means");
  if (!means.is_object() || means.empty()) {
    throw ValidationError("'covariate_means' must be a non-empty object of name -> number");
  }
  std::vector<std::string> names;
  Vector values(static_cast<Eigen::Index>(means.size()));
  Eigen::Index j = 0;
  for (auto it = means.begin(); it != means.end(); ++it, ++j) {
    if (!it.value().is_number()) {
      throw ValidationError("covariate mean '" + it.key() + "' is not a number");
    }
    names.push_back(it.key());
    values[j] = it.value().get<double>();
  }
  const auto& est = require("effect_estimate");
  const auto& var = require("effect_variance");
  if (!est.is_number()) throw ValidationError("'effect_estimate' must be a number");
  if (!var.is_number()) throw ValidationError("'effect_variance' must be a number");
  std::optional<long long> n;
  if (auto it = doc.find("sample_size"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw ValidationError("'sample_size' must be an integer");
    n = it->get<long long>();
  }
  return AggregateSummary::create(std::move(names), std::move(values), est.get<double>(),
                                  var.get<double>(), n);
}

inline nlohmann::ordered_json ald_to_json(const AggregateSummary& s) {
  nlohmann::ordered_json means = nlohmann::ordered_json::object();
  for (std::size_t j = 0; j < s.covariate_names().size(); ++j) {
    means[s.covariate_names()[j]] = s.covariate_means()[static_cast<Eigen::Index>(j)];
  }
  nlohmann::ordered_json doc;
  doc["covariate_means"] = means;
  doc["effect_estimate"] = s.effect_estimate();
  doc["effect_variance"] = s.effect_variance();
  if (s.sample_size()) doc["sample_size"] = *s.sample_size();
  return doc;
}

inline AggregateSummary load_ald(const std::filesystem::path& path) {
  const auto text = io::read_file(path);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return ald_from_json(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace maic

#endif  // MAIC_DATA_MODEL_HPP
