#include "pdgrav/effects.hpp"

#include <cmath>
#include <numeric>

#include "pdgrav/errors.hpp"

namespace pdgrav {

CoefficientTable CoefficientTable::from(const FitResult& fit) {
  return {fit.names, fit.coefficients, fit.covariance};
}

CoefficientTable CoefficientTable::from(const LogitFit& fit) {
  CoefficientTable t{fit.names, fit.corrected, fit.bootstrap_covariance};
  if (t.covariance.size() == 0) {
    const auto p = static_cast<Eigen::Index>(fit.names.size());
    t.covariance = Eigen::MatrixXd::Constant(p, p, std::nan(""));
  }
  return t;
}

Condition pd_condition(std::string label, const std::map<std::string, double>& covariates,
                       std::string_view pd_term) {
  Condition c;
  c.label = std::move(label);
  c.weights[std::string(pd_term)] = 1.0;
  for (const auto& [name, value] : covariates) {
    c.weights[std::string(pd_term) + "_x_" + name] += value;
  }
  return c;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

struct Combination {
  double b = 0.0;
  double variance = 0.0;
};

Combination combine(const CoefficientTable& fit, const Condition& condition) {
  const auto p = static_cast<Eigen::Index>(fit.names.size());
  if (fit.estimates.size() != p || fit.covariance.rows() != p || fit.covariance.cols() != p) {
    throw DataError("coefficient table has inconsistent dimensions");
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
  for (const auto& [name, w] : condition.weights) {
    Eigen::Index k = 0;
    while (k < p && fit.names[static_cast<std::size_t>(k)] != name) ++k;
    if (k == p) throw ConfigError("condition '" + condition.label + "' references absent coefficient '" + name + "'");
    c(k) += w;
  }
  return {c.dot(fit.estimates), c.dot(fit.covariance * c)};
}

void check_sd(double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd)) throw ConfigError("standard deviation must be positive");
}

void finish(EffectReport& r, double gradient) {
  r.se = std::abs(gradient) * std::sqrt(std::max(r.b_variance, 0.0));
  r.ci_low = r.effect - kNormal975 * r.se;
  r.ci_high = r.effect + kNormal975 * r.se;
}

}  // namespace

EffectReport one_sd_effect(const CoefficientTable& fit, double sd, const Condition& condition) {
  check_sd(sd);
  const Combination comb = combine(fit, condition);
  EffectReport r;
  r.label = condition.label;
  r.condition = condition;
  r.unit = "percent";
  r.b = comb.b;
  r.b_variance = comb.variance;
  r.sd_used = sd;
  const double scale = std::exp(comb.b * sd);
  r.effect = 100.0 * (scale - 1.0);
  finish(r, 100.0 * sd * scale);
  return r;
}

EffectReport logit_effect_pp(const CoefficientTable& fit, double sd, const Condition& condition,
                             double baseline_p) {
  check_sd(sd);
  if (!(baseline_p > 0.0 && baseline_p < 1.0)) throw ConfigError("baseline probability must lie in (0, 1)");
  const Combination comb = combine(fit, condition);
  EffectReport r;
  r.label = condition.label;
  r.condition = condition;
  r.unit = "pp";
  r.b = comb.b;
  r.b_variance = comb.variance;
  r.sd_used = sd;
  const double lambda = std::log(baseline_p / (1.0 - baseline_p));
  const double shifted = logistic(lambda + comb.b * sd);
  r.effect = 100.0 * (shifted - baseline_p);
  finish(r, 100.0 * sd * shifted * (1.0 - shifted));
  return r;
}

double regressor_sd(const EstimationProblem& problem, std::string_view name,
                    std::span<const std::size_t> rows, bool international_only) {
  Eigen::Index col = 0;
  const auto p = static_cast<Eigen::Index>(problem.names.size());
  while (col < p && problem.names[static_cast<std::size_t>(col)] != name) ++col;
  if (col == p) throw ConfigError("no regressor named '" + std::string(name) + "'");

  std::vector<double> v;
  auto take = [&](std::size_t r) {
    if (international_only && !problem.domestic.empty() && problem.domestic[r]) return;
    v.push_back(problem.X(static_cast<Eigen::Index>(r), col));
  };
  if (rows.empty()) {
    for (std::size_t r = 0; r < static_cast<std::size_t>(problem.n_rows()); ++r) take(r);
  } else {
    for (std::size_t r : rows) take(r);
  }
  if (v.size() < 2) throw DataError("need at least two observations for a standard deviation");
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace pdgrav
