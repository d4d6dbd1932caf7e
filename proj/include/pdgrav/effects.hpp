#pragma once

// One-standard-deviation effects of political distance with delta-method
// intervals.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/estimation_problem.hpp"
#include "pdgrav/logit.hpp"
#include "pdgrav/ppml.hpp"

namespace pdgrav {

struct CoefficientTable {
  std::vector<std::string> names;
  Eigen::VectorXd estimates;
  Eigen::MatrixXd covariance;

  static CoefficientTable from(const FitResult& fit);
  // Corrected coefficients with the bootstrap covariance.
  static CoefficientTable from(const LogitFit& fit);
};

// The composite slope b = sum_k weights[k] * beta_k.
struct Condition {
  std::string label;
  std::map<std::string, double> weights;
};

// b = beta_pd + sum_c value_c * beta_{pd_x_c} for covariates c.
Condition pd_condition(std::string label, const std::map<std::string, double>& covariates,
                       std::string_view pd_term = "PD");

struct EffectReport {
  std::string label;
  Condition condition;
  std::string unit;  // "percent" or "pp"
  double b = 0.0;
  double b_variance = 0.0;
  double effect = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double sd_used = 0.0;
};

inline constexpr double kNormal975 = 1.959963984540054;

// 100 * (exp(b * sd) - 1), SE from gradient 100 * sd * exp(b * sd) * c.
// Throws ConfigError when the condition names an absent coefficient or
// sd <= 0.
EffectReport one_sd_effect(const CoefficientTable& fit, double sd, const Condition& condition);

// 100 * (L(logit(p) + b * sd) - p) in percentage points.
EffectReport logit_effect_pp(const CoefficientTable& fit, double sd, const Condition& condition,
                             double baseline_p);

double logistic(double x);

// Sample SD (n - 1) of column `name` over the given rows, optionally only
// international ones.
double regressor_sd(const EstimationProblem& problem, std::string_view name,
                    std::span<const std::size_t> rows, bool international_only = true);

}  // namespace pdgrav
