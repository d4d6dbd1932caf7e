#pragma once

// Poisson pseudo-maximum likelihood with high-dimensional fixed effects.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/absorb.hpp"
#include "pdgrav/estimation_problem.hpp"

namespace pdgrav {

struct GlmOptions {
  // Relative deviance change |dev - dev_prev| / max(|dev|, 0.1).
  double deviance_tolerance = 1e-8;
  // Poisson fits also require |sum(y - mu)| <= score_tolerance * sum(mu) in
  // every fixed-effect group before stopping. A small group adds little to
  // the deviance, so the deviance rule alone can stop early on it.
  double score_tolerance = 1e-6;
  int max_iterations = 100;
  AbsorbOptions absorb;
  // Columns whose absorbed, norm-scaled pivot falls below this fraction of the
  // leading pivot are dropped as collinear.
  double collinearity_tolerance = 1e-10;
  // Starting linear predictor is ln(y + start_shift * mean(y)) for Poisson.
  double start_shift = 0.5;
};

struct FitResult {
  std::vector<std::string> names;  // retained regressors
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // cluster-robust

  std::size_t n_obs = 0;
  std::size_t n_dropped_separated = 0;
  std::vector<std::string> dropped_collinear;
  std::size_t n_clusters = 0;

  int iterations = 0;
  double deviance = 0.0;
  double final_deviance_change = 0.0;
  std::vector<double> deviance_trace;
  bool converged = false;

  // (dimension name, groups remaining after drops).
  std::vector<std::pair<std::string, int>> absorbed_fe;

  // Per retained observation; sample[k] is the row in the input problem.
  std::vector<std::size_t> sample;
  Eigen::VectorXd fitted;     // mu
  Eigen::VectorXd residuals;  // working residuals (y - mu) / mu
  Eigen::MatrixXd absorbed_design;
  Eigen::VectorXd weights;

  std::optional<Eigen::Index> index_of(std::string_view name) const;
};

// Throws DataError for negative or non-finite outcomes, empty samples and a
// missing fixed-effect list; ConvergenceError (carrying the
// deviance trace) when max_iterations is reached.
FitResult fit_ppml(const EstimationProblem& problem, const GlmOptions& options = {});

// Sandwich covariance G/(G-1) * B^-1 M B^-1 with B = X'WX on the absorbed
// design and M = sum over clusters of outer products of summed scores
// x_r * score_residual_r. Throws DataError with fewer than two clusters.
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& absorbed_design, const Eigen::VectorXd& weights,
                             const Eigen::VectorXd& score_residual, std::span<const int> cluster);

// M alone.
Eigen::MatrixXd cluster_meat(const Eigen::MatrixXd& absorbed_design,
                             const Eigen::VectorXd& score_residual, std::span<const int> cluster);

}  // namespace pdgrav
