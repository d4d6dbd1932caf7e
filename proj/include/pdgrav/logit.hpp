#pragma once

// Fixed-effects logit for bounded extensive-margin outcomes, with split-panel
// jackknife bias correction and pair-cluster bootstrap inference.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/estimation_problem.hpp"
#include "pdgrav/ppml.hpp"

namespace pdgrav {

struct LogitEstimate {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  std::size_t n_obs = 0;
  // Pairs whose outcome never varies, dropped before estimation.
  std::vector<std::string> dropped_perfectly_classified;
  // Further rows dropped because some other fixed-effect group was constant.
  std::size_t n_dropped_separated = 0;
  std::vector<std::string> dropped_collinear;
  int iterations = 0;
  double deviance = 0.0;
  std::vector<std::size_t> sample;  // rows of the input problem
  Eigen::VectorXd fitted;
};

// Bernoulli quasi-likelihood with absorbed fixed effects. Outcomes must lie
// in [0, 1]. Throws DataError when nothing survives the drops and
// ConvergenceError on non-convergence.
LogitEstimate fit_fe_logit(const EstimationProblem& problem, const GlmOptions& options = {});

// Pair labels whose outcome has zero variance across their rows.
std::vector<std::string> constant_outcome_pairs(const EstimationProblem& problem);

struct LogitFit {
  std::vector<std::string> names;
  Eigen::VectorXd corrected;    // 2 * full - (half1 + half2) / 2
  Eigen::VectorXd uncorrected;  // full-sample estimate
  Eigen::VectorXd half1, half2;
  std::vector<int> half1_periods, half2_periods;
  // Pairs constant within one half only, dropped from that half.
  std::vector<std::string> half1_drops, half2_drops;
  std::vector<std::string> dropped_perfectly_classified;
  std::size_t n_obs = 0;
  std::vector<std::size_t> sample;  // rows of the input problem

  Eigen::VectorXd bootstrap_se;
  Eigen::MatrixXd bootstrap_covariance;
  int replications = 0;
  int failed_replications = 0;
};

// The first ceil(T/2) periods form the first half. Both halves use the pair
// set that survives the full-sample drop. Needs at least four periods.
LogitFit split_panel_jackknife(const EstimationProblem& problem, const GlmOptions& options = {});

// Per-coefficient jackknife combination.
Eigen::VectorXd spj_combine(const Eigen::VectorXd& full, const Eigen::VectorXd& half1,
                            const Eigen::VectorXd& half2);

// Splits sorted distinct periods; the first half gets ceil(T/2).
std::pair<std::vector<int>, std::vector<int>> split_periods(std::vector<int> periods);

struct BootstrapResult {
  Eigen::VectorXd se;
  Eigen::MatrixXd covariance;
  int replications = 0;
  int failures = 0;
};

using ProblemEstimator = std::function<Eigen::VectorXd(const EstimationProblem&)>;

// Draws clusters (directed pairs) with replacement, keeping all rows of each
// draw; repeated draws become distinct pairs and clusters. Replicate b uses a
// stream derived from (seed, b), so results do not depend on `threads`.
// Replicates whose estimator throws count as failures; more than 5% failing
// throws ConvergenceError.
BootstrapResult pair_bootstrap(const EstimationProblem& problem, const ProblemEstimator& estimator,
                               int replications, std::uint64_t seed, int threads = 0);

// Cluster-resampled problem for one replicate.
EstimationProblem resample_clusters(const EstimationProblem& problem, std::uint64_t seed);

// Jackknife estimate plus bootstrap standard errors of the corrected
// coefficients. replications = 0 skips the bootstrap.
LogitFit estimate_logit(const EstimationProblem& problem, int replications, std::uint64_t seed,
                        const GlmOptions& options = {}, int threads = 0);

}  // namespace pdgrav
