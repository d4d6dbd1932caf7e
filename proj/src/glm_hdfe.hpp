#pragma once

// IRLS with fixed effects absorbed inside each step. Shared by the Poisson
// and logit estimators; not part of the public interface.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/estimation_problem.hpp"
#include "pdgrav/ppml.hpp"

namespace pdgrav::detail {

enum class GlmFamily { kPoisson, kBernoulli };

struct GlmCore {
  std::vector<std::string> names;
  std::vector<std::string> dropped_collinear;
  Eigen::VectorXd beta;
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
  // Absorbed design and IRLS weights evaluated at the final mu.
  Eigen::MatrixXd absorbed_design;
  Eigen::VectorXd weights;
  int iterations = 0;
  double deviance = 0.0;
  double last_change = 0.0;
  std::vector<double> trace;
};

// Throws ConvergenceError when max_iterations is reached.
GlmCore fit_glm_hdfe(const EstimationProblem& problem, GlmFamily family, const GlmOptions& options);

// Rows inside a fixed-effect group whose outcome is constant at a boundary
// (all zero for Poisson; all zero or all one for Bernoulli), repeated until
// no such group remains. `drop` marks rows already excluded.
std::vector<char> boundary_groups(const EstimationProblem& problem, GlmFamily family,
                                  std::vector<char> drop);

// Greedy pivoted Cholesky of a symmetric PSD matrix. Returns the indices of
// pivots above tol * leading pivot, in ascending order.
std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& gram, double tol);

double deviance(GlmFamily family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu);

}  // namespace pdgrav::detail
