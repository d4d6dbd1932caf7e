#include "pdgrav/ppml.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "glm_hdfe.hpp"
#include "pdgrav/errors.hpp"

namespace pdgrav {

std::optional<Eigen::Index> FitResult::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return static_cast<Eigen::Index>(k);
  }
  return std::nullopt;
}

Eigen::MatrixXd cluster_meat(const Eigen::MatrixXd& absorbed_design,
                             const Eigen::VectorXd& score_residual, std::span<const int> cluster) {
  const Eigen::Index p = absorbed_design.cols();
  if (static_cast<Eigen::Index>(cluster.size()) != absorbed_design.rows()) {
    throw DataError("cluster labels do not match the design");
  }
  std::unordered_map<int, Eigen::Index> slot;
  for (int c : cluster) slot.try_emplace(c, static_cast<Eigen::Index>(slot.size()));
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(slot.size()), p);
  for (Eigen::Index r = 0; r < absorbed_design.rows(); ++r) {
    sums.row(slot[cluster[static_cast<std::size_t>(r)]]) +=
        absorbed_design.row(r) * score_residual(r);
  }
  return sums.transpose() * sums;
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& absorbed_design, const Eigen::VectorXd& weights,
                             const Eigen::VectorXd& score_residual, std::span<const int> cluster) {
  std::unordered_map<int, char> distinct;
  for (int c : cluster) distinct.emplace(c, 1);
  const auto g = static_cast<double>(distinct.size());
  if (distinct.size() < 2) throw DataError("cluster-robust covariance needs at least two clusters");

  const Eigen::Index p = absorbed_design.cols();
  if (p == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::MatrixXd bread_inv =
      absorbed_design.transpose() * weights.asDiagonal() * absorbed_design;
  const Eigen::MatrixXd bread = bread_inv.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd meat = cluster_meat(absorbed_design, score_residual, cluster);
  Eigen::MatrixXd v = (g / (g - 1.0)) * bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

FitResult fit_ppml(const EstimationProblem& problem, const GlmOptions& options) {
  problem.validate();
  const Eigen::Index n = problem.n_rows();
  if (n == 0) throw DataError("empty estimation sample");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(problem.y(i)) || problem.y(i) < 0.0) {
      throw DataError("PPML outcome must be finite and non-negative (row " + std::to_string(i) + ")");
    }
  }
  if (!problem.X.allFinite()) throw DataError("non-finite regressor value");

  const auto drop = detail::boundary_groups(problem, detail::GlmFamily::kPoisson, {});
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < drop.size(); ++r) {
    if (!drop[r]) keep.push_back(r);
  }
  if (keep.empty()) throw DataError("every observation sits in an all-zero fixed-effect group");
  const EstimationProblem reduced = subset_rows(problem, keep);
  if (reduced.y.sum() <= 0.0) throw DataError("outcome is zero everywhere");

  detail::GlmCore core = detail::fit_glm_hdfe(reduced, detail::GlmFamily::kPoisson, options);

  FitResult fit;
  fit.names = core.names;
  fit.coefficients = core.beta;
  fit.n_obs = keep.size();
  fit.n_dropped_separated = static_cast<std::size_t>(n) - keep.size();
  fit.dropped_collinear = core.dropped_collinear;
  fit.iterations = core.iterations;
  fit.deviance = core.deviance;
  fit.final_deviance_change = core.last_change;
  fit.deviance_trace = core.trace;
  fit.converged = true;
  for (const auto& dim : reduced.fe) fit.absorbed_fe.emplace_back(dim.name, dim.n_groups());
  fit.sample = keep;
  fit.fitted = core.mu;
  fit.residuals = (reduced.y - core.mu).cwiseQuotient(core.mu);

  std::vector<int> cluster = reduced.cluster;
  if (cluster.empty()) cluster = reduced.pair;
  if (cluster.empty()) {
    cluster.resize(keep.size());
    for (std::size_t k = 0; k < cluster.size(); ++k) cluster[k] = static_cast<int>(k);
  }
  int groups = 0;
  compact_ids(cluster, &groups);
  fit.n_clusters = static_cast<std::size_t>(groups);
  fit.covariance = cluster_vcov(core.absorbed_design, core.weights, reduced.y - core.mu, cluster);
  fit.absorbed_design = std::move(core.absorbed_design);
  fit.weights = std::move(core.weights);
  return fit;
}

}  // namespace pdgrav
