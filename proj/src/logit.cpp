#include "pdgrav/logit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>

#include "glm_hdfe.hpp"
#include "pdgrav/errors.hpp"
#include "pdgrav/rng.hpp"

namespace pdgrav {

std::vector<std::string> constant_outcome_pairs(const EstimationProblem& problem) {
  std::vector<double> lo(problem.pair_labels.size(), INFINITY), hi(problem.pair_labels.size(), -INFINITY);
  for (std::size_t r = 0; r < problem.pair.size(); ++r) {
    const auto p = static_cast<std::size_t>(problem.pair[r]);
    const double y = problem.y(static_cast<Eigen::Index>(r));
    lo[p] = std::min(lo[p], y);
    hi[p] = std::max(hi[p], y);
  }
  std::vector<std::string> out;
  for (std::size_t p = 0; p < lo.size(); ++p) {
    if (lo[p] <= hi[p] && lo[p] == hi[p]) out.push_back(problem.pair_labels[p]);
  }
  return out;
}

LogitEstimate fit_fe_logit(const EstimationProblem& problem, const GlmOptions& options) {
  problem.validate();
  const Eigen::Index n = problem.n_rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = problem.y(i);
    if (!std::isfinite(y) || y < 0.0 || y > 1.0) {
      throw DataError("logit outcome must lie in [0, 1] (row " + std::to_string(i) + ")");
    }
  }
  if (!problem.X.allFinite()) throw DataError("non-finite regressor value");

  LogitEstimate est;
  est.dropped_perfectly_classified = constant_outcome_pairs(problem);
  const std::set<std::string> constant(est.dropped_perfectly_classified.begin(),
                                       est.dropped_perfectly_classified.end());
  std::vector<char> drop(static_cast<std::size_t>(n), 0);
  for (std::size_t r = 0; r < problem.pair.size(); ++r) {
    if (constant.count(problem.pair_labels[static_cast<std::size_t>(problem.pair[r])])) drop[r] = 1;
  }
  const auto after_pairs = std::count(drop.begin(), drop.end(), 1);
  drop = detail::boundary_groups(problem, detail::GlmFamily::kBernoulli, std::move(drop));
  const auto after_groups = std::count(drop.begin(), drop.end(), 1);
  est.n_dropped_separated = static_cast<std::size_t>(after_groups - after_pairs);

  for (std::size_t r = 0; r < drop.size(); ++r) {
    if (!drop[r]) est.sample.push_back(r);
  }
  if (est.sample.empty()) throw DataError("no observations left after perfect-classification drops");
  const EstimationProblem reduced = subset_rows(problem, est.sample);

  detail::GlmCore core = detail::fit_glm_hdfe(reduced, detail::GlmFamily::kBernoulli, options);
  est.names = core.names;
  est.coefficients = core.beta;
  est.n_obs = est.sample.size();
  est.dropped_collinear = core.dropped_collinear;
  est.iterations = core.iterations;
  est.deviance = core.deviance;
  est.fitted = core.mu;
  return est;
}

Eigen::VectorXd spj_combine(const Eigen::VectorXd& full, const Eigen::VectorXd& half1,
                            const Eigen::VectorXd& half2) {
  return 2.0 * full - 0.5 * (half1 + half2);
}

std::pair<std::vector<int>, std::vector<int>> split_periods(std::vector<int> periods) {
  std::sort(periods.begin(), periods.end());
  periods.erase(std::unique(periods.begin(), periods.end()), periods.end());
  const std::size_t first = (periods.size() + 1) / 2;
  return {std::vector<int>(periods.begin(), periods.begin() + static_cast<std::ptrdiff_t>(first)),
          std::vector<int>(periods.begin() + static_cast<std::ptrdiff_t>(first), periods.end())};
}

namespace {

Eigen::VectorXd align(const LogitEstimate& est, const std::vector<std::string>& names,
                      const char* what) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto it = std::find(est.names.begin(), est.names.end(), names[k]);
    if (it == est.names.end()) {
      throw DataError(std::string(what) + " cannot estimate '" + names[k] + "'");
    }
    out(static_cast<Eigen::Index>(k)) =
        est.coefficients(static_cast<Eigen::Index>(it - est.names.begin()));
  }
  return out;
}

}  // namespace

LogitFit split_panel_jackknife(const EstimationProblem& problem, const GlmOptions& options) {
  if (problem.period.empty()) throw DataError("split-panel jackknife needs period labels");
  const LogitEstimate full = fit_fe_logit(problem, options);
  const EstimationProblem sample = subset_rows(problem, full.sample);

  auto [first, second] = split_periods(sample.period);
  if (first.size() + second.size() < 4) {
    throw DataError("split-panel jackknife needs at least four periods");
  }

  LogitFit fit;
  fit.names = full.names;
  fit.uncorrected = full.coefficients;
  fit.dropped_perfectly_classified = full.dropped_perfectly_classified;
  fit.n_obs = full.n_obs;
  fit.sample = full.sample;
  fit.half1_periods = first;
  fit.half2_periods = second;

  auto half = [&](const std::vector<int>& periods, int which) {
    const std::set<int> in(periods.begin(), periods.end());
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < sample.period.size(); ++r) {
      if (in.count(sample.period[r])) rows.push_back(r);
    }
    const EstimationProblem part = subset_rows(sample, rows);
    try {
      return fit_fe_logit(part, options);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("half " + std::to_string(which) + ": " + e.what(), e.trace());
    }
  };
  const LogitEstimate h1 = half(first, 1);
  const LogitEstimate h2 = half(second, 2);
  fit.half1 = align(h1, fit.names, "first half");
  fit.half2 = align(h2, fit.names, "second half");
  fit.half1_drops = h1.dropped_perfectly_classified;
  fit.half2_drops = h2.dropped_perfectly_classified;
  fit.corrected = spj_combine(fit.uncorrected, fit.half1, fit.half2);
  return fit;
}

EstimationProblem resample_clusters(const EstimationProblem& problem, std::uint64_t seed) {
  const std::vector<int>& source = problem.cluster.empty() ? problem.pair : problem.cluster;
  if (source.empty()) throw DataError("bootstrap needs cluster or pair labels");
  int n_clusters = 0;
  const std::vector<int> cluster = compact_ids(source, &n_clusters);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_clusters));
  for (std::size_t r = 0; r < cluster.size(); ++r) members[static_cast<std::size_t>(cluster[r])].push_back(r);

  Rng rng(seed);
  std::uniform_int_distribution<int> draw(0, n_clusters - 1);
  std::vector<std::size_t> rows;
  std::vector<int> draw_of_row;
  for (int k = 0; k < n_clusters; ++k) {
    const int c = draw(rng);
    for (auto r : members[static_cast<std::size_t>(c)]) {
      rows.push_back(r);
      draw_of_row.push_back(k);
    }
  }

  EstimationProblem out = subset_rows(problem, rows);
  out.cluster = compact_ids(draw_of_row);
  if (!problem.pair.empty()) {
    // A pair drawn twice becomes two pairs with their own fixed effects.
    std::map<std::pair<int, int>, int> ids;
    out.pair.assign(rows.size(), 0);
    out.pair_labels.clear();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const int orig = problem.pair[rows[k]];
      auto [it, inserted] = ids.try_emplace({draw_of_row[k], orig}, static_cast<int>(ids.size()));
      if (inserted) {
        out.pair_labels.push_back(problem.pair_labels[static_cast<std::size_t>(orig)] + "#" +
                                  std::to_string(draw_of_row[k]));
      }
      out.pair[k] = it->second;
    }
    for (auto& dim : out.fe) {
      if (dim.name == "pair") {
        dim.ids = out.pair;
        dim.labels = out.pair_labels;
      }
    }
  }
  return out;
}

BootstrapResult pair_bootstrap(const EstimationProblem& problem, const ProblemEstimator& estimator,
                               int replications, std::uint64_t seed, int threads) {
  if (replications < 2) throw ConfigError("bootstrap needs at least two replications");
  const auto b_count = static_cast<std::size_t>(replications);
  std::vector<std::optional<Eigen::VectorXd>> results(b_count);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t b = next++; b < b_count; b = next++) {
      try {
        results[b] = estimator(resample_clusters(problem, derive_seed(seed, static_cast<std::uint64_t>(b))));
      } catch (const std::exception&) {
        results[b].reset();
      }
    }
  };
  unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  n_threads = std::clamp(n_threads, 1u, static_cast<unsigned>(b_count));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  BootstrapResult out;
  out.replications = replications;
  std::vector<const Eigen::VectorXd*> ok;
  for (const auto& r : results) {
    if (r) ok.push_back(&*r);
  }
  out.failures = replications - static_cast<int>(ok.size());
  if (static_cast<double>(out.failures) > 0.05 * replications) {
    throw ConvergenceError(std::to_string(out.failures) + " of " + std::to_string(replications) +
                           " bootstrap replicates failed (limit 5%)");
  }
  if (ok.size() < 2) throw ConvergenceError("fewer than two successful bootstrap replicates");
  const Eigen::Index p = ok.front()->size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const auto* v : ok) {
    if (v->size() != p) throw DataError("bootstrap replicates disagree on coefficient count");
    mean += *v;
  }
  mean /= static_cast<double>(ok.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  for (const auto* v : ok) {
    const Eigen::VectorXd d = *v - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(ok.size() - 1);
  out.covariance = cov;
  out.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

LogitFit estimate_logit(const EstimationProblem& problem, int replications, std::uint64_t seed,
                        const GlmOptions& options, int threads) {
  LogitFit fit = split_panel_jackknife(problem, options);
  if (replications <= 0) return fit;
  const std::vector<std::string> names = fit.names;
  const ProblemEstimator spj = [&](const EstimationProblem& p) {
    const LogitFit f = split_panel_jackknife(p, options);
    if (f.names != names) throw DataError("replicate dropped a regressor");
    return f.corrected;
  };
  const BootstrapResult boot = pair_bootstrap(problem, spj, replications, seed, threads);
  fit.bootstrap_se = boot.se;
  fit.bootstrap_covariance = boot.covariance;
  fit.replications = boot.replications;
  fit.failed_replications = boot.failures;
  return fit;
}

}  // namespace pdgrav
