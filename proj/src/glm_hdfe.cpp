#include "glm_hdfe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pdgrav/absorb.hpp"
#include "pdgrav/errors.hpp"

namespace pdgrav::detail {

namespace {

constexpr double kMaxEta = 700.0;
constexpr double kProbFloor = 1e-12;

double mean_fn(GlmFamily family, double eta) {
  if (family == GlmFamily::kPoisson) return std::exp(std::min(eta, kMaxEta));
  const double p = 1.0 / (1.0 + std::exp(-eta));
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

// d mu / d eta, which is also the IRLS weight for canonical links.
double variance_fn(GlmFamily family, double mu) {
  return family == GlmFamily::kPoisson ? mu : mu * (1.0 - mu);
}

double xlogx_ratio(double y, double m) { return y > 0.0 ? y * std::log(y / m) : 0.0; }

// Largest |sum_g (y - mu)| / sum_g mu over fixed-effect groups.
double worst_group_score(const EstimationProblem& problem, const Eigen::VectorXd& mu) {
  double worst = 0.0;
  for (const auto& dim : problem.fe) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(dim.n_groups());
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(dim.n_groups());
    for (std::size_t r = 0; r < dim.ids.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      score(dim.ids[r]) += problem.y(i) - mu(i);
      weight(dim.ids[r]) += mu(i);
    }
    for (Eigen::Index g = 0; g < score.size(); ++g) {
      if (weight(g) > 0.0) worst = std::max(worst, std::abs(score(g)) / weight(g));
    }
  }
  return worst;
}

}  // namespace

double deviance(GlmFamily family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (family == GlmFamily::kPoisson) {
      d += xlogx_ratio(y(i), mu(i)) - (y(i) - mu(i));
    } else {
      d += xlogx_ratio(y(i), mu(i)) + xlogx_ratio(1.0 - y(i), 1.0 - mu(i));
    }
  }
  return 2.0 * d;
}

std::vector<char> boundary_groups(const EstimationProblem& problem, GlmFamily family,
                                  std::vector<char> drop) {
  const auto n = static_cast<std::size_t>(problem.n_rows());
  if (drop.empty()) drop.assign(n, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& dim : problem.fe) {
      const auto groups = static_cast<std::size_t>(dim.n_groups());
      std::vector<double> lo(groups, 1.0), hi(groups, 0.0);
      std::vector<char> used(groups, 0);
      for (std::size_t r = 0; r < n; ++r) {
        if (drop[r]) continue;
        const auto g = static_cast<std::size_t>(dim.ids[r]);
        const double y = problem.y(static_cast<Eigen::Index>(r));
        used[g] = 1;
        lo[g] = std::min(lo[g], y);
        hi[g] = std::max(hi[g], y);
      }
      for (std::size_t r = 0; r < n; ++r) {
        if (drop[r]) continue;
        const auto g = static_cast<std::size_t>(dim.ids[r]);
        const bool all_zero = hi[g] <= 0.0;
        const bool all_one = family == GlmFamily::kBernoulli && lo[g] >= 1.0;
        if (used[g] && (all_zero || all_one)) {
          drop[r] = 1;
          changed = true;
        }
      }
    }
  }
  return drop;
}

std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& gram, double tol) {
  const Eigen::Index p = gram.rows();
  Eigen::MatrixXd m = gram;
  std::vector<Eigen::Index> active(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k) active[static_cast<std::size_t>(k)] = k;
  std::vector<Eigen::Index> kept;
  double lead = -1.0;
  while (!active.empty()) {
    auto best = std::max_element(active.begin(), active.end(),
                                 [&](Eigen::Index a, Eigen::Index b) { return m(a, a) < m(b, b); });
    const Eigen::Index j = *best;
    const double pivot = m(j, j);
    if (lead < 0.0) lead = pivot;
    if (!(pivot > 0.0) || pivot <= tol * lead) break;
    kept.push_back(j);
    active.erase(best);
    for (Eigen::Index a : active) {
      for (Eigen::Index b : active) m(a, b) -= m(a, j) * m(j, b) / pivot;
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

GlmCore fit_glm_hdfe(const EstimationProblem& problem, GlmFamily family, const GlmOptions& options) {
  const Eigen::Index n = problem.n_rows();
  const Eigen::VectorXd& y = problem.y;
  GlmCore out;

  Eigen::VectorXd mu(n), eta(n);
  if (family == GlmFamily::kPoisson) {
    const double shift = options.start_shift * y.mean();
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = y(i) + shift;
      eta(i) = std::log(mu(i));
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = (y(i) + 0.5) / 2.0;
      eta(i) = std::log(mu(i) / (1.0 - mu(i)));
    }
  }
  double dev = deviance(family, y, mu);
  out.trace.push_back(dev);

  FixedEffectAbsorber absorber(problem.fe, options.absorb);
  auto absorb_or_throw = [&](auto& target, const char* what) {
    const AbsorbStats s = absorber.absorb(target);
    if (!s.converged) {
      throw ConvergenceError(std::string("fixed-effect absorption of ") + what +
                                 " did not converge",
                             out.trace);
    }
  };

  Eigen::VectorXd w(n), z(n), z_prev, z_tilde;
  Eigen::MatrixXd X = problem.X;
  Eigen::MatrixXd X_tilde;
  std::vector<std::string> names = problem.names;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      w(i) = variance_fn(family, mu(i));
      z(i) = eta(i) + (y(i) - mu(i)) / w(i);
    }
    absorber.set_weights(w);

    if (iter == 1) {
      X_tilde = X;
      absorb_or_throw(X_tilde, "regressors");
      if (X.cols() > 0) {
        // Absorbed Gram matrix scaled by each column's pre-absorption norm, so
        // a pivot measures the share of a column not explained by the fixed
        // effects and the other regressors.
        Eigen::VectorXd scale(X.cols());
        for (Eigen::Index k = 0; k < X.cols(); ++k) {
          const double s = (X.col(k).array().square() * w.array()).sum();
          scale(k) = s > 0.0 ? 1.0 / std::sqrt(s) : 0.0;
        }
        const Eigen::MatrixXd scaled = X_tilde * scale.asDiagonal();
        const Eigen::MatrixXd gram = scaled.transpose() * w.asDiagonal() * scaled;
        const auto keep = independent_columns(gram, options.collinearity_tolerance);
        if (static_cast<Eigen::Index>(keep.size()) < X.cols()) {
          std::vector<std::string> kept_names;
          Eigen::MatrixXd X_keep(n, static_cast<Eigen::Index>(keep.size()));
          Eigen::MatrixXd Xt_keep(n, static_cast<Eigen::Index>(keep.size()));
          std::size_t next = 0;
          for (Eigen::Index k = 0; k < X.cols(); ++k) {
            if (next < keep.size() && keep[next] == k) {
              X_keep.col(static_cast<Eigen::Index>(next)) = X.col(k);
              Xt_keep.col(static_cast<Eigen::Index>(next)) = X_tilde.col(k);
              kept_names.push_back(names[static_cast<std::size_t>(k)]);
              ++next;
            } else {
              out.dropped_collinear.push_back(names[static_cast<std::size_t>(k)]);
            }
          }
          X = std::move(X_keep);
          X_tilde = std::move(Xt_keep);
          names = std::move(kept_names);
        }
      }
      z_tilde = z;
    } else {
      absorb_or_throw(X_tilde, "regressors");
      z_tilde += z - z_prev;
    }
    absorb_or_throw(z_tilde, "working response");
    z_prev = z;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
    if (X.cols() > 0) {
      const Eigen::MatrixXd A = X_tilde.transpose() * w.asDiagonal() * X_tilde;
      const Eigen::VectorXd b = X_tilde.transpose() * (w.array() * z_tilde.array()).matrix();
      beta = A.ldlt().solve(b);
    }
    const Eigen::VectorXd resid = z_tilde - X_tilde * beta;
    Eigen::VectorXd eta_new = z - resid;

    // The starting eta is not a model fit and can have a lower deviance than
    // any fit, so the first step is taken whole. Later steps are halved until
    // the deviance does not rise.
    Eigen::VectorXd mu_new(n);
    double dev_new = 0.0;
    for (int halving = 0;; ++halving) {
      for (Eigen::Index i = 0; i < n; ++i) mu_new(i) = mean_fn(family, eta_new(i));
      dev_new = deviance(family, y, mu_new);
      if (std::isfinite(dev_new) && (iter == 1 || dev_new <= dev * (1.0 + 1e-12) + 1e-12)) break;
      if (halving >= 30) {
        out.trace.push_back(dev_new);
        throw ConvergenceError("IRLS step halving failed at iteration " + std::to_string(iter), out.trace);
      }
      eta_new = eta + 0.5 * (eta_new - eta);
    }

    const double change = std::abs(dev_new - dev) / std::max(std::abs(dev_new), 0.1);
    eta = eta_new;
    mu = mu_new;
    dev = dev_new;
    out.beta = beta;
    out.iterations = iter;
    out.last_change = change;
    out.trace.push_back(dev);
    if (iter > 1 && change < options.deviance_tolerance &&
        (family != GlmFamily::kPoisson || worst_group_score(problem, mu) <= options.score_tolerance)) {
      for (Eigen::Index i = 0; i < n; ++i) w(i) = variance_fn(family, mu(i));
      absorber.set_weights(w);
      absorb_or_throw(X_tilde, "regressors");
      out.names = std::move(names);
      out.eta = std::move(eta);
      out.mu = std::move(mu);
      out.absorbed_design = std::move(X_tilde);
      out.weights = std::move(w);
      out.deviance = dev;
      return out;
    }
  }
  throw ConvergenceError("IRLS did not converge in " + std::to_string(options.max_iterations) +
                             " iterations",
                         out.trace);
}

}  // namespace pdgrav::detail
