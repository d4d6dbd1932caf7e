#include "pdgrav/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "pdgrav/errors.hpp"

namespace pdgrav::synth {

namespace {

const std::set<std::string>& interaction_covariates() {
  static const std::set<std::string> names = {
      "RTA",      "GATTWTO_1", "GATTWTO_2", "Corruption_i", "Corruption_j", "Polity_i",
      "Polity_j", "WGI_VA_i",  "WGI_VA_j",  "WGI_RL_i",     "WGI_RL_j"};
  return names;
}

bool known_term(const std::string& term) {
  if (term == "PD" || term == "RTA" || term == "GATTWTO_1" || term == "GATTWTO_2") return true;
  return term.rfind("PD_x_", 0) == 0 && interaction_covariates().count(term.substr(5)) > 0;
}

double need(const std::optional<double>& v, const std::string& what) {
  if (!v) throw DataError("record lacks " + what);
  return *v;
}

double covariate(const GravityRecord& r, const std::string& name) {
  if (name == "RTA") return r.rta;
  if (name == "GATTWTO_1") return r.gattwto_1;
  if (name == "GATTWTO_2") return r.gattwto_2;
  if (name == "Corruption_i") return need(r.corruption_i, name);
  if (name == "Corruption_j") return need(r.corruption_j, name);
  if (name == "Polity_i") return std::asinh(need(r.polity_i, name));
  if (name == "Polity_j") return std::asinh(need(r.polity_j, name));
  if (name == "WGI_VA_i") return std::asinh(need(r.wgi_va_i, name));
  if (name == "WGI_VA_j") return std::asinh(need(r.wgi_va_j, name));
  if (name == "WGI_RL_i") return std::asinh(need(r.wgi_rl_i, name));
  if (name == "WGI_RL_j") return std::asinh(need(r.wgi_rl_j, name));
  throw ConfigError("unknown term covariate '" + name + "'");
}

std::string country_name(int k, int n) {
  const int width = n < 100 ? 2 : (n < 1000 ? 3 : 4);
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%0*d", width, k + 1);
  return buf;
}

}  // namespace

void DgpSpec::validate() const {
  if (n_countries < 2) throw ConfigError("need at least two countries");
  if (n_periods < 1) throw ConfigError("need at least one period");
  for (double s : {exporter_fe_scale, importer_fe_scale, pair_fe_scale, border_fe_scale,
                   pd_innovation_sd, pd_noise_sd}) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("scales must be positive");
  }
  if (!(std::abs(pd_ar) < 1.0)) throw ConfigError("PD autoregression must be stationary");
  for (double s : {rta_share, gatt_initial_share, gatt_join_rate}) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("shares and rates must lie in [0, 1]");
  }
  for (const auto& [name, b] : beta) {
    if (!known_term(name)) throw ConfigError("unknown design term '" + name + "'");
    if (!std::isfinite(b)) throw ConfigError("coefficient for '" + name + "' is not finite");
  }
}

double term_value(const GravityRecord& r, const std::string& term, bool pd_ihs) {
  const bool pd_term = term == "PD" || term.rfind("PD_x_", 0) == 0;
  if (!pd_term) return covariate(r, term);
  if (r.is_domestic()) return 0.0;
  const double raw = need(r.pd, "PD");
  const double pd = pd_ihs ? std::asinh(raw) : raw;
  if (term == "PD") return pd;
  return pd * covariate(r, term.substr(5));
}

SyntheticPanel gen_panel(const DgpSpec& spec) {
  spec.validate();
  const int n = spec.n_countries;
  const int t_count = spec.n_periods;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticPanel out;
  GroundTruth& truth = out.truth;
  truth.beta = spec.beta;
  for (int k = 0; k < n; ++k) truth.countries.push_back(country_name(k, n));

  const auto nn = static_cast<std::size_t>(n);
  const auto tt = static_cast<std::size_t>(t_count);
  truth.exporter_fe.assign(nn, std::vector<double>(tt));
  truth.importer_fe.assign(nn, std::vector<double>(tt));
  truth.pair_fe.assign(nn, std::vector<double>(nn));
  truth.border_fe.assign(tt, 0.0);
  for (auto& row : truth.exporter_fe)
    for (auto& v : row) v = spec.exporter_fe_scale * std_normal(rng);
  for (auto& row : truth.importer_fe)
    for (auto& v : row) v = spec.importer_fe_scale * std_normal(rng);
  for (auto& row : truth.pair_fe)
    for (auto& v : row) v = spec.pair_fe_scale * std_normal(rng);
  for (std::size_t t = 1; t < tt; ++t) truth.border_fe[t] = spec.border_fe_scale * std_normal(rng);

  // Country covariates, constant over time.
  std::uniform_int_distribution<int> polity(-10, 10);
  std::vector<double> pol(nn), corr(nn), va(nn), rl(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    pol[i] = polity(rng);
    corr[i] = std_normal(rng);
    va[i] = std_normal(rng);
    rl[i] = std_normal(rng);
  }

  // GATT/WTO membership: founders plus a constant joining hazard.
  std::vector<std::vector<char>> member(nn, std::vector<char>(tt, 0));
  for (std::size_t i = 0; i < nn; ++i) {
    bool in = unit(rng) < spec.gatt_initial_share;
    for (std::size_t t = 0; t < tt; ++t) {
      if (!in && t > 0 && unit(rng) < spec.gatt_join_rate) in = true;
      member[i][t] = in;
    }
  }

  // Symmetric PD and RTA status per unordered pair.
  std::vector<std::vector<std::vector<double>>> pd(nn, std::vector<std::vector<double>>(nn));
  std::vector<std::vector<int>> rta_start(nn, std::vector<int>(nn, t_count));
  const double stationary_sd = spec.pd_innovation_sd / std::sqrt(1.0 - spec.pd_ar * spec.pd_ar);
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t j = i + 1; j < nn; ++j) {
      std::vector<double> obs(tt);
      double z = spec.pd_mean + stationary_sd * std_normal(rng);
      for (std::size_t t = 0; t < tt; ++t) {
        if (t > 0) z = spec.pd_mean + spec.pd_ar * (z - spec.pd_mean) + spec.pd_innovation_sd * std_normal(rng);
        obs[t] = z + spec.pd_noise_sd * std_normal(rng);
      }
      pd[i][j] = obs;
      pd[j][i] = obs;
      if (unit(rng) < spec.rta_share) {
        // Start anywhere from before the window to its last period.
        const int start = static_cast<int>(std::floor(unit(rng) * (t_count + 2))) - 2;
        rta_start[i][j] = rta_start[j][i] = std::max(start, 0);
      }
    }
  }

  const Frequency f = spec.frequency;
  const Period first{spec.start_year, f == Frequency::kAnnual ? 0 : 1};
  const int first_index = period_index(first, f);

  GravityPanel& panel = out.panel;
  panel.frequency = f;
  panel.records.reserve(nn * nn * tt);
  for (std::size_t t = 0; t < tt; ++t) {
    const Period period = period_from_index(first_index + static_cast<int>(t), f);
    for (std::size_t i = 0; i < nn; ++i) {
      for (std::size_t j = 0; j < nn; ++j) {
        GravityRecord r;
        r.origin = truth.countries[i];
        r.destination = truth.countries[j];
        r.period = period;
        r.polity_i = pol[i];
        r.polity_j = pol[j];
        r.corruption_i = corr[i];
        r.corruption_j = corr[j];
        r.wgi_va_i = va[i];
        r.wgi_va_j = va[j];
        r.wgi_rl_i = rl[i];
        r.wgi_rl_j = rl[j];
        if (i != j) {
          r.pd = pd[i][j][t];
          r.rta = static_cast<int>(t) >= rta_start[i][j] ? 1.0 : 0.0;
          const int members = member[i][t] + member[j][t];
          r.gattwto_1 = members == 1 ? 1.0 : 0.0;
          r.gattwto_2 = members == 2 ? 1.0 : 0.0;
        }
        double eta = spec.intercept + truth.exporter_fe[i][t] + truth.importer_fe[j][t] +
                     truth.pair_fe[i][j] + (i != j ? truth.border_fe[t] : 0.0);
        for (const auto& [name, b] : spec.beta) eta += b * term_value(r, name, spec.pd_ihs);

        if (spec.family == Family::kPoisson) {
          std::poisson_distribution<long long> draw(std::exp(eta));
          r.flow = static_cast<double>(draw(rng));
        } else {
          const double p = 1.0 / (1.0 + std::exp(-eta));
          r.flow = unit(rng) < p ? 1.0 : 0.0;
          r.sectors = 9.0 * *r.flow;
        }
        panel.records.push_back(std::move(r));
      }
    }
  }
  return out;
}

OracleFit dummy_oracle_fit(const EstimationProblem& problem, Family family, int max_iterations) {
  const Eigen::Index n = problem.y.size();
  const Eigen::Index p = problem.X.cols();
  if (problem.X.rows() != n) throw DataError("design rows do not match the outcome");

  // Column layout: regressors, then one dummy per group of every dimension,
  // or an intercept when there are no fixed effects.
  std::vector<Eigen::Index> offset;
  Eigen::Index cols = p;
  for (const auto& dim : problem.fe) {
    if (dim.ids.size() != static_cast<std::size_t>(n)) throw DataError("fixed effect length mismatch");
    offset.push_back(cols);
    cols += dim.n_groups();
  }
  const bool intercept = problem.fe.empty();
  if (intercept) ++cols;
  if (cols > kOracleMaxColumns) {
    throw ConfigError("dummy oracle limited to " + std::to_string(kOracleMaxColumns) + " columns, need " +
                      std::to_string(cols));
  }

  OracleFit fit;
  fit.names = problem.names;
  fit.n_columns = cols;

  // Sparse row representation: column indices beyond the regressors.
  std::vector<std::vector<Eigen::Index>> dummies(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    auto& d = dummies[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < problem.fe.size(); ++k) {
      d.push_back(offset[k] + problem.fe[k].ids[static_cast<std::size_t>(r)]);
    }
    if (intercept) d.push_back(p);
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(cols);
  if (family == Family::kPoisson) {
    const double start = std::log(problem.y.mean() + 0.1);
    if (intercept) {
      theta(p) = start;
    } else {
      for (int g = 0; g < problem.fe[0].n_groups(); ++g) theta(offset[0] + g) = start;
    }
  }

  auto linear = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd eta = problem.X * th.head(p);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (auto c : dummies[static_cast<std::size_t>(r)]) eta(r) += th(c);
    }
    return eta;
  };
  auto loglik = [&](const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double e = eta(r);
      if (family == Family::kPoisson) {
        ll += problem.y(r) * e - std::exp(e);
      } else {
        const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += problem.y(r) * e - log1pexp;
      }
    }
    return ll;
  };
  auto mean_of = [&](double e) {
    return family == Family::kPoisson ? std::exp(e) : 1.0 / (1.0 + std::exp(-e));
  };

  Eigen::VectorXd eta = linear(theta);
  double ll = loglik(eta);
  Eigen::MatrixXd hessian(cols, cols);
  Eigen::VectorXd grad(cols);
  std::vector<Eigen::Index> idx;
  std::vector<double> val;

  for (int iter = 1; iter <= max_iterations; ++iter) {
    fit.iterations = iter;
    hessian.setZero();
    grad.setZero();
    for (Eigen::Index r = 0; r < n; ++r) {
      const double mu = mean_of(eta(r));
      const double w = family == Family::kPoisson ? mu : mu * (1.0 - mu);
      const double resid = problem.y(r) - mu;
      idx.clear();
      val.clear();
      for (Eigen::Index k = 0; k < p; ++k) {
        idx.push_back(k);
        val.push_back(problem.X(r, k));
      }
      for (auto c : dummies[static_cast<std::size_t>(r)]) {
        idx.push_back(c);
        val.push_back(1.0);
      }
      for (std::size_t a = 0; a < idx.size(); ++a) {
        grad(idx[a]) += resid * val[a];
        for (std::size_t b = 0; b < idx.size(); ++b) hessian(idx[a], idx[b]) += w * val[a] * val[b];
      }
    }
    const double ridge = 1e-8 * hessian.diagonal().mean();
    hessian.diagonal().array() += ridge;
    const Eigen::VectorXd step = hessian.llt().solve(grad);

    double scale = 1.0;
    Eigen::VectorXd next;
    Eigen::VectorXd next_eta;
    double next_ll = -INFINITY;
    for (int halving = 0; halving < 40; ++halving) {
      next = theta + scale * step;
      next_eta = linear(next);
      next_ll = loglik(next_eta);
      if (std::isfinite(next_ll) && next_ll >= ll - 1e-12 * std::abs(ll)) break;
      scale *= 0.5;
    }
    const double beta_change = p > 0 ? (next.head(p) - theta.head(p)).cwiseAbs().maxCoeff() : 0.0;
    const double ll_change = std::abs(next_ll - ll);
    theta = next;
    eta = next_eta;
    ll = next_ll;
    if (beta_change < 1e-11 && ll_change <= 1e-13 * (1.0 + std::abs(ll))) {
      fit.converged = true;
      break;
    }
  }

  // A maximum at infinity (separation, all-zero groups) shows up as fitted
  // means pinned to the boundary.
  for (Eigen::Index r = 0; r < n && fit.converged; ++r) {
    const double mu = mean_of(eta(r));
    if (mu < 1e-10 || (family == Family::kBernoulli && mu > 1.0 - 1e-10)) fit.converged = false;
  }
  fit.coefficients = theta.head(p);
  fit.log_likelihood = ll;
  return fit;
}

KalmanResult kalman_oracle(std::span<const std::optional<double>> obs, double q,
                           std::span<const double> r, double m0, double p0) {
  if (r.size() != obs.size()) throw DataError("observation variances do not match observations");
  KalmanResult out;
  double m = m0;
  double v = p0;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (t > 0) v += q;
    if (obs[t]) {
      const double gain = v / (v + r[t]);
      m += gain * (*obs[t] - m);
      v = v * r[t] / (v + r[t]);  // v * (1 - gain) without cancellation
    }
    out.mean.push_back(m);
    out.variance.push_back(v);
  }
  return out;
}

KalmanResult kalman_mixture_oracle(std::span<const std::optional<double>> obs, double q,
                                   std::span<const double> r, std::span<const double> atoms) {
  if (r.size() != obs.size()) throw DataError("observation variances do not match observations");
  if (atoms.empty()) throw DataError("mixture prior needs at least one atom");
  const std::size_t k = atoms.size();
  std::vector<double> m(atoms.begin(), atoms.end());
  std::vector<double> log_w(k, 0.0);
  double v = 0.0;  // shared by every component
  KalmanResult out;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (t > 0) v += q;
    if (obs[t]) {
      const double s = v + r[t];
      const double gain = v / s;
      for (std::size_t j = 0; j < k; ++j) {
        const double e = *obs[t] - m[j];
        log_w[j] -= 0.5 * e * e / s;
        m[j] += gain * e;
      }
      v = v * r[t] / s;
      const double top = *std::max_element(log_w.begin(), log_w.end());
      for (double& lw : log_w) lw -= top;
    }
    double total = 0.0, mean = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double w = std::exp(log_w[j]);
      total += w;
      mean += w * m[j];
    }
    mean /= total;
    double spread = 0.0;
    for (std::size_t j = 0; j < k; ++j) spread += std::exp(log_w[j]) * (m[j] - mean) * (m[j] - mean);
    out.mean.push_back(mean);
    out.variance.push_back(v + spread / total);
  }
  return out;
}

EstimationProblem gen_incidental_logit(int n_pairs, int n_periods, double beta, std::uint64_t seed) {
  if (n_pairs < 1 || n_periods < 1) throw ConfigError("need at least one pair and one period");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto rows = static_cast<Eigen::Index>(n_pairs) * n_periods;
  EstimationProblem p;
  p.y.resize(rows);
  p.X.resize(rows, 1);
  p.names = {"x"};
  FixedEffectDim dim;
  dim.name = "pair";
  Eigen::Index r = 0;
  for (int i = 0; i < n_pairs; ++i) {
    dim.labels.push_back("p" + std::to_string(i));
    const double alpha = std_normal(rng);
    for (int t = 0; t < n_periods; ++t, ++r) {
      const double x = std_normal(rng);
      double u = unit(rng);
      u = std::clamp(u, 1e-300, 1.0 - 1e-16);
      const double e = std::log(u / (1.0 - u));
      p.X(r, 0) = x;
      p.y(r) = alpha + beta * x + e > 0.0 ? 1.0 : 0.0;
      dim.ids.push_back(i);
      p.pair.push_back(i);
      p.period.push_back(t);
      p.domestic.push_back(0);
    }
  }
  p.pair_labels = dim.labels;
  p.cluster = p.pair;
  p.fe.push_back(std::move(dim));
  return p;
}

}  // namespace pdgrav::synth
