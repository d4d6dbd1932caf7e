#pragma once

// Synthetic panels with known parameters and brute-force reference fits.
// Nothing here calls the production estimators or the panel builder.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/estimation_problem.hpp"
#include "pdgrav/gravity_panel.hpp"

namespace pdgrav::synth {

enum class Family { kPoisson, kBernoulli };

struct DgpSpec {
  int n_countries = 50;
  int n_periods = 10;
  Frequency frequency = Frequency::kAnnual;
  int start_year = 2000;

  // Coefficients by design term name (PD, RTA, GATTWTO_2, PD_x_GATTWTO_2, ...).
  std::map<std::string, double> beta;
  // PD enters the linear predictor through asinh, as for an events index.
  bool pd_ihs = true;

  double intercept = 1.0;
  double exporter_fe_scale = 0.5;
  double importer_fe_scale = 0.5;
  double pair_fe_scale = 0.5;
  double border_fe_scale = 0.2;

  // Latent PD: AR(1) per unordered pair, observed with noise.
  double pd_ar = 0.8;
  double pd_innovation_sd = 0.5;
  double pd_noise_sd = 0.2;
  double pd_mean = 0.0;

  double rta_share = 0.3;           // pairs that sign an RTA at some point
  double gatt_initial_share = 0.5;  // founding members
  double gatt_join_rate = 0.08;     // per-period hazard for non-members

  Family family = Family::kPoisson;
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

struct GroundTruth {
  std::map<std::string, double> beta;
  std::vector<std::string> countries;
  // Indexed [country][period].
  std::vector<std::vector<double>> exporter_fe, importer_fe;
  // Indexed [origin][destination].
  std::vector<std::vector<double>> pair_fe;
  std::vector<double> border_fe;  // per period
};

struct SyntheticPanel {
  GravityPanel panel;
  GroundTruth truth;
};

// Balanced panel over every ordered pair including domestic ones. Flows are
// Poisson or Bernoulli draws around exp/logistic of the linear predictor.
// Bernoulli outcomes are written to `flow` (0/1) with sectors = 9 * flow.
SyntheticPanel gen_panel(const DgpSpec& spec);

// Value of a design term for one record, computed independently of the
// panel builder. Political-distance terms are zero on domestic records.
double term_value(const GravityRecord& r, const std::string& term, bool pd_ihs);

struct OracleFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  Eigen::Index n_columns = 0;
  double log_likelihood = 0.0;
};

inline constexpr Eigen::Index kOracleMaxColumns = 5000;

// Newton's method on the explicit-dummy (quasi-)likelihood: every fixed-effect
// group becomes a column and the full Hessian is factorised densely each
// step. Rank deficiency among the dummies is handled by a tiny ridge on the
// Hessian, which leaves the fixed point of the iteration unchanged. Throws
// ConfigError beyond kOracleMaxColumns columns.
OracleFit dummy_oracle_fit(const EstimationProblem& problem, Family family, int max_iterations = 200);

struct KalmanResult {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Exact filtering for the local-level model with prior N(m0, p0) on the
// first month's state before its observation. Missing months only predict.
KalmanResult kalman_oracle(std::span<const std::optional<double>> obs, double q,
                           std::span<const double> r, double m0, double p0);

// Exact filtering when the first month's state is uniform over `atoms`: one
// Kalman filter per atom with zero prior variance, mixed by predictive
// likelihood. This is the prior of the particle filter's empirical start.
// The variance field holds the mixture variance.
KalmanResult kalman_mixture_oracle(std::span<const std::optional<double>> obs, double q,
                                   std::span<const double> r, std::span<const double> atoms);

// Pair fixed-effects logit with T periods per pair: y = 1(a_i + beta x + e > 0),
// a_i ~ N(0, 1), x ~ N(0, 1), e logistic. One pair fixed-effect dimension.
EstimationProblem gen_incidental_logit(int n_pairs, int n_periods, double beta, std::uint64_t seed);

}  // namespace pdgrav::synth
