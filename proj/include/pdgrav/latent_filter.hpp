#pragma once

// Bootstrap particle filter for the latent monthly political-distance state.
//
//   state:        s_t = s_{t-1} + v_t,   v_t ~ N(0, Q)
//   observation:  y_t = s_t + e_t,       e_t ~ N(0, R_t),  R_t = 1 / (n_t + 1)
//
// where n_t is the number of events coded for the pair in month t.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdgrav/event_index.hpp"

namespace pdgrav {

inline constexpr double kProcessVarianceFloor = 1e-6;
inline constexpr double kProcessVarianceDefault = 0.001;
inline constexpr int kDefaultParticles = 1000;

// R(n) = 1 / (n + 1).
double observation_variance(long event_count);

// Residual variance of an OLS AR(1) fit (with intercept) over adjacent
// non-missing months, floored at `floor`. Returns `fallback` when fewer than
// three adjacent pairs exist or when the lagged regressor has no variance
// while the response does. A lag-constant, response-constant series is a
// perfect fit and returns `floor`. Throws DataError when nothing is observed.
double estimate_process_variance(std::span<const std::optional<double>> series,
                                 double floor = kProcessVarianceFloor,
                                 double fallback = kProcessVarianceDefault);

enum class Resampling { kMultinomial, kSystematic };

// kEmpirical draws the initial cloud from every observed month of the pair.
// kFirstObservation starts all particles at the first observed value.
enum class Initialization { kEmpirical, kFirstObservation };

struct StateSpaceParams {
  double process_variance = kProcessVarianceDefault;
  int particles = kDefaultParticles;
  std::uint64_t seed = 0;
  Resampling resampling = Resampling::kMultinomial;
  Initialization initialization = Initialization::kEmpirical;

  // Throws ConfigError.
  void validate() const;
};

struct FilteredSeries {
  std::string pair_id;
  Period start;
  std::vector<double> posterior_mean;
  std::vector<double> effective_sample_size;
  // Months whose weights were all zero or non-finite; uniform weights used.
  int degenerate_months = 0;
};

// Runs the filter over a monthly series with per-month event counts. The
// random stream is derived from params.seed and the pair id, so results do
// not depend on the order in which pairs are processed. Months without an
// observation only propagate.
FilteredSeries filter_series(const DistanceSeries& obs, const StateSpaceParams& params);

struct FilterConfig {
  int particles = kDefaultParticles;
  double q_floor = kProcessVarianceFloor;
  double q_default = kProcessVarianceDefault;
  std::uint64_t seed = 0;
  Resampling resampling = Resampling::kMultinomial;
  Initialization initialization = Initialization::kEmpirical;
};

// Estimates Q for the pair, filters, and returns the posterior means as a
// filtered monthly DistanceSeries with every month present.
DistanceSeries filter_index(const DistanceSeries& obs, const FilterConfig& config);

}  // namespace pdgrav
