#pragma once

// Assembly of the estimation panel: domestic trade, structural zeros,
// regressors with political-distance interactions, fixed-effect labels and
// robustness subsamples.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/estimation_problem.hpp"
#include "pdgrav/event_index.hpp"
#include "pdgrav/gravity_panel.hpp"

namespace pdgrav {

struct DomesticTrade {
  std::optional<double> value;
  bool clamped = false;  // gdp < exports; value set to 0
};

// GDP minus total exports, clamped at zero. Missing or non-finite inputs give
// a missing value.
DomesticTrade build_domestic_trade(std::optional<double> gdp, std::optional<double> total_exports);

struct ZeroInsertionReport {
  std::size_t filled = 0;   // existing records whose missing flow became 0
  std::size_t created = 0;  // absent records added with flow 0
};

// A missing international flow (i, j, t) becomes 0 when both i and j reported
// a non-missing international flow with any partner in some period strictly
// before t. Absent records qualifying under the same rule are created with
// flow 0 and no covariates. Domestic flows are never filled. Records come
// back sorted by (period, origin, destination).
GravityPanel insert_structural_zeros(GravityPanel panel, ZeroInsertionReport* report = nullptr);

enum class PdSource { kEvents, kUnga };
enum class Governance { kPolityCorruption, kWgi, kNone };

struct DesignOptions {
  PdSource pd_source = PdSource::kEvents;
  Governance governance = Governance::kPolityCorruption;
  bool collapse_gattwto1 = false;
  // When non-empty, only these terms (by name) are emitted, in this order.
  std::vector<std::string> terms;
};

// Regressor matrix over the records that carry every required covariate.
// Political-distance terms are zero on domestic rows.
struct DesignMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd X;
  std::vector<std::size_t> rows;  // record index per design row
};

// Term names in the order they are emitted for `options` (ignoring
// options.terms).
std::vector<std::string> default_terms(const DesignOptions& options);

// Builds PD, RTA, GATTWTO_1 (unless collapsed), GATTWTO_2 and the PD
// interactions. The events-based PD, Polity and WGI scores enter through ihs()
// before interacting. Throws DataError naming GATTWTO_1 when no international
// record has zero members, and ConfigError on unknown terms.
DesignMatrix build_interactions(const GravityPanel& panel, const DesignOptions& options);

struct FixedEffectSpec {
  bool exporter_period = true;
  bool importer_period = true;
  bool pair = true;
  bool border_period = true;
};

// Design rows with a present outcome, plus exporter-period, importer-period,
// directed-pair and border-period labels. The border-period dimension puts
// domestic rows in a single group; with pair effects present this spans the
// same columns as border-period dummies with the first period dropped.
EstimationProblem make_problem(const GravityPanel& panel, const DesignMatrix& design,
                               Outcome outcome, const FixedEffectSpec& fe = {});

// Same, keeping the panel record index of each problem row.
EstimationProblem make_problem(const GravityPanel& panel, const DesignMatrix& design,
                               Outcome outcome, const FixedEffectSpec& fe,
                               std::vector<std::size_t>* record_rows);

enum class DemocraticMode { kKeepOnly, kExclude };

struct SampleFilters {
  std::set<std::string> drop_countries;
  std::optional<std::pair<double, double>> trim_pd_quantiles;
  std::optional<double> democratic_polity_min;
  DemocraticMode democratic_mode = DemocraticMode::kKeepOnly;
  // (country, year) at war; records touching such a country that year go.
  std::set<std::pair<std::string, int>> war_country_years;
  std::optional<std::pair<int, int>> year_range;  // inclusive
};

struct FilterReport {
  std::size_t input = 0;
  std::size_t after_subset = 0;
  std::size_t after_trim = 0;
  std::optional<std::pair<double, double>> trim_bounds;
};

// Subsets first, trims last. Trimming bounds are type-7 empirical quantiles
// of PD over the remaining international records; domestic records are never
// trimmed. Throws DataError when nothing remains.
GravityPanel apply_sample_filters(const GravityPanel& panel, const SampleFilters& filters,
                                  FilterReport* report = nullptr);

// Type-7 sample quantile (linear interpolation between order statistics).
double empirical_quantile(std::vector<double> values, double q);

// Indexes annual or quarterly PD by (canonical pair id, period).
using PdLookup = std::map<std::pair<std::string, Period>, double>;
PdLookup make_pd_lookup(const std::vector<DistanceSeries>& series);

// Sets record.pd for international records from the symmetric index. Returns
// the number of records left without a value.
std::size_t join_pd(GravityPanel& panel, const PdLookup& lookup);

}  // namespace pdgrav
