#include "pdgrav/panel_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>

#include "pdgrav/errors.hpp"

namespace pdgrav {

DomesticTrade build_domestic_trade(std::optional<double> gdp, std::optional<double> total_exports) {
  DomesticTrade out;
  if (!gdp || !total_exports || !std::isfinite(*gdp) || !std::isfinite(*total_exports)) return out;
  const double value = *gdp - *total_exports;
  if (value < 0.0) {
    out.value = 0.0;
    out.clamped = true;
  } else {
    out.value = value;
  }
  return out;
}

GravityPanel insert_structural_zeros(GravityPanel panel, ZeroInsertionReport* report) {
  const Frequency f = panel.frequency;
  auto key = [f](const GravityRecord& r) {
    return std::tuple<int, const std::string&, const std::string&>(period_index(r.period, f),
                                                                    r.origin, r.destination);
  };
  std::sort(panel.records.begin(), panel.records.end(),
            [&](const GravityRecord& a, const GravityRecord& b) { return key(a) < key(b); });

  ZeroInsertionReport rep;
  std::set<std::string> reported_before;
  std::vector<GravityRecord> created;

  auto it = panel.records.begin();
  while (it != panel.records.end()) {
    const int t = period_index(it->period, f);
    auto end = std::find_if(it, panel.records.end(),
                            [&](const GravityRecord& r) { return period_index(r.period, f) != t; });

    std::set<std::pair<std::string, std::string>> present;
    std::set<std::string> reporting_now;
    for (auto r = it; r != end; ++r) {
      present.emplace(r->origin, r->destination);
      if (r->is_domestic()) continue;
      if (r->flow) {
        reporting_now.insert(r->origin);
        reporting_now.insert(r->destination);
      } else if (reported_before.count(r->origin) && reported_before.count(r->destination)) {
        r->flow = 0.0;
        ++rep.filled;
      }
    }
    for (const auto& i : reported_before) {
      for (const auto& j : reported_before) {
        if (i == j || present.count({i, j})) continue;
        GravityRecord r;
        r.origin = i;
        r.destination = j;
        r.period = it->period;
        r.flow = 0.0;
        created.push_back(std::move(r));
        ++rep.created;
      }
    }
    reported_before.insert(reporting_now.begin(), reporting_now.end());
    it = end;
  }

  if (!created.empty()) {
    panel.records.insert(panel.records.end(), std::make_move_iterator(created.begin()),
                         std::make_move_iterator(created.end()));
    std::sort(panel.records.begin(), panel.records.end(),
              [&](const GravityRecord& a, const GravityRecord& b) { return key(a) < key(b); });
  }
  if (report) *report = rep;
  return panel;
}

namespace {

// How a design term is computed from a record.
struct TermSpec {
  std::string name;
  bool pd_term = false;
  std::optional<double> (*value)(const GravityRecord&) = nullptr;
  bool ihs_value = false;
};

std::optional<double> opt(double v) { return v; }

const std::vector<TermSpec>& term_catalogue() {
  static const std::vector<TermSpec> terms = {
      {"PD", true, nullptr, false},
      {"RTA", false, [](const GravityRecord& r) { return opt(r.rta); }, false},
      {"GATTWTO_1", false, [](const GravityRecord& r) { return opt(r.gattwto_1); }, false},
      {"GATTWTO_2", false, [](const GravityRecord& r) { return opt(r.gattwto_2); }, false},
      {"PD_x_RTA", true, [](const GravityRecord& r) { return opt(r.rta); }, false},
      {"PD_x_GATTWTO_1", true, [](const GravityRecord& r) { return opt(r.gattwto_1); }, false},
      {"PD_x_GATTWTO_2", true, [](const GravityRecord& r) { return opt(r.gattwto_2); }, false},
      {"PD_x_Corruption_i", true, [](const GravityRecord& r) { return r.corruption_i; }, false},
      {"PD_x_Corruption_j", true, [](const GravityRecord& r) { return r.corruption_j; }, false},
      {"PD_x_Polity_i", true, [](const GravityRecord& r) { return r.polity_i; }, true},
      {"PD_x_Polity_j", true, [](const GravityRecord& r) { return r.polity_j; }, true},
      {"PD_x_WGI_VA_i", true, [](const GravityRecord& r) { return r.wgi_va_i; }, true},
      {"PD_x_WGI_VA_j", true, [](const GravityRecord& r) { return r.wgi_va_j; }, true},
      {"PD_x_WGI_RL_i", true, [](const GravityRecord& r) { return r.wgi_rl_i; }, true},
      {"PD_x_WGI_RL_j", true, [](const GravityRecord& r) { return r.wgi_rl_j; }, true},
  };
  return terms;
}

const TermSpec& find_term(const std::string& name) {
  for (const auto& t : term_catalogue()) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown design term '" + name + "'");
}

}  // namespace

std::vector<std::string> default_terms(const DesignOptions& options) {
  std::vector<std::string> names = {"PD", "RTA"};
  if (!options.collapse_gattwto1) names.push_back("GATTWTO_1");
  names.push_back("GATTWTO_2");
  names.push_back("PD_x_RTA");
  if (!options.collapse_gattwto1) names.push_back("PD_x_GATTWTO_1");
  names.push_back("PD_x_GATTWTO_2");
  switch (options.governance) {
    case Governance::kPolityCorruption:
      names.insert(names.end(),
                   {"PD_x_Corruption_i", "PD_x_Corruption_j", "PD_x_Polity_i", "PD_x_Polity_j"});
      break;
    case Governance::kWgi:
      names.insert(names.end(),
                   {"PD_x_WGI_VA_i", "PD_x_WGI_VA_j", "PD_x_WGI_RL_i", "PD_x_WGI_RL_j"});
      break;
    case Governance::kNone: break;
  }
  return names;
}

DesignMatrix build_interactions(const GravityPanel& panel, const DesignOptions& options) {
  DesignMatrix design;
  design.names = options.terms.empty() ? default_terms(options) : options.terms;
  std::vector<const TermSpec*> specs;
  for (const auto& name : design.names) {
    if (options.collapse_gattwto1 && (name == "GATTWTO_1" || name == "PD_x_GATTWTO_1")) {
      throw ConfigError(name + " requested with collapse_gattwto1");
    }
    specs.push_back(&find_term(name));
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t idx = 0; idx < panel.records.size(); ++idx) {
    const auto& r = panel.records[idx];
    if (r.gattwto_1 + r.gattwto_2 > 1.0) {
      throw DataError("record " + r.origin + "->" + r.destination +
                      ": GATTWTO_1 + GATTWTO_2 exceeds 1");
    }
    const bool domestic = r.is_domestic();
    std::optional<double> pd;
    if (r.pd) pd = options.pd_source == PdSource::kEvents ? ihs(*r.pd) : *r.pd;

    std::vector<double> row(specs.size());
    bool complete = true;
    for (std::size_t k = 0; k < specs.size() && complete; ++k) {
      const TermSpec& t = *specs[k];
      if (t.pd_term && domestic) {
        row[k] = 0.0;
        continue;
      }
      if (t.pd_term && !pd) {
        complete = false;
        break;
      }
      double v = 1.0;
      if (t.value) {
        const auto raw = t.value(r);
        if (!raw) {
          complete = false;
          break;
        }
        v = t.ihs_value ? ihs(*raw) : *raw;
      }
      row[k] = t.pd_term ? *pd * v : v;
    }
    if (!complete) continue;
    rows.push_back(std::move(row));
    design.rows.push_back(idx);
  }

  design.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(specs.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < specs.size(); ++k) {
      design.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }

  if (std::find(design.names.begin(), design.names.end(), "GATTWTO_1") != design.names.end()) {
    bool any_zero_member = false;
    bool any_international = false;
    for (auto idx : design.rows) {
      const auto& r = panel.records[idx];
      if (r.is_domestic()) continue;
      any_international = true;
      if (r.gattwto_1 + r.gattwto_2 < 1.0) {
        any_zero_member = true;
        break;
      }
    }
    if (any_international && !any_zero_member) {
      throw DataError(
          "GATTWTO_1 is collinear: every international record has at least one member; "
          "use collapse_gattwto1");
    }
  }
  return design;
}

EstimationProblem make_problem(const GravityPanel& panel, const DesignMatrix& design,
                               Outcome outcome, const FixedEffectSpec& fe) {
  return make_problem(panel, design, outcome, fe, nullptr);
}

EstimationProblem make_problem(const GravityPanel& panel, const DesignMatrix& design,
                               Outcome outcome, const FixedEffectSpec& fe,
                               std::vector<std::size_t>* record_rows) {
  const Frequency f = panel.frequency;
  std::vector<std::size_t> keep;  // design row indices
  for (std::size_t k = 0; k < design.rows.size(); ++k) {
    const auto y = outcome_value(panel.records[design.rows[k]], outcome);
    if (y && std::isfinite(*y)) keep.push_back(k);
  }

  struct Labeler {
    std::unordered_map<std::string, int> ids;
    FixedEffectDim dim;
    int operator()(const std::string& label) {
      auto [it, inserted] = ids.try_emplace(label, static_cast<int>(ids.size()));
      if (inserted) dim.labels.push_back(label);
      return it->second;
    }
  };
  Labeler exp_t, imp_t, pair_l, border_t;
  exp_t.dim.name = "exporter_period";
  imp_t.dim.name = "importer_period";
  pair_l.dim.name = "pair";
  border_t.dim.name = "border_period";

  EstimationProblem p;
  const auto n = static_cast<Eigen::Index>(keep.size());
  p.y.resize(n);
  p.X.resize(n, design.X.cols());
  p.names = design.names;
  std::vector<int> pair_ids;
  int first_period = 0;
  bool have_period = false;
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t d = keep[static_cast<std::size_t>(k)];
    const auto& r = panel.records[design.rows[d]];
    p.y(k) = *outcome_value(r, outcome);
    p.X.row(k) = design.X.row(static_cast<Eigen::Index>(d));
    const std::string when = to_string(r.period, f);
    exp_t.dim.ids.push_back(exp_t(r.origin + "@" + when));
    imp_t.dim.ids.push_back(imp_t(r.destination + "@" + when));
    const int pid = pair_l(r.origin + ">" + r.destination);
    pair_l.dim.ids.push_back(pid);
    border_t.dim.ids.push_back(border_t(r.is_domestic() ? std::string("domestic") : "border@" + when));
    p.pair.push_back(pid);
    const int t = period_index(r.period, f);
    p.period.push_back(t);
    p.domestic.push_back(r.is_domestic() ? 1 : 0);
    if (!have_period || t < first_period) {
      first_period = t;
      have_period = true;
    }
    if (record_rows) record_rows->push_back(design.rows[d]);
  }
  p.pair_labels = pair_l.dim.labels;
  p.cluster = p.pair;
  if (fe.exporter_period) p.fe.push_back(std::move(exp_t.dim));
  if (fe.importer_period) p.fe.push_back(std::move(imp_t.dim));
  if (fe.pair) p.fe.push_back(std::move(pair_l.dim));
  if (fe.border_period) {
    p.fe.push_back(std::move(border_t.dim));
    if (have_period) p.dropped_border_label = "border@" + to_string(period_from_index(first_period, f), f);
  }
  return p;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw ConfigError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

GravityPanel apply_sample_filters(const GravityPanel& panel, const SampleFilters& filters,
                                  FilterReport* report) {
  FilterReport rep;
  rep.input = panel.records.size();
  GravityPanel out;
  out.frequency = panel.frequency;

  for (const auto& r : panel.records) {
    if (filters.drop_countries.count(r.origin) || filters.drop_countries.count(r.destination)) {
      continue;
    }
    if (filters.year_range &&
        (r.period.year < filters.year_range->first || r.period.year > filters.year_range->second)) {
      continue;
    }
    if (filters.war_country_years.count({r.origin, r.period.year}) ||
        filters.war_country_years.count({r.destination, r.period.year})) {
      continue;
    }
    if (filters.democratic_polity_min && !r.is_domestic()) {
      const double cut = *filters.democratic_polity_min;
      const bool democratic = r.polity_i && r.polity_j && *r.polity_i >= cut && *r.polity_j >= cut;
      if (filters.democratic_mode == DemocraticMode::kKeepOnly && !democratic) continue;
      if (filters.democratic_mode == DemocraticMode::kExclude && democratic) continue;
    }
    out.records.push_back(r);
  }
  rep.after_subset = out.records.size();

  if (filters.trim_pd_quantiles) {
    const auto [lo_q, hi_q] = *filters.trim_pd_quantiles;
    if (!(lo_q >= 0.0 && lo_q < hi_q && hi_q <= 1.0)) {
      throw ConfigError("trim quantiles must satisfy 0 <= lo < hi <= 1");
    }
    std::vector<double> pds;
    for (const auto& r : out.records) {
      if (!r.is_domestic() && r.pd) pds.push_back(*r.pd);
    }
    if (!pds.empty()) {
      const double lo = empirical_quantile(pds, lo_q);
      const double hi = empirical_quantile(pds, hi_q);
      rep.trim_bounds = std::pair(lo, hi);
      std::erase_if(out.records, [&](const GravityRecord& r) {
        return !r.is_domestic() && r.pd && (*r.pd < lo || *r.pd > hi);
      });
    }
  }
  rep.after_trim = out.records.size();
  if (report) *report = rep;
  if (out.records.empty()) throw DataError("sample filters removed every record");
  return out;
}

PdLookup make_pd_lookup(const std::vector<DistanceSeries>& series) {
  PdLookup lookup;
  for (const auto& s : series) {
    const auto [a, b] = split_pair_id(s.pair_id);
    const std::string id = canonical_pair_id(a, b);
    const int first = period_index(s.start, s.frequency);
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      if (!s.values[k]) continue;
      lookup[{id, period_from_index(first + static_cast<int>(k), s.frequency)}] = *s.values[k];
    }
  }
  return lookup;
}

std::size_t join_pd(GravityPanel& panel, const PdLookup& lookup) {
  std::size_t missing = 0;
  for (auto& r : panel.records) {
    if (r.is_domestic()) continue;
    auto it = lookup.find({canonical_pair_id(r.origin, r.destination), r.period});
    if (it == lookup.end()) {
      r.pd.reset();
      ++missing;
    } else {
      r.pd = it->second;
    }
  }
  return missing;
}

}  // namespace pdgrav
