#include "pdgrav/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdgrav/effects.hpp"
#include "pdgrav/errors.hpp"
#include "pdgrav/event_index.hpp"
#include "pdgrav/io.hpp"
#include "pdgrav/latent_filter.hpp"
#include "pdgrav/logit.hpp"
#include "pdgrav/panel_builder.hpp"
#include "pdgrav/ppml.hpp"
#include "pdgrav/rng.hpp"
#include "pdgrav/synth.hpp"

namespace pdgrav::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// ---- option echo -------------------------------------------------------

std::string render_string(const std::string& s) {
  const char q = s.find('"') == std::string::npos ? '"' : '\'';
  return q + s + q;
}

template <class T>
std::optional<std::string> render(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return std::string(v ? "true" : "false");
  } else if constexpr (std::is_same_v<T, std::string>) {
    return render_string(v);
  } else if constexpr (std::is_floating_point_v<T>) {
    return io::format_number(v);
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    static_assert(sizeof(T) == 0, "unsupported option type");
  }
}

template <class T>
std::optional<std::string> render(const std::optional<T>& v) {
  if (!v) return std::nullopt;
  return render(*v);
}

std::optional<std::string> render(const std::vector<std::string>& v) {
  if (v.empty()) return std::nullopt;
  std::string out = "[";
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + render_string(v[k]);
  return out + "]";
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct HelpShown {};

class Command {
 public:
  Command(const std::string& name, const std::string& description, std::ostream& out)
      : name_(name), app_(description, name), out_(out) {
    app_.set_config("--config", "", "key=value file; command-line flags take precedence");
    app_.add_option("--manifest", manifest_path_, "Manifest path (default: next to the main output)");
  }

  template <class T>
  CLI::Option* option(const std::string& name, T& ref, const std::string& description) {
    CLI::Option* o = app_.add_option("--" + name, ref, description);
    echo_.emplace_back(name, [&ref] { return render(ref); });
    return o;
  }

  void input(const std::string& key, const std::string& path) {
    if (!path.empty()) inputs_.emplace_back(key, path);
  }

  CLI::App& app() { return app_; }

  void parse(int argc, const char* const* argv) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out_ << app_.help();
      throw HelpShown{};
    }
  }
  const std::string& name() const { return name_; }

  void write_manifest(const fs::path& fallback) const {
    std::string text = "# pdgrav manifest\n# command=" + name_ + "\n";
    for (const auto& [key, path] : inputs_) {
      text += "# input." + key + "=" + path + " fnv1a64=" + hex64(fnv1a64(io::read_file(path))) + "\n";
    }
    for (const auto& [key, get] : echo_) {
      if (auto v = get()) text += key + "=" + *v + "\n";
    }
    io::write_atomic(manifest_path_.empty() ? fallback : fs::path(manifest_path_), text);
  }

 private:
  std::string name_;
  CLI::App app_;
  std::ostream& out_;
  std::string manifest_path_;
  std::vector<std::pair<std::string, std::function<std::optional<std::string>()>>> echo_;
  std::vector<std::pair<std::string, std::string>> inputs_;
};

class Log {
 public:
  Log(std::ostream& os, std::string command) : os_(os), command_(std::move(command)) {}
  void operator()(const std::string& level, const std::string& event, const Json& fields = Json::object()) const {
    Json j;
    j["level"] = level;
    j["command"] = command_;
    j["event"] = event;
    for (const auto& [k, v] : fields.items()) j[k] = v;
    os_ << j.dump() << "\n";
  }

 private:
  std::ostream& os_;
  std::string command_;
};

fs::path manifest_for(const std::string& out) { return fs::path(out + ".manifest"); }

CLI::Option* choice(CLI::Option* o, std::vector<std::string> values) {
  return o->check(CLI::IsMember(std::move(values)));
}

Resampling parse_resampling(const std::string& s) {
  return s == "systematic" ? Resampling::kSystematic : Resampling::kMultinomial;
}

Initialization parse_init(const std::string& s) {
  return s == "first_observation" ? Initialization::kFirstObservation : Initialization::kEmpirical;
}

// ---- build-index --------------------------------------------------------

struct FilterOptions {
  int particles = kDefaultParticles;
  double q_floor = kProcessVarianceFloor;
  double q_default = kProcessVarianceDefault;
  std::uint64_t seed = 0;
  std::string resampling = "multinomial";
  std::string init = "empirical";

  void add(Command& cmd) {
    cmd.option("particles", particles, "Particles per pair")->check(CLI::PositiveNumber);
    cmd.option("q_floor", q_floor, "Lower bound on the process variance");
    cmd.option("q_default", q_default, "Process variance when the AR(1) fit fails");
    cmd.option("seed", seed, "Base seed; each pair derives its own stream");
    choice(cmd.option("resampling", resampling, "multinomial or systematic"), {"multinomial", "systematic"});
    choice(cmd.option("init", init, "empirical or first_observation"), {"empirical", "first_observation"});
  }

  FilterConfig config() const {
    FilterConfig c;
    c.particles = particles;
    c.q_floor = q_floor;
    c.q_default = q_default;
    c.seed = seed;
    c.resampling = parse_resampling(resampling);
    c.initialization = parse_init(init);
    return c;
  }
};

std::vector<DistanceSeries> filter_all(const std::vector<DistanceSeries>& series, const FilterOptions& opt,
                                       const Log& log) {
  std::vector<DistanceSeries> out;
  out.reserve(series.size());
  const FilterConfig config = opt.config();
  for (const auto& s : series) {
    if (s.frequency != Frequency::kMonthly) throw DataError("filtering needs a monthly series (" + s.pair_id + ")");
    if (s.filtered) throw DataError("series " + s.pair_id + " is already filtered");
    if (s.sign != SignConvention::kRaw) throw DataError("series " + s.pair_id + " is not in raw sign");
    out.push_back(filter_index(s, config));
  }
  log("info", "filtered", {{"pairs", out.size()}, {"particles", opt.particles}});
  return out;
}

int cmd_build_index(int argc, const char* const* argv, std::ostream& help_out, std::ostream& err) {
  Command cmd("build-index", "Normalise event aggregates into per-pair distance series", help_out);
  std::string events, out, frequency = "monthly", aggregation = "sum";
  int start_year = kWindowStartYear, end_year = kWindowEndYear, threshold = kBaselineCoverageMonths;
  bool filter = true;
  FilterOptions fopt;
  cmd.option("events", events, "Event CSV")->required();
  cmd.option("out", out, "Output series CSV")->required();
  cmd.option("start_year", start_year, "First year of the window (January)");
  cmd.option("end_year", end_year, "Last year of the window (December)");
  cmd.option("threshold", threshold, "Minimum non-zero months per pair")->check(CLI::NonNegativeNumber);
  cmd.option("filter", filter, "Run the particle filter on retained pairs");
  choice(cmd.option("frequency", frequency, "Output frequency"), {"monthly", "quarterly", "annual"});
  choice(cmd.option("aggregation", aggregation, "sum or first_month"), {"sum", "first_month"});
  fopt.add(cmd);
  cmd.parse(argc, argv);
  cmd.input("events", events);
  const Log log(err, cmd.name());

  IndexWindow window{{start_year, 1}, {end_year, 12}};
  if (window.months() <= 0) throw ConfigError("empty index window");
  const auto monthly = build_monthly_series(io::read_events(events), window);
  log("info", "series_built", {{"pairs", monthly.size()}, {"months", window.months()}});
  ThresholdResult kept = apply_coverage_threshold(monthly, threshold);
  log("info", "coverage_threshold",
      {{"threshold", threshold}, {"retained", kept.retained.size()}, {"retention_fraction", kept.retention_fraction}});

  std::vector<DistanceSeries> series = filter ? filter_all(kept.retained, fopt, log) : kept.retained;
  const Frequency f = parse_frequency(frequency);
  if (f != Frequency::kMonthly) {
    const AggregationMode mode = aggregation == "sum" ? AggregationMode::kSum : AggregationMode::kFirstMonth;
    for (auto& s : series) s = aggregate_period(s, f, mode);
  }
  io::write_atomic(out, io::format_series(series));
  cmd.write_manifest(manifest_for(out));
  log("info", "done", {{"out", out}});
  return kExitOk;
}

int cmd_filter(int argc, const char* const* argv, std::ostream& help_out, std::ostream& err) {
  Command cmd("filter", "Particle-filter monthly distance series", help_out);
  std::string in, out;
  FilterOptions fopt;
  cmd.option("series", in, "Monthly series CSV")->required();
  cmd.option("out", out, "Output series CSV")->required();
  fopt.add(cmd);
  cmd.parse(argc, argv);
  cmd.input("series", in);
  const Log log(err, cmd.name());
  const auto series = io::parse_series(io::read_csv(in));
  io::write_atomic(out, io::format_series(filter_all(series, fopt, log)));
  cmd.write_manifest(manifest_for(out));
  log("info", "done", {{"out", out}});
  return kExitOk;
}

// ---- build-panel --------------------------------------------------------

using CountryPeriod = std::pair<std::string, Period>;

int cmd_build_panel(int argc, const char* const* argv, std::ostream& help_out, std::ostream& err) {
  Command cmd("build-panel", "Assemble the gravity panel from flows, GDP, covariates and an index", help_out);
  std::string flows, gdp, pairs, countries, index, out, aggregation = "sum";
  bool zeros = true;
  cmd.option("flows", flows, "International flows CSV (origin,destination,period,flow[,sectors,products])")
      ->required();
  cmd.option("gdp", gdp, "country,period,gdp; domestic trade is GDP minus exports");
  cmd.option("pairs", pairs, "origin,destination,period,rta,gattwto_1,gattwto_2");
  cmd.option("countries", countries, "country,period,polity,corruption,wgi_va,wgi_rl");
  cmd.option("index", index, "Distance series CSV joined as pd");
  cmd.option("out", out, "Output panel CSV")->required();
  cmd.option("zeros", zeros, "Insert structural zeros");
  choice(cmd.option("aggregation", aggregation, "Monthly index to panel frequency: sum or first_month"),
         {"sum", "first_month"});
  cmd.parse(argc, argv);
  for (const auto& [k, p] : {std::pair<std::string, std::string>{"flows", flows}, {"gdp", gdp}, {"pairs", pairs},
                             {"countries", countries}, {"index", index}}) {
    cmd.input(k, p);
  }
  const Log log(err, cmd.name());

  GravityPanel panel = io::parse_panel(io::read_csv(flows));
  const Frequency f = panel.frequency;
  log("info", "flows_read", {{"records", panel.records.size()}, {"frequency", to_string(f)}});

  auto period_of = [&](const io::CsvTable& t, std::size_t r, std::size_t c) {
    const auto [p, pf] = io::parse_period(t.cell(r, c));
    if (pf != f) throw DataError(t.where(r) + ": period frequency differs from the flows");
    return p;
  };

  if (!gdp.empty()) {
    const io::CsvTable t = io::read_csv(gdp);
    const auto c_c = t.require("country"), c_p = t.require("period"), c_g = t.require("gdp");
    std::map<CountryPeriod, double> exports;
    for (const auto& r : panel.records) {
      if (r.is_domestic()) throw DataError(flows + ": domestic record " + r.origin + " given alongside --gdp");
      if (r.flow) exports[{r.origin, r.period}] += *r.flow;
    }
    std::size_t clamped = 0;
    std::vector<GravityRecord> domestic;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      GravityRecord rec;
      rec.origin = rec.destination = t.cell(r, c_c);
      rec.period = period_of(t, r, c_p);
      auto it = exports.find({rec.origin, rec.period});
      const DomesticTrade d = build_domestic_trade(t.optional_number(r, c_g),
                                                   it == exports.end() ? std::optional<double>(0.0) : it->second);
      rec.flow = d.value;
      clamped += d.clamped;
      domestic.push_back(std::move(rec));
    }
    panel.records.insert(panel.records.end(), domestic.begin(), domestic.end());
    log(clamped ? "warning" : "info", "domestic_trade", {{"records", domestic.size()}, {"clamped", clamped}});
  }

  if (zeros) {
    ZeroInsertionReport rep;
    panel = insert_structural_zeros(std::move(panel), &rep);
    log("info", "structural_zeros", {{"filled", rep.filled}, {"created", rep.created}});
  } else {
    std::sort(panel.records.begin(), panel.records.end(), [f](const GravityRecord& a, const GravityRecord& b) {
      const int ta = period_index(a.period, f), tb = period_index(b.period, f);
      return std::tie(ta, a.origin, a.destination) < std::tie(tb, b.origin, b.destination);
    });
  }

  if (!pairs.empty()) {
    const io::CsvTable t = io::read_csv(pairs);
    const auto c_o = t.require("origin"), c_d = t.require("destination"), c_p = t.require("period");
    const auto c_rta = t.require("rta"), c_g1 = t.require("gattwto_1"), c_g2 = t.require("gattwto_2");
    std::map<std::tuple<std::string, std::string, Period>, std::array<double, 3>> lookup;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      lookup[{t.cell(r, c_o), t.cell(r, c_d), period_of(t, r, c_p)}] = {t.number(r, c_rta), t.number(r, c_g1),
                                                                       t.number(r, c_g2)};
    }
    std::size_t missing = 0;
    for (auto& rec : panel.records) {
      if (rec.is_domestic()) continue;
      auto it = lookup.find({rec.origin, rec.destination, rec.period});
      if (it == lookup.end()) {
        ++missing;
        continue;
      }
      rec.rta = it->second[0];
      rec.gattwto_1 = it->second[1];
      rec.gattwto_2 = it->second[2];
    }
    log(missing ? "warning" : "info", "pair_covariates", {{"unmatched_records", missing}});
  }

  if (!countries.empty()) {
    const io::CsvTable t = io::read_csv(countries);
    const auto c_c = t.require("country"), c_p = t.require("period");
    struct Gov {
      std::optional<double> polity, corruption, va, rl;
    };
    const auto c_pol = t.column("polity"), c_cor = t.column("corruption"), c_va = t.column("wgi_va"),
               c_rl = t.column("wgi_rl");
    auto opt = [&](std::size_t r, std::optional<std::size_t> c) {
      return c ? t.optional_number(r, *c) : std::nullopt;
    };
    std::map<CountryPeriod, Gov> lookup;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      lookup[{t.cell(r, c_c), period_of(t, r, c_p)}] = {opt(r, c_pol), opt(r, c_cor), opt(r, c_va), opt(r, c_rl)};
    }
    for (auto& rec : panel.records) {
      if (auto it = lookup.find({rec.origin, rec.period}); it != lookup.end()) {
        rec.polity_i = it->second.polity;
        rec.corruption_i = it->second.corruption;
        rec.wgi_va_i = it->second.va;
        rec.wgi_rl_i = it->second.rl;
      }
      if (auto it = lookup.find({rec.destination, rec.period}); it != lookup.end()) {
        rec.polity_j = it->second.polity;
        rec.corruption_j = it->second.corruption;
        rec.wgi_va_j = it->second.va;
        rec.wgi_rl_j = it->second.rl;
      }
    }
  }

  if (!index.empty()) {
    std::vector<DistanceSeries> series = io::parse_series(io::read_csv(index));
    for (auto& s : series) {
      if (s.frequency == Frequency::kMonthly && f != Frequency::kMonthly) {
        s = aggregate_period(s, f, aggregation == "sum" ? AggregationMode::kSum : AggregationMode::kFirstMonth);
      }
      if (s.frequency != f) throw DataError(index + ": index frequency " + to_string(s.frequency) +
                                            " cannot be joined to a " + to_string(f) + " panel");
      if (s.sign == SignConvention::kRaw) s = negate_for_regression(std::move(s));
    }
    const std::size_t missing = join_pd(panel, make_pd_lookup(series));
    log(missing ? "warning" : "info", "pd_joined", {{"series", series.size()}, {"unmatched_records", missing}});
  }

  io::write_atomic(out, io::format_panel(panel));
  cmd.write_manifest(manifest_for(out));
  log("info", "done", {{"out", out}, {"records", panel.records.size()}});
  return kExitOk;
}

// ---- estimate -----------------------------------------------------------

std::vector<std::string> outcome_columns(Outcome o, const std::set<std::string>& present) {
  switch (o) {
    case Outcome::kValue:
      return {"flow"};
    case Outcome::kValuePerSector:
      return {"flow", "sectors"};
    case Outcome::kSectors:
    case Outcome::kSectorShare:
      return {"sectors"};
    case Outcome::kProducts:
      return {"products"};
    case Outcome::kAnyTrade:
      return {present.count("sectors") ? "sectors" : "flow"};
  }
  return {};
}

std::vector<std::string> term_columns(const std::string& term) {
  static const std::map<std::string, std::string> cov = {
      {"RTA", "rta"},
      {"GATTWTO_1", "gattwto_1"},
      {"GATTWTO_2", "gattwto_2"},
      {"Corruption_i", "corruption_i"},
      {"Corruption_j", "corruption_j"},
      {"Polity_i", "polity_i"},
      {"Polity_j", "polity_j"},
      {"WGI_VA_i", "wgi_va_i"},
      {"WGI_VA_j", "wgi_va_j"},
      {"WGI_RL_i", "wgi_rl_i"},
      {"WGI_RL_j", "wgi_rl_j"},
  };
  if (term == "PD") return {"pd"};
  if (auto it = cov.find(term); it != cov.end()) return {it->second};
  if (term.rfind("PD_x_", 0) == 0) {
    if (auto it = cov.find(term.substr(5)); it != cov.end()) return {"pd", it->second};
  }
  return {};
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? sep : "") + v[k];
  return out;
}

std::string finite_or_empty(double v) { return std::isfinite(v) ? io::format_number(v) : std::string(); }

void write_vcov(const fs::path& path, const std::vector<std::string>& names, const Eigen::MatrixXd& v) {
  std::vector<std::string> header = {"term"};
  header.insert(header.end(), names.begin(), names.end());
  io::CsvWriter w(header);
  for (std::size_t a = 0; a < names.size(); ++a) {
    std::vector<std::string> row = {names[a]};
    for (std::size_t b = 0; b < names.size(); ++b) {
      row.push_back(v.size() ? finite_or_empty(v(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)))
                             : std::string());
    }
    w.row(row);
  }
  io::write_atomic(path, w.str());
}

int cmd_estimate(int argc, const char* const* argv, std::ostream& help_out, std::ostream& err) {
  Command cmd("estimate", "Fit a PPML or fixed-effects logit gravity model", help_out);
  std::string panel_path, out, vcov, model = "ppml", outcome = "value", pd_source = "events",
                                    governance = "polity_corruption", cluster = "pair",
                                    democratic_mode = "keep", war;
  std::vector<std::string> terms, fe = {"exporter_period", "importer_period", "pair", "border_period"},
                                  drop_countries;
  bool collapse = false, spj = true;
  std::optional<double> trim_low, trim_high, democratic_min;
  std::optional<int> year_from, year_to;
  int bootstrap = 0, threads = 0, max_iterations = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;

  cmd.option("panel", panel_path, "Panel CSV")->required();
  cmd.option("out", out, "Coefficient CSV")->required();
  cmd.option("vcov", vcov, "Covariance CSV (default: <out>.vcov.csv)");
  choice(cmd.option("model", model, "ppml or logit"), {"ppml", "logit"});
  choice(cmd.option("outcome", outcome, "Outcome variable"),
         {"value", "value_per_sector", "sectors", "products", "any_trade", "sector_share"});
  cmd.option("terms", terms, "Design terms (default: the full interaction set)");
  choice(cmd.option("pd_source", pd_source, "events (enters through asinh) or unga"), {"events", "unga"});
  choice(cmd.option("governance", governance, "Governance interactions"), {"polity_corruption", "wgi", "none"});
  cmd.option("collapse_gattwto1", collapse, "Drop GATTWTO_1 terms");
  cmd.option("fe", fe, "Fixed-effect dimensions")
      ->check(CLI::IsMember({"exporter_period", "importer_period", "pair", "border_period"}));
  choice(cmd.option("cluster", cluster, "Cluster unit"), {"pair", "exporter", "importer"});
  cmd.option("drop_countries", drop_countries, "Countries removed from the sample");
  cmd.option("trim_low", trim_low, "Lower PD quantile kept");
  cmd.option("trim_high", trim_high, "Upper PD quantile kept");
  cmd.option("democratic_min", democratic_min, "Polity score at or above which a country is democratic");
  choice(cmd.option("democratic_mode", democratic_mode, "keep or exclude democratic pairs"), {"keep", "exclude"});
  cmd.option("war", war, "country,year CSV of war years to exclude");
  cmd.option("year_from", year_from, "First year kept");
  cmd.option("year_to", year_to, "Last year kept");
  cmd.option("spj", spj, "Split-panel jackknife correction (logit)");
  cmd.option("bootstrap", bootstrap, "Pair-bootstrap replications (logit)")->check(CLI::NonNegativeNumber);
  cmd.option("seed", seed, "Bootstrap seed");
  cmd.option("threads", threads, "Bootstrap threads (0: all cores)");
  cmd.option("tolerance", tolerance, "Relative deviance tolerance");
  cmd.option("max_iterations", max_iterations, "IRLS iteration cap");
  cmd.parse(argc, argv);
  cmd.input("panel", panel_path);
  cmd.input("war", war);
  const Log log(err, cmd.name());

  const Outcome oc = parse_outcome(outcome);
  if (model == "logit" && !is_bounded_outcome(oc)) {
    throw ConfigError("logit needs a bounded outcome (any_trade or sector_share), not '" + outcome + "'");
  }
  if (trim_low.has_value() != trim_high.has_value()) throw ConfigError("trim_low and trim_high go together");

  std::set<std::string> present;
  const io::CsvTable table = io::read_csv(panel_path);
  GravityPanel panel = io::parse_panel(table, &present);

  DesignOptions dopt;
  dopt.pd_source = pd_source == "events" ? PdSource::kEvents : PdSource::kUnga;
  dopt.governance = governance == "wgi" ? Governance::kWgi
                    : governance == "none" ? Governance::kNone
                                           : Governance::kPolityCorruption;
  dopt.collapse_gattwto1 = collapse;
  dopt.terms = terms;
  const std::vector<std::string> design_terms = terms.empty() ? default_terms(dopt) : terms;

  std::vector<std::string> needed = outcome_columns(oc, present);
  for (const auto& t : design_terms) {
    const auto cols = term_columns(t);
    if (cols.empty()) throw ConfigError("unknown design term '" + t + "'");
    needed.insert(needed.end(), cols.begin(), cols.end());
  }
  if (democratic_min) needed.insert(needed.end(), {"polity_i", "polity_j"});
  if (trim_low) needed.push_back("pd");
  for (const auto& c : needed) {
    if (!present.count(c)) throw DataError(table.source + ": missing required column '" + c + "'");
  }

  SampleFilters filters;
  filters.drop_countries = {drop_countries.begin(), drop_countries.end()};
  if (trim_low) filters.trim_pd_quantiles = std::pair(*trim_low, *trim_high);
  filters.democratic_polity_min = democratic_min;
  filters.democratic_mode = democratic_mode == "keep" ? DemocraticMode::kKeepOnly : DemocraticMode::kExclude;
  if (year_from || year_to) filters.year_range = std::pair(year_from.value_or(-100000), year_to.value_or(100000));
  if (!war.empty()) {
    const io::CsvTable t = io::read_csv(war);
    const auto c_c = t.require("country"), c_y = t.require("year");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      filters.war_country_years.emplace(t.cell(r, c_c), static_cast<int>(t.integer(r, c_y)));
    }
  }
  FilterReport frep;
  panel = apply_sample_filters(panel, filters, &frep);
  log("info", "sample", {{"input", frep.input}, {"after_subset", frep.after_subset}, {"after_trim", frep.after_trim}});

  const DesignMatrix design = build_interactions(panel, dopt);
  const std::set<std::string> fe_set(fe.begin(), fe.end());
  FixedEffectSpec fes;
  fes.exporter_period = fe_set.count("exporter_period") > 0;
  fes.importer_period = fe_set.count("importer_period") > 0;
  fes.pair = fe_set.count("pair") > 0;
  fes.border_period = fe_set.count("border_period") > 0;
  std::vector<std::size_t> record_rows;
  EstimationProblem problem = make_problem(panel, design, oc, fes, &record_rows);
  if (cluster != "pair") {
    std::vector<std::string> labels;
    for (auto r : record_rows) {
      labels.push_back(cluster == "exporter" ? panel.records[r].origin : panel.records[r].destination);
    }
    std::map<std::string, int> ids;
    problem.cluster.clear();
    for (const auto& l : labels) problem.cluster.push_back(ids.try_emplace(l, static_cast<int>(ids.size())).first->second);
  }
  log("info", "design", {{"rows", problem.n_rows()}, {"terms", problem.names}});

  GlmOptions gopt;
  gopt.deviance_tolerance = tolerance;
  gopt.max_iterations = max_iterations;

  const fs::path vcov_path = vcov.empty() ? fs::path(out + ".vcov.csv") : fs::path(vcov);
  std::vector<std::pair<std::string, std::string>> meta = {{"model", model}, {"outcome", outcome}};
  std::vector<std::string> names;
  Eigen::VectorXd estimate;
  Eigen::MatrixXd covariance;
  std::vector<std::size_t> sample;
  std::vector<std::vector<std::string>> extra;  // logit: uncorrected, half1, half2

  if (model == "ppml") {
    const FitResult fit = fit_ppml(problem, gopt);
    names = fit.names;
    estimate = fit.coefficients;
    covariance = fit.covariance;
    sample = fit.sample;
    meta.insert(meta.end(), {{"n_obs", std::to_string(fit.n_obs)},
                             {"n_clusters", std::to_string(fit.n_clusters)},
                             {"iterations", std::to_string(fit.iterations)},
                             {"deviance", io::format_number(fit.deviance)},
                             {"dropped_separated", std::to_string(fit.n_dropped_separated)},
                             {"dropped_collinear", join(fit.dropped_collinear, ";")}});
    log("info", "fit", {{"iterations", fit.iterations}, {"deviance", fit.deviance},
                        {"final_change", fit.final_deviance_change}, {"n_obs", fit.n_obs},
                        {"dropped_separated", fit.n_dropped_separated}, {"dropped_collinear", fit.dropped_collinear}});
  } else if (spj) {
    const LogitFit fit = estimate_logit(problem, bootstrap, seed, gopt, threads);
    names = fit.names;
    estimate = fit.corrected;
    covariance = fit.bootstrap_covariance;
    sample = fit.sample;
    for (Eigen::Index k = 0; k < estimate.size(); ++k) {
      extra.push_back({io::format_number(fit.uncorrected(k)), io::format_number(fit.half1(k)),
                       io::format_number(fit.half2(k))});
    }
    meta.insert(meta.end(), {{"n_obs", std::to_string(fit.n_obs)},
                             {"spj", "true"},
                             {"dropped_perfectly_classified", std::to_string(fit.dropped_perfectly_classified.size())},
                             {"half1_drops", std::to_string(fit.half1_drops.size())},
                             {"half2_drops", std::to_string(fit.half2_drops.size())},
                             {"bootstrap", std::to_string(fit.replications)},
                             {"bootstrap_failures", std::to_string(fit.failed_replications)}});
    log("info", "fit", {{"n_obs", fit.n_obs}, {"dropped_perfectly_classified", fit.dropped_perfectly_classified.size()},
                        {"half1_drops", fit.half1_drops.size()}, {"half2_drops", fit.half2_drops.size()},
                        {"bootstrap_failures", fit.failed_replications}});
  } else {
    const LogitEstimate fit = fit_fe_logit(problem, gopt);
    names = fit.names;
    estimate = fit.coefficients;
    sample = fit.sample;
    meta.insert(meta.end(), {{"n_obs", std::to_string(fit.n_obs)},
                             {"spj", "false"},
                             {"dropped_perfectly_classified", std::to_string(fit.dropped_perfectly_classified.size())}});
    if (bootstrap > 0) {
      const std::vector<std::string> full_names = names;
      const BootstrapResult boot = pair_bootstrap(
          problem,
          [&](const EstimationProblem& p) {
            const LogitEstimate e = fit_fe_logit(p, gopt);
            if (e.names != full_names) throw DataError("replicate dropped a regressor");
            return e.coefficients;
          },
          bootstrap, seed, threads);
      covariance = boot.covariance;
      meta.insert(meta.end(), {{"bootstrap", std::to_string(bootstrap)},
                               {"bootstrap_failures", std::to_string(boot.failures)}});
    }
    log("info", "fit", {{"n_obs", fit.n_obs}, {"iterations", fit.iterations},
                        {"dropped_perfectly_classified", fit.dropped_perfectly_classified.size()}});
  }

  double mean_y = 0.0;
  for (auto r : sample) mean_y += problem.y(static_cast<Eigen::Index>(r));
  mean_y /= static_cast<double>(sample.size());
  meta.emplace_back("mean_outcome", io::format_number(mean_y));
  if (std::find(names.begin(), names.end(), "PD") != names.end()) {
    meta.emplace_back("pd_sd", io::format_number(regressor_sd(problem, "PD", sample, true)));
  }
  meta.emplace_back("vcov", vcov_path.filename().string());

  std::vector<std::string> header = {"term", "estimate", "se", "z", "p_value"};
  if (!extra.empty()) header.insert(header.end(), {"uncorrected", "half1", "half2"});
  io::CsvWriter w(header, meta);
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double se = covariance.size() ? std::sqrt(covariance(i, i)) : NAN;
    const double z = estimate(i) / se;
    std::vector<std::string> row = {names[k], io::format_number(estimate(i)), finite_or_empty(se),
                                    finite_or_empty(z), finite_or_empty(std::erfc(std::abs(z) / std::sqrt(2.0)))};
    if (!extra.empty()) row.insert(row.end(), extra[k].begin(), extra[k].end());
    w.row(row);
  }
  io::write_atomic(out, w.str());
  write_vcov(vcov_path, names, covariance);
  cmd.write_manifest(manifest_for(out));
  log("info", "done", {{"out", out}, {"vcov", vcov_path.string()}});
  return kExitOk;
}

// ---- effects ------------------------------------------------------------

Condition parse_condition(const std::string& text, const std::string& pd_term) {
  std::string label = text, body = text;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    label = text.substr(0, colon);
    body = text.substr(colon + 1);
  }
  std::map<std::string, double> covs;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("condition item '" + item + "' is not NAME=value");
    try {
      std::size_t used = 0;
      const std::string v = item.substr(eq + 1);
      covs[item.substr(0, eq)] = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::logic_error&) {
      throw ConfigError("condition item '" + item + "' has a bad value");
    }
  }
  return pd_condition(label.empty() ? "baseline" : label, covs, pd_term);
}

int cmd_effects(int argc, const char* const* argv, std::ostream& help_out, std::ostream& err) {
  Command cmd("effects", "One-standard-deviation effects of political distance", help_out);
  std::string coefficients, vcov, out, plot_data, pd_term = "PD";
  std::optional<double> sd, baseline_p;
  std::vector<std::string> conditions;
  cmd.option("coefficients", coefficients, "Coefficient CSV from estimate")->required();
  cmd.option("vcov", vcov, "Covariance CSV (default: named in the coefficient file)");
  cmd.option("out", out, "Effect CSV")->required();
  cmd.option("plot_data", plot_data, "label,effect,ci_low,ci_high CSV for charts");
  cmd.option("sd", sd, "PD standard deviation (default: estimation sample)");
  cmd.option("baseline_p", baseline_p, "Logit evaluation probability (default: sample mean outcome)");
  cmd.option("condition", conditions, "label:NAME=value,NAME=value; repeatable");
  cmd.option("pd_term", pd_term, "Name of the political-distance coefficient");
  cmd.parse(argc, argv);
  const io::CsvTable coef = io::read_csv(coefficients);
  if (vcov.empty()) {
    auto it = coef.meta.find("vcov");
    if (it == coef.meta.end()) throw ConfigError("no --vcov and none named in " + coef.source);
    vcov = (fs::path(coefficients).parent_path() / it->second).string();
  }
  cmd.input("coefficients", coefficients);
  cmd.input("vcov", vcov);
  const Log log(err, cmd.name());

  CoefficientTable table;
  const auto c_t = coef.require("term"), c_e = coef.require("estimate");
  table.estimates.resize(static_cast<Eigen::Index>(coef.rows.size()));
  for (std::size_t r = 0; r < coef.rows.size(); ++r) {
    table.names.push_back(coef.cell(r, c_t));
    table.estimates(static_cast<Eigen::Index>(r)) = coef.number(r, c_e);
  }
  const auto p = static_cast<Eigen::Index>(table.names.size());
  table.covariance = Eigen::MatrixXd::Constant(p, p, NAN);
  const io::CsvTable vt = io::read_csv(vcov);
  const auto v_t = vt.require("term");
  for (std::size_t r = 0; r < vt.rows.size(); ++r) {
    const auto a = std::find(table.names.begin(), table.names.end(), vt.cell(r, v_t)) - table.names.begin();
    if (a == p) throw DataError(vt.where(r) + ": term '" + vt.cell(r, v_t) + "' not among the coefficients");
    for (Eigen::Index b = 0; b < p; ++b) {
      const auto c = vt.require(table.names[static_cast<std::size_t>(b)]);
      if (auto v = vt.optional_number(r, c)) table.covariance(a, b) = *v;
    }
  }

  const bool logit = coef.meta.count("model") && coef.meta.at("model") == "logit";
  if (!sd) {
    auto it = coef.meta.find("pd_sd");
    if (it == coef.meta.end()) throw ConfigError("no --sd and no pd_sd in " + coef.source);
    sd = std::stod(it->second);
  }
  if (logit && !baseline_p) {
    auto it = coef.meta.find("mean_outcome");
    if (it == coef.meta.end()) throw ConfigError("no --baseline_p and no mean_outcome in " + coef.source);
    baseline_p = std::stod(it->second);
  }

  std::vector<Condition> conds;
  for (const auto& c : conditions) conds.push_back(parse_condition(c, pd_term));
  if (conds.empty()) {
    conds.push_back(pd_condition("baseline", {}, pd_term));
    if (std::find(table.names.begin(), table.names.end(), pd_term + "_x_GATTWTO_2") != table.names.end()) {
      conds.push_back(pd_condition("gattwto_2", {{"GATTWTO_2", 1.0}}, pd_term));
    }
  }

  io::CsvWriter w({"label", "condition", "unit", "b", "b_se", "effect", "se", "ci_low", "ci_high", "sd_used"},
                  {{"model", logit ? "logit" : "ppml"}});
  io::CsvWriter plot({"label", "effect", "ci_low", "ci_high"});
  for (const auto& c : conds) {
    const EffectReport e = logit ? logit_effect_pp(table, *sd, c, *baseline_p) : one_sd_effect(table, *sd, c);
    std::string cond;
    for (const auto& [k, v] : c.weights) cond += (cond.empty() ? "" : ";") + k + "=" + io::format_number(v);
    w.row({e.label, cond, e.unit, io::format_number(e.b), finite_or_empty(std::sqrt(e.b_variance)),
           io::format_number(e.effect), finite_or_empty(e.se), finite_or_empty(e.ci_low), finite_or_empty(e.ci_high),
           io::format_number(e.sd_used)});
    plot.row({e.label, io::format_number(e.effect), finite_or_empty(e.ci_low), finite_or_empty(e.ci_high)});
    log("info", "effect", {{"label", e.label}, {"effect", e.effect}, {"se", e.se}, {"unit", e.unit}});
  }
  io::write_atomic(out, w.str());
  if (!plot_data.empty()) io::write_atomic(plot_data, plot.str());
  cmd.write_manifest(manifest_for(out));
  log("info", "done", {{"out", out}});
  return kExitOk;
}

// ---- simulate -----------------------------------------------------------

int cmd_simulate(int argc, const char* const* argv, std::ostream& help_out, std::ostream& err) {
  Command cmd("simulate", "Write a synthetic panel with known coefficients and its component files", help_out);
  synth::DgpSpec spec;
  std::string out_dir, frequency = "annual", family = "poisson";
  std::vector<std::string> beta = {"PD=-0.1", "RTA=0.3", "GATTWTO_2=0.2", "PD_x_GATTWTO_2=0.05"};
  cmd.option("out_dir", out_dir, "Output directory")->required();
  cmd.option("seed", spec.seed, "Random seed");
  cmd.option("countries", spec.n_countries, "Number of countries");
  cmd.option("periods", spec.n_periods, "Number of periods");
  choice(cmd.option("frequency", frequency, "annual or quarterly"), {"annual", "quarterly"});
  cmd.option("start_year", spec.start_year, "First year");
  choice(cmd.option("family", family, "poisson or bernoulli"), {"poisson", "bernoulli"});
  cmd.option("beta", beta, "True coefficients as NAME=value");
  cmd.option("pd_ihs", spec.pd_ihs, "PD enters through asinh");
  cmd.option("intercept", spec.intercept, "Constant in the linear predictor");
  cmd.option("exporter_fe_scale", spec.exporter_fe_scale, "SD of exporter-period effects");
  cmd.option("importer_fe_scale", spec.importer_fe_scale, "SD of importer-period effects");
  cmd.option("pair_fe_scale", spec.pair_fe_scale, "SD of pair effects");
  cmd.option("border_fe_scale", spec.border_fe_scale, "SD of border-period effects");
  cmd.option("pd_ar", spec.pd_ar, "Latent PD autoregression");
  cmd.option("pd_innovation_sd", spec.pd_innovation_sd, "Latent PD innovation SD");
  cmd.option("pd_noise_sd", spec.pd_noise_sd, "PD measurement noise SD");
  cmd.option("pd_mean", spec.pd_mean, "Latent PD mean");
  cmd.option("rta_share", spec.rta_share, "Share of pairs with an RTA");
  cmd.option("gatt_initial_share", spec.gatt_initial_share, "Share of founding members");
  cmd.option("gatt_join_rate", spec.gatt_join_rate, "Per-period joining hazard");
  cmd.parse(argc, argv);
  const Log log(err, cmd.name());

  spec.frequency = parse_frequency(frequency);
  spec.family = family == "poisson" ? synth::Family::kPoisson : synth::Family::kBernoulli;
  spec.beta.clear();
  for (const auto& b : beta) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) throw ConfigError("beta '" + b + "' is not NAME=value");
    try {
      spec.beta[b.substr(0, eq)] = std::stod(b.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("beta '" + b + "' has a bad value");
    }
  }
  const synth::SyntheticPanel sim = synth::gen_panel(spec);
  const GravityPanel& panel = sim.panel;
  const Frequency f = panel.frequency;
  const fs::path dir(out_dir);

  io::CsvWriter flows({"origin", "destination", "period", "flow", "sectors"}, {{"frequency", to_string(f)}});
  io::CsvWriter pairs({"origin", "destination", "period", "rta", "gattwto_1", "gattwto_2"});
  io::CsvWriter gdp({"country", "period", "gdp"});
  io::CsvWriter countries({"country", "period", "polity", "corruption", "wgi_va", "wgi_rl"});
  std::map<CountryPeriod, double> exports;
  for (const auto& r : panel.records) {
    if (!r.is_domestic()) exports[{r.origin, r.period}] += *r.flow;
  }
  std::map<std::string, DistanceSeries> index;
  for (const auto& r : panel.records) {
    const std::string period = to_string(r.period, f);
    if (r.is_domestic()) {
      gdp.row({r.origin, period, io::format_number(*r.flow + exports[{r.origin, r.period}])});
      countries.row({r.origin, period, io::format_optional(r.polity_i), io::format_optional(r.corruption_i),
                     io::format_optional(r.wgi_va_i), io::format_optional(r.wgi_rl_i)});
      continue;
    }
    flows.row({r.origin, r.destination, period, io::format_optional(r.flow), io::format_optional(r.sectors)});
    pairs.row({r.origin, r.destination, period, io::format_number(r.rta), io::format_number(r.gattwto_1),
               io::format_number(r.gattwto_2)});
    if (r.origin < r.destination) {
      auto [it, inserted] = index.try_emplace(canonical_pair_id(r.origin, r.destination));
      DistanceSeries& s = it->second;
      if (inserted) {
        s.pair_id = it->first;
        s.frequency = f;
        s.start = r.period;
        s.sign = SignConvention::kNegated;
      }
      s.values.push_back(r.pd);
    }
  }
  std::vector<DistanceSeries> series;
  for (auto& [id, s] : index) series.push_back(std::move(s));

  io::CsvWriter truth({"term", "beta"}, {{"seed", std::to_string(spec.seed)}});
  for (const auto& [name, b] : spec.beta) truth.row({name, io::format_number(b)});

  io::write_atomic(dir / "panel.csv", io::format_panel(panel));
  io::write_atomic(dir / "flows.csv", flows.str());
  io::write_atomic(dir / "pairs.csv", pairs.str());
  io::write_atomic(dir / "gdp.csv", gdp.str());
  io::write_atomic(dir / "countries.csv", countries.str());
  io::write_atomic(dir / "index.csv", io::format_series(series));
  io::write_atomic(dir / "truth.csv", truth.str());
  cmd.write_manifest(dir / "simulate.manifest");
  log("info", "done", {{"out_dir", out_dir}, {"records", panel.records.size()}});
  return kExitOk;
}

const std::map<std::string, int (*)(int, const char* const*, std::ostream&, std::ostream&)>& commands() {
  static const std::map<std::string, int (*)(int, const char* const*, std::ostream&, std::ostream&)> table = {
      {"build-index", cmd_build_index}, {"filter", cmd_filter},   {"build-panel", cmd_build_panel},
      {"estimate", cmd_estimate},       {"effects", cmd_effects}, {"simulate", cmd_simulate},
  };
  return table;
}

void usage(std::ostream& os) {
  os << "usage: pdgrav <command> [options]\n\ncommands:\n";
  for (const auto& [name, fn] : commands()) os << "  " << name << "\n";
  os << "\nRun 'pdgrav <command> --help' for the options of a command.\n";
}

void error_line(std::ostream& err, const std::string& kind, const std::string& what) {
  Json j;
  j["level"] = "error";
  j["error"] = kind;
  j["message"] = what;
  err << j.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (argc < 2) {
    usage(err);
    return kExitConfig;
  }
  const std::string sub = argv[1];
  if (sub == "--help" || sub == "-h" || sub == "help") {
    usage(out);
    return kExitOk;
  }
  auto it = commands().find(sub);
  if (it == commands().end()) {
    error_line(err, "config", "unknown command '" + sub + "'");
    usage(err);
    return kExitConfig;
  }
  try {
    // The subcommand name takes the place of the program name.
    return it->second(argc - 1, argv + 1, out, err);
  } catch (const HelpShown&) {
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return kExitOk;
    error_line(err, "config", e.what());
    return kExitConfig;
  } catch (const ConfigError& e) {
    error_line(err, "config", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    error_line(err, "data", e.what());
    return kExitData;
  } catch (const ConvergenceError& e) {
    Json j;
    j["level"] = "error";
    j["error"] = "convergence";
    j["message"] = e.what();
    j["trace"] = e.trace();
    err << j.dump() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    error_line(err, "internal", e.what());
    return 1;
  }
}

}  // namespace pdgrav::cli
