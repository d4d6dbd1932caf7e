#include "pdgrav/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "pdgrav/errors.hpp"

namespace pdgrav::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(std::string_view line, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError(where + ": unterminated quote");
  out.push_back(trim(cur));
  return out;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA"; }

}  // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return c;
  }
  return std::nullopt;
}

std::size_t CsvTable::require(std::string_view name) const {
  if (auto c = column(name)) return *c;
  throw DataError(source + ": missing required column '" + std::string(name) + "'");
}

std::string CsvTable::where(std::size_t r) const {
  return source + ":" + std::to_string(lines[r]);
}

double CsvTable::number(std::size_t r, std::size_t c) const {
  const auto v = optional_number(r, c);
  if (!v) throw DataError(where(r) + ": column '" + header[c] + "' is empty");
  return *v;
}

std::optional<double> CsvTable::optional_number(std::size_t r, std::size_t c) const {
  const std::string& s = rows[r][c];
  if (is_missing(s)) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(where(r) + ": column '" + header[c] + "': not a number: '" + s + "'");
  }
  return v;
}

long CsvTable::integer(std::size_t r, std::size_t c) const {
  const std::string& s = rows[r][c];
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(where(r) + ": column '" + header[c] + "': not an integer: '" + s + "'");
  }
  return v;
}

CsvTable parse_csv(std::istream& in, std::string source) {
  CsvTable t;
  t.source = std::move(source);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = t.source + ":" + std::to_string(line_no);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(std::string_view(line).substr(1, eq - 1));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key == "schema" && value != kSchema) {
        throw DataError(where + ": schema mismatch: expected v1, found '" + value + "'");
      }
      if (!have_header) t.meta[key] = value;
      continue;
    }
    auto fields = split_line(line, where);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      for (std::size_t a = 0; a < t.header.size(); ++a) {
        for (std::size_t b = a + 1; b < t.header.size(); ++b) {
          if (t.header[a] == t.header[b]) throw DataError(where + ": duplicate column '" + t.header[a] + "'");
        }
      }
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line_no);
  }
  if (!have_header) throw DataError(t.source + ": no header line");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, path.filename().string());
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

CsvWriter::CsvWriter(std::vector<std::string> header,
                     std::vector<std::pair<std::string, std::string>> meta)
    : width_(header.size()) {
  text_ = "#schema=" + std::string(kSchema) + "\n";
  for (const auto& [k, v] : meta) text_ += "#" + k + "=" + v + "\n";
  for (std::size_t c = 0; c < header.size(); ++c) text_ += (c ? "," : "") + quote(header[c]);
  text_ += "\n";
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw std::logic_error("CSV row width does not match the header");
  for (std::size_t c = 0; c < fields.size(); ++c) text_ += (c ? "," : "") + quote(fields[c]);
  text_ += "\n";
}

std::string CsvWriter::str() const { return text_; }

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot move output into place at '" + path.string() + "': " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::pair<Period, Frequency> parse_period(std::string_view text) {
  auto bad = [&] { return DataError("bad period '" + std::string(text) + "'"); };
  auto to_int = [&](std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) throw bad();
    return v;
  };
  if (text.size() == 4) return {Period{to_int(text), 0}, Frequency::kAnnual};
  if (text.size() == 6 && text[4] == 'Q') {
    const int q = to_int(text.substr(5));
    if (q < 1 || q > 4) throw bad();
    return {Period{to_int(text.substr(0, 4)), q}, Frequency::kQuarterly};
  }
  if (text.size() == 7 && text[4] == 'M') {
    const int m = to_int(text.substr(5));
    if (m < 1 || m > 12) throw bad();
    return {Period{to_int(text.substr(0, 4)), m}, Frequency::kMonthly};
  }
  throw bad();
}

EventPanel read_events(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto c_pair = t.require("pair_id");
  const auto c_year = t.require("year");
  const auto c_month = t.require("month");
  const auto c_sum = t.require("goldstein_sum");
  const auto c_np = t.require("event_count_pair");
  const auto c_ne = t.require("event_count_either");
  EventPanel events;
  events.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    EventRecord e;
    try {
      const auto [a, b] = split_pair_id(t.cell(r, c_pair));
      e.pair_id = canonical_pair_id(a, b);
    } catch (const std::exception& ex) {
      throw DataError(t.where(r) + ": " + ex.what());
    }
    const long month = t.integer(r, c_month);
    if (month < 1 || month > 12) throw DataError(t.where(r) + ": month out of range");
    e.month = Period{static_cast<int>(t.integer(r, c_year)), static_cast<int>(month)};
    e.goldstein_sum = t.number(r, c_sum);
    e.event_count_pair = t.integer(r, c_np);
    e.event_count_either = t.integer(r, c_ne);
    if (e.event_count_pair < 0 || e.event_count_either < 0) {
      throw DataError(t.where(r) + ": negative event count");
    }
    events.push_back(std::move(e));
  }
  return events;
}

std::string format_series(const std::vector<DistanceSeries>& series) {
  const Frequency f = series.empty() ? Frequency::kMonthly : series.front().frequency;
  const SignConvention sign = series.empty() ? SignConvention::kRaw : series.front().sign;
  const bool filtered = !series.empty() && series.front().filtered;
  for (const auto& s : series) {
    if (s.frequency != f || s.sign != sign || s.filtered != filtered) {
      throw DataError("series in one file must share frequency, sign and filtering");
    }
  }
  CsvWriter w({"pair_id", "period", "value", "event_count", "observed_months", "coverage_months"},
              {{"frequency", to_string(f)},
               {"sign", sign == SignConvention::kRaw ? "raw" : "negated"},
               {"filtered", filtered ? "1" : "0"}});
  for (const auto& s : series) {
    const int first = period_index(s.start, f);
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      w.row({s.pair_id, to_string(period_from_index(first + static_cast<int>(k), f), f),
             format_optional(s.values[k]),
             k < s.event_counts.size() ? std::to_string(s.event_counts[k]) : std::string(),
             k < s.observed_months.size() ? std::to_string(s.observed_months[k]) : std::string(),
             std::to_string(s.coverage_months)});
    }
  }
  return w.str();
}

std::vector<DistanceSeries> parse_series(const CsvTable& t) {
  const auto c_pair = t.require("pair_id");
  const auto c_period = t.require("period");
  const auto c_value = t.require("value");
  const auto c_count = t.column("event_count");
  const auto c_obs = t.column("observed_months");
  const auto c_cov = t.column("coverage_months");

  SignConvention sign = SignConvention::kRaw;
  if (auto it = t.meta.find("sign"); it != t.meta.end()) {
    if (it->second == "negated") {
      sign = SignConvention::kNegated;
    } else if (it->second != "raw") {
      throw DataError(t.source + ": unknown sign '" + it->second + "'");
    }
  }
  const bool filtered = t.meta.count("filtered") && t.meta.at("filtered") == "1";
  std::optional<Frequency> freq;
  if (auto it = t.meta.find("frequency"); it != t.meta.end()) {
    try {
      freq = parse_frequency(it->second);
    } catch (const std::exception& e) {
      throw DataError(t.source + ": " + e.what());
    }
  }

  std::vector<DistanceSeries> out;
  std::map<std::string, std::size_t> slot;
  std::vector<int> last_index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::pair<Period, Frequency> pf;
    try {
      pf = parse_period(t.cell(r, c_period));
    } catch (const DataError& e) {
      throw DataError(t.where(r) + ": " + e.what());
    }
    if (!freq) freq = pf.second;
    if (pf.second != *freq) throw DataError(t.where(r) + ": period frequency differs from the file");
    const int idx = period_index(pf.first, *freq);

    const std::string& id = t.cell(r, c_pair);
    auto [it, inserted] = slot.try_emplace(id, out.size());
    if (inserted) {
      DistanceSeries s;
      s.pair_id = id;
      s.frequency = *freq;
      s.start = pf.first;
      s.sign = sign;
      s.filtered = filtered;
      out.push_back(std::move(s));
      last_index.push_back(idx - 1);
    }
    DistanceSeries& s = out[it->second];
    int& last = last_index[it->second];
    if (idx <= last) throw DataError(t.where(r) + ": periods for " + id + " must be strictly increasing");
    for (int gap = last + 1; gap < idx; ++gap) {
      s.values.emplace_back();
      if (c_count) s.event_counts.push_back(0);
      if (c_obs) s.observed_months.push_back(0);
    }
    last = idx;
    s.values.push_back(t.optional_number(r, c_value));
    if (c_count) {
      s.event_counts.push_back(t.cell(r, *c_count).empty() ? 0 : t.integer(r, *c_count));
    }
    if (c_obs) s.observed_months.push_back(t.cell(r, *c_obs).empty() ? 0 : static_cast<int>(t.integer(r, *c_obs)));
    if (c_cov && !t.cell(r, *c_cov).empty()) s.coverage_months = static_cast<int>(t.integer(r, *c_cov));
  }
  for (auto& s : out) {
    if (!c_cov && s.frequency == Frequency::kMonthly) s.coverage_months = count_coverage(s.values);
  }
  return out;
}

namespace {

struct PanelField {
  const char* name;
  std::optional<double> GravityRecord::*opt = nullptr;
  double GravityRecord::*plain = nullptr;
};

const std::vector<PanelField>& panel_fields() {
  static const std::vector<PanelField> fields = {
      {"flow", &GravityRecord::flow},
      {"sectors", &GravityRecord::sectors},
      {"products", &GravityRecord::products},
      {"pd", &GravityRecord::pd},
      {"rta", nullptr, &GravityRecord::rta},
      {"gattwto_1", nullptr, &GravityRecord::gattwto_1},
      {"gattwto_2", nullptr, &GravityRecord::gattwto_2},
      {"polity_i", &GravityRecord::polity_i},
      {"polity_j", &GravityRecord::polity_j},
      {"corruption_i", &GravityRecord::corruption_i},
      {"corruption_j", &GravityRecord::corruption_j},
      {"wgi_va_i", &GravityRecord::wgi_va_i},
      {"wgi_va_j", &GravityRecord::wgi_va_j},
      {"wgi_rl_i", &GravityRecord::wgi_rl_i},
      {"wgi_rl_j", &GravityRecord::wgi_rl_j},
  };
  return fields;
}

}  // namespace

const std::vector<std::string>& panel_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c = {"origin", "destination", "period"};
    for (const auto& f : panel_fields()) c.emplace_back(f.name);
    return c;
  }();
  return cols;
}

std::string format_panel(const GravityPanel& panel) {
  CsvWriter w(panel_columns(), {{"frequency", to_string(panel.frequency)}});
  std::vector<std::string> row;
  for (const auto& r : panel.records) {
    row = {r.origin, r.destination, to_string(r.period, panel.frequency)};
    for (const auto& f : panel_fields()) {
      row.push_back(f.opt ? format_optional(r.*f.opt) : format_number(r.*f.plain));
    }
    w.row(row);
  }
  return w.str();
}

GravityPanel parse_panel(const CsvTable& t, std::set<std::string>* present) {
  const auto c_o = t.require("origin");
  const auto c_d = t.require("destination");
  const auto c_p = t.require("period");
  std::vector<std::pair<const PanelField*, std::size_t>> cols;
  for (const auto& f : panel_fields()) {
    if (auto c = t.column(f.name)) cols.emplace_back(&f, *c);
  }
  if (present) {
    present->clear();
    for (const auto& h : t.header) present->insert(h);
  }

  GravityPanel panel;
  std::optional<Frequency> freq;
  if (auto it = t.meta.find("frequency"); it != t.meta.end()) {
    try {
      freq = parse_frequency(it->second);
    } catch (const std::exception& e) {
      throw DataError(t.source + ": " + e.what());
    }
  }
  panel.records.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    GravityRecord rec;
    rec.origin = t.cell(r, c_o);
    rec.destination = t.cell(r, c_d);
    if (rec.origin.empty() || rec.destination.empty()) throw DataError(t.where(r) + ": empty country code");
    std::pair<Period, Frequency> pf;
    try {
      pf = parse_period(t.cell(r, c_p));
    } catch (const DataError& e) {
      throw DataError(t.where(r) + ": " + e.what());
    }
    if (!freq) freq = pf.second;
    if (pf.second != *freq) throw DataError(t.where(r) + ": period frequency differs from the file");
    rec.period = pf.first;
    for (const auto& [f, c] : cols) {
      if (f->opt) {
        rec.*(f->opt) = t.optional_number(r, c);
      } else {
        rec.*(f->plain) = t.cell(r, c).empty() ? 0.0 : t.number(r, c);
      }
    }
    panel.records.push_back(std::move(rec));
  }
  panel.frequency = freq.value_or(Frequency::kAnnual);
  return panel;
}

}  // namespace pdgrav::io
