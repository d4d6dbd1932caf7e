#pragma once

// Versioned CSV files. Every file starts with "#schema=v1"; further
// "#key=value" lines before the header carry metadata. Missing values are
// empty fields.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pdgrav/event_index.hpp"
#include "pdgrav/gravity_panel.hpp"

namespace pdgrav::io {

inline constexpr std::string_view kSchema = "v1";

struct CsvTable {
  std::string source;
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // 1-based line in the source per row

  std::optional<std::size_t> column(std::string_view name) const;
  // Throws DataError naming the column.
  std::size_t require(std::string_view name) const;

  // "source:line" for row r.
  std::string where(std::size_t r) const;

  const std::string& cell(std::size_t r, std::size_t c) const { return rows[r][c]; }
  double number(std::size_t r, std::size_t c) const;
  std::optional<double> optional_number(std::size_t r, std::size_t c) const;
  long integer(std::size_t r, std::size_t c) const;
};

// A schema line other than "#schema=v1", ragged rows and a missing header
// raise DataError. Files without a schema line are accepted.
CsvTable parse_csv(std::istream& in, std::string source);
CsvTable read_csv(const std::filesystem::path& path);

// Shortest text that reads back to the same double.
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header,
                     std::vector<std::pair<std::string, std::string>> meta = {});
  void row(const std::vector<std::string>& fields);
  std::string str() const;

 private:
  std::string text_;
  std::size_t width_;
};

// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// "2000", "2000Q3" or "2000M07".
std::pair<Period, Frequency> parse_period(std::string_view text);

// pair_id,year,month,goldstein_sum,event_count_pair,event_count_either.
// Pair ids are canonicalised.
EventPanel read_events(const std::filesystem::path& path);

// pair_id,period,value,event_count,observed_months,coverage_months with
// frequency, sign and filtered in the metadata.
std::string format_series(const std::vector<DistanceSeries>& series);
std::vector<DistanceSeries> parse_series(const CsvTable& table);

// Panel columns in file order.
const std::vector<std::string>& panel_columns();
std::string format_panel(const GravityPanel& panel);
// Only origin, destination and period are mandatory; `present` receives the
// columns found so callers can demand the ones they need.
GravityPanel parse_panel(const CsvTable& table, std::set<std::string>* present = nullptr);

}  // namespace pdgrav::io
