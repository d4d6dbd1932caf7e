#include "pdgrav/period.hpp"

#include <string>

#include "pdgrav/errors.hpp"

namespace pdgrav {

int periods_per_year(Frequency f) {
  switch (f) {
    case Frequency::kMonthly: return 12;
    case Frequency::kQuarterly: return 4;
    case Frequency::kAnnual: return 1;
  }
  return 1;
}

int period_index(Period p, Frequency f) {
  const int per_year = periods_per_year(f);
  if (per_year == 1) return p.year;
  return p.year * per_year + (p.sub - 1);
}

Period period_from_index(int index, Frequency f) {
  const int per_year = periods_per_year(f);
  if (per_year == 1) return {index, 0};
  int year = index / per_year;
  int rem = index % per_year;
  if (rem < 0) {
    rem += per_year;
    --year;
  }
  return {year, rem + 1};
}

Period enclosing_period(Period month, Frequency target) {
  switch (target) {
    case Frequency::kMonthly: return month;
    case Frequency::kQuarterly: return {month.year, (month.sub - 1) / 3 + 1};
    case Frequency::kAnnual: return {month.year, 0};
  }
  return month;
}

std::string to_string(Frequency f) {
  switch (f) {
    case Frequency::kMonthly: return "monthly";
    case Frequency::kQuarterly: return "quarterly";
    case Frequency::kAnnual: return "annual";
  }
  return "annual";
}

Frequency parse_frequency(std::string_view s) {
  if (s == "monthly") return Frequency::kMonthly;
  if (s == "quarterly") return Frequency::kQuarterly;
  if (s == "annual") return Frequency::kAnnual;
  throw ConfigError("unknown frequency '" + std::string(s) + "'");
}

std::string to_string(Period p, Frequency f) {
  switch (f) {
    case Frequency::kMonthly:
      return std::to_string(p.year) + "M" + (p.sub < 10 ? "0" : "") + std::to_string(p.sub);
    case Frequency::kQuarterly: return std::to_string(p.year) + "Q" + std::to_string(p.sub);
    case Frequency::kAnnual: return std::to_string(p.year);
  }
  return std::to_string(p.year);
}

}  // namespace pdgrav
