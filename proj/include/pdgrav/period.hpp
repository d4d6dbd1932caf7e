#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace pdgrav {

enum class Frequency { kMonthly, kQuarterly, kAnnual };

// A calendar period. `sub` is the month (1-12) for monthly data, the
// quarter (1-4) for quarterly data and 0 for annual data.
struct Period {
  int year = 0;
  int sub = 0;

  auto operator<=>(const Period&) const = default;
};

int periods_per_year(Frequency f);

// Consecutive integer index of a period, so that index(p) + 1 is the next period.
int period_index(Period p, Frequency f);
Period period_from_index(int index, Frequency f);

// Period of frequency `target` containing the monthly period `month`.
Period enclosing_period(Period month, Frequency target);

std::string to_string(Frequency f);
Frequency parse_frequency(std::string_view s);
std::string to_string(Period p, Frequency f);

}  // namespace pdgrav
