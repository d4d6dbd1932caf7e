#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdgrav/period.hpp"

namespace pdgrav {

// One directed (origin, destination, period) observation.
struct GravityRecord {
  std::string origin;
  std::string destination;
  Period period;

  std::optional<double> flow;      // trade value
  std::optional<double> sectors;   // sectors traded, 0..9
  std::optional<double> products;  // HS-6 products traded

  std::optional<double> pd;  // political distance, regression sign convention

  double rta = 0.0;
  double gattwto_1 = 0.0;  // exactly one partner is a member
  double gattwto_2 = 0.0;  // both partners are members

  std::optional<double> polity_i, polity_j;
  std::optional<double> corruption_i, corruption_j;
  std::optional<double> wgi_va_i, wgi_va_j;  // voice and accountability
  std::optional<double> wgi_rl_i, wgi_rl_j;  // rule of law

  bool is_domestic() const { return origin == destination; }
};

struct GravityPanel {
  Frequency frequency = Frequency::kAnnual;
  std::vector<GravityRecord> records;
};

enum class Outcome {
  kValue,           // X
  kValuePerSector,  // X / S
  kSectors,         // S
  kProducts,        // HS-6 product count
  kAnyTrade,        // 1(S > 0), or 1(X > 0) when S is absent
  kSectorShare,     // S / 9
};

inline constexpr double kTradeProdSectors = 9.0;

std::optional<double> outcome_value(const GravityRecord& r, Outcome outcome);

Outcome parse_outcome(std::string_view s);
std::string to_string(Outcome outcome);

// Both probability outcomes lie in [0, 1].
bool is_bounded_outcome(Outcome outcome);

}  // namespace pdgrav
