#include "pdgrav/gravity_panel.hpp"

#include <string>

#include "pdgrav/errors.hpp"

namespace pdgrav {

std::optional<double> outcome_value(const GravityRecord& r, Outcome outcome) {
  switch (outcome) {
    case Outcome::kValue: return r.flow;
    case Outcome::kValuePerSector:
      if (!r.flow || !r.sectors) return std::nullopt;
      if (*r.sectors <= 0.0) return std::nullopt;
      return *r.flow / *r.sectors;
    case Outcome::kSectors: return r.sectors;
    case Outcome::kProducts: return r.products;
    case Outcome::kAnyTrade:
      if (r.sectors) return *r.sectors > 0.0 ? 1.0 : 0.0;
      if (r.flow) return *r.flow > 0.0 ? 1.0 : 0.0;
      return std::nullopt;
    case Outcome::kSectorShare:
      if (!r.sectors) return std::nullopt;
      return *r.sectors / kTradeProdSectors;
  }
  return std::nullopt;
}

Outcome parse_outcome(std::string_view s) {
  if (s == "value") return Outcome::kValue;
  if (s == "value_per_sector") return Outcome::kValuePerSector;
  if (s == "sectors") return Outcome::kSectors;
  if (s == "products") return Outcome::kProducts;
  if (s == "any_trade") return Outcome::kAnyTrade;
  if (s == "sector_share") return Outcome::kSectorShare;
  throw ConfigError("unknown outcome '" + std::string(s) + "'");
}

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kValue: return "value";
    case Outcome::kValuePerSector: return "value_per_sector";
    case Outcome::kSectors: return "sectors";
    case Outcome::kProducts: return "products";
    case Outcome::kAnyTrade: return "any_trade";
    case Outcome::kSectorShare: return "sector_share";
  }
  return "value";
}

bool is_bounded_outcome(Outcome outcome) {
  return outcome == Outcome::kAnyTrade || outcome == Outcome::kSectorShare;
}

}  // namespace pdgrav
