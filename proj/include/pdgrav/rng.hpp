#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pdgrav {

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over the bytes of `s`. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view s);

// Child seeds for named or numbered sub-streams of a base seed. Used so that
// per-pair and per-replicate streams do not depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

using Rng = std::mt19937_64;

}  // namespace pdgrav
