#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mlab {

std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t Fnv1a64(std::string_view bytes);

// Stage seed for (master seed, stage name, cell id). Stable across platforms.
std::uint64_t DeriveSeed(std::uint64_t master, std::string_view stage,
                         std::string_view cell);
// Per-episode / per-item sub-seed.
std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t index);

std::string HexDigest(std::uint64_t value);

}  // namespace mlab
