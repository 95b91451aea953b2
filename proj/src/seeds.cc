#include "mlab/seeds.h"

#include <cstdio>

namespace mlab {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t DeriveSeed(std::uint64_t master, std::string_view stage,
                         std::string_view cell) {
  std::uint64_t h = SplitMix64(master);
  h = SplitMix64(h ^ Fnv1a64(stage));
  return SplitMix64(h ^ Fnv1a64(cell));
}

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t index) {
  return SplitMix64(SplitMix64(base) ^ SplitMix64(index + 0x632be59bd9b4e019ULL));
}

std::string HexDigest(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace mlab
