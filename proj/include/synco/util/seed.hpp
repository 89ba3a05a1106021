#pragma once

#include <cstdint>
#include <string_view>

namespace synco {

/// Per-purpose seed from a run seed:
///   derive_seed(seed, name) = splitmix64(seed XOR fnv1a64(name))
/// Every random stream in the library is keyed this way, so one run seed
/// fixes the whole pipeline.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = seed ^ h;
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return derive_seed(derive_seed(seed, name) + index, "index");
}

}  // namespace synco
