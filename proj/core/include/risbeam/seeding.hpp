#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace risbeam {

// SplitMix64 finalizer. Used to derive independent RNG streams from a master
// seed plus integer tags, so results never depend on evaluation order.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t s = mix64(base);
  for (auto t : tags) s = mix64(s ^ mix64(t));
  return s;
}

// FNV-1a, 64 bit. Stable across platforms, used for config hashes and string tags.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace risbeam
