#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace srcnpat {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// seed_i = splitmix64(master ^ splitmix64(i)): child seeds for indexed work
// items, stable under reordering or partial reruns.
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

// FNV-1a of a stage name, fed through mix_seed so stages get independent
// streams from one master seed.
constexpr std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : stage) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return mix_seed(master, h);
}

}  // namespace srcnpat
