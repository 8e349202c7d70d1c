#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fastdad {

using Rng = std::mt19937_64;

// Independent stream keyed by (seed, key...). Distinct keys give distinct
// seed sequences, so chains, folds and passes never share a stream.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> key = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (key.size() + 1) + 1);
  words.push_back(static_cast<std::uint32_t>(key.size()));
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Stable 64-bit child seed, used where a module hands a seed to another.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  Rng rng = make_stream(seed, key);
  return rng();
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace fastdad
