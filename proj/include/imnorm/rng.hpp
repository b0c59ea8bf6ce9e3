#pragma once

// Seeded random streams. Engines are std::mt19937_64 (bit-exact across
// standard libraries); variates come from Boost.Random, whose algorithms are
// fixed in source, so a seed reproduces the same draws on every platform.

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace imnorm {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a key tuple.
constexpr std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

/// Seed of one Monte Carlo replication: base_seed xor hash(n, dist, r).
constexpr std::uint64_t substream_seed(std::uint64_t base_seed, std::uint64_t n, std::uint64_t dist,
                                       std::uint64_t replication) noexcept {
  return base_seed ^ hash_keys({n, dist, replication});
}

inline Engine make_engine(std::uint64_t seed) {
  // Expand the 64-bit seed so that nearby seeds give unrelated states.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(splitmix64(seed)),
                    static_cast<std::uint32_t>(splitmix64(seed) >> 32)};
  return Engine(seq);
}

inline double standard_normal(Engine& rng) {
  boost::random::normal_distribution<double> nd(0.0, 1.0);
  return nd(rng);
}

/// Uniform on the open interval (0, 1).
inline double open_uniform(Engine& rng) {
  boost::random::uniform_01<double> u01;
  double u = 0.0;
  do {
    u = u01(rng);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

}  // namespace imnorm
