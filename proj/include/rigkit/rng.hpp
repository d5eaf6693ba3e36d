#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string_view>

namespace rigkit::sim {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

// Seeded random stream with named sub-streams. fork(tag) depends only on the
// owner's seed and the tag, never on how many draws happened before, so
// adding draws in one part of a simulation cannot shift another part.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : seed_(seed), engine_(detail::splitmix64(seed)) {}

  Rng fork(std::string_view tag) const {
    return Rng(detail::splitmix64(seed_ ^ detail::fnv1a(tag)));
  }

  std::mt19937_64& engine() { return engine_; }

  double normal(double sigma) {
    std::normal_distribution<double> n(0.0, 1.0);
    return sigma * n(engine_);
  }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return u(engine_);
  }

  Eigen::Vector3d normal_vector(double sigma_per_axis) {
    return {normal(sigma_per_axis), normal(sigma_per_axis), normal(sigma_per_axis)};
  }

  Eigen::Vector3d unit_vector() {
    Eigen::Vector3d v;
    do {
      v = normal_vector(1.0);
    } while (v.norm() < 1e-9);
    return v.normalized();
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace rigkit::sim
