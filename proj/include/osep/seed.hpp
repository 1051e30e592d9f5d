#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace osep {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// A master seed plus labeled path. Equal (master, path) pairs always derive
// the same engine, independent of the order in which other paths are used.
struct SeedPath {
  std::uint64_t master = 0;
  std::vector<std::pair<std::string, std::int64_t>> path;

  SeedPath() = default;
  explicit SeedPath(std::uint64_t m) : master(m) {}

  SeedPath child(const std::string& label, std::int64_t value) const {
    SeedPath s = *this;
    s.path.emplace_back(label, value);
    return s;
  }

  std::uint64_t derive() const {
    std::uint64_t h = splitmix64(master);
    for (const auto& [label, value] : path) {
      h = splitmix64(h ^ fnv1a(label));
      h = splitmix64(h ^ static_cast<std::uint64_t>(value));
    }
    return h;
  }

  std::string str() const {
    std::string out = std::to_string(master);
    for (const auto& [label, value] : path) out += "/" + label + "=" + std::to_string(value);
    return out;
  }

  bool operator==(const SeedPath& o) const { return master == o.master && path == o.path; }
};

using Engine = std::mt19937_64;

inline Engine make_engine(const SeedPath& s) { return Engine(s.derive()); }

// The std distributions are implementation-defined; these are not, so draws
// are reproducible across standard libraries.
inline double uniform01(Engine& g) { return double(g() >> 11) * 0x1.0p-53; }

inline double std_normal(Engine& g) {
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline std::complex<double> complex_normal(Engine& g) {
  return {std_normal(g) * M_SQRT1_2, std_normal(g) * M_SQRT1_2};
}

inline bool bernoulli(Engine& g, double p) { return uniform01(g) < p; }

}  // namespace osep
