#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace udef {

// Invalid run configuration (unknown game name, out-of-range parameter, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A caller violated an operation's contract (NaN input, shape mismatch, ...).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// A policy lookup hit an infoset with no entry.
struct IncompletePolicyError : std::runtime_error {
  explicit IncompletePolicyError(const std::string& what)
      : std::runtime_error(what) {}
};

// NaN/inf appeared inside a network during training.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

// splitmix64; used to derive independent per-entry / per-episode seeds so that
// parallel and sequential schedules draw identical streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(base ^ a) ^ b) ^ c);
}

using Rng = std::mt19937_64;

// Draws an index from a discrete distribution via inverse CDF on one uniform.
// `antithetic` flips the uniform to 1-u, pairing trajectories for variance
// reduction in Monte Carlo payoff estimates.
inline int sample_index(const std::vector<double>& probs, Rng& rng,
                        bool antithetic = false) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (antithetic) u = 1.0 - u;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Shortest-lossless-round-trip decimal formatting for CSV output.
inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline bool is_distribution(const std::vector<double>& p, double tol = 1e-9) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= -tol)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

inline double l1_distance(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

}  // namespace udef
