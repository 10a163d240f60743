#pragma once
// Shared small pieces: smooth ramps, seeded RNG streams, misc helpers.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sflow {

inline constexpr double kPi = 3.14159265358979323846;

// exp(-1/t) for t > 0, else 0. C-infinity glue used by every ramp in here.
double ramp_q(double t);

// Transition profile on [lo, hi]: 1 below lo, 0 above hi.
// value = q((hi-r)/d) / (q((hi-r)/d) + q((r-lo)/d)), d = hi - lo.
double ramp_profile(double r, double lo, double hi);

// Radial cutoff profile a(r): 1 on [0,1], 0 on [2,inf), exp ramp between.
// First and second derivatives are closed forms (needed by the hard-coded
// far-kernel component functions).
struct CutoffProfile {
  double value(double r) const;
  double d1(double r) const;
  double d2(double r) const;
};

// Littlewood-Paley low-pass symbol profile: 1 for rho <= 3/5, 0 for rho >= 5/6.
double lp_chi_profile(double rho);

// Deterministic substream scheme: one master seed, children derived by
// splitmix64 over (seed, tag). All randomness in the project flows from here.
struct RngStream {
  std::mt19937_64 engine;
  explicit RngStream(std::uint64_t seed) : engine(seed) {}
  double normal() {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(engine);
  }
  double uniform() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(engine);
  }
  std::uint64_t raw() { return engine(); }
};

std::uint64_t splitmix64(std::uint64_t x);

// Child stream for a named purpose; stable across runs and platforms.
RngStream substream(std::uint64_t master_seed, const std::string& tag);

struct SflowError : std::runtime_error {
  explicit SflowError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw SflowError(msg);
}

}  // namespace sflow
