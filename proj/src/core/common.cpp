#include "core/common.hpp"

namespace sflow {

double ramp_q(double t) {
  if (t <= 1.5e-3) return 0.0;  // exp(-667); below double noise for our uses
  return std::exp(-1.0 / t);
}

double ramp_profile(double r, double lo, double hi) {
  if (r <= lo) return 1.0;
  if (r >= hi) return 0.0;
  const double d = hi - lo;
  const double a = ramp_q((hi - r) / d);
  const double b = ramp_q((r - lo) / d);
  return a / (a + b);
}

namespace {
// q, q', q'' at t (t > guard).
struct QDers {
  double q, q1, q2;
};
QDers qders(double t) {
  const double q = std::exp(-1.0 / t);
  const double q1 = q / (t * t);
  const double q2 = q * (1.0 / (t * t * t * t) - 2.0 / (t * t * t));
  return {q, q1, q2};
}
}  // namespace

double CutoffProfile::value(double r) const { return ramp_profile(r, 1.0, 2.0); }

double CutoffProfile::d1(double r) const {
  const double g = 1.5e-3;
  if (r <= 1.0 + g || r >= 2.0 - g) return 0.0;
  QDers A = qders(2.0 - r);  // alpha(r) = q(2-r)
  QDers B = qders(r - 1.0);  // beta(r)  = q(r-1)
  const double a = A.q, b = B.q;
  const double a1 = -A.q1, b1 = B.q1;
  const double s = a + b;
  return (a1 * b - a * b1) / (s * s);
}

double CutoffProfile::d2(double r) const {
  const double g = 1.5e-3;
  if (r <= 1.0 + g || r >= 2.0 - g) return 0.0;
  QDers A = qders(2.0 - r);
  QDers B = qders(r - 1.0);
  const double a = A.q, b = B.q;
  const double a1 = -A.q1, b1 = B.q1;
  const double a2 = A.q2, b2 = B.q2;
  const double s = a + b;
  const double num = a1 * b - a * b1;
  return ((a2 * b - a * b2) * s - 2.0 * num * (a1 + b1)) / (s * s * s);
}

double lp_chi_profile(double rho) { return ramp_profile(rho, 3.0 / 5.0, 5.0 / 6.0); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream substream(std::uint64_t master_seed, const std::string& tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return RngStream(splitmix64(master_seed ^ h));
}

}  // namespace sflow
