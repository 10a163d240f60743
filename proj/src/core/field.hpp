#pragma once
// Grids, fields, spectral operators, field-file I/O.
//
// Internal spectra are raw unnormalized FFTW c2c arrays. The physical
// convention documented at the interface is: coefficients carry weight dx^d
// (forward) and frequency-space measure (2L)^-d (Parseval); multipliers are
// normalization-free so raw spectra are used everywhere internally.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace sflow {

using cplx = std::complex<double>;

struct Grid {
  int dim = 2;        // 2 or 3
  int n = 0;          // points per axis, power of two, >= 16
  double half = 0.0;  // L; box is [-L, L)^dim, period 2L

  double spacing() const { return 2.0 * half / n; }
  double freq_step() const { return kPi / half; }
  double nyquist() const { return (n / 2) * freq_step(); }
  std::int64_t points() const {
    std::int64_t p = 1;
    for (int d = 0; d < dim; ++d) p *= n;
    return p;
  }
  double coord(int idx) const { return -half + idx * spacing(); }
  // index along one axis -> signed integer frequency index in (-n/2, n/2]
  int signed_index(int t) const { return t <= n / 2 ? t : t - n; }
  double freq(int t) const { return signed_index(t) * freq_step(); }
  double cell_measure() const {
    double m = 1.0;
    for (int d = 0; d < dim; ++d) m *= spacing();
    return m;
  }
  bool operator==(const Grid& o) const {
    return dim == o.dim && n == o.n && half == o.half;
  }
};

Grid make_grid(int dim, double half_width, int n);

// Row-major with the last index fastest: flat = (i0*n + i1)*n + i2 ...
inline std::int64_t flat_index(const Grid& g, const int* idx) {
  std::int64_t f = 0;
  for (int d = 0; d < g.dim; ++d) f = f * g.n + idx[d];
  return f;
}

// Raw c2c transforms (FFTW, unnormalized). idft divides by N^dim.
std::vector<cplx> dft(const Grid& g, const std::vector<double>& values);
std::vector<cplx> dft_complex(const Grid& g, const std::vector<cplx>& values);
std::vector<cplx> idft(const Grid& g, const std::vector<cplx>& coeffs);
std::vector<double> idft_real(const Grid& g, const std::vector<cplx>& coeffs);

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& g) : grid_(g), values_(g.points(), 0.0) {}
  ScalarField(const Grid& g, std::vector<double> v);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  // mutable access drops the spectral cache
  std::vector<double>& mutate() {
    spectral_.reset();
    return values_;
  }
  double at(const int* idx) const { return values_[flat_index(grid_, idx)]; }

  // cached raw forward transform of values
  const std::vector<cplx>& spectrum() const;
  static ScalarField from_spectrum(const Grid& g, const std::vector<cplx>& coeffs);

 private:
  Grid grid_;
  std::vector<double> values_;
  mutable std::optional<std::vector<cplx>> spectral_;
};

struct VectorField {
  std::vector<ScalarField> comp;

  VectorField() = default;
  VectorField(const Grid& g, int ncomp) : comp(ncomp, ScalarField(g)) {}
  const Grid& grid() const { return comp.at(0).grid(); }
  int ncomp() const { return static_cast<int>(comp.size()); }
};

// Pointwise helpers.
double sup_norm(const ScalarField& f);
double sup_norm(const VectorField& v);  // sup of Euclidean magnitude
double l2_norm(const ScalarField& f);   // weighted by dx^d
double mean(const ScalarField& f);
double oscillation(const ScalarField& f);  // max - min
ScalarField scaled(const ScalarField& f, double c);
void axpy(ScalarField& y, double a, const ScalarField& x);  // y += a*x
ScalarField pointwise_product(const ScalarField& a, const ScalarField& b);
double max_abs_diff(const ScalarField& a, const ScalarField& b);
double max_abs_diff(const VectorField& a, const VectorField& b);

// Spectral operators. alpha is a multi-index per axis; |alpha| <= 8.
ScalarField spectral_derivative(const ScalarField& f, const std::array<int, 3>& alpha);
VectorField gradient(const ScalarField& f);
ScalarField divergence(const VectorField& v);
VectorField curl3(const VectorField& v);              // dim 3
VectorField perp_grad(const ScalarField& f);          // dim 2: (-d2 f, d1 f)
ScalarField apply_radial_multiplier(const ScalarField& f, double (*m)(double));

// Relative Parseval gap: |sum|f|^2 dx^d - sum|fhat|^2 (2L)^-d| / max.
double parseval_gap(const ScalarField& f);

// Spectral zero-pad upsampling by an integer factor (band-limited exact).
ScalarField upsample(const ScalarField& f, int factor);

// Periodic Catmull-Rom interpolation (bicubic / tricubic by grid dim).
// clip: restrict the value to the stencil's [min, max] (transport max principle).
double interp_cubic(const ScalarField& f, const double* x, bool clip);

// Field file I/O. 64-byte header: "SFLD", version u32, dim u32, N u32, L f64,
// ncomp u32, zero padding; then per component little-endian f64 row-major.
// A JSON sidecar at path + ".json" mirrors the header and records provenance.
void save_field(const VectorField& v, const std::string& path,
                const std::string& provenance);
VectorField load_field(const std::string& path);

// Band-limited random data: Gaussian coefficients on kmin <= |xi| <= kmax with
// exp(-(|xi|/k0)^2) decay, hermitian-symmetrized, zero mean, scaled so the sup
// norm equals target_sup.
ScalarField random_band_limited(const Grid& g, RngStream& rng, double kmin,
                                double kmax, double k0, double target_sup);
// Divergence-free 3D counterpart (leray projection of a random vector field).
VectorField random_divfree3(const Grid& g, RngStream& rng, double kmin,
                            double kmax, double k0, double target_sup);

}  // namespace sflow
