#pragma once
// Kernel tables for the near/far split of the constitutive laws.
//
// 2D: the scalar potential kernel is Phi(x) = 1/(2pi|x|) (symbol 1/|xi|).
// The near piece a_lambda*Phi is compactly supported inside the box, so its
// torus coefficients equal the continuum symbol lambda G(|xi| lambda) with
// G(z) = int_0^2 a(r) J0(zr) dr, evaluated by panel quadrature; the far
// matrix d_j[grad^perp((1-a)Phi)]^i takes the remainder symbol
// (i xi_j)(i xi^perp_k)(1/|xi| - near), the complete image sum by Poisson
// summation. The split reassembles the constitutive symbol exactly, so
// reassembly error reflects wiring only; physical fidelity of each half is
// limited by the interpolated G (~1e-9).
//
// 3D: both kernel halves are gradients of radial potentials, and the tables
// store the potentials. With Q(r) = int_r^2 a'(t)/t dt,
//   phi_near = (a(rho/lam)/rho + Q(rho/lam)/lam) / 4pi   (supported in B_2lam)
//   phi_far  = ((1-a)/rho - Q/lam) / 4pi                 (G outside, const inside)
// so grad phi_near = a grad G and grad phi_far = (1-a) grad G exactly, with
// G = 1/(4pi|x|). Every 3D operator symbol is an i*xi monomial times one of
// three scalar spectra (phi_near, phi_far, div[(1-a)gradG]), which makes
// gradient structure (curl of the pressure force, shear annihilation) exact
// on the lattice. phi_far is periodized by Ewald screening: the lattice
// samples carry phi_far - erf(alpha rho)/(4pi rho), which decays like erfc
// beyond the ramp, and the compensating Gaussian is added analytically in
// frequency as exp(-|xi|^2/4alpha^2)/|xi|^2. Screened periodization images
// are below double rounding for the admitted alpha; their bound is recorded.
//
// Tables carry the cell measure h^d, so a raw DFT product implements the
// lattice quadrature of the convolution directly.

#include <array>
#include <string>
#include <vector>

#include "core/field.hpp"

namespace sflow {

// radial cutoff a_lambda(x) = a(|x|/lambda); a = 1 on [0,1], 0 off [2,inf)
struct Cutoff {
  double lambda = 1.0;
  double value(double r) const;
  double d1(double r) const;
  double d2(double r) const;
};

enum class KernelKind { sqg2d, euler3d };

struct KernelSet {
  Grid grid;
  KernelKind kind = KernelKind::sqg2d;
  double lambda = 1.0;
  int shells = 3;      // 3d periodization image shells (2d needs none)
  int oversample = 0;  // 3d sampling refinement (2d tables are exact symbols)
  double alpha = 0.0;  // 3d Ewald screening scale

  double origin_weight = 0.0;  // h^d-folded table value at the zero offset

  // diagnostics
  double near_l1 = 0.0;         // lattice L1 of the near table
  double far_l1 = 0.0;          // lattice Frobenius L1 of the far tables
  double far_tail_bound = 0.0;  // L-inf bound on the dropped periodization images

  // production-mode symbols of the h^d-weighted tables (full c2c layout)
  std::vector<cplx> near2d;
  std::array<std::vector<cplx>, 4> far2d;  // matrix (i,j) row-major
  std::vector<cplx> near_pot;              // 3d near potential
  std::vector<cplx> far_pot;               // 3d screened far potential + Ewald tail
  std::vector<cplx> far_div;               // 3d div[(1-a)K], ramp annulus
};

// shells: image layers summed when periodizing the 2D far matrix (the 3D far
// potential is screened, its images are recorded in far_tail_bound instead).
// oversample 0 picks the default (2d: 8; 3d: 256/n clamped to [2,8]).
// alpha 0 picks 7/(L - 2 lambda); callers comparing kernel sets at several
// lambda on one grid should pass a shared value so the screening cancels.
// Throws if the cutoff does not fit the box or the kind/grid mismatch.
KernelSet build_kernel_set(const Grid& g, double lambda, KernelKind kind,
                           int shells = 3, int oversample = 0, double alpha = 0.0);

// 2D convolutions.
VectorField near_conv_perp(const ScalarField& f, const KernelSet& ks);   // (a Phi) * grad^perp f
ScalarField near_conv_scalar(const ScalarField& f, const KernelSet& ks); // (a Phi) * f
// out^i = sum_j (d_j[grad^perp((1-a)Phi)]^i) * F^j
VectorField far_conv_contract(const VectorField& F, const KernelSet& ks);

// 3D convolutions.
VectorField near_cross_conv(const VectorField& w, const KernelSet& ks);   // (aK) conv-cross w
VectorField near_vector_conv(const ScalarField& q, const KernelSet& ks);  // (aK^k) * q per k
// out^k = sum_{ij} (d_i d_j[(1-a)K^k]) * P^{ij}; P symmetric, passed as its
// six upper-triangle components in order (00,01,02,11,12,22).
VectorField far_hessian_contract(const std::array<const ScalarField*, 6>& P,
                                 const KernelSet& ks);
// out^k = sum_j (d_j div[(1-a)K]) * (v^j w^k)
VectorField far_divgrad_contract(const VectorField& v, const VectorField& w,
                                 const KernelSet& ks);
// velocity replacement terms (d_k[(1-a)K^k]) * u^i - (d_i[(1-a)K^k]) * u^k,
// the integrated-by-parts far half of the split Biot-Savart law
VectorField far_curlcurl_conv(const VectorField& u, const KernelSet& ks);
// ((1-a)K^k) * q per k, and (div[(1-a)K]) * f
VectorField far_vector_conv(const ScalarField& q, const KernelSet& ks);
ScalarField far_div_conv(const ScalarField& f, const KernelSet& ks);

// Closed-form point values backing the tables (finite-difference checkable).
double cutoff_q(double r);                          // Q(r) = int_r^2 a'(t)/t dt
double phi_near_point(double rho, double lambda);   // near potential, rho > 0
double phi_far_point(double rho, double lambda);    // far potential, unscreened
void near3d_point(double z0, double z1, double z2, double lambda, double out[3]);
void far3d_point(double z0, double z1, double z2, double lambda, double hess[10],
                 double ndiv[3]);
void far2d_point(double z0, double z1, double lambda, double m[4]);
double fdiv3d_point(double rho, double lambda);     // div[(1-a)K] radial profile

// Frobenius L1 of the 3D far Hessian table over the box.
double far3d_l1(const KernelSet& ks);

// Write the tables as field files into dir (near + far components).
void dump_kernel_tables(const KernelSet& ks, const std::string& dir);

}  // namespace sflow
