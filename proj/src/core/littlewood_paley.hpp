#pragma once
// Dyadic frequency decomposition, block norms, Bernstein brackets, and the
// blockwise Riesz transform.
//
// Symbols: chi_hat(xi) = 1 for |xi| <= 3/5, 0 for |xi| >= 5/6 (exp ramp
// between); phi_hat(xi) = chi_hat(xi/2) - chi_hat(xi), supported on
// 3/5 <= |xi| <= 5/3. Blocks j >= 0 use phi_hat(2^-j xi); block -1 uses
// chi_hat. The family is cut at j_max, the largest j with 5/3 * 2^j at or
// below the grid Nyquist frequency.

#include <string>
#include <vector>

#include "core/field.hpp"

namespace sflow {

struct DyadicFamily {
  Grid grid;
  int j_max = 0;

  // radial symbol values
  static double chi_hat(double rho);
  static double phi_hat(double rho);
  // max over grid modes with |xi| <= 5/6 * 2^j_max of |partition sum - 1|
  double partition_defect() const;
};

DyadicFamily make_dyadic_family(const Grid& g);

// Inhomogeneous block Delta_j: j = -1 is the low block, 0 <= j <= j_max the
// annular blocks. Throws outside [-1, j_max].
ScalarField lp_block(const DyadicFamily& fam, const ScalarField& f, int j);
// Homogeneous block: phi_hat(2^-j xi) for any |j| <= j_max.
ScalarField lp_block_dot(const DyadicFamily& fam, const ScalarField& f, int j);
// S_n: multiplier chi_hat(xi / 2^{n+1}); defined for any n >= -1 (degenerates
// toward the identity once the cut passes Nyquist).
ScalarField low_pass(const DyadicFamily& fam, const ScalarField& f, int n);

struct NormReportRow {
  std::string label;
  double value = 0.0;
};

struct NormReport {
  std::string kind;
  double exponent = 0.0;
  double value = 0.0;
  std::vector<NormReportRow> rows;
  std::string to_json() const;
};

// sup_j 2^{jr} ||Delta_j f||_inf over j in [-1, j_max]
NormReport holder_norm(const DyadicFamily& fam, const ScalarField& f, double r);
// homogeneous variant over j in [-j_max, j_max]
NormReport holder_norm_dot(const DyadicFamily& fam, const ScalarField& f, double r);

// Classical norm, r non-integer in (0,4): sum of sup norms of derivatives up
// to [r], plus the top-derivative Hoelder seminorm taken over lattice pairs
// within distance 2, with the separated-pair bound 2||D^[r]f||_inf / 2^{r-[r]}
// folded in analytically.
NormReport classical_holder_norm(const ScalarField& f, double r);
// Integer-index classical norm: sum of sup norms of derivatives up to k.
double classical_ck_norm(const ScalarField& f, int k);
double classical_ck_norm(const VectorField& v, int k);

struct BernsteinResult {
  double measured = 0.0;  // || |grad|^k f ||_2 / || f ||_2
  double lo = 0.0;        // (3/5 * 2^j)^k
  double hi = 0.0;        // (5/3 * 2^j)^k
  bool inside() const { return measured >= lo && measured <= hi; }
};

// Throws unless f's spectrum is supported in the block-j annulus to 1e-12
// relative mass.
BernsteinResult bernstein_bracket(const DyadicFamily& fam, const ScalarField& f,
                                  int j, int k);

// Restrict the spectrum to lo <= |xi| <= hi (test-data helper for the bracket).
ScalarField project_annulus(const ScalarField& f, double lo, double hi);

// Blockwise Riesz transform: sum over |j| <= j_max of
// F^{-1}( phi_hat(2^-j xi) * (i xi_comp / |xi|) * f_hat ).
ScalarField riesz_lp(const DyadicFamily& fam, const ScalarField& f, int comp);

}  // namespace sflow
