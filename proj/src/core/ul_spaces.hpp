#pragma once

// Uniformly local norms. The L^p_ul norm takes a sup over window centers of
// the p-integral on the unit ball; the H^s_ul norm sums, over derivative
// multi-indices up to order s, sups of bump-windowed L^2 norms at scale
// lambda. Both sups are probed on every 4th lattice node, which makes the
// reported value a lower bound on the continuum sup with error controlled by
// the field's modulus of continuity. The probe lattice is invariant under
// shifts by multiples of 4 cells, so translation invariance is exact there.
//
// inequality_monitor checks the calculus inequalities the estimates lean on
// (Leibniz products, commutators, Sobolev embedding into bounded derivatives,
// and the smoothed-kernel convolution bound). Constants are not asserted as
// universal: each suite carries a constant frozen by a one-time calibration
// run over its fixed-seed corpus, and the corpus ratios must stay within 5%
// of it. Drift past that margin signals a discretization bug.

#include <array>
#include <string>
#include <vector>

#include "core/field.hpp"

namespace sflow {

struct UlNormReport {
  double p = 0.0;    // exponent for the L^p form, 0 when unused
  int s = -1;        // derivative order for the Sobolev form, -1 when unused
  double lambda = 1.0;
  double value = 0.0;
  std::array<double, 3> argmax{};  // probed center attaining the sup; for the
                                   // Sobolev form, the dominant term's center
  // per multi-index breakdown (alpha, sup over centers), Sobolev form only
  std::vector<std::pair<std::array<int, 3>, double>> terms;
};

UlNormReport lp_ul_norm(const ScalarField& f, double p);
UlNormReport hs_ul_norm(const ScalarField& f, int s, double lambda);

// sum of sup norms of all derivatives of order <= j (the bounded-derivative
// space the embedding lands in)
double ctilde_norm(const ScalarField& f, int j);

enum class InequalitySuite { product, commutator, embedding, conv_bound };

struct InequalityReport {
  InequalitySuite suite;
  std::string name;
  int pairs = 0;
  double frozen_constant = 0.0;  // pinned by a one-time calibration run
  double max_ratio = 0.0;        // max ratio over the corpus
  double margin = 0.0;           // max_ratio / (1.05 * frozen_constant)
  bool pass = false;
  std::vector<double> ratios;    // one per pair
};

InequalityReport inequality_monitor(InequalitySuite suite);

const char* suite_name(InequalitySuite suite);

}  // namespace sflow
