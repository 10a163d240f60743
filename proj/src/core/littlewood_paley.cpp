#include "core/littlewood_paley.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sflow {

double DyadicFamily::chi_hat(double rho) { return lp_chi_profile(rho); }

double DyadicFamily::phi_hat(double rho) {
  return lp_chi_profile(rho / 2.0) - lp_chi_profile(rho);
}

DyadicFamily make_dyadic_family(const Grid& g) {
  DyadicFamily fam;
  fam.grid = g;
  const double nyq = g.nyquist();
  require(nyq * 3.0 / 5.0 >= 1.0 || nyq >= 5.0 / 3.0,
          "grid too coarse for any dyadic block");
  int j = 0;
  while ((5.0 / 3.0) * std::pow(2.0, j + 1) <= nyq * (1.0 + 1e-12)) ++j;
  require((5.0 / 3.0) * std::pow(2.0, j) <= nyq * (1.0 + 1e-12),
          "grid too coarse for any dyadic block");
  fam.j_max = j;
  return fam;
}

namespace {

template <typename F>
void for_each_freq(const Grid& g, F&& fn) {
  const double fs = g.freq_step();
  if (g.dim == 2) {
    std::int64_t flat = 0;
    for (int t0 = 0; t0 < g.n; ++t0) {
      const double x0 = g.signed_index(t0) * fs;
      for (int t1 = 0; t1 < g.n; ++t1, ++flat) {
        const double x1 = g.signed_index(t1) * fs;
        fn(flat, std::sqrt(x0 * x0 + x1 * x1), x0, x1, 0.0);
      }
    }
  } else {
    std::int64_t flat = 0;
    for (int t0 = 0; t0 < g.n; ++t0) {
      const double x0 = g.signed_index(t0) * fs;
      for (int t1 = 0; t1 < g.n; ++t1) {
        const double x1 = g.signed_index(t1) * fs;
        for (int t2 = 0; t2 < g.n; ++t2, ++flat) {
          const double x2 = g.signed_index(t2) * fs;
          fn(flat, std::sqrt(x0 * x0 + x1 * x1 + x2 * x2), x0, x1, x2);
        }
      }
    }
  }
}

ScalarField apply_radial(const ScalarField& f, double scale_pow2j, bool low) {
  // low: chi_hat(rho / 2^{j+1}-style scale); else phi_hat(rho / 2^j)
  const Grid& g = f.grid();
  std::vector<cplx> out(f.spectrum());
  for_each_freq(g, [&](std::int64_t flat, double rho, double, double, double) {
    const double r = rho / scale_pow2j;
    out[flat] *= low ? DyadicFamily::chi_hat(r) : DyadicFamily::phi_hat(r);
  });
  return ScalarField::from_spectrum(g, out);
}

}  // namespace

double DyadicFamily::partition_defect() const {
  double worst = 0.0;
  const double cap = (5.0 / 6.0) * std::pow(2.0, j_max);
  for_each_freq(grid, [&](std::int64_t, double rho, double, double, double) {
    if (rho > cap) return;
    double s = chi_hat(rho);
    for (int j = 0; j <= j_max; ++j) s += phi_hat(rho / std::pow(2.0, j));
    worst = std::max(worst, std::abs(s - 1.0));
  });
  return worst;
}

ScalarField lp_block(const DyadicFamily& fam, const ScalarField& f, int j) {
  require(f.grid() == fam.grid, "field grid does not match dyadic family");
  require(j >= -1 && j <= fam.j_max, "block index outside [-1, j_max]");
  if (j == -1) return apply_radial(f, 1.0, true);
  return apply_radial(f, std::pow(2.0, j), false);
}

ScalarField lp_block_dot(const DyadicFamily& fam, const ScalarField& f, int j) {
  require(f.grid() == fam.grid, "field grid does not match dyadic family");
  require(j >= -fam.j_max && j <= fam.j_max,
          "homogeneous block index outside [-j_max, j_max]");
  return apply_radial(f, std::pow(2.0, j), false);
}

ScalarField low_pass(const DyadicFamily& fam, const ScalarField& f, int n) {
  require(f.grid() == fam.grid, "field grid does not match dyadic family");
  require(n >= -1, "low_pass index below -1");
  return apply_radial(f, std::pow(2.0, n + 1), true);
}

std::string NormReport::to_json() const {
  nlohmann::json j;
  j["kind"] = kind;
  j["exponent"] = exponent;
  j["value"] = value;
  auto rows_json = nlohmann::json::array();
  for (const auto& r : rows) rows_json.push_back({{"label", r.label}, {"value", r.value}});
  j["rows"] = rows_json;
  return j.dump(2);
}

namespace {

NormReport holder_impl(const DyadicFamily& fam, const ScalarField& f, double r,
                       int j_lo, const char* kind) {
  NormReport rep;
  rep.kind = kind;
  rep.exponent = r;
  for (int j = j_lo; j <= fam.j_max; ++j) {
    ScalarField blk = (j_lo == -1) ? lp_block(fam, f, j) : lp_block_dot(fam, f, j);
    const double w = std::pow(2.0, j * r) * sup_norm(blk);
    rep.rows.push_back({"j=" + std::to_string(j), w});
    rep.value = std::max(rep.value, w);
  }
  return rep;
}

}  // namespace

NormReport holder_norm(const DyadicFamily& fam, const ScalarField& f, double r) {
  return holder_impl(fam, f, r, -1, "holder_zygmund");
}

NormReport holder_norm_dot(const DyadicFamily& fam, const ScalarField& f, double r) {
  return holder_impl(fam, f, r, -fam.j_max, "holder_zygmund_dot");
}

namespace {

// max over x of |g(x + h) - g(x)| for a lattice offset h (periodic)
double max_shift_diff(const ScalarField& g, const int* h) {
  const Grid& gr = g.grid();
  const int n = gr.n;
  const auto& v = g.values();
  double m = 0.0;
  if (gr.dim == 2) {
    for (int i = 0; i < n; ++i) {
      const int is = (i + h[0]) % n;
      const std::int64_t row = static_cast<std::int64_t>(i) * n;
      const std::int64_t rows = static_cast<std::int64_t>(is) * n;
      for (int j = 0; j < n; ++j) {
        const int js = (j + h[1]) % n;
        m = std::max(m, std::abs(v[rows + js] - v[row + j]));
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const int is = (i + h[0]) % n;
      for (int j = 0; j < n; ++j) {
        const int js = (j + h[1]) % n;
        const std::int64_t row = (static_cast<std::int64_t>(i) * n + j) * n;
        const std::int64_t rows = (static_cast<std::int64_t>(is) * n + js) * n;
        for (int k = 0; k < n; ++k) {
          const int ks = (k + h[2]) % n;
          m = std::max(m, std::abs(v[rows + ks] - v[row + k]));
        }
      }
    }
  }
  return m;
}

void all_multi_indices(int dim, int order, std::vector<std::array<int, 3>>& out) {
  if (dim == 2) {
    for (int a = 0; a <= order; ++a) out.push_back({a, order - a, 0});
  } else {
    for (int a = 0; a <= order; ++a)
      for (int b = 0; a + b <= order; ++b) out.push_back({a, b, order - a - b});
  }
}

}  // namespace

NormReport classical_holder_norm(const ScalarField& f, double r) {
  require(r > 0.0 && r < 4.0, "classical norm index must lie in (0,4)");
  const int m = static_cast<int>(std::floor(r));
  require(std::abs(r - m) > 1e-9, "classical norm index must be non-integer");
  const double s = r - m;
  const Grid& g = f.grid();

  NormReport rep;
  rep.kind = "classical_holder";
  rep.exponent = r;

  double deriv_sum = 0.0;
  std::vector<ScalarField> top;  // derivatives of order exactly m
  for (int order = 0; order <= m; ++order) {
    std::vector<std::array<int, 3>> idx;
    all_multi_indices(g.dim, order, idx);
    for (const auto& a : idx) {
      ScalarField d = spectral_derivative(f, a);
      const double sn = sup_norm(d);
      deriv_sum += sn;
      if (order == m) top.push_back(std::move(d));
    }
  }
  rep.rows.push_back({"derivative_sum", deriv_sum});

  // offsets h with 0 < |h| <= 2, one per +/- pair
  const double dx = g.spacing();
  const int reach = static_cast<int>(std::floor(2.0 / dx));
  double seminorm = 0.0;
  auto visit = [&](const int* h, double dist) {
    const double denom = std::pow(dist, s);
    for (const auto& gfld : top)
      seminorm = std::max(seminorm, max_shift_diff(gfld, h) / denom);
  };
  if (g.dim == 2) {
    for (int a = 0; a <= reach; ++a)
      for (int b = (a == 0 ? 1 : -reach); b <= reach; ++b) {
        const double dist = dx * std::sqrt(double(a) * a + double(b) * b);
        if (dist > 2.0) continue;
        int h[3] = {a, (b % g.n + g.n) % g.n, 0};
        visit(h, dist);
      }
  } else {
    for (int a = 0; a <= reach; ++a)
      for (int b = (a == 0 ? 0 : -reach); b <= reach; ++b)
        for (int c = (a == 0 && b == 0 ? 1 : -reach); c <= reach; ++c) {
          const double dist = dx * std::sqrt(double(a) * a + double(b) * b + double(c) * c);
          if (dist > 2.0 || dist == 0.0) continue;
          int h[3] = {a, (b % g.n + g.n) % g.n, (c % g.n + g.n) % g.n};
          visit(h, dist);
        }
  }
  // separated pairs: |g(x)-g(y)| <= 2||g||_inf and |x-y|^s >= 2^s
  double top_sup = 0.0;
  for (const auto& gfld : top) top_sup = std::max(top_sup, sup_norm(gfld));
  const double tail = 2.0 * top_sup / std::pow(2.0, s);
  rep.rows.push_back({"seminorm_local", seminorm});
  rep.rows.push_back({"seminorm_tail_bound", tail});
  seminorm = std::max(seminorm, tail);
  rep.rows.push_back({"seminorm", seminorm});
  rep.value = deriv_sum + seminorm;
  return rep;
}

double classical_ck_norm(const ScalarField& f, int k) {
  require(k >= 0 && k <= 8, "integer classical norm index out of range");
  double total = 0.0;
  for (int order = 0; order <= k; ++order) {
    std::vector<std::array<int, 3>> idx;
    all_multi_indices(f.grid().dim, order, idx);
    for (const auto& a : idx) total += sup_norm(spectral_derivative(f, a));
  }
  return total;
}

double classical_ck_norm(const VectorField& v, int k) {
  double total = 0.0;
  for (const auto& c : v.comp) total += classical_ck_norm(c, k);
  return total;
}

BernsteinResult bernstein_bracket(const DyadicFamily& fam, const ScalarField& f,
                                  int j, int k) {
  require(j >= 0 && j <= fam.j_max, "bernstein block outside [0, j_max]");
  require(k >= 1 && k <= 8, "bernstein derivative order out of range");
  const double lo = (3.0 / 5.0) * std::pow(2.0, j);
  const double hi = (5.0 / 3.0) * std::pow(2.0, j);
  const auto& spec = f.spectrum();
  double inside = 0.0, outside = 0.0, weighted = 0.0;
  for_each_freq(f.grid(), [&](std::int64_t flat, double rho, double, double, double) {
    const double mass = std::norm(spec[flat]);
    if (rho >= lo * (1 - 1e-9) && rho <= hi * (1 + 1e-9)) {
      inside += mass;
      weighted += mass * std::pow(rho, 2.0 * k);
    } else {
      outside += mass;
    }
  });
  require(inside > 0.0, "empty spectrum passed to bernstein_bracket");
  require(outside <= 1e-12 * (inside + outside),
          "field is not supported in the requested annulus");
  BernsteinResult res;
  res.measured = std::sqrt(weighted / inside);
  res.lo = std::pow(lo, k);
  res.hi = std::pow(hi, k);
  return res;
}

ScalarField project_annulus(const ScalarField& f, double lo, double hi) {
  const Grid& g = f.grid();
  std::vector<cplx> out(f.spectrum());
  for_each_freq(g, [&](std::int64_t flat, double rho, double, double, double) {
    if (rho < lo || rho > hi) out[flat] = 0.0;
  });
  return ScalarField::from_spectrum(g, out);
}

ScalarField riesz_lp(const DyadicFamily& fam, const ScalarField& f, int comp) {
  const Grid& g = f.grid();
  require(comp >= 0 && comp < g.dim, "riesz component out of range");
  std::vector<cplx> out(f.spectrum());
  for_each_freq(g, [&](std::int64_t flat, double rho, double x0, double x1, double x2) {
    if (rho == 0.0) {
      out[flat] = 0.0;
      return;
    }
    double cover = 0.0;
    for (int j = -fam.j_max; j <= fam.j_max; ++j)
      cover += DyadicFamily::phi_hat(rho / std::pow(2.0, j));
    const double xc = comp == 0 ? x0 : (comp == 1 ? x1 : x2);
    out[flat] *= cplx(0.0, xc / rho) * cover;
  });
  return ScalarField::from_spectrum(g, out);
}

}  // namespace sflow
