#include "core/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sflow {

double Cutoff::value(double r) const { return CutoffProfile{}.value(r / lambda); }
double Cutoff::d1(double r) const { return CutoffProfile{}.d1(r / lambda) / lambda; }
double Cutoff::d2(double r) const {
  return CutoffProfile{}.d2(r / lambda) / (lambda * lambda);
}

namespace {

constexpr double kC2 = 1.0 / (2.0 * kPi);  // Phi(x) = kC2 / |x|
constexpr double kC3 = 1.0 / (4.0 * kPi);  // G(x) = kC3 / |x|

template <typename F>
double simpson(F&& fn, double hi, int panels) {
  const double step = hi / panels;
  double s = fn(0.0) + fn(hi);
  for (int i = 1; i < panels; ++i) s += fn(i * step) * (i % 2 ? 4.0 : 2.0);
  return s * step / 3.0;
}

// Dense table of Q(r) = int_r^2 a'(t)/t dt, constant below 1, zero above 2.
class QTable {
 public:
  static const QTable& get() {
    static QTable t;
    return t;
  }
  double value(double r) const {
    if (r >= 2.0) return 0.0;
    if (r <= 0.0) return vals_[0];
    const double x = r / kStep;
    const int i = std::min(int(x), kPanels - 1);
    const double w = x - i;
    return vals_[i] * (1.0 - w) + vals_[i + 1] * w;
  }

 private:
  static constexpr int kPanels = 200000;
  static constexpr double kStep = 2.0 / kPanels;
  std::vector<double> vals_;
  QTable() : vals_(kPanels + 1, 0.0) {
    CutoffProfile a;
    auto f = [&](double t) { return t > 0.0 ? a.d1(t) / t : 0.0; };
    for (int i = kPanels - 1; i >= 0; --i) {
      const double t0 = i * kStep, t1 = (i + 1) * kStep;
      vals_[i] = vals_[i + 1] + 0.5 * (f(t0) + f(t1)) * kStep;
    }
  }
};

// cutoff profile moments entering the origin-cell weights
struct ProfileMoments {
  double JA0, IA1, JQ2;
  static const ProfileMoments& get() {
    static const ProfileMoments m = [] {
      CutoffProfile a;
      const QTable& qt = QTable::get();
      ProfileMoments v;
      v.JA0 = simpson([&](double t) { return a.value(t); }, 2.0, 4096);
      v.IA1 = simpson([&](double t) { return a.value(t) * t; }, 2.0, 4096);
      v.JQ2 = simpson([&](double t) { return qt.value(t) * t * t; }, 2.0, 4096);
      return v;
    }();
    return m;
  }
};

struct BVals {
  double b, b1, b2;
};

// B(rho) = 1 - a(rho/lambda) and radial derivatives; callers guarantee rho > lambda
BVals bvals(double rho, double lambda) {
  if (rho >= 2.0 * lambda) return {1.0, 0.0, 0.0};
  CutoffProfile a;
  const double t = rho / lambda;
  return {1.0 - a.value(t), -a.d1(t) / lambda, -a.d2(t) / (lambda * lambda)};
}

constexpr int kTri[10][3] = {{0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {0, 1, 1}, {0, 1, 2},
                             {0, 2, 2}, {1, 1, 1}, {1, 1, 2}, {1, 2, 2}, {2, 2, 2}};

int sym10(int i, int j, int k) {
  static const std::array<int, 27> map = [] {
    std::array<int, 27> m{};
    for (int t = 0; t < 10; ++t) {
      int v[3] = {kTri[t][0], kTri[t][1], kTri[t][2]};
      std::sort(v, v + 3);
      do m[9 * v[0] + 3 * v[1] + v[2]] = t;
      while (std::next_permutation(v, v + 3));
    }
    return m;
  }();
  return map[9 * i + 3 * j + k];
}

int tri_multiplicity(int t) {
  const int a = kTri[t][0], b = kTri[t][1], c = kTri[t][2];
  if (a == b && b == c) return 1;
  if (a == b || b == c || a == c) return 3;
  return 6;
}

constexpr int kPair[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
constexpr double kPairMult[6] = {1.0, 2.0, 2.0, 1.0, 2.0, 1.0};

template <typename F>
void for_each_mode2(const Grid& g, F&& fn) {
  const double fs = g.freq_step();
  std::int64_t flat = 0;
  for (int t0 = 0; t0 < g.n; ++t0) {
    const double k0 = g.signed_index(t0) * fs;
    for (int t1 = 0; t1 < g.n; ++t1, ++flat) fn(flat, k0, g.signed_index(t1) * fs);
  }
}

template <typename F>
void for_each_mode3(const Grid& g, F&& fn) {
  const double fs = g.freq_step();
  std::int64_t flat = 0;
  for (int t0 = 0; t0 < g.n; ++t0) {
    const double k0 = g.signed_index(t0) * fs;
    for (int t1 = 0; t1 < g.n; ++t1) {
      const double k1 = g.signed_index(t1) * fs;
      for (int t2 = 0; t2 < g.n; ++t2, ++flat) fn(flat, k0, k1, g.signed_index(t2) * fs);
    }
  }
}

// Gather the production band out of a fine-lattice spectrum, dropping the
// production Nyquist planes (they have no conjugate partner after restriction).
std::vector<cplx> restrict_modes(const Grid& fine, const Grid& prod,
                                 const std::vector<cplx>& fs) {
  const int n = prod.n, nf = fine.n;
  std::vector<cplx> out(prod.points(), cplx(0.0));
  std::vector<int> row(n), keep(n);
  for (int t = 0; t < n; ++t) {
    const int s = prod.signed_index(t);
    keep[t] = std::abs(s) != n / 2;
    row[t] = s >= 0 ? s : nf + s;
  }
  if (prod.dim == 2) {
    for (int t0 = 0; t0 < n; ++t0) {
      if (!keep[t0]) continue;
      const std::int64_t base = std::int64_t(row[t0]) * nf;
      for (int t1 = 0; t1 < n; ++t1)
        if (keep[t1]) out[std::int64_t(t0) * n + t1] = fs[base + row[t1]];
    }
  } else {
    for (int t0 = 0; t0 < n; ++t0) {
      if (!keep[t0]) continue;
      for (int t1 = 0; t1 < n; ++t1) {
        if (!keep[t1]) continue;
        const std::int64_t base = (std::int64_t(row[t0]) * nf + row[t1]) * nf;
        const std::int64_t obase = (std::int64_t(t0) * n + t1) * n;
        for (int t2 = 0; t2 < n; ++t2)
          if (keep[t2]) out[obase + t2] = fs[base + row[t2]];
      }
    }
  }
  return out;
}

// 16-point Gauss-Legendre rule on [0, 1]
constexpr int kGlPts = 16;
constexpr double kGlNode[kGlPts] = {
    0.00529953250417505, 0.02771248846338370, 0.06718439880608410,
    0.12229779582249850, 0.19106187779867810, 0.27099161117138630,
    0.35919822461037055, 0.45249374508118130, 0.54750625491881870,
    0.64080177538962945, 0.72900838882861370, 0.80893812220132190,
    0.87770220417750150, 0.93281560119391590, 0.97228751153661630,
    0.99470046749582495};
constexpr double kGlWeight[kGlPts] = {
    0.01357622970587705, 0.03112676196932395, 0.04757925584124640,
    0.06231448562776695, 0.07479799440828835, 0.08457825969750125,
    0.09130170752246180, 0.09472530522753425, 0.09472530522753425,
    0.09130170752246180, 0.08457825969750125, 0.07479799440828835,
    0.06231448562776695, 0.04757925584124640, 0.03112676196932395,
    0.01357622970587705};

// Radial transform of the cutoff profile, G(z) = int_0^2 a(r) J0(z r) dr.
// The 2d near kernel a(|x|/lambda) Phi has symbol lambda G(|xi| lambda);
// G(0) = JA0 exactly. Half-period panels keep the Bessel factor resolved.
double profile_bessel_moment(double z) {
  static const CutoffProfile prof;
  const int panels = std::max(4, static_cast<int>(std::ceil(2.0 * z / kPi)));
  const double w = 2.0 / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p)
    for (int q = 0; q < kGlPts; ++q) {
      const double r = (p + kGlNode[q]) * w;
      acc += kGlWeight[q] * prof.value(r) * std::cyl_bessel_j(0.0, z * r);
    }
  return acc * w;
}

// Past this point |G(z) - 1/z| stays under ~5e-10 (the remainder is the
// transform of the smooth ramp, which dies off fast), so the far symbol is
// cut to exactly zero there and the near symbol falls back to 1/z.
constexpr double kGCut = 100.0;

// Clamped cubic interpolant of G on [0, kGCut]; G is even so the left slope
// is zero, and the right end is already in the 1/z regime. Built once per
// process: direct quadrature costs ~0.7 us per Bessel call, far too slow to
// run per mode on large grids.
class GTable {
 public:
  static const GTable& get() {
    static const GTable t;
    return t;
  }
  double value(double z) const {
    if (z >= kGCut) return 1.0 / z;
    const double x = z / kStep;
    const int i = std::min(static_cast<int>(x), kCount - 2);
    const double b = x - i, a = 1.0 - b;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * y2_[i] + (b * b * b - b) * y2_[i + 1]) *
               (kStep * kStep / 6.0);
  }

 private:
  static constexpr double kStep = 0.02;
  static constexpr int kCount = static_cast<int>(kGCut / kStep) + 1;
  std::vector<double> y_, y2_;
  GTable() : y_(kCount), y2_(kCount) {
    for (int i = 0; i < kCount; ++i) y_[i] = profile_bessel_moment(i * kStep);
    const double h = kStep;
    std::vector<double> u(kCount);
    y2_[0] = -0.5;
    u[0] = (3.0 / h) * ((y_[1] - y_[0]) / h - 0.0);
    for (int i = 1; i < kCount - 1; ++i) {
      const double p = 0.5 * y2_[i - 1] + 2.0;
      y2_[i] = -0.5 / p;
      u[i] = (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / h;
      u[i] = (6.0 * u[i] / (2.0 * h) - 0.5 * u[i - 1]) / p;
    }
    const double ypn = -1.0 / (kGCut * kGCut);
    const double un = (3.0 / h) * (ypn - (y_[kCount - 1] - y_[kCount - 2]) / h);
    y2_[kCount - 1] = (un - 0.5 * u[kCount - 2]) / (0.5 * y2_[kCount - 2] + 1.0);
    for (int i = kCount - 2; i >= 0; --i) y2_[i] = y2_[i] * y2_[i + 1] + u[i];
  }
};

void build_2d(KernelSet& ks) {
  const Grid& g = ks.grid;
  const int n = g.n, half = n / 2;
  const double fs = g.freq_step(), lam = ks.lambda;
  const GTable& gt = GTable::get();

  // Both tables live directly in Fourier space. The near kernel is compactly
  // supported inside the box, so its torus coefficients equal the continuum
  // symbol lambda G(|xi| lambda); the far matrix is the remainder
  // (i xi_j)(i xi^perp_k)(1/|xi| - near), which by Poisson summation already
  // carries the complete periodic image sum. Production Nyquist planes are
  // zeroed so convolution outputs stay hermitian.
  std::vector<double> memo(2 * half * half + 1,
                           std::numeric_limits<double>::quiet_NaN());
  ks.near2d.assign(g.points(), cplx(0.0));
  for (auto& c : ks.far2d) c.assign(g.points(), cplx(0.0));
  std::int64_t flat = 0;
  for (int t0 = 0; t0 < n; ++t0) {
    const int m0 = g.signed_index(t0);
    for (int t1 = 0; t1 < n; ++t1, ++flat) {
      const int m1 = g.signed_index(t1);
      if (m0 == -half || m1 == -half) continue;
      const int mm = m0 * m0 + m1 * m1;
      double& nh = memo[mm];
      if (std::isnan(nh))
        nh = lam * gt.value(fs * std::sqrt(static_cast<double>(mm)) * lam);
      ks.near2d[flat] = nh;
      if (mm == 0) continue;
      const double x0 = fs * m0, x1 = fs * m1;
      const double s = 1.0 / std::hypot(x0, x1) - nh;
      ks.far2d[0][flat] = x0 * x1 * s;
      ks.far2d[1][flat] = x1 * x1 * s;
      ks.far2d[2][flat] = -x0 * x0 * s;
      ks.far2d[3][flat] = -x0 * x1 * s;
    }
  }
  // exact periodization: no image-shell truncation remains
  ks.far_tail_bound = 0.0;

  // lattice-norm diagnostics on the production tables; the origin sample of
  // the band-limited near table stands in for the singular-cell weight
  const std::vector<double> nr = idft_real(g, ks.near2d);
  ks.origin_weight = nr[0];
  double l1 = 0.0;
  for (double v : nr) l1 += std::abs(v);
  ks.near_l1 = l1;
  std::array<std::vector<double>, 4> fr;
  for (int c = 0; c < 4; ++c) fr[c] = idft_real(g, ks.far2d[c]);
  double fl1 = 0.0;
  for (std::int64_t m = 0; m < g.points(); ++m)
    fl1 += std::sqrt(fr[0][m] * fr[0][m] + fr[1][m] * fr[1][m] +
                     fr[2][m] * fr[2][m] + fr[3][m] * fr[3][m]);
  ks.far_l1 = fl1;
}

void build_3d(KernelSet& ks) {
  const Grid& g = ks.grid;
  const double L = g.half, lam = ks.lambda, alpha = ks.alpha;
  const Grid gf = make_grid(3, L, ks.oversample * g.n);
  const int nf = gf.n;
  const double h = gf.spacing(), hd = h * h * h;
  const CutoffProfile prof;
  const QTable& qt = QTable::get();
  const double q1 = qt.value(0.0);

  // near potential, origin weight matched to the potential mass
  std::vector<double> tab(gf.points(), 0.0);
  double sum = 0.0;
  std::int64_t flat = 0;
  for (int p0 = 0; p0 < nf; ++p0) {
    const double z0 = gf.signed_index(p0) * h;
    for (int p1 = 0; p1 < nf; ++p1) {
      const double z1 = gf.signed_index(p1) * h;
      for (int p2 = 0; p2 < nf; ++p2, ++flat) {
        const double z2 = gf.signed_index(p2) * h;
        const double rho = std::sqrt(z0 * z0 + z1 * z1 + z2 * z2);
        if (rho < 1e-14 || rho >= 2.0 * lam) continue;
        const double r = rho / lam;
        const double v = hd * kC3 * (prof.value(r) / rho + qt.value(r) / lam);
        tab[flat] = v;
        sum += v;
      }
    }
  }
  const ProfileMoments& pm = ProfileMoments::get();
  const double mass = lam * lam * (pm.IA1 + pm.JQ2);
  ks.origin_weight = mass - sum;
  tab[0] = ks.origin_weight;
  ks.near_pot = restrict_modes(gf, g, dft(gf, tab));

  // screened far potential: decays like erfc beyond the ramp, so the single
  // box copy is the whole periodization up to the recorded tail bound
  const double twosqpi = 2.0 / std::sqrt(kPi);
  flat = 0;
  for (int p0 = 0; p0 < nf; ++p0) {
    const double z0 = gf.signed_index(p0) * h;
    for (int p1 = 0; p1 < nf; ++p1) {
      const double z1 = gf.signed_index(p1) * h;
      for (int p2 = 0; p2 < nf; ++p2, ++flat) {
        const double z2 = gf.signed_index(p2) * h;
        const double rho = std::sqrt(z0 * z0 + z1 * z1 + z2 * z2);
        if (rho < 1e-14) {
          tab[flat] = hd * kC3 * (-q1 / lam - alpha * twosqpi);
          continue;
        }
        const double r = rho / lam;
        const double base =
            r < 2.0 ? (1.0 - prof.value(r)) / rho - qt.value(r) / lam : 1.0 / rho;
        tab[flat] = hd * kC3 * (base - std::erf(alpha * rho) / rho);
      }
    }
  }
  ks.far_pot = restrict_modes(gf, g, dft(gf, tab));
  for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
    const double kk = k0 * k0 + k1 * k1 + k2 * k2;
    if (kk > 0.0)
      ks.far_pot[m] += std::exp(-kk / (4.0 * alpha * alpha)) / kk;
  });
  ks.far_pot[0] = 0.0;
  ks.far_tail_bound = 26.0 * std::erfc(alpha * L) * kC3 / L;

  // div[(1-a)K]: compactly supported in the cutoff ramp annulus
  flat = 0;
  for (int p0 = 0; p0 < nf; ++p0) {
    const double z0 = gf.signed_index(p0) * h;
    for (int p1 = 0; p1 < nf; ++p1) {
      const double z1 = gf.signed_index(p1) * h;
      for (int p2 = 0; p2 < nf; ++p2, ++flat) {
        const double z2 = gf.signed_index(p2) * h;
        tab[flat] = hd * fdiv3d_point(std::sqrt(z0 * z0 + z1 * z1 + z2 * z2), lam);
      }
    }
  }
  ks.far_div = restrict_modes(gf, g, dft(gf, tab));
  tab = {};

  // lattice-norm diagnostics on the production tables
  std::array<std::vector<double>, 3> nr;
  for (int c = 0; c < 3; ++c) {
    std::vector<cplx> s(g.points());
    for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
      const double kk[3] = {k0, k1, k2};
      s[m] = cplx(0.0, kk[c]) * ks.near_pot[m];
    });
    nr[c] = idft_real(g, s);
  }
  double l1 = 0.0;
  for (std::int64_t m = 0; m < g.points(); ++m)
    l1 += std::sqrt(nr[0][m] * nr[0][m] + nr[1][m] * nr[1][m] + nr[2][m] * nr[2][m]);
  ks.near_l1 = l1;
  for (auto& t : nr) t = {};

  std::array<std::vector<double>, 10> hr;
  for (int t = 0; t < 10; ++t) {
    std::vector<cplx> s(g.points());
    const int i = kTri[t][0], j = kTri[t][1], k = kTri[t][2];
    for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
      const double kk[3] = {k0, k1, k2};
      s[m] = cplx(0.0, -kk[i] * kk[j] * kk[k]) * ks.far_pot[m];
    });
    hr[t] = idft_real(g, s);
  }
  double fl1 = 0.0;
  for (std::int64_t m = 0; m < g.points(); ++m) {
    double fro = 0.0;
    for (int t = 0; t < 10; ++t) fro += tri_multiplicity(t) * hr[t][m] * hr[t][m];
    fl1 += std::sqrt(fro);
  }
  ks.far_l1 = fl1;
}

}  // namespace

double cutoff_q(double r) { return QTable::get().value(r); }

double phi_near_point(double rho, double lambda) {
  require(rho > 0.0, "near potential point value needs rho > 0");
  if (rho >= 2.0 * lambda) return 0.0;
  const double r = rho / lambda;
  return kC3 * (CutoffProfile{}.value(r) / rho + QTable::get().value(r) / lambda);
}

double phi_far_point(double rho, double lambda) {
  if (rho < 1e-14) return -kC3 * QTable::get().value(0.0) / lambda;
  if (rho >= 2.0 * lambda) return kC3 / rho;
  const double r = rho / lambda;
  return kC3 * ((1.0 - CutoffProfile{}.value(r)) / rho - QTable::get().value(r) / lambda);
}

// a_lambda * K, K = grad G = -x/(4pi|x|^3); zero at the origin cell (odd kernel)
void near3d_point(double z0, double z1, double z2, double lambda, double out[3]) {
  const double rho2 = z0 * z0 + z1 * z1 + z2 * z2;
  const double rho = std::sqrt(rho2);
  if (rho < 1e-14 || rho >= 2.0 * lambda) {
    out[0] = out[1] = out[2] = 0.0;
    return;
  }
  const double a = CutoffProfile{}.value(rho / lambda);
  const double f = -kC3 * a / (rho2 * rho);
  out[0] = f * z0;
  out[1] = f * z1;
  out[2] = f * z2;
}

// d_i d_j [(1-a)K^k] over the 10 sorted triples, and d_j div[(1-a)K];
// K = grad G. Zero when rho <= lambda.
void far3d_point(double z0, double z1, double z2, double lambda, double hess[10],
                 double ndiv[3]) {
  const double rho2 = z0 * z0 + z1 * z1 + z2 * z2;
  const double rho = std::sqrt(rho2);
  if (rho <= lambda) {
    for (int t = 0; t < 10; ++t) hess[t] = 0.0;
    ndiv[0] = ndiv[1] = ndiv[2] = 0.0;
    return;
  }
  const BVals B = bvals(rho, lambda);
  const double r4 = rho2 * rho2;
  const double g = kC3 * B.b / (rho2 * rho);
  const double g1 = kC3 * (B.b1 * rho - 3.0 * B.b) / r4;
  const double g2 = kC3 * (B.b2 * rho2 - 6.0 * B.b1 * rho + 12.0 * B.b) / (r4 * rho);
  const double gp = g1 / rho;
  const double gam = (g2 * rho - g1) / (rho2 * rho);
  const double z[3] = {z0, z1, z2};
  for (int t = 0; t < 10; ++t) {
    const int i = kTri[t][0], j = kTri[t][1], k = kTri[t][2];
    double delta = 0.0;
    if (j == k) delta += z[i];
    if (i == k) delta += z[j];
    if (i == j) delta += z[k];
    hess[t] = -(delta * gp + z[i] * z[j] * z[k] * gam);
  }
  const double nd = -(4.0 * g1 + rho * g2) / rho;
  ndiv[0] = nd * z0;
  ndiv[1] = nd * z1;
  ndiv[2] = nd * z2;
}

void far2d_point(double z0, double z1, double lambda, double m[4]) {
  const double rho2 = z0 * z0 + z1 * z1;
  const double rho = std::sqrt(rho2);
  if (rho <= lambda) {
    m[0] = m[1] = m[2] = m[3] = 0.0;
    return;
  }
  const BVals B = bvals(rho, lambda);
  const double h1 = kC2 * (B.b1 * rho - B.b) / rho2;
  const double h2 = kC2 * (B.b2 * rho2 - 2.0 * B.b1 * rho + 2.0 * B.b) / (rho2 * rho);
  const double w = h1 / rho;
  const double wp = (h2 * rho - h1) / (rho2 * rho);  // w'(rho)/rho
  m[0] = -z1 * z0 * wp;
  m[1] = -w - z1 * z1 * wp;
  m[2] = w + z0 * z0 * wp;
  m[3] = z0 * z1 * wp;
}

double fdiv3d_point(double rho, double lambda) {
  if (rho <= lambda || rho >= 2.0 * lambda) return 0.0;
  const BVals B = bvals(rho, lambda);
  const double g = kC3 * B.b / (rho * rho * rho);
  const double g1 = kC3 * (B.b1 * rho - 3.0 * B.b) / (rho * rho * rho * rho);
  return -(3.0 * g + rho * g1);
}

KernelSet build_kernel_set(const Grid& g, double lambda, KernelKind kind, int shells,
                           int oversample, double alpha) {
  require(lambda > 0.0, "cutoff scale must be positive");
  require(shells >= 1 && shells <= 12, "image shell count out of range");
  require((kind == KernelKind::sqg2d) == (g.dim == 2),
          "kernel kind does not match grid dimension");
  KernelSet ks;
  ks.grid = g;
  ks.kind = kind;
  ks.lambda = lambda;
  ks.shells = shells;
  if (kind == KernelKind::sqg2d) {
    require(2.0 * lambda <= g.half / 4.0, "cutoff scale too large for the box");
    ks.oversample = oversample > 0 ? oversample : 8;
    require(ks.oversample >= 1 && ks.oversample <= 16, "oversample out of range");
    require(std::int64_t(ks.oversample) * g.n <= 4096, "sampling lattice too large");
    build_2d(ks);
  } else {
    require(2.0 * lambda <= g.half, "cutoff scale too large for the box");
    ks.oversample = oversample > 0 ? oversample : std::clamp(256 / g.n, 2, 8);
    require(ks.oversample >= 1 && ks.oversample <= 16, "oversample out of range");
    require(std::int64_t(ks.oversample) * g.n <= 512, "sampling lattice too large");
    ks.alpha = alpha > 0.0 ? alpha : 7.0 / (g.half - 2.0 * lambda);
    require(ks.alpha * (g.half - 2.0 * lambda) >= 6.0 * (1.0 - 1e-12),
            "screening scale too coarse for this cutoff");
    build_3d(ks);
  }
  return ks;
}

VectorField near_conv_perp(const ScalarField& f, const KernelSet& ks) {
  require(f.grid() == ks.grid && ks.kind == KernelKind::sqg2d, "grid/kind mismatch");
  const auto& fh = f.spectrum();
  const Grid& g = ks.grid;
  std::vector<cplx> s0(fh.size()), s1(fh.size());
  for_each_mode2(g, [&](std::int64_t m, double k0, double k1) {
    const cplx base = ks.near2d[m] * fh[m];
    s0[m] = cplx(0.0, -k1) * base;
    s1[m] = cplx(0.0, k0) * base;
  });
  VectorField out(g, 2);
  out.comp[0] = ScalarField(g, idft_real(g, s0));
  out.comp[1] = ScalarField(g, idft_real(g, s1));
  return out;
}

ScalarField near_conv_scalar(const ScalarField& f, const KernelSet& ks) {
  require(f.grid() == ks.grid && ks.kind == KernelKind::sqg2d, "grid/kind mismatch");
  const auto& fh = f.spectrum();
  std::vector<cplx> s(fh.size());
  for (std::size_t m = 0; m < fh.size(); ++m) s[m] = ks.near2d[m] * fh[m];
  return ScalarField(ks.grid, idft_real(ks.grid, s));
}

VectorField far_conv_contract(const VectorField& F, const KernelSet& ks) {
  require(F.grid() == ks.grid && ks.kind == KernelKind::sqg2d, "grid/kind mismatch");
  require(F.ncomp() == 2, "far matrix contraction needs a 2-component field");
  const auto& f0 = F.comp[0].spectrum();
  const auto& f1 = F.comp[1].spectrum();
  const std::size_t np = f0.size();
  std::vector<cplx> s0(np), s1(np);
  for (std::size_t m = 0; m < np; ++m) {
    s0[m] = ks.far2d[0][m] * f0[m] + ks.far2d[1][m] * f1[m];
    s1[m] = ks.far2d[2][m] * f0[m] + ks.far2d[3][m] * f1[m];
  }
  VectorField out(ks.grid, 2);
  out.comp[0] = ScalarField(ks.grid, idft_real(ks.grid, s0));
  out.comp[1] = ScalarField(ks.grid, idft_real(ks.grid, s1));
  return out;
}

VectorField near_cross_conv(const VectorField& w, const KernelSet& ks) {
  require(w.grid() == ks.grid && ks.kind == KernelKind::euler3d, "grid/kind mismatch");
  require(w.ncomp() == 3, "cross convolution needs a 3-component field");
  const Grid& g = ks.grid;
  const std::array<const std::vector<cplx>*, 3> wh = {
      &w.comp[0].spectrum(), &w.comp[1].spectrum(), &w.comp[2].spectrum()};
  std::array<std::vector<cplx>, 3> s;
  for (auto& v : s) v.assign(g.points(), cplx(0.0));
  for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
    const cplx p = ks.near_pot[m];
    const cplx kn[3] = {cplx(0.0, k0) * p, cplx(0.0, k1) * p, cplx(0.0, k2) * p};
    const cplx wv[3] = {(*wh[0])[m], (*wh[1])[m], (*wh[2])[m]};
    s[0][m] = kn[1] * wv[2] - kn[2] * wv[1];
    s[1][m] = kn[2] * wv[0] - kn[0] * wv[2];
    s[2][m] = kn[0] * wv[1] - kn[1] * wv[0];
  });
  VectorField out(g, 3);
  for (int c = 0; c < 3; ++c) out.comp[c] = ScalarField(g, idft_real(g, s[c]));
  return out;
}

VectorField near_vector_conv(const ScalarField& q, const KernelSet& ks) {
  require(q.grid() == ks.grid && ks.kind == KernelKind::euler3d, "grid/kind mismatch");
  const Grid& g = ks.grid;
  const auto& qh = q.spectrum();
  std::array<std::vector<cplx>, 3> s;
  for (auto& v : s) v.assign(g.points(), cplx(0.0));
  for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
    const cplx base = ks.near_pot[m] * qh[m];
    s[0][m] = cplx(0.0, k0) * base;
    s[1][m] = cplx(0.0, k1) * base;
    s[2][m] = cplx(0.0, k2) * base;
  });
  VectorField out(g, 3);
  for (int c = 0; c < 3; ++c) out.comp[c] = ScalarField(g, idft_real(g, s[c]));
  return out;
}

VectorField far_hessian_contract(const std::array<const ScalarField*, 6>& P,
                                 const KernelSet& ks) {
  require(ks.kind == KernelKind::euler3d, "3d kernel set required");
  const Grid& g = ks.grid;
  std::array<const std::vector<cplx>*, 6> ph{};
  for (int c = 0; c < 6; ++c) {
    require(P[c] && P[c]->grid() == g, "tensor component missing or on wrong grid");
    ph[c] = &P[c]->spectrum();
  }
  std::array<std::vector<cplx>, 3> s;
  for (auto& v : s) v.assign(g.points(), cplx(0.0));
  for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
    const double kk[3] = {k0, k1, k2};
    cplx acc = 0.0;
    for (int c = 0; c < 6; ++c)
      acc += kPairMult[c] * kk[kPair[c][0]] * kk[kPair[c][1]] * (*ph[c])[m];
    const cplx base = ks.far_pot[m] * acc;
    s[0][m] = cplx(0.0, -k0) * base;
    s[1][m] = cplx(0.0, -k1) * base;
    s[2][m] = cplx(0.0, -k2) * base;
  });
  VectorField out(g, 3);
  for (int c = 0; c < 3; ++c) out.comp[c] = ScalarField(g, idft_real(g, s[c]));
  return out;
}

VectorField far_divgrad_contract(const VectorField& v, const VectorField& w,
                                 const KernelSet& ks) {
  require(ks.kind == KernelKind::euler3d, "3d kernel set required");
  require(v.grid() == ks.grid && w.grid() == ks.grid, "grid mismatch");
  const Grid& g = ks.grid;
  VectorField out(g, 3);
  for (int k = 0; k < 3; ++k) {
    std::vector<cplx> s(g.points(), cplx(0.0));
    for (int j = 0; j < 3; ++j) {
      const auto ph = dft(g, pointwise_product(v.comp[j], w.comp[k]).values());
      for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
        const double kk[3] = {k0, k1, k2};
        s[m] += cplx(0.0, kk[j]) * ks.far_div[m] * ph[m];
      });
    }
    out.comp[k] = ScalarField(g, idft_real(g, s));
  }
  return out;
}

VectorField far_curlcurl_conv(const VectorField& u, const KernelSet& ks) {
  require(u.grid() == ks.grid && ks.kind == KernelKind::euler3d, "grid/kind mismatch");
  require(u.ncomp() == 3, "velocity replacement needs a 3-component field");
  const Grid& g = ks.grid;
  const std::array<const std::vector<cplx>*, 3> uh = {
      &u.comp[0].spectrum(), &u.comp[1].spectrum(), &u.comp[2].spectrum()};
  std::array<std::vector<cplx>, 3> s;
  for (auto& v : s) v.assign(g.points(), cplx(0.0));
  for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
    const double kk[3] = {k0, k1, k2};
    const double n2 = k0 * k0 + k1 * k1 + k2 * k2;
    const cplx p = ks.far_pot[m];
    const cplx dot = kk[0] * (*uh[0])[m] + kk[1] * (*uh[1])[m] + kk[2] * (*uh[2])[m];
    for (int c = 0; c < 3; ++c) s[c][m] = p * (n2 * (*uh[c])[m] - kk[c] * dot);
  });
  VectorField out(g, 3);
  for (int c = 0; c < 3; ++c) out.comp[c] = ScalarField(g, idft_real(g, s[c]));
  return out;
}

VectorField far_vector_conv(const ScalarField& q, const KernelSet& ks) {
  require(q.grid() == ks.grid && ks.kind == KernelKind::euler3d, "grid/kind mismatch");
  const Grid& g = ks.grid;
  const auto& qh = q.spectrum();
  std::array<std::vector<cplx>, 3> s;
  for (auto& v : s) v.assign(g.points(), cplx(0.0));
  for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
    const cplx base = ks.far_pot[m] * qh[m];
    s[0][m] = cplx(0.0, k0) * base;
    s[1][m] = cplx(0.0, k1) * base;
    s[2][m] = cplx(0.0, k2) * base;
  });
  VectorField out(g, 3);
  for (int c = 0; c < 3; ++c) out.comp[c] = ScalarField(g, idft_real(g, s[c]));
  return out;
}

ScalarField far_div_conv(const ScalarField& f, const KernelSet& ks) {
  require(f.grid() == ks.grid && ks.kind == KernelKind::euler3d, "grid/kind mismatch");
  const auto& fh = f.spectrum();
  std::vector<cplx> s(fh.size());
  for (std::size_t m = 0; m < fh.size(); ++m) s[m] = ks.far_div[m] * fh[m];
  return ScalarField(ks.grid, idft_real(ks.grid, s));
}

double far3d_l1(const KernelSet& ks) {
  require(ks.kind == KernelKind::euler3d, "3d kernel set required");
  return ks.far_l1;
}

void dump_kernel_tables(const KernelSet& ks, const std::string& dir) {
  const Grid& g = ks.grid;
  auto as_field = [&](const std::vector<cplx>& spec) {
    return ScalarField(g, idft_real(g, spec));
  };
  if (ks.kind == KernelKind::sqg2d) {
    VectorField nearv(g, 1);
    nearv.comp[0] = as_field(ks.near2d);
    save_field(nearv, dir + "/near2d.sfld", "near kernel table (a Phi), band-limited exact symbol");
    VectorField farv(g, 4);
    for (int c = 0; c < 4; ++c) farv.comp[c] = as_field(ks.far2d[c]);
    save_field(farv, dir + "/far2d.sfld",
               "far matrix table, row-major, exact periodization");
  } else {
    auto deriv = [&](const std::vector<cplx>& pot, int i, int j, int k) {
      // i<0: first derivative d_j; otherwise -d_i d_j d_k (third derivative)
      std::vector<cplx> s(g.points());
      for_each_mode3(g, [&](std::int64_t m, double k0, double k1, double k2) {
        const double kk[3] = {k0, k1, k2};
        s[m] = (i < 0 ? cplx(0.0, kk[j]) : cplx(0.0, -kk[i] * kk[j] * kk[k])) * pot[m];
      });
      return ScalarField(g, idft_real(g, s));
    };
    VectorField nearv(g, 3);
    for (int c = 0; c < 3; ++c) nearv.comp[c] = deriv(ks.near_pot, -1, c, 0);
    save_field(nearv, dir + "/near3d.sfld", "near kernel table (a K), cell weighted");
    VectorField farv(g, 13);
    for (int t = 0; t < 10; ++t)
      farv.comp[t] = deriv(ks.far_pot, kTri[t][0], kTri[t][1], kTri[t][2]);
    for (int c = 0; c < 3; ++c) farv.comp[10 + c] = deriv(ks.far_div, -1, c, 0);
    save_field(farv, dir + "/far3d.sfld",
               "far third-derivative tables (10 sym) then grad div tables (3)");
  }
}

}  // namespace sflow
