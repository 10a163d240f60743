#include "core/field.hpp"

#include <fftw3.h>

#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include <nlohmann/json.hpp>

namespace sflow {

Grid make_grid(int dim, double half_width, int n) {
  require(dim == 2 || dim == 3, "grid dim must be 2 or 3");
  require(half_width > 0.0, "grid half-width must be positive");
  require(n >= 16, "grid must have at least 16 points per axis");
  require((n & (n - 1)) == 0, "grid size must be a power of two");
  Grid g;
  g.dim = dim;
  g.n = n;
  g.half = half_width;
  return g;
}

namespace {

struct PlanKey {
  int dim, n, sign;
  bool operator<(const PlanKey& o) const {
    return std::tie(dim, n, sign) < std::tie(o.dim, o.n, o.sign);
  }
};

std::mutex g_plan_mutex;
std::map<PlanKey, fftw_plan> g_plans;

fftw_plan plan_for(const Grid& g, int sign) {
  std::lock_guard<std::mutex> lk(g_plan_mutex);
  PlanKey key{g.dim, g.n, sign};
  auto it = g_plans.find(key);
  if (it != g_plans.end()) return it->second;
  std::vector<cplx> scratch(g.points());
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p;
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  if (g.dim == 2)
    p = fftw_plan_dft_2d(g.n, g.n, buf, buf, sign, flags);
  else
    p = fftw_plan_dft_3d(g.n, g.n, g.n, buf, buf, sign, flags);
  g_plans.emplace(key, p);
  return p;
}

void execute(const Grid& g, int sign, std::vector<cplx>& inout) {
  auto* buf = reinterpret_cast<fftw_complex*>(inout.data());
  fftw_execute_dft(plan_for(g, sign), buf, buf);
}

}  // namespace

std::vector<cplx> dft(const Grid& g, const std::vector<double>& values) {
  require(static_cast<std::int64_t>(values.size()) == g.points(), "dft size mismatch");
  std::vector<cplx> buf(values.begin(), values.end());
  execute(g, FFTW_FORWARD, buf);
  return buf;
}

std::vector<cplx> dft_complex(const Grid& g, const std::vector<cplx>& values) {
  std::vector<cplx> buf(values);
  execute(g, FFTW_FORWARD, buf);
  return buf;
}

std::vector<cplx> idft(const Grid& g, const std::vector<cplx>& coeffs) {
  std::vector<cplx> buf(coeffs);
  execute(g, FFTW_BACKWARD, buf);
  const double inv = 1.0 / static_cast<double>(g.points());
  for (auto& z : buf) z *= inv;
  return buf;
}

std::vector<double> idft_real(const Grid& g, const std::vector<cplx>& coeffs) {
  auto buf = idft(g, coeffs);
  std::vector<double> out(buf.size());
  for (size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
  return out;
}

ScalarField::ScalarField(const Grid& g, std::vector<double> v)
    : grid_(g), values_(std::move(v)) {
  require(static_cast<std::int64_t>(values_.size()) == g.points(),
          "field value count does not match grid");
}

const std::vector<cplx>& ScalarField::spectrum() const {
  if (!spectral_) spectral_ = dft(grid_, values_);
  return *spectral_;
}

ScalarField ScalarField::from_spectrum(const Grid& g, const std::vector<cplx>& coeffs) {
  ScalarField f(g, idft_real(g, coeffs));
  f.spectral_ = coeffs;
  return f;
}

double sup_norm(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double sup_norm(const VectorField& v) {
  double m = 0.0;
  const auto n = v.grid().points();
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& c : v.comp) s += c.values()[i] * c.values()[i];
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

double l2_norm(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v;
  return std::sqrt(s * f.grid().cell_measure());
}

double mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.values().size());
}

double oscillation(const ScalarField& f) {
  double lo = f.values()[0], hi = f.values()[0];
  for (double v : f.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

ScalarField scaled(const ScalarField& f, double c) {
  ScalarField out(f.grid());
  auto& v = out.mutate();
  const auto& src = f.values();
  for (size_t i = 0; i < src.size(); ++i) v[i] = c * src[i];
  return out;
}

void axpy(ScalarField& y, double a, const ScalarField& x) {
  require(y.grid() == x.grid(), "axpy grid mismatch");
  auto& v = y.mutate();
  const auto& src = x.values();
  for (size_t i = 0; i < src.size(); ++i) v[i] += a * src[i];
}

ScalarField pointwise_product(const ScalarField& a, const ScalarField& b) {
  require(a.grid() == b.grid(), "product grid mismatch");
  ScalarField out(a.grid());
  auto& v = out.mutate();
  for (size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
  return out;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  require(a.grid() == b.grid(), "diff grid mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.values().size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

double max_abs_diff(const VectorField& a, const VectorField& b) {
  require(a.ncomp() == b.ncomp(), "diff component mismatch");
  double m = 0.0;
  for (int c = 0; c < a.ncomp(); ++c) m = std::max(m, max_abs_diff(a.comp[c], b.comp[c]));
  return m;
}

namespace {

// Visit every spectral entry with its signed integer frequency vector.
template <typename F>
void for_each_mode(const Grid& g, F&& fn) {
  if (g.dim == 2) {
    std::int64_t flat = 0;
    for (int t0 = 0; t0 < g.n; ++t0) {
      const int k0 = g.signed_index(t0);
      for (int t1 = 0; t1 < g.n; ++t1, ++flat) {
        int k[3] = {k0, g.signed_index(t1), 0};
        fn(flat, k);
      }
    }
  } else {
    std::int64_t flat = 0;
    for (int t0 = 0; t0 < g.n; ++t0) {
      const int k0 = g.signed_index(t0);
      for (int t1 = 0; t1 < g.n; ++t1) {
        const int k1 = g.signed_index(t1);
        for (int t2 = 0; t2 < g.n; ++t2, ++flat) {
          int k[3] = {k0, k1, g.signed_index(t2)};
          fn(flat, k);
        }
      }
    }
  }
}

}  // namespace

ScalarField spectral_derivative(const ScalarField& f, const std::array<int, 3>& alpha) {
  const Grid& g = f.grid();
  int total = 0;
  for (int d = 0; d < g.dim; ++d) {
    require(alpha[d] >= 0, "derivative order must be nonnegative");
    total += alpha[d];
  }
  for (int d = g.dim; d < 3; ++d)
    require(alpha[d] == 0, "derivative order set beyond grid dimension");
  require(total <= 8, "derivative order above 8 unsupported");
  if (total == 0) return f;

  const double fs = g.freq_step();
  const int half = g.n / 2;
  std::vector<cplx> out(f.spectrum());
  for_each_mode(g, [&](std::int64_t flat, const int* k) {
    cplx m(1.0, 0.0);
    for (int d = 0; d < g.dim; ++d) {
      if (alpha[d] == 0) continue;
      // odd-order derivative has no consistent real value at the Nyquist line
      if ((alpha[d] % 2 == 1) && k[d] == half) {
        m = 0.0;
        break;
      }
      cplx ix(0.0, k[d] * fs);
      for (int p = 0; p < alpha[d]; ++p) m *= ix;
    }
    out[flat] *= m;
  });
  return ScalarField::from_spectrum(g, out);
}

VectorField gradient(const ScalarField& f) {
  const Grid& g = f.grid();
  VectorField out(g, g.dim);
  for (int d = 0; d < g.dim; ++d) {
    std::array<int, 3> a{0, 0, 0};
    a[d] = 1;
    out.comp[d] = spectral_derivative(f, a);
  }
  return out;
}

ScalarField divergence(const VectorField& v) {
  const Grid& g = v.grid();
  require(v.ncomp() == g.dim, "divergence needs dim components");
  ScalarField out(g);
  for (int d = 0; d < g.dim; ++d) {
    std::array<int, 3> a{0, 0, 0};
    a[d] = 1;
    axpy(out, 1.0, spectral_derivative(v.comp[d], a));
  }
  return out;
}

VectorField curl3(const VectorField& v) {
  const Grid& g = v.grid();
  require(g.dim == 3 && v.ncomp() == 3, "curl3 needs a 3D vector field");
  auto d = [&](int comp, int axis) {
    std::array<int, 3> a{0, 0, 0};
    a[axis] = 1;
    return spectral_derivative(v.comp[comp], a);
  };
  VectorField out(g, 3);
  out.comp[0] = d(2, 1);
  axpy(out.comp[0], -1.0, d(1, 2));
  out.comp[1] = d(0, 2);
  axpy(out.comp[1], -1.0, d(2, 0));
  out.comp[2] = d(1, 0);
  axpy(out.comp[2], -1.0, d(0, 1));
  return out;
}

VectorField perp_grad(const ScalarField& f) {
  const Grid& g = f.grid();
  require(g.dim == 2, "perp_grad is a 2D operator");
  VectorField out(g, 2);
  out.comp[0] = scaled(spectral_derivative(f, {0, 1, 0}), -1.0);
  out.comp[1] = spectral_derivative(f, {1, 0, 0});
  return out;
}

ScalarField apply_radial_multiplier(const ScalarField& f, double (*m)(double)) {
  const Grid& g = f.grid();
  const double fs = g.freq_step();
  std::vector<cplx> out(f.spectrum());
  for_each_mode(g, [&](std::int64_t flat, const int* k) {
    double s = 0.0;
    for (int d = 0; d < g.dim; ++d) s += static_cast<double>(k[d]) * k[d];
    out[flat] *= m(std::sqrt(s) * fs);
  });
  return ScalarField::from_spectrum(g, out);
}

double parseval_gap(const ScalarField& f) {
  const Grid& g = f.grid();
  double phys = 0.0;
  for (double v : f.values()) phys += v * v;
  phys *= g.cell_measure();
  double spec = 0.0;
  for (const cplx& z : f.spectrum()) spec += std::norm(z);
  double meas = 1.0;
  for (int d = 0; d < g.dim; ++d) meas *= 2.0 * g.half;
  spec *= g.cell_measure() * g.cell_measure() / meas;
  return std::abs(phys - spec) / std::max({phys, spec, 1e-300});
}

ScalarField upsample(const ScalarField& f, int factor) {
  require(factor >= 1, "upsample factor must be >= 1");
  if (factor == 1) return f;
  const Grid& g = f.grid();
  Grid fine = make_grid(g.dim, g.half, g.n * factor);
  std::vector<cplx> out(fine.points(), cplx(0.0, 0.0));
  const auto& src = f.spectrum();
  const double scale = std::pow(static_cast<double>(factor), g.dim);
  const int half = g.n / 2;
  for_each_mode(g, [&](std::int64_t flat, const int* k) {
    bool nyq = false;
    for (int d = 0; d < g.dim; ++d)
      if (k[d] == half) nyq = true;
    if (nyq) return;  // callers keep test data off the Nyquist planes
    int idx[3];
    for (int d = 0; d < g.dim; ++d) idx[d] = k[d] >= 0 ? k[d] : k[d] + fine.n;
    out[flat_index(fine, idx)] = src[flat] * scale;
  });
  return ScalarField::from_spectrum(fine, out);
}

double interp_cubic(const ScalarField& f, const double* x, bool clip) {
  const Grid& g = f.grid();
  const double dx = g.spacing();
  const int n = g.n;
  int base[3];
  double w[3][4];
  for (int d = 0; d < g.dim; ++d) {
    double s = (x[d] + g.half) / dx;
    double fl = std::floor(s);
    double t = s - fl;
    base[d] = static_cast<int>(fl);
    const double t2 = t * t, t3 = t2 * t;
    w[d][0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[d][1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[d][2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[d][3] = 0.5 * (t3 - t2);
  }
  auto wrap = [n](int i) {
    i %= n;
    return i < 0 ? i + n : i;
  };
  double acc = 0.0;
  double lo = 1e300, hi = -1e300;
  const auto& vals = f.values();
  if (g.dim == 2) {
    int i0[4], i1[4];
    for (int a = 0; a < 4; ++a) {
      i0[a] = wrap(base[0] - 1 + a);
      i1[a] = wrap(base[1] - 1 + a);
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const double v = vals[static_cast<std::int64_t>(i0[a]) * n + i1[b]];
        acc += w[0][a] * w[1][b] * v;
        if (clip) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
  } else {
    int i0[4], i1[4], i2[4];
    for (int a = 0; a < 4; ++a) {
      i0[a] = wrap(base[0] - 1 + a);
      i1[a] = wrap(base[1] - 1 + a);
      i2[a] = wrap(base[2] - 1 + a);
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const double wab = w[0][a] * w[1][b];
        const std::int64_t rowbase = (static_cast<std::int64_t>(i0[a]) * n + i1[b]) * n;
        for (int c = 0; c < 4; ++c) {
          const double v = vals[rowbase + i2[c]];
          acc += wab * w[2][c] * v;
          if (clip) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
        }
      }
  }
  if (clip) acc = std::min(std::max(acc, lo), hi);
  return acc;
}

namespace {

constexpr std::uint32_t kFieldFormatVersion = 1;

void put_u32(std::ofstream& o, std::uint32_t v) {
  o.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t get_u32(std::ifstream& i) {
  std::uint32_t v = 0;
  i.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_field(const VectorField& v, const std::string& path,
                const std::string& provenance) {
  const Grid& g = v.grid();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open field file for writing: " + path);
  out.write("SFLD", 4);
  put_u32(out, kFieldFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(g.dim));
  put_u32(out, static_cast<std::uint32_t>(g.n));
  double L = g.half;
  out.write(reinterpret_cast<const char*>(&L), 8);
  put_u32(out, static_cast<std::uint32_t>(v.ncomp()));
  const char pad[64] = {0};
  out.write(pad, 64 - 28);
  for (const auto& c : v.comp)
    out.write(reinterpret_cast<const char*>(c.values().data()),
              static_cast<std::streamsize>(c.values().size() * 8));
  require(out.good(), "field file write failed: " + path);
  out.close();

  nlohmann::json side;
  side["format"] = "SFLD";
  side["version"] = kFieldFormatVersion;
  side["dim"] = g.dim;
  side["N"] = g.n;
  side["L"] = g.half;
  side["components"] = v.ncomp();
  side["provenance"] = provenance;
  std::ofstream js(path + ".json", std::ios::trunc);
  js << side.dump(2) << "\n";
}

VectorField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open field file: " + path);
  char magic[4];
  in.read(magic, 4);
  require(std::memcmp(magic, "SFLD", 4) == 0, "bad field file magic: " + path);
  const std::uint32_t version = get_u32(in);
  require(version == kFieldFormatVersion, "unsupported field file version");
  const int dim = static_cast<int>(get_u32(in));
  const int n = static_cast<int>(get_u32(in));
  double L = 0.0;
  in.read(reinterpret_cast<char*>(&L), 8);
  const int ncomp = static_cast<int>(get_u32(in));
  require(ncomp >= 1 && ncomp <= 16, "implausible component count in field file");
  in.seekg(64, std::ios::beg);
  Grid g = make_grid(dim, L, n);
  VectorField v(g, ncomp);
  for (auto& c : v.comp) {
    auto& vals = c.mutate();
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * 8));
  }
  require(in.good(), "field file truncated: " + path);
  return v;
}

namespace {

ScalarField real_field_from_random_spectrum(const Grid& g, std::vector<cplx> z,
                                            double target_sup) {
  // hermitize so the inverse is real, then rescale in physical space
  auto vals = idft_real(g, z);
  ScalarField f(g, std::move(vals));
  const double s = sup_norm(f);
  if (s > 0.0 && target_sup > 0.0) return scaled(f, target_sup / s);
  return f;
}

}  // namespace

ScalarField random_band_limited(const Grid& g, RngStream& rng, double kmin,
                                double kmax, double k0, double target_sup) {
  require(kmax * 1.0000001 >= kmin, "empty frequency band");
  require(kmax < g.nyquist(), "band extends to the Nyquist frequency");
  const double fs = g.freq_step();
  std::vector<cplx> z(g.points(), cplx(0, 0));
  // draw in a fixed flat order for determinism, then hermitize
  for_each_mode(g, [&](std::int64_t flat, const int* k) {
    double s = 0.0;
    for (int d = 0; d < g.dim; ++d) s += static_cast<double>(k[d]) * k[d];
    const double x = std::sqrt(s) * fs;
    if (x < kmin * (1 - 1e-12) || x > kmax * (1 + 1e-12)) return;
    const double a = rng.normal(), b = rng.normal();
    z[flat] = cplx(a, b) * std::exp(-(x / k0) * (x / k0));
  });
  // enforce conjugate symmetry: average with the reflected conjugate
  std::vector<cplx> h(g.points(), cplx(0, 0));
  for_each_mode(g, [&](std::int64_t flat, const int* k) {
    int idx[3];
    for (int d = 0; d < g.dim; ++d) {
      int m = -k[d];
      idx[d] = m >= 0 ? m : m + g.n;
    }
    h[flat] = 0.5 * (z[flat] + std::conj(z[flat_index(g, idx)]));
  });
  return real_field_from_random_spectrum(g, std::move(h), target_sup);
}

VectorField random_divfree3(const Grid& g, RngStream& rng, double kmin,
                            double kmax, double k0, double target_sup) {
  require(g.dim == 3, "random_divfree3 needs a 3D grid");
  VectorField raw(g, 3);
  for (int c = 0; c < 3; ++c)
    raw.comp[c] = random_band_limited(g, rng, kmin, kmax, k0, 1.0);
  // leray projection: uhat -> uhat - k (k.uhat)/|k|^2
  std::vector<std::vector<cplx>> spec;
  for (int c = 0; c < 3; ++c) spec.push_back(raw.comp[c].spectrum());
  for_each_mode(g, [&](std::int64_t flat, const int* k) {
    double k2 = 0.0;
    for (int d = 0; d < 3; ++d) k2 += static_cast<double>(k[d]) * k[d];
    if (k2 == 0.0) {
      for (int d = 0; d < 3; ++d) spec[d][flat] = 0.0;
      return;
    }
    cplx dot(0, 0);
    for (int d = 0; d < 3; ++d) dot += static_cast<double>(k[d]) * spec[d][flat];
    for (int d = 0; d < 3; ++d) spec[d][flat] -= static_cast<double>(k[d]) * dot / k2;
  });
  VectorField out(g, 3);
  for (int c = 0; c < 3; ++c) out.comp[c] = ScalarField::from_spectrum(g, spec[c]);
  const double s = sup_norm(out);
  if (s > 0.0 && target_sup > 0.0)
    for (int c = 0; c < 3; ++c) out.comp[c] = scaled(out.comp[c], target_sup / s);
  return out;
}

}  // namespace sflow
