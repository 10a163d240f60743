#include <doctest.h>

#include <cstdio>

#include "core/field.hpp"

using namespace sflow;

namespace {

ScalarField fill(const Grid& g, double (*fn)(double, double)) {
  ScalarField f(g);
  auto& v = f.mutate();
  std::int64_t flat = 0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j, ++flat) v[flat] = fn(g.coord(i), g.coord(j));
  return f;
}

ScalarField fill3(const Grid& g, double (*fn)(double, double, double)) {
  ScalarField f(g);
  auto& v = f.mutate();
  std::int64_t flat = 0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      for (int k = 0; k < g.n; ++k, ++flat)
        v[flat] = fn(g.coord(i), g.coord(j), g.coord(k));
  return f;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS(make_grid(1, 1.0, 32));
  CHECK_THROWS(make_grid(2, -1.0, 32));
  CHECK_THROWS(make_grid(2, 1.0, 24));
  CHECK_THROWS(make_grid(2, 1.0, 8));
  Grid g = make_grid(2, 8.0 * kPi, 256);
  CHECK(g.spacing() == doctest::Approx(kPi / 16.0));
  CHECK(g.nyquist() == doctest::Approx(16.0));
  CHECK(g.signed_index(255) == -1);
  CHECK(g.signed_index(128) == 128);
}

TEST_CASE("dft roundtrip and parseval") {
  Grid g = make_grid(2, 8.0 * kPi, 64);
  RngStream rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    ScalarField f = random_band_limited(g, rng, 0.125, 1.5, 1.0, 1.0);
    auto back = idft_real(g, dft(g, f.values()));
    double m = 0.0;
    for (size_t i = 0; i < back.size(); ++i)
      m = std::max(m, std::abs(back[i] - f.values()[i]));
    CHECK(m <= 1e-12);
    CHECK(parseval_gap(f) <= 1e-10);
  }
}

TEST_CASE("spectral derivative of sine") {
  Grid g = make_grid(2, 8.0 * kPi, 64);
  ScalarField f = fill(g, [](double x, double) { return std::sin(x); });
  ScalarField d = spectral_derivative(f, {1, 0, 0});
  ScalarField want = fill(g, [](double x, double) { return std::cos(x); });
  CHECK(max_abs_diff(d, want) <= 1e-12);
  ScalarField d4 = spectral_derivative(f, {4, 0, 0});
  CHECK(max_abs_diff(d4, f) <= 1e-11);
  CHECK_THROWS(spectral_derivative(f, {9, 0, 0}));
  CHECK_THROWS(spectral_derivative(f, {0, 0, 1}));
}

TEST_CASE("vector calculus identities") {
  Grid g3 = make_grid(3, kPi, 16);
  ScalarField s = fill3(g3, [](double x, double y, double) { return std::sin(x + y); });
  VectorField gr = gradient(s);
  VectorField c = curl3(gr);
  CHECK(sup_norm(c) <= 1e-11);

  RngStream rng(7);
  VectorField v(g3, 3);
  for (int i = 0; i < 3; ++i)
    v.comp[i] = random_band_limited(g3, rng, 1.0, 4.0, 2.0, 1.0);
  ScalarField dc = divergence(curl3(v));
  CHECK(sup_norm(dc) <= 1e-11 * std::max(1.0, sup_norm(v)));

  Grid g2 = make_grid(2, kPi, 32);
  ScalarField p = fill(g2, [](double x, double y) { return std::sin(x) * std::cos(y); });
  VectorField pg = perp_grad(p);
  ScalarField d = divergence(pg);
  CHECK(sup_norm(d) <= 1e-11);
}

TEST_CASE("perp_grad of radial data is tangential on the axis") {
  Grid g = make_grid(2, 8.0, 64);
  ScalarField f = fill(g, [](double x, double y) {
    return std::exp(-(x * x + y * y) / 4.0);
  });
  VectorField v = perp_grad(f);
  // x on the positive x1 axis: radial component is v1 there
  int idx[2] = {40, 32};  // x = (2.0, 0.0)
  CHECK(std::abs(v.comp[0].at(idx)) <= 1e-8);
}

TEST_CASE("field file round trip") {
  Grid g = make_grid(2, 2.0 * kPi, 32);
  RngStream rng(99);
  VectorField v(g, 2);
  v.comp[0] = random_band_limited(g, rng, 0.5, 3.0, 2.0, 1.3);
  v.comp[1] = random_band_limited(g, rng, 0.5, 3.0, 2.0, 0.7);
  const std::string path = "roundtrip_test.sfld";
  save_field(v, path, "unit test");
  VectorField r = load_field(path);
  CHECK(r.grid() == g);
  CHECK(r.ncomp() == 2);
  CHECK(max_abs_diff(v, r) == 0.0);  // bit-exact
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
  CHECK_THROWS(load_field("does_not_exist.sfld"));
}

TEST_CASE("upsample is exact on band-limited data") {
  Grid g = make_grid(2, kPi, 32);
  RngStream rng(5);
  ScalarField f = random_band_limited(g, rng, 1.0, 6.0, 4.0, 1.0);
  ScalarField u = upsample(f, 2);
  // coarse nodes are every other fine node
  double m = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      int ci[2] = {i, j};
      int fi[2] = {2 * i, 2 * j};
      m = std::max(m, std::abs(f.at(ci) - u.at(fi)));
    }
  CHECK(m <= 1e-12);
}

TEST_CASE("cubic interpolation reproduces smooth data and respects bounds") {
  Grid g = make_grid(2, kPi, 64);
  ScalarField f = fill(g, [](double x, double y) { return std::sin(x) * std::sin(y); });
  double worst = 0.0;
  RngStream rng(11);
  for (int t = 0; t < 200; ++t) {
    double x[2] = {(rng.uniform() * 2 - 1) * kPi, (rng.uniform() * 2 - 1) * kPi};
    double got = interp_cubic(f, x, false);
    worst = std::max(worst, std::abs(got - std::sin(x[0]) * std::sin(x[1])));
  }
  CHECK(worst <= 2e-5);
  for (int t = 0; t < 200; ++t) {
    double x[2] = {(rng.uniform() * 2 - 1) * kPi, (rng.uniform() * 2 - 1) * kPi};
    double got = interp_cubic(f, x, true);
    CHECK(got <= 1.0);
    CHECK(got >= -1.0);
  }
}

TEST_CASE("random divergence-free 3D fields") {
  Grid g = make_grid(3, kPi, 16);
  RngStream rng(21);
  VectorField u = random_divfree3(g, rng, 1.0, 4.0, 2.0, 0.5);
  CHECK(sup_norm(u) == doctest::Approx(0.5));
  CHECK(sup_norm(divergence(u)) <= 1e-11);
}
