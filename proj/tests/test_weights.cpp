#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "cayley/errors.hpp"
#include "cayley/geometry.hpp"
#include "cayley/patches.hpp"
#include "cayley/rng.hpp"
#include "cayley/weights.hpp"

using namespace cayley;

namespace {

const double kPi = 3.14159265358979323846;

std::vector<double> radial_power(const ParametricPatch& patch, double expo) {
  std::vector<double> f(static_cast<std::size_t>(patch.node_count()));
  for (int i = 0; i < patch.node_count(); ++i)
    f[static_cast<std::size_t>(i)] = std::pow(patch.axes[0].coord(patch.node_multi(i)[0]), expo);
  return f;
}

}  // namespace

TEST_CASE("constant field on a cone annulus matches the analytic integral") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 12, 64);
  std::vector<double> one(static_cast<std::size_t>(cone.node_count()), 1.0);
  std::vector<double> rho = radius_function(cone);
  double got = weighted_sobolev_norm(one, cone, WeightedNormSpec{2.0, 0, 0.0}, rho);
  double want = std::sqrt(2 * kPi * kPi * std::log(0.8 / 0.05));
  CHECK(got == doctest::Approx(want).epsilon(0.01));

  std::vector<double> zero(static_cast<std::size_t>(cone.node_count()), 0.0);
  CHECK(weighted_sobolev_norm(zero, cone, WeightedNormSpec{2.0, 0, 0.0}, rho) == 0.0);
  CHECK(weighted_holder_norm(one, cone, WeightedNormSpec{2.0, 0, 0.0}, rho) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("radial powers: the weight cancels exactly") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 8, 32);
  std::vector<double> rho = radius_function(cone);
  double logba = std::log(0.8 / 0.05);
  for (double p : {2.0, 3.0}) {
    WeightedNormSpec spec{p, 0, 0.7};
    std::vector<double> f = radial_power(cone, 0.7);
    double got = weighted_sobolev_norm(f, cone, spec, rho);
    CHECK(got == doctest::Approx(std::pow(2 * kPi * kPi * logba, 1.0 / p)).epsilon(0.01));
    std::vector<double> mags = sobolev_weighted_magnitudes(f, grid_view(cone), spec, rho);
    for (double m : mags) REQUIRE(m == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("first and second covariant derivatives on the exact cone") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 8, 32);
  std::vector<double> rho = radius_function(cone);
  double base = 2 * kPi * kPi * std::log(0.8 / 0.05);

  // s = r: |s| rho^{-1} = 1 and |grad s| rho^0 = 1 at every node
  std::vector<double> lin = radial_power(cone, 1.0);
  double got1 = weighted_sobolev_norm(lin, cone, WeightedNormSpec{2.0, 1, 1.0}, rho);
  CHECK(got1 == doctest::Approx(std::sqrt(2.0 * base)).epsilon(0.01));

  // s = r^2: magnitudes 1, 2, 4 at weights -2, -1, 0 -> 1 + 4 + 16 per node
  std::vector<double> quad = radial_power(cone, 2.0);
  double got2 = weighted_sobolev_norm(quad, cone, WeightedNormSpec{2.0, 2, 2.0}, rho);
  CHECK(got2 == doctest::Approx(std::sqrt(21.0 * base)).epsilon(0.01));

  // monotone in k
  double k0 = weighted_sobolev_norm(quad, cone, WeightedNormSpec{2.0, 0, 2.0}, rho);
  double k1 = weighted_sobolev_norm(quad, cone, WeightedNormSpec{2.0, 1, 2.0}, rho);
  CHECK(k0 <= k1 + 1e-15);
  CHECK(k1 <= got2 + 1e-15);
}

TEST_CASE("holder norms") {
  ParametricPatch cone = make_flat_cone(0.01, 1.0, 8, 32);
  std::vector<double> rho = radius_function(cone);
  std::vector<double> lin = radial_power(cone, 1.0);
  CHECK(weighted_holder_norm(lin, cone, WeightedNormSpec{2.0, 0, 1.0}, rho) ==
        doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> s15 = radial_power(cone, 1.5);
  CHECK(weighted_holder_norm(s15, cone, WeightedNormSpec{2.0, 0, 1.0}, rho) ==
        doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("duality pairing: equality case, orthogonality, scaling") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 8, 32);
  std::vector<double> rho = radius_function(cone);
  std::vector<double> u = radial_power(cone, -2.0);
  double pairing = duality_pairing(u, u, cone);
  double want = 2 * kPi * kPi * std::log(0.8 / 0.05);
  CHECK(pairing == doctest::Approx(want).epsilon(0.01));
  double nu = weighted_sobolev_norm(u, cone, WeightedNormSpec{2.0, 0, -2.0}, rho);
  double nv = weighted_sobolev_norm(u, cone, WeightedNormSpec{2.0, 0, -4.0 - (-2.0)}, rho);
  CHECK(nu * nv == doctest::Approx(pairing).epsilon(1e-12));

  std::size_t n = static_cast<std::size_t>(cone.node_count());
  std::vector<Vec4> a(n, Vec4{1.0, 2.0, 0.0, 0.0});
  std::vector<Vec4> b(n, Vec4{0.0, 0.0, 3.0, -1.0});
  CHECK(duality_pairing(a, b, cone) == 0.0);

  std::vector<double> v = radial_power(cone, 0.5);
  std::vector<double> cu = u;
  for (double& x : cu) x *= 3.7;
  CHECK(duality_pairing(cu, v, cone) ==
        doctest::Approx(3.7 * duality_pairing(u, v, cone)).epsilon(1e-13));

  std::vector<double> wrong(n - 1, 1.0);
  CHECK_THROWS_AS(duality_pairing(u, wrong, cone), GridMismatch);
}

TEST_CASE("duality pairing obeys the Holder bound") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 6, 16);
  std::vector<double> rho = radius_function(cone);
  Rng rng(71u);
  std::size_t n = static_cast<std::size_t>(cone.node_count());
  for (auto [p, q] : {std::pair{2.0, 2.0}, std::pair{3.0, 1.5}}) {
    for (double delta : {-2.0, 0.5}) {
      std::vector<double> u(n), v(n);
      for (std::size_t i = 0; i < n; ++i) {
        u[i] = rng.gaussian();
        v[i] = rng.gaussian();
      }
      double pairing = std::fabs(duality_pairing(u, v, cone));
      double nu = weighted_sobolev_norm(u, cone, WeightedNormSpec{p, 0, delta}, rho);
      double nv = weighted_sobolev_norm(v, cone, WeightedNormSpec{q, 0, -4.0 - delta}, rho);
      CHECK(pairing <= nu * nv * (1 + 1e-12));
    }
  }
}

TEST_CASE("norm homogeneity") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 6, 16);
  std::vector<double> rho = radius_function(cone);
  Rng rng(73u);
  std::size_t n = static_cast<std::size_t>(cone.node_count());
  std::vector<double> s(n);
  std::vector<Vec4> sv(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.gaussian();
    for (int c = 0; c < 4; ++c) sv[i][static_cast<std::size_t>(c)] = rng.gaussian();
  }
  std::vector<double> cs = s;
  for (double& x : cs) x *= -2.5;
  std::vector<Vec4> csv = sv;
  for (auto& x : csv)
    for (double& y : x) y *= -2.5;
  WeightedNormSpec spec{2.0, 1, 0.3};
  CHECK(weighted_sobolev_norm(cs, cone, spec, rho) ==
        doctest::Approx(2.5 * weighted_sobolev_norm(s, cone, spec, rho)).epsilon(1e-13));
  CHECK(weighted_holder_norm(cs, cone, spec, rho) ==
        doctest::Approx(2.5 * weighted_holder_norm(s, cone, spec, rho)).epsilon(1e-13));
  CHECK(weighted_sobolev_norm(csv, cone, spec, rho) ==
        doctest::Approx(2.5 * weighted_sobolev_norm(sv, cone, spec, rho)).epsilon(1e-13));
  CHECK(weighted_holder_norm(csv, cone, spec, rho) ==
        doctest::Approx(2.5 * weighted_holder_norm(sv, cone, spec, rho)).epsilon(1e-13));

  // a one-component section agrees with the scalar norm
  std::vector<Vec4> emb1(n);
  for (std::size_t i = 0; i < n; ++i) emb1[i] = Vec4{s[i], 0.0, 0.0, 0.0};
  CHECK(weighted_sobolev_norm(emb1, cone, spec, rho) ==
        doctest::Approx(weighted_sobolev_norm(s, cone, spec, rho)).epsilon(1e-13));
}

TEST_CASE("doubling the radial resolution moves oracles by less than 0.5%") {
  ParametricPatch c64 = make_flat_cone(0.05, 0.8, 12, 64);
  ParametricPatch c128 = make_flat_cone(0.05, 0.8, 12, 128);
  std::vector<double> f64 = radial_power(c64, 0.7), f128 = radial_power(c128, 0.7);
  WeightedNormSpec spec{2.0, 0, 0.7};
  double a = weighted_sobolev_norm(f64, c64, spec, radius_function(c64));
  double b = weighted_sobolev_norm(f128, c128, spec, radius_function(c128));
  CHECK(a == doctest::Approx(b).epsilon(0.005));
}

TEST_CASE("validation failures") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 4, 8);
  std::vector<double> rho = radius_function(cone);
  std::vector<double> f(static_cast<std::size_t>(cone.node_count()), 1.0);
  CHECK_THROWS_AS(weighted_sobolev_norm(f, cone, WeightedNormSpec{2.0, 3, 0.0}, rho),
                  MissingDerivatives);
  CHECK_THROWS_AS(weighted_sobolev_norm(f, cone, WeightedNormSpec{1.0, 0, 0.0}, rho),
                  BadRange);
  std::vector<double> short_f(f.size() - 1, 1.0);
  CHECK_THROWS_AS(weighted_sobolev_norm(short_f, cone, WeightedNormSpec{2.0, 0, 0.0}, rho),
                  GridMismatch);
  std::vector<double> bad_rho(f.size(), 2.0);
  CHECK_THROWS_AS(weighted_sobolev_norm(f, cone, WeightedNormSpec{2.0, 0, 0.0}, bad_rho),
                  BadRange);
}

TEST_CASE("embedding predicate: paper cases") {
  CHECK(embedding_allowed(2, 1, 2.0, 2.0, 0.3, 0.3, EndKind::AC));
  CHECK_FALSE(embedding_allowed(2, 1, 2.0, 2.0, 0.3, 1.3, EndKind::CS));
  CHECK_FALSE(embedding_allowed(1, 1, 2.0, 4.0, 0.0, 0.0, EndKind::AC));
  CHECK_FALSE(embedding_allowed(1, 1, 2.0, 4.0, -3.0, 5.0, EndKind::AC));
}

TEST_CASE("embedding predicate matches the frozen truth table") {
  // loop order: k, kt, (p,pt), (delta, deltat), kind; bits per k in one row
  const std::string table[3] = {
      "111001000000001001111001000000000000001001000000000000000000000000000000",
      "111001111001001001111001111001000000001001111001000000000000001001000000",
      "111001111001001001111001111001111001001001111001111001000000001001111001"};
  const double ppt[4][2] = {{2, 2}, {2, 4}, {4, 2}, {4, 4}};
  const double ddt[3][2] = {{0, 0}, {0, 1}, {1, 0}};
  for (int k = 0; k < 3; ++k) {
    int at = 0;
    for (int kt = 0; kt < 3; ++kt)
      for (const auto& pq : ppt)
        for (const auto& dd : ddt)
          for (EndKind kind : {EndKind::AC, EndKind::CS}) {
            bool want = table[k][static_cast<std::size_t>(at++)] == '1';
            CHECK(embedding_allowed(k, kt, pq[0], pq[1], dd[0], dd[1], kind) == want);
          }
  }
}

TEST_CASE("grid partial derivatives") {
  ParametricPatch cone = make_flat_cone(0.1, 1.0, 6, 64);
  // exact for quadratics, including the one-sided boundary stencils
  std::vector<double> r2 = radial_power(cone, 2.0);
  std::vector<double> dr = grid_partial(r2, cone.axes, 0);
  for (int i = 0; i < cone.node_count(); ++i) {
    double r = cone.axes[0].coord(cone.node_multi(i)[0]);
    REQUIRE(dr[static_cast<std::size_t>(i)] == doctest::Approx(2.0 * r).epsilon(1e-10));
  }
  // periodic axis: sin(phi) -> cos(phi) at second order
  ParametricPatch torus = make_flat_torus4(32);
  std::vector<double> s(static_cast<std::size_t>(torus.node_count()));
  for (int i = 0; i < torus.node_count(); ++i)
    s[static_cast<std::size_t>(i)] =
        std::sin(2 * kPi * torus.axes[1].coord(torus.node_multi(i)[1]));
  std::vector<double> ds = grid_partial(s, torus.axes, 1);
  for (int i = 0; i < torus.node_count(); i += 7) {
    double x = torus.axes[1].coord(torus.node_multi(i)[1]);
    REQUIRE(ds[static_cast<std::size_t>(i)] ==
            doctest::Approx(2 * kPi * std::cos(2 * kPi * x)).epsilon(0.01).scale(1.0));
  }
}

TEST_CASE("radius function") {
  ParametricPatch cone = make_flat_cone(0.05, 0.8, 4, 16);
  std::vector<double> rho = radius_function(cone);
  for (int i = 0; i < cone.node_count(); ++i) {
    double r = cone.axes[0].coord(cone.node_multi(i)[0]);
    REQUIRE(rho[static_cast<std::size_t>(i)] == std::min(1.0, r));
    double ratio = rho[static_cast<std::size_t>(i)] / r;
    REQUIRE(ratio >= 0.5);
    REQUIRE(ratio <= 2.0);
  }
  // nondecreasing along the radial axis
  for (int i1 = 0; i1 < 4; ++i1)
    for (int ir = 1; ir < 16; ++ir) {
      int a = cone.node_index({ir - 1, i1, 0, 0});
      int b = cone.node_index({ir, i1, 0, 0});
      REQUIRE(rho[static_cast<std::size_t>(a)] <= rho[static_cast<std::size_t>(b)]);
    }
  ParametricPatch torus = make_flat_torus4(4);
  for (double r : radius_function(torus)) REQUIRE(r == 1.0);
}
