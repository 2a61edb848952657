#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "cayley/errors.hpp"
#include "cayley/patches.hpp"
#include "cayley/rng.hpp"
#include "cayley/spin7.hpp"

using namespace cayley;

namespace {

const double kPi = 3.14159265358979323846;

double frame_distance(const OrientedPlane4& a, const OrientedPlane4& b) {
  // Frobenius distance of the orthogonal projectors
  double s = 0.0;
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      double pa = 0.0, pb = 0.0;
      for (int i = 0; i < 4; ++i) {
        pa += a.frame[i][x] * a.frame[i][y];
        pb += b.frame[i][x] * b.frame[i][y];
      }
      s += (pa - pb) * (pa - pb);
    }
  return std::sqrt(s);
}

// (x1+ix2)^2 + (x3+ix4)^2 + (x5-ix6)^2
void quadric_equation(const Vec8& p, double& re, double& im) {
  double zr[3] = {p[0], p[2], p[4]};
  double zi[3] = {p[1], p[3], -p[5]};
  re = im = 0.0;
  for (int k = 0; k < 3; ++k) {
    re += zr[k] * zr[k] - zi[k] * zi[k];
    im += 2.0 * zr[k] * zi[k];
  }
}

void check_jet_consistency(const ParametricPatch& patch, const Vec4& coords, double tol) {
  Jet2 jet = patch.eval(coords);
  const double h = 1e-5;
  for (int i = 0; i < 4; ++i) {
    Vec4 cp = coords, cm = coords;
    cp[i] += h;
    cm[i] -= h;
    Jet2 jp = patch.eval(cp), jm = patch.eval(cm);
    for (int c = 0; c < 8; ++c) {
      double fd = (jp.pos[c] - jm.pos[c]) / (2 * h);
      REQUIRE(fd == doctest::Approx(jet.d1[i][c]).epsilon(tol).scale(1.0));
      for (int j = 0; j < 4; ++j) {
        double fd2 = (jp.d1[j][c] - jm.d1[j][c]) / (2 * h);
        REQUIRE(fd2 == doctest::Approx(jet.d2[i][j][c]).epsilon(tol).scale(1.0));
      }
    }
  }
}

}  // namespace

TEST_CASE("torus grid: margins, node count, translation invariance") {
  ParametricPatch t8 = make_flat_torus4(8);
  CHECK(t8.node_count() == 4096);
  for (int node = 0; node < t8.node_count(); ++node) {
    FrameRecord fr = tangent_normal_frames(t8, node);
    REQUIRE(cayley_margin(fr.tangent) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(make_flat_torus4(4).node_count() == 256);

  Vec8 off = zero8();
  off[4] = 0.1;
  ParametricPatch shifted = make_flat_torus4(4, off);
  for (int node = 0; node < shifted.node_count(); node += 17) {
    FrameRecord fr = tangent_normal_frames(shifted, node);
    REQUIRE(cayley_margin(fr.tangent) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_flat_torus4(3), BadRange);
}

TEST_CASE("torus frames are the standard basis") {
  ParametricPatch t4 = make_flat_torus4(4);
  FrameRecord fr = tangent_normal_frames(t4, 7);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 8; ++c) {
      CHECK(fr.tangent.frame[i][c] == (c == i ? 1.0 : 0.0));
      CHECK(fr.normal[i][c] == (c == i + 4 ? 1.0 : 0.0));
    }
}

TEST_CASE("quadric cone: calibrated, unit-speed, dilation equivariant") {
  ParametricPatch cone = make_quadric_cone(0.1, 1.0, 6, 8);
  for (int node = 0; node < cone.node_count(); ++node) {
    Vec4 c = cone.node_coords(node);
    Jet2 jet = cone.eval(c);
    REQUIRE(norm(jet.pos) == doctest::Approx(c[0]).epsilon(1e-12));
    double re, im;
    quadric_equation(jet.pos, re, im);
    REQUIRE(std::fabs(re) <= 1e-12);
    REQUIRE(std::fabs(im) <= 1e-12);
    FrameRecord fr = frames_from_jet(jet, orientation_swap(cone.kind));
    REQUIRE(cayley_margin(fr.tangent) == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(fr.gram_det >= 1e-8);
    // exact cone: f(2r, theta) = 2 f(r, theta)
    Vec4 c2 = c;
    c2[0] *= 2.0;
    Vec8 doubled = cone.eval(c2).pos;
    for (int k = 0; k < 8; ++k)
      REQUIRE(doubled[k] == doctest::Approx(2.0 * jet.pos[k]).epsilon(1e-12).scale(1.0));
  }
  CHECK_THROWS_AS(make_quadric_cone(0.0, 1.0, 6), BadRange);
  CHECK_THROWS_AS(make_quadric_cone(-0.5, 1.0, 6), BadRange);
  CHECK_THROWS_AS(make_quadric_cone(1.0, 0.5, 6), BadRange);
}

TEST_CASE("flat cone: calibrated and dilation equivariant") {
  ParametricPatch cone = make_flat_cone(0.05, 1.0, 6, 8);
  for (int node = 0; node < cone.node_count(); ++node) {
    Vec4 c = cone.node_coords(node);
    Jet2 jet = cone.eval(c);
    REQUIRE(norm(jet.pos) == doctest::Approx(c[0]).epsilon(1e-12));
    FrameRecord fr = frames_from_jet(jet, orientation_swap(cone.kind));
    REQUIRE(cayley_margin(fr.tangent) == doctest::Approx(1.0).epsilon(1e-9));
    Vec4 c2 = c;
    c2[0] *= 2.0;
    Vec8 doubled = cone.eval(c2).pos;
    for (int k = 0; k < 8; ++k)
      REQUIRE(doubled[k] == doctest::Approx(2.0 * jet.pos[k]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("cone tangent contains the radial direction") {
  ParametricPatch cone = make_quadric_cone(0.2, 2.0, 6, 6);
  for (int node = 0; node < cone.node_count(); node += 37) {
    Vec4 c = cone.node_coords(node);
    Jet2 jet = cone.eval(c);
    FrameRecord fr = tangent_normal_frames(cone, node);
    Vec8 radial = (1.0 / c[0]) * jet.pos;
    Vec8 proj = zero8();
    for (int i = 0; i < 4; ++i) axpy(dot(fr.tangent.frame[i], radial), fr.tangent.frame[i], proj);
    REQUIRE(norm(proj - radial) <= 1e-10);
  }
}

TEST_CASE("smoothing: satisfies its equation and decays to the cone at rate -1") {
  const double eps = 0.1;
  ParametricPatch sm = make_quadric_smoothing(eps, 8.0, 6, 48);
  ParametricPatch cone = make_quadric_cone(0.1, 8.0, 6, 48);
  for (int node = 0; node < sm.node_count(); node += 11) {
    Vec8 p = sm.eval(sm.node_coords(node)).pos;
    double re, im;
    quadric_equation(p, re, im);
    REQUIRE(re == doctest::Approx(eps * eps).epsilon(1e-12));
    REQUIRE(std::fabs(im) <= 1e-12);
  }

  // max_theta |f_eps - iota| at fixed r, then a log-log slope over [1, 8]
  auto max_diff = [&](double r) {
    double worst = 0.0;
    for (int i1 = 0; i1 < 6; ++i1)
      for (int i2 = 0; i2 < 6; ++i2)
        for (int i3 = 0; i3 < 6; ++i3) {
          Vec4 c{r, sm.axes[1].coord(i1), sm.axes[2].coord(i2), sm.axes[3].coord(i3)};
          worst = std::max(worst, norm(sm.eval(c).pos - cone.eval(c).pos));
        }
    return worst;
  };
  CHECK(max_diff(1.0) <= 0.02);

  std::vector<double> xs, ys;
  for (double r = 1.0; r <= 8.0 * (1 + 1e-12); r *= std::pow(8.0, 1.0 / 12.0)) {
    xs.push_back(std::log(r));
    ys.push_back(std::log(max_diff(r)));
  }
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xm += xs[i];
    ym += ys[i];
  }
  xm /= static_cast<double>(xs.size());
  ym /= static_cast<double>(xs.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - xm) * (ys[i] - ym);
    sxx += (xs[i] - xm) * (xs[i] - xm);
  }
  double slope = sxy / sxx;
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.1));

  CHECK_THROWS_AS(make_quadric_smoothing(0.0, 1.0, 6), BadRange);
  CHECK_THROWS_AS(make_quadric_smoothing(-0.1, 1.0, 6), BadRange);
  CHECK_THROWS_AS(make_quadric_smoothing(0.5, 0.9, 6), BadRange);
}

TEST_CASE("smoothing: calibrated at every node") {
  ParametricPatch sm = make_quadric_smoothing(0.1, 2.0, 6, 8);
  for (int node = 0; node < sm.node_count(); ++node) {
    FrameRecord fr = tangent_normal_frames(sm, node);
    REQUIRE(cayley_margin(fr.tangent) == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(fr.gram_det >= 1e-8);
  }
}

TEST_CASE("smoothing tangents approach cone tangents far out") {
  const double eps = 0.1;
  ParametricPatch sm = make_quadric_smoothing(eps, 2.0, 6, 8);
  ParametricPatch cone = make_quadric_cone(0.1, 2.0, 6, 8);
  for (int i2 = 0; i2 < 6; ++i2) {
    Vec4 c{10 * eps, 1.0, sm.axes[2].coord(i2), 2.0};
    FrameRecord a = frames_from_jet(sm.eval(c), orientation_swap(sm.kind));
    FrameRecord b = frames_from_jet(cone.eval(c), orientation_swap(cone.kind));
    CHECK(frame_distance(a.tangent, b.tangent) <= 0.05);
  }
}

TEST_CASE("frames are deterministic") {
  ParametricPatch sm = make_quadric_smoothing(0.2, 3.0, 5, 7);
  for (int node = 0; node < sm.node_count(); node += 101) {
    FrameRecord a = tangent_normal_frames(sm, node);
    FrameRecord b = tangent_normal_frames(sm, node);
    CHECK(std::memcmp(&a.tangent.frame, &b.tangent.frame, sizeof a.tangent.frame) == 0);
    CHECK(std::memcmp(&a.normal, &b.normal, sizeof a.normal) == 0);
    CHECK(a.gram_det == b.gram_det);
  }
  CHECK_THROWS_AS(tangent_normal_frames(sm, -1), BadRange);
  CHECK_THROWS_AS(tangent_normal_frames(sm, sm.node_count()), BadRange);
}

TEST_CASE("analytic jets agree with finite differences") {
  Rng rng(97u);
  ParametricPatch patches[4] = {
      make_flat_torus4(4), make_flat_cone(0.1, 2.0, 6, 8), make_quadric_cone(0.1, 2.0, 6, 8),
      make_quadric_smoothing(0.15, 2.0, 6, 8)};
  for (const auto& patch : patches) {
    for (int trial = 0; trial < 10; ++trial) {
      Vec4 c;
      for (int i = 0; i < 4; ++i) {
        const GridAxis& ax = patch.axes[i];
        double lo = ax.lo, hi = ax.hi;
        if (ax.kind == AxisKind::RadialLog || ax.kind == AxisKind::CellCentered) {
          double margin = 0.1 * (hi - lo);
          lo += margin;
          hi -= margin;
        }
        c[i] = rng.uniform(lo, hi);
      }
      check_jet_consistency(patch, c, 1e-5);
    }
  }
}

TEST_CASE("link grid: round volume, positivity, refinement") {
  LinkGrid round_lg = link_grid(make_flat_cone(0.1, 1.0, 12));
  CHECK(round_lg.total() == doctest::Approx(2 * kPi * kPi).epsilon(0.01));
  for (double w : round_lg.weights) REQUIRE(w > 0.0);

  LinkGrid q12 = link_grid(make_quadric_cone(0.1, 1.0, 12));
  LinkGrid q24 = link_grid(make_quadric_cone(0.1, 1.0, 24));
  for (double w : q12.weights) REQUIRE(w > 0.0);
  CHECK(q12.total() == doctest::Approx(q24.total()).epsilon(0.005));
  // quadratic quotient link: volume converges to 4 pi^2
  CHECK(q24.total() == doctest::Approx(4 * kPi * kPi).epsilon(0.005));

  CHECK_THROWS_AS(link_grid(make_flat_torus4(4)), BadRange);
}

TEST_CASE("node indexing round-trips") {
  ParametricPatch cone = make_quadric_cone(0.1, 1.0, 6, 5);
  for (int idx = 0; idx < cone.node_count(); ++idx) {
    auto mi = cone.node_multi(idx);
    CHECK(cone.node_index(mi) == idx);
    for (int a = 0; a < 4; ++a) {
      REQUIRE(mi[a] >= 0);
      REQUIRE(mi[a] < cone.axes[a].n);
    }
  }
}
