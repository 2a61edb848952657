#include "cayley/patches.hpp"

#include <cmath>
#include <sstream>

#include "cayley/errors.hpp"

namespace cayley {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647693;
constexpr double kInvSqrt2 = 0.70710678118654752440;

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mat3_id() {
  return Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      double aik = a[i][k];
      if (aik == 0.0) continue;
      for (int j = 0; j < 3; ++j) c[i][j] += aik * b[k][j];
    }
  return c;
}

Mat3 rotz(double t) {
  double c = std::cos(t), s = std::sin(t);
  return Mat3{{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

Mat3 roty(double t) {
  double c = std::cos(t), s = std::sin(t);
  return Mat3{{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}

const Mat3 kZ{{{0, -1, 0}, {1, 0, 0}, {0, 0, 0}}};
const Mat3 kY{{{0, 0, 1}, {0, 0, 0}, {-1, 0, 0}}};

Vec3 col(const Mat3& m, int j) { return {m[0][j], m[1][j], m[2][j]}; }

// jets of the Stiefel pair a = R e1, b = R e2 under z-y-z Euler angles
struct LinkJets {
  Vec3 a{}, b{};
  std::array<Vec3, 3> da{}, db{};
  std::array<std::array<Vec3, 3>, 3> dda{}, ddb{};
};

LinkJets quadric_link_jets(double p1, double be, double p2) {
  std::array<Mat3, 3> zp = {mat3_id(), kZ, mat3_mul(kZ, kZ)};
  std::array<Mat3, 3> yp = {mat3_id(), kY, mat3_mul(kY, kY)};
  Mat3 r1 = rotz(p1), r2 = roty(be), r3 = rotz(p2);
  auto deriv = [&](int i, int j, int k) {
    Mat3 m = mat3_mul(zp[static_cast<std::size_t>(i)], r1);
    m = mat3_mul(m, mat3_mul(yp[static_cast<std::size_t>(j)], r2));
    m = mat3_mul(m, mat3_mul(r3, zp[static_cast<std::size_t>(k)]));
    return m;
  };
  LinkJets out;
  Mat3 r = deriv(0, 0, 0);
  out.a = col(r, 0);
  out.b = col(r, 1);
  const int orders[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int i = 0; i < 3; ++i) {
    Mat3 m = deriv(orders[i][0], orders[i][1], orders[i][2]);
    out.da[static_cast<std::size_t>(i)] = col(m, 0);
    out.db[static_cast<std::size_t>(i)] = col(m, 1);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      Mat3 m = deriv(orders[i][0] + orders[j][0], orders[i][1] + orders[j][1],
                     orders[i][2] + orders[j][2]);
      out.dda[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = col(m, 0);
      out.dda[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
          out.dda[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      out.ddb[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = col(m, 1);
      out.ddb[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
          out.ddb[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  return out;
}

// embedding of (a, b) into R^8: complex coordinates are (x1+ix2, x3+ix4, x5-ix6)
Vec8 emb(const Vec3& a, const Vec3& b) {
  return Vec8{a[0], b[0], a[1], b[1], a[2], -b[2], 0, 0};
}

// sin/cos with derivative order, and the constant-1 factor
double dsin(double x, int k) { return std::sin(x + 0.5 * kPi * k); }
double dcos(double x, int k) { return std::cos(x + 0.5 * kPi * k); }
double done(int k) { return k == 0 ? 1.0 : 0.0; }

// hyperspherical S^3 component jets: psi, theta, phi
double theta_jet(int c, double ps, double th, double ph, int i, int j, int k) {
  double p = (c == 0) ? dcos(ps, i) : dsin(ps, i);
  double q = (c == 0) ? done(j) : (c == 1 ? dcos(th, j) : dsin(th, j));
  double s = (c <= 1) ? done(k) : (c == 2 ? dcos(ph, k) : dsin(ph, k));
  return p * q * s;
}

Jet2 eval_torus(const ParametricPatch& patch, const Vec4& c) {
  Jet2 j{};
  j.pos = patch.offset;
  for (int i = 0; i < 4; ++i) {
    j.pos[i] += c[i];
    j.d1[i] = basis8(i);
  }
  return j;
}

Jet2 eval_flat_cone(const ParametricPatch& patch, const Vec4& c) {
  double r = c[0];
  Vec8 th = zero8();
  std::array<Vec8, 3> dth{zero8(), zero8(), zero8()};
  std::array<std::array<Vec8, 3>, 3> ddth{};
  for (auto& row : ddth) row = {zero8(), zero8(), zero8()};
  const int orders[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int comp = 0; comp < 4; ++comp) {
    th[comp] = theta_jet(comp, c[1], c[2], c[3], 0, 0, 0);
    for (int i = 0; i < 3; ++i)
      dth[static_cast<std::size_t>(i)][comp] =
          theta_jet(comp, c[1], c[2], c[3], orders[i][0], orders[i][1], orders[i][2]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        ddth[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][comp] =
            theta_jet(comp, c[1], c[2], c[3], orders[i][0] + orders[j][0],
                      orders[i][1] + orders[j][1], orders[i][2] + orders[j][2]);
  }
  Jet2 out{};
  out.pos = patch.offset + r * th;
  out.d1[0] = th;
  for (int i = 0; i < 3; ++i) out.d1[i + 1] = r * dth[static_cast<std::size_t>(i)];
  for (int i = 0; i < 3; ++i) {
    out.d2[0][i + 1] = dth[static_cast<std::size_t>(i)];
    out.d2[i + 1][0] = out.d2[0][i + 1];
    for (int j = 0; j < 3; ++j)
      out.d2[i + 1][j + 1] = r * ddth[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  out.d2[0][0] = zero8();
  return out;
}

Jet2 eval_quadric(const ParametricPatch& patch, const Vec4& c) {
  double r = c[0];
  double u, v, du, dv, ddu, ddv;
  if (patch.kind == PatchKind::QuadricCone) {
    u = v = r * kInvSqrt2;
    du = dv = kInvSqrt2;
    ddu = ddv = 0.0;
  } else {
    double e2 = patch.epsilon * patch.epsilon;
    u = std::sqrt(0.5 * (r * r + e2));
    v = std::sqrt(0.5 * (r * r - e2));
    du = 0.5 * r / u;
    dv = 0.5 * r / v;
    ddu = 0.25 * e2 / (u * u * u);
    ddv = -0.25 * e2 / (v * v * v);
  }
  LinkJets lj = quadric_link_jets(c[1], c[2], c[3]);
  Vec8 ea = emb(lj.a, {0, 0, 0});
  Vec8 eb = emb({0, 0, 0}, lj.b);
  Jet2 out{};
  out.pos = patch.offset + u * ea + v * eb;
  out.d1[0] = du * ea + dv * eb;
  out.d2[0][0] = ddu * ea + ddv * eb;
  for (int i = 0; i < 3; ++i) {
    Vec8 dea = emb(lj.da[static_cast<std::size_t>(i)], {0, 0, 0});
    Vec8 deb = emb({0, 0, 0}, lj.db[static_cast<std::size_t>(i)]);
    out.d1[i + 1] = u * dea + v * deb;
    out.d2[0][i + 1] = du * dea + dv * deb;
    out.d2[i + 1][0] = out.d2[0][i + 1];
    for (int j = 0; j < 3; ++j)
      out.d2[i + 1][j + 1] =
          u * emb(lj.dda[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], {0, 0, 0}) +
          v * emb({0, 0, 0}, lj.ddb[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  }
  return out;
}

GridAxis radial_axis(double lo, double hi, int n) {
  return GridAxis{AxisKind::RadialLog, lo, hi, n};
}

void require_link_res(int link_res) {
  if (link_res < 4) {
    std::ostringstream os;
    os << "link resolution must be >= 4, got " << link_res;
    throw BadRange(os.str());
  }
}

void require_radial_n(int radial_n) {
  if (radial_n < 4) {
    std::ostringstream os;
    os << "radial resolution must be >= 4, got " << radial_n;
    throw BadRange(os.str());
  }
}

}  // namespace

double GridAxis::coord(int i) const {
  switch (kind) {
    case AxisKind::RadialLog:
      return lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    case AxisKind::CellCentered:
      return lo + (i + 0.5) * (hi - lo) / n;
    case AxisKind::Explicit:
      return (*nodes)[static_cast<std::size_t>(i)];
    case AxisKind::Periodic:
    default:
      return lo + i * (hi - lo) / n;
  }
}

double GridAxis::weight(int i) const {
  switch (kind) {
    case AxisKind::RadialLog:
    case AxisKind::Explicit: {
      double left = (i == 0) ? coord(0) : coord(i - 1);
      double right = (i == n - 1) ? coord(n - 1) : coord(i + 1);
      return 0.5 * (right - left);
    }
    case AxisKind::CellCentered:
    case AxisKind::Periodic:
    default:
      return (hi - lo) / n;
  }
}

GridAxis GridAxis::explicit_nodes(std::vector<double> xs) {
  if (xs.size() < 4) throw BadRange("explicit axis needs >= 4 nodes");
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    if (!(xs[i] < xs[i + 1])) throw BadRange("explicit axis nodes must increase strictly");
  GridAxis ax;
  ax.kind = AxisKind::Explicit;
  ax.lo = xs.front();
  ax.hi = xs.back();
  ax.n = static_cast<int>(xs.size());
  ax.nodes = std::make_shared<const std::vector<double>>(std::move(xs));
  return ax;
}

Jet2 ParametricPatch::eval(const Vec4& coords) const {
  switch (kind) {
    case PatchKind::Torus4:
      return eval_torus(*this, coords);
    case PatchKind::FlatCone:
      return eval_flat_cone(*this, coords);
    case PatchKind::QuadricCone:
    case PatchKind::QuadricSmoothing:
    default:
      return eval_quadric(*this, coords);
  }
}

int ParametricPatch::node_count() const {
  return axes[0].n * axes[1].n * axes[2].n * axes[3].n;
}

std::array<int, 4> ParametricPatch::node_multi(int idx) const {
  std::array<int, 4> mi;
  mi[3] = idx % axes[3].n;
  idx /= axes[3].n;
  mi[2] = idx % axes[2].n;
  idx /= axes[2].n;
  mi[1] = idx % axes[1].n;
  mi[0] = idx / axes[1].n;
  return mi;
}

int ParametricPatch::node_index(const std::array<int, 4>& mi) const {
  return ((mi[0] * axes[1].n + mi[1]) * axes[2].n + mi[2]) * axes[3].n + mi[3];
}

Vec4 ParametricPatch::node_coords(const std::array<int, 4>& mi) const {
  return Vec4{axes[0].coord(mi[0]), axes[1].coord(mi[1]), axes[2].coord(mi[2]),
              axes[3].coord(mi[3])};
}

Vec4 ParametricPatch::node_coords(int idx) const { return node_coords(node_multi(idx)); }

double ParametricPatch::coord_weight(const std::array<int, 4>& mi) const {
  return axes[0].weight(mi[0]) * axes[1].weight(mi[1]) * axes[2].weight(mi[2]) *
         axes[3].weight(mi[3]);
}

ParametricPatch make_flat_torus4(int n, const Vec8& offset) {
  if (n < 4) {
    std::ostringstream os;
    os << "torus grid size must be >= 4, got " << n;
    throw BadRange(os.str());
  }
  ParametricPatch p;
  p.kind = PatchKind::Torus4;
  for (auto& ax : p.axes) ax = GridAxis{AxisKind::Periodic, 0.0, 1.0, n};
  p.offset = offset;
  return p;
}

ParametricPatch make_flat_cone(double r_lo, double r_hi, int link_res, int radial_n) {
  if (!(r_lo > 0.0) || !(r_hi > r_lo)) {
    std::ostringstream os;
    os << "radial range must satisfy 0 < r_lo < r_hi, got [" << r_lo << ", " << r_hi << "]";
    throw BadRange(os.str());
  }
  require_link_res(link_res);
  require_radial_n(radial_n);
  ParametricPatch p;
  p.kind = PatchKind::FlatCone;
  p.axes[0] = radial_axis(r_lo, r_hi, radial_n);
  p.axes[1] = GridAxis{AxisKind::CellCentered, 0.0, kPi, link_res};
  p.axes[2] = GridAxis{AxisKind::CellCentered, 0.0, kPi, link_res};
  p.axes[3] = GridAxis{AxisKind::Periodic, 0.0, kTwoPi, link_res};
  return p;
}

ParametricPatch make_quadric_cone(double r_lo, double r_hi, int link_res, int radial_n) {
  if (!(r_lo > 0.0) || !(r_hi > r_lo)) {
    std::ostringstream os;
    os << "radial range must satisfy 0 < r_lo < r_hi, got [" << r_lo << ", " << r_hi << "]";
    throw BadRange(os.str());
  }
  require_link_res(link_res);
  require_radial_n(radial_n);
  ParametricPatch p;
  p.kind = PatchKind::QuadricCone;
  p.rate = 1.5;
  p.axes[0] = radial_axis(r_lo, r_hi, radial_n);
  p.axes[1] = GridAxis{AxisKind::Periodic, 0.0, kTwoPi, link_res};
  p.axes[2] = GridAxis{AxisKind::CellCentered, 0.0, kPi, link_res};
  p.axes[3] = GridAxis{AxisKind::Periodic, 0.0, kTwoPi, link_res};
  return p;
}

ParametricPatch make_quadric_smoothing(double epsilon, double r_hi, int link_res,
                                       int radial_n) {
  if (!(epsilon > 0.0)) {
    std::ostringstream os;
    os << "smoothing scale must be positive, got " << epsilon;
    throw BadRange(os.str());
  }
  if (!(r_hi > 2.0 * epsilon)) {
    std::ostringstream os;
    os << "outer radius " << r_hi << " must exceed twice the smoothing scale " << epsilon;
    throw BadRange(os.str());
  }
  require_link_res(link_res);
  require_radial_n(radial_n);
  ParametricPatch p = make_quadric_cone(1.05 * epsilon, r_hi, link_res, radial_n);
  p.kind = PatchKind::QuadricSmoothing;
  p.rate = -1.0;
  p.epsilon = epsilon;
  return p;
}

FrameRecord frames_from_jet(const Jet2& jet, bool orient_swap) {
  Frame48 unit;
  for (int i = 0; i < 4; ++i) {
    double len = norm(jet.d1[i]);
    if (!(len > 1e-150)) throw DegenerateImmersion("zero coordinate tangent");
    unit[i] = (1.0 / len) * jet.d1[i];
  }
  Mat4 g;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g[i][j] = dot(unit[i], unit[j]);
  double gram = det4(g);
  if (!(gram >= 1e-8)) {
    std::ostringstream os;
    os << "unit-tangent Gram determinant " << gram << " below 1e-8";
    throw DegenerateImmersion(os.str());
  }
  FrameRecord out;
  Frame48 t = unit;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) axpy(-dot(t[j], t[i]), t[j], t[i]);
    t[i] = (1.0 / norm(t[i])) * t[i];
  }
  if (orient_swap) std::swap(t[2], t[3]);
  out.tangent.frame = t;
  out.normal = complete_frame(out.tangent);
  out.gram_det = gram;
  return out;
}

bool orientation_swap(PatchKind kind) {
  switch (kind) {
    case PatchKind::QuadricCone:
    case PatchKind::QuadricSmoothing:
      return false;  // verified against the margin of the complex tangent
    case PatchKind::Torus4:
    case PatchKind::FlatCone:
    default:
      return false;
  }
}

FrameRecord tangent_normal_frames(const ParametricPatch& patch, int node) {
  if (node < 0 || node >= patch.node_count()) {
    std::ostringstream os;
    os << "node " << node << " outside grid of " << patch.node_count();
    throw BadRange(os.str());
  }
  Jet2 jet = patch.eval(patch.node_coords(node));
  return frames_from_jet(jet, orientation_swap(patch.kind));
}

double LinkGrid::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

ParametricPatch asymptotic_cone(const ParametricPatch& patch) {
  if (!patch.radial()) throw BadRange("asymptotic cone requires a radial patch");
  ParametricPatch cone = patch;
  if (cone.kind == PatchKind::QuadricSmoothing) {
    cone.kind = PatchKind::QuadricCone;
    cone.epsilon = 0.0;
  }
  return cone;
}

LinkGrid link_grid(const ParametricPatch& patch) {
  if (!patch.radial()) throw BadRange("link grid requires a radial patch");
  ParametricPatch cone = asymptotic_cone(patch);
  LinkGrid lg;
  lg.axes = {patch.axes[1], patch.axes[2], patch.axes[3]};
  lg.weights.resize(static_cast<std::size_t>(patch.axes[1].n) * patch.axes[2].n *
                    patch.axes[3].n);
  std::size_t at = 0;
  for (int i1 = 0; i1 < patch.axes[1].n; ++i1)
    for (int i2 = 0; i2 < patch.axes[2].n; ++i2)
      for (int i3 = 0; i3 < patch.axes[3].n; ++i3, ++at) {
        Vec4 c{1.0, patch.axes[1].coord(i1), patch.axes[2].coord(i2),
               patch.axes[3].coord(i3)};
        Jet2 jet = cone.eval(c);
        std::array<std::array<double, 3>, 3> h;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) h[i][j] = dot(jet.d1[i + 1], jet.d1[j + 1]);
        lg.weights[at] = patch.axes[1].weight(i1) * patch.axes[2].weight(i2) *
                         patch.axes[3].weight(i3) * std::sqrt(det3(h));
      }
  return lg;
}

}  // namespace cayley
