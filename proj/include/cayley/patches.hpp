#pragma once
#include <array>
#include <memory>
#include <vector>

#include "cayley/linalg.hpp"
#include "cayley/spin7.hpp"

namespace cayley {

// second-order jet of an immersion at a parameter point
struct Jet2 {
  Vec8 pos;
  std::array<Vec8, 4> d1;
  std::array<std::array<Vec8, 4>, 4> d2;  // symmetric
};

enum class AxisKind {
  RadialLog,     // log-spaced nodes including both endpoints, trapezoid weights
  CellCentered,  // midpoint nodes, open interval; safe across coordinate poles
  Periodic,      // uniform nodes, left endpoint included
  Explicit       // stored node list (glued radial grids with forced seam nodes)
};

struct GridAxis {
  AxisKind kind = AxisKind::Periodic;
  double lo = 0.0;
  double hi = 1.0;
  int n = 0;
  std::shared_ptr<const std::vector<double>> nodes;  // Explicit only

  double coord(int i) const;
  double weight(int i) const;  // quadrature weight in the bare coordinate

  // strictly increasing, >= 4 nodes
  static GridAxis explicit_nodes(std::vector<double> xs);
};

enum class PatchKind { Torus4, FlatCone, QuadricCone, QuadricSmoothing };

// Closed-form immersion of a structured 4-dim grid into R^8. Axis 0 is the
// radial coordinate for cone-like kinds; axes 1..3 parametrize the link.
// Node index varies fastest over the link axes, then radius.
struct ParametricPatch {
  PatchKind kind = PatchKind::Torus4;
  std::array<GridAxis, 4> axes;
  double rate = 0.0;     // decay rate toward the cone (AC lambda / CS mu)
  double epsilon = 0.0;  // smoothing scale; 0 for exact cones
  Vec8 offset = zero8();

  Jet2 eval(const Vec4& coords) const;

  bool radial() const { return kind != PatchKind::Torus4; }
  int node_count() const;
  std::array<int, 4> node_multi(int idx) const;
  int node_index(const std::array<int, 4>& mi) const;
  Vec4 node_coords(const std::array<int, 4>& mi) const;
  Vec4 node_coords(int idx) const;
  double coord_weight(const std::array<int, 4>& mi) const;  // product of axis weights
};

ParametricPatch make_flat_torus4(int n, const Vec8& offset = zero8());

// flat R^4 subset R^8 as the cone over the round S^3 (hyperspherical link angles)
ParametricPatch make_flat_cone(double r_lo, double r_hi, int link_res, int radial_n = 64);

// {x^2+y^2+z^2 = 0, w = 0} via q(r,a,b) = (r/sqrt2)(a + ib), a,b orthonormal
// in R^3; the Stiefel pair is parametrized by z-y-z Euler angles
ParametricPatch make_quadric_cone(double r_lo, double r_hi, int link_res, int radial_n = 64);

// {x^2+y^2+z^2 = eps^2, w = 0}; radial floor fixed at 1.05*eps to stay clear
// of the parametrization's waist degeneracy
ParametricPatch make_quadric_smoothing(double epsilon, double r_hi, int link_res,
                                       int radial_n = 64);

struct FrameRecord {
  OrientedPlane4 tangent;  // orthonormalized coordinate tangents, oriented
  Frame48 normal;          // deterministic oriented completion
  double gram_det;         // Gram determinant of unit coordinate tangents
};

// Gram-Schmidt of the jet tangents in axis order; orient_swap exchanges rows
// 2,3 afterwards (fixes the orientation of kinds whose coordinate order is
// negatively oriented against the complex structure).
FrameRecord frames_from_jet(const Jet2& jet, bool orient_swap);

bool orientation_swap(PatchKind kind);

FrameRecord tangent_normal_frames(const ParametricPatch& patch, int node);

// the exact cone a radial patch converges to (smoothings drop epsilon);
// axes and offset are preserved
ParametricPatch asymptotic_cone(const ParametricPatch& patch);

// link-slice quadrature (radial kinds only): weights carry the metric volume
// of the r = 1 cross-section
struct LinkGrid {
  std::array<GridAxis, 3> axes;
  std::vector<double> weights;

  int count() const { return static_cast<int>(weights.size()); }
  double total() const;
};

LinkGrid link_grid(const ParametricPatch& patch);

}  // namespace cayley
