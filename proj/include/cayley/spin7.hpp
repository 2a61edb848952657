#pragma once
#include <array>
#include <map>
#include <string>

#include "cayley/linalg.hpp"
#include "cayley/rng.hpp"

namespace cayley {

// --- octonion algebra -------------------------------------------------
// e0 is the unit; e1..e7 imaginary. The multiplication table is pinned
// so that the real part of the quadruple product reproduces the Cayley
// four-form below; see mul_index/mul_sign in spin7.cpp.
Vec8 octonion_mul(const Vec8& a, const Vec8& b);
Vec8 octonion_conj(const Vec8& a);

// triple cross product t(x,y,z) = (x(conj(y)z) - z(conj(y)x)) / 2
Vec8 triple_cross(const Vec8& x, const Vec8& y, const Vec8& z);

// alternated fourfold cross product
//   X(x,y,z,w) = (conj(w) t(x,y,z) - conj(z) t(x,y,w)
//               + conj(y) t(x,z,w) - conj(x) t(y,z,w)) / 4.
// Re X is the Cayley form, Im X the seven-component quadruple product.
// |X| = 1 on orthonormal frames.
Vec8 quadruple_product(const Vec8& x, const Vec8& y, const Vec8& z, const Vec8& w);

// --- domain types ------------------------------------------------------
struct FourForm {
  // coefficient per strictly increasing 4-subset of {1..8}; 70 entries
  std::array<double, 70> coeffs{};

  double& coeff(int i, int j, int k, int l);
  double coeff(int i, int j, int k, int l) const;
  double eval(const Vec8& a, const Vec8& b, const Vec8& c, const Vec8& d) const;

  static int subset_index(int i, int j, int k, int l);       // 1-based, i<j<k<l
  static std::array<int, 4> subset_at(int index);
};

// the 14-term Cayley four-form on R^8 (coefficients +-1)
const FourForm& cayley_four_form();

// four-form assembled by evaluating Re of the quadruple product on all
// basis 4-subsets; equals cayley_four_form() exactly
FourForm four_form_from_product();

struct OrientedPlane4 {
  Frame48 frame;  // rows: oriented orthonormal 4-frame in R^8

  bool is_orthonormal(double tol = 1e-12) const;
};

struct TauValue {
  Vec7 components{};

  double norm() const;
};

struct EBasis {
  OrientedPlane4 plane;
  std::array<Vec7, 4> basis;          // orthonormal, spans E_pi in Im O
  std::array<double, 7> singular_values{};

  // coefficients of the orthogonal projection onto span(basis)
  Vec4 project(const Vec7& tau) const;
};

struct AngleReport {
  std::array<double, 4> angles{};  // characteristic angles, ascending
  double sum = 0.0;
  bool passes = false;             // sum <= pi
  int intersection_sign = 0;       // orientation of p1 (+) p2 against R^8
  bool degenerate = false;         // planes share a direction
};

// --- operations ---------------------------------------------------------
double phi0_eval(const Vec8& a, const Vec8& b, const Vec8& c, const Vec8& d);
double phi0_eval(const OrientedPlane4& p);
TauValue tau_eval(const Vec8& a, const Vec8& b, const Vec8& c, const Vec8& d);
TauValue tau_eval(const OrientedPlane4& p);

// Phi_0 on the oriented frame; the plane is alpha-Cayley iff margin >= alpha
double cayley_margin(const OrientedPlane4& p);

// deterministic orthonormal completion of the frame: project the standard
// basis vectors in index order, keep the four with the largest residuals,
// flip the last one if needed so (frame, normals) is positively oriented
Frame48 complete_frame(const OrientedPlane4& p);

// E_pi = image of the tau-Jacobian under normal perturbations of the frame.
// Rank must split 4-above-1e-6 / 3-below-1e-8, else RankDeficient.
// The basis is canonical: Gram-Schmidt over the projected Jacobian columns
// in slot order, so on the flat plane the slot-1 columns come out as the
// basis itself.
EBasis e_basis(const OrientedPlane4& p);

// Same construction with the split relaxed to sv[3] > 1 and sv[4] < sv[3]/2,
// the smooth continuation of E_pi off the exactly-calibrated locus.  Valid
// wherever cayley_margin >= 0.9; planes further out fail RankDeficient.
EBasis e_basis_near(const OrientedPlane4& p);

AngleReport angle_criterion(const OrientedPlane4& p1, const OrientedPlane4& p2);

// --- sampling helpers (tests, diagnostics) -------------------------------
OrientedPlane4 random_orthonormal_plane(Rng& rng);

// random rotation preserving the Cayley four-form (element of its
// stabilizer group), built from the kernel of the induced action of
// so(8) on four-forms
std::array<Vec8, 8> stabilizer_rotation(Rng& rng, double scale);

Vec8 apply_rotation(const std::array<Vec8, 8>& rot, const Vec8& v);
OrientedPlane4 rotate_plane(const std::array<Vec8, 8>& rot, const OrientedPlane4& p);

// --- serialization -------------------------------------------------------
std::string plane_to_json(const OrientedPlane4& p);
OrientedPlane4 plane_from_json(const std::string& text);
std::string four_form_to_json(const FourForm& f);
FourForm four_form_from_json(const std::string& text);

}  // namespace cayley
