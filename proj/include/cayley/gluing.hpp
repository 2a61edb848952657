#pragma once
#include <array>
#include <string>
#include <vector>

#include "cayley/geometry.hpp"
#include "cayley/patches.hpp"
#include "cayley/weights.hpp"

namespace cayley {

// smooth transition profile: 0 on (-inf, 1/4], 1 on [3/4, inf), quintic in
// between, symmetric about 1/2
double cutoff_phi(double s);

// neck exponent (lambda - 1)/(lambda - mu) that balances the approximation
// error contributions of the two pieces
double balanced_nu(double lambda, double mu);

struct GluingData {
  std::vector<double> scales;  // t_i >= 0 per end; 0 keeps the singularity
  double nu = 0.8;
  double nu_p = 0.68;   // alpha = 1 where rho <= t^nu_p
  double nu_pp = 0.56;  // alpha = 0 where rho >= t^nu_pp
  double r0 = 0.5;      // inner joining radius, in units of t_i
  double R0 = 0.9;      // outer edge of the conical chart

  double t() const;  // global scale: max of the per-end scales

  // 0 < r0 t_i < 1/2 t_i^nu < t_i^nu < R0 < 1 for every end with t_i > 0,
  // and 0 < nu_pp < nu_p < nu < 1
  void validate() const;  // throws ScaleViolation
};

enum class PartLabel : unsigned char {
  Upper = 0,     // conical chart at s >= t_i^nu, pure singular model
  Middle = 1,    // interpolation annulus, s in (r0 t_i, t_i^nu)
  Lower = 2,     // rescaled cap piece, s <= r0 t_i
  Leftover = 3,  // s < t^nu on an end kept singular (t_i = 0)
};

// one desingularized (or kept-singular) end; axis 0 is the explicit radial
// grid in the chart coordinate s, axes 1..3 the shared link grid
struct GluedEnd {
  double t = 0.0;
  double s_neck = 0.0;  // t^nu; 0 when t = 0
  ParametricPatch ac;   // unit-scale cap, entered rescaled as t * ac(s/t)
  ParametricPatch cs;   // singular model of the chart
  std::array<GridAxis, 4> axes;

  int node_count() const;
  Jet2 jet_at(const Vec4& coords) const;          // (s, link angles)
  Jet2 jet(const std::array<int, 4>& mi) const;
};

struct GluedImmersion {
  GluingData data;
  std::vector<GluedEnd> ends;
  std::vector<int> end_start;  // first flat node index of each end

  // flat per-node arrays, end-major, node order of the end grids
  std::vector<Vec8> position;
  std::vector<PartLabel> label;
  std::vector<double> rho;
  std::vector<double> volume;        // quadrature weight with metric volume
  std::vector<Vec4> source_coords;   // chart coordinates (s, link)

  int node_count() const { return static_cast<int>(position.size()); }
  int end_of(int node) const;
  Jet2 node_jet(int node) const;
  std::array<int, 4> part_counts() const;  // upper, middle, lower, leftover
};

// Assemble the ends: each scale t_i > 0 interpolates the rescaled cap into
// the singular chart across s in (r0 t_i, t_i^nu); t_i = 0 reproduces the
// singular model bitwise. Radial grids are log-spaced with nodes forced at
// the seam and plateau radii. acs[i] supplies the cap for end i (for
// t_i = 0 only its cone is checked). radial_n controls radial resolution.
GluedImmersion build_glued_immersion(const ParametricPatch& cs,
                                     const std::vector<ParametricPatch>& acs,
                                     const GluingData& data, int radial_n = 96);

// view of one end for the weighted-norm machinery
GridView end_view(const GluedImmersion& glued, int end);

// restriction of a flat field to one end, in grid order
std::vector<double> end_slice(const std::vector<double>& field, const GluedImmersion& glued,
                              int end);
std::vector<Vec4> end_slice(const std::vector<Vec4>& field, const GluedImmersion& glued,
                            int end);

struct MarginScan {
  double min_margin = 1.0;
  int argmin = 0;
};

// minimum calibration margin of the discrete tangent planes over all nodes
MarginScan alpha_cayley_scan(const GluedImmersion& glued);

// partition function of the neck: phi~(log rho / log t_i) per node, with
// plateaus 1 where rho <= t_i^nu_p and 0 where rho >= t_i^nu_pp; identically
// 0 on ends kept singular
std::vector<double> partition_alpha(const GluedImmersion& glued, const GluingData& data);

struct AlphaDecay {
  double sup_rho_grad_alpha = 0.0;
  double normalized = 0.0;  // sup * |log t|, the scale-independent quantity
  int argmax = 0;
};

// finite-difference scan of rho |grad alpha|; requires t < 0.5
AlphaDecay alpha_decay_scan(const GluedImmersion& glued, const GluingData& data);

// norm over the union of ends: p-th power sums of the per-end norms
double weighted_sobolev_norm(const std::vector<double>& field, const GluedImmersion& glued,
                             const WeightedNormSpec& spec);
double weighted_sobolev_norm(const std::vector<Vec4>& field, const GluedImmersion& glued,
                             const WeightedNormSpec& spec);

// int <u, v> rho^(w - 4) dmu with w = delta - eps where rho <= 1/2 t^nu and
// w = delta + eps where rho >= t^nu, cubic in log rho in between
double interpolating_inner_product(const std::vector<double>& u, const std::vector<double>& v,
                                   const GluedImmersion& glued, double delta, double eps);
double interpolating_inner_product(const std::vector<Vec4>& u, const std::vector<Vec4>& v,
                                   const GluedImmersion& glued, double delta, double eps);

// per-seam continuity check: the interpolated chart map against the pure
// branch it should match at the plateau boundary, positions and first
// derivatives
struct SeamRecord {
  int end = 0;
  std::string seam;     // "cap" (s = 0.625 t^nu) or "body" (s = 0.875 t^nu)
  double s = 0.0;
  double jump_pos = 0.0;  // max over link nodes, Euclidean norm
  double jump_d1 = 0.0;   // max radial-derivative jump straddling the seam
};

std::vector<SeamRecord> seam_diagnostics(const GluedImmersion& glued);
std::string seam_csv(const std::vector<SeamRecord>& records);

// header (scales, exponents, part counts) as JSON; node payload as packed
// little-endian doubles (position, rho per node) plus one label byte per node
std::string glued_header_json(const GluedImmersion& glued);
std::vector<unsigned char> glued_node_block(const GluedImmersion& glued);

// complex quadric cone desingularized by its epsilon = 0.2 smoothing
GluedImmersion make_quadric_scenario(double t, int link_res = 6, int radial_n = 96);
// exact cone joined to itself: the interpolation is between identical maps
GluedImmersion make_cone_scenario(double t, int link_res = 6, int radial_n = 96);

}  // namespace cayley
