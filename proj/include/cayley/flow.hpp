#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cayley/gluing.hpp"

namespace cayley {

// per-node coefficient 4-vectors: a NormalField lives in the node's
// orthonormal normal frame, an EField in the node's E basis (the image of
// the tau-Jacobian at the unperturbed plane)
using NormalField = std::vector<Vec4>;
using EField = std::vector<Vec4>;

// frozen per-node data of one structured immersion chart: analytic jets,
// orthonormal tangent/normal frames, E bases, weight function and quadrature
struct ImmersionScene {
  std::array<GridAxis, 4> axes;
  std::vector<Jet2> jets;
  std::vector<FrameRecord> frames;
  std::vector<EBasis> ebases;
  std::vector<double> rho;
  std::vector<double> volume;  // coordinate weight times metric volume
  double min_margin = 1.0;
  bool orient_swap = false;

  int node_count() const { return grid_node_count(axes); }
};

ImmersionScene make_scene(const ParametricPatch& patch);
ImmersionScene make_scene(const GluedImmersion& glued, int end);

// Deformation operator: perturb the immersion by w = sum_a v_a n_a, take
// stencil first differences of w on top of the analytic base tangents,
// orthonormalize, and express tau of the perturbed plane in the base E
// basis. F(0) is the calibration defect of the immersion itself.
// Throws MarginTooLow when the base margin is below 0.9 and
// ImmersionDegenerate when a perturbed tangent frame collapses.
EField nonlinear_F(const ImmersionScene& sc, const NormalField& v);

// directional derivative of F at 0: (F(hv) - F(-hv)) / 2h
EField apply_D(const ImmersionScene& sc, const NormalField& v, double h = 1e-5);

// quadratic remainder Q(v) = F(v) - F(0) - apply_D(v); the identity holds
// bitwise against the same three evaluations
EField quadratic_Q(const ImmersionScene& sc, const NormalField& v, double h = 1e-5);

// sparse matrix in coordinate form; rows and cols are 4 * node count, the
// flat index of component a at node r being 4 r + a
struct SparseOperator {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint32_t> row;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::vector<double> apply(const std::vector<double>& x) const;
};

std::vector<double> flatten(const std::vector<Vec4>& f);
std::vector<Vec4> unflatten(const std::vector<double>& x);

// assembled linearization of F at 0: central probes per column with step
// 1e-5 * rho(node), recomputing only the rows inside the probed node's
// stencil halo; triplets emitted in deterministic column-major order
SparseOperator linearize_D(const ImmersionScene& sc);

// sparse-triplet binary file ("CYS1" header); see FORMATS.md
void write_sparse_operator(const std::string& path, const SparseOperator& op);
SparseOperator read_sparse_operator(const std::string& path);

struct KernelReport {
  int candidate_count = 0;
  double kernel_residual = 0.0;  // max |A b|_2 over the orthonormal candidates
  double transverse_sv = 0.0;    // smallest singular value orthogonal to them

  double gap() const;
};

// Numerical-kernel probe: residuals of the given near-null candidates
// against a deflated inverse-iteration estimate of the smallest singular
// value transverse to their span. A large gap certifies that the numerical
// kernel is exactly the candidate span.
KernelReport kernel_report(const SparseOperator& op,
                           const std::vector<std::vector<double>>& candidates);

// the 4 unit constant fields (translation directions)
KernelReport constant_kernel_report(const SparseOperator& op);

// Orthonormal near-null candidates of the central first-difference stencils
// on a periodic grid: per component, the constant mode and every
// checkerboard mode the stencils annihilate. Axes with an even node count
// contribute a sign-alternating factor; odd axes only the constant one, so
// on an odd grid this degenerates to the 4 constants.
std::vector<std::vector<double>> stencil_null_candidates(const std::array<GridAxis, 4>& axes);

// minimum calibration margin of the perturbed tangent planes
double perturbed_min_margin(const ImmersionScene& sc, const NormalField& v);

// F over every end of a glued immersion, end-major flat field
EField glued_F(const GluedImmersion& glued, const NormalField& v);

enum class GluedScenario { Quadric, ExactCone };

GluedImmersion build_scenario(GluedScenario which, double t, int link_res = 6,
                              int radial_n = 96);
// custom neck exponent (error scans sweep nu); nu_p, nu_pp keep their
// standard ratios 0.85 nu and 0.7 nu
GluedImmersion build_scenario(GluedScenario which, double t, double nu, int link_res,
                              int radial_n);

struct ErrorScanResult {
  std::vector<double> t_values;
  std::vector<double> f_norms;
  double slope = 0.0;      // fitted log-log slope of |F(0)| vs t
  double predicted = 0.0;  // nu * (mu - delta)
  double lambda = 0.0;     // cap decay rate recovered from (nu, mu)
  double delta_cap = 0.0;  // admissible upper bound for delta
};

// builds the scenario per t and measures |F(0)| in the glued L^p_{k,delta-1}
// norm; t_list needs >= 3 geometrically spaced values and delta must lie in
// (1, (mu(lambda-2)+1)/(lambda-mu))
ErrorScanResult initial_error_scan(GluedScenario which, const std::vector<double>& t_list,
                                   double nu, double mu, double delta, double p, int k,
                                   int link_res = 6, int radial_n = 192);
std::string error_scan_csv(const ErrorScanResult& r);

struct IterationParams {
  int max_iter = 20;
  double tol = 1e-10;
  int clamp_layers = 3;  // outer radial layers held at zero displacement
  double p = 2.0;
  int k = 1;
  double delta = 1.25;
  int solver_max_iter = 4000;
  double solver_tol = 1e-9;  // relative normal-equation residual target
  std::string cache_path;  // optional sparse-triplet cache for the matrix
};

struct IterationStep {
  int iter = 0;
  double step_norm = 0.0;   // |v_{i+1} - v_i| in L^p_{k+1,delta}
  double ratio = 0.0;       // step_norm / previous step_norm, 0 on the first
  double f_norm = 0.0;      // |F(v_{i+1})| in L^p_{k,delta-1}
  double min_margin = 0.0;  // margin of the perturbed immersion
};

struct IterationResult {
  NormalField v_final;
  std::vector<IterationStep> history;
  double initial_f_norm = 0.0;
  double final_f_norm = 0.0;
  double initial_margin = 0.0;
  double final_margin = 0.0;
  bool converged = false;
};

// Picard iteration D v_{i+1} = -F(0) - Q(v_i) on the glued immersion,
// solved per step for the increment in the weighted minimum-norm
// least-squares sense with the outer radial layers clamped to zero. Stops
// at tol or max_iter; NoContraction after two consecutive contraction
// ratios above 0.9, SolverFailure if the solve turns non-finite.
IterationResult iterate_to_cayley(const GluedImmersion& glued, const IterationParams& prm);
IterationResult iterate_to_cayley(GluedScenario which, double t, const IterationParams& prm,
                                  int link_res = 6, int radial_n = 96);

// history CSV: iter,step_norm,ratio,F_norm,min_margin
std::string iteration_csv(const IterationResult& r);

// NormalField binary block: u64 node count then 4 f64 per node, little endian
std::vector<unsigned char> normal_field_block(const NormalField& v);
NormalField read_normal_field_block(const std::vector<unsigned char>& bytes);

}  // namespace cayley
