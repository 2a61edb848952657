#pragma once
#include <vector>

#include "cayley/geometry.hpp"
#include "cayley/linalg.hpp"

namespace cayley {

// n = 4 throughout; delta is the single weight of the end under consideration
struct WeightedNormSpec {
  double p = 2.0;
  int k = 0;
  double delta = 0.0;
};

// (sum_{i<=k} int |grad^i s . rho^{-delta+i}|^p rho^{-4} dmu)^{1/p}
// Derivatives are order-2 finite differences in grid coordinates, assembled
// into covariant tensors with the analytic metric and Christoffel symbols.
// Normal-bundle sections are differentiated component-wise in the supplied
// frame (the frame is treated as parallel).
double weighted_sobolev_norm(const std::vector<double>& field, const GridView& grid,
                             const WeightedNormSpec& spec, const std::vector<double>& rho);
double weighted_sobolev_norm(const std::vector<Vec4>& field, const GridView& grid,
                             const WeightedNormSpec& spec, const std::vector<double>& rho);
double weighted_sobolev_norm(const std::vector<double>& field, const ParametricPatch& patch,
                             const WeightedNormSpec& spec, const std::vector<double>& rho);
double weighted_sobolev_norm(const std::vector<Vec4>& field, const ParametricPatch& patch,
                             const WeightedNormSpec& spec, const std::vector<double>& rho);

// per-node sum_{i<=k} (|grad^i s| rho^{-delta+i})^p, before quadrature;
// diagnostic for weight-cancellation checks
std::vector<double> sobolev_weighted_magnitudes(const std::vector<double>& field,
                                                const GridView& grid,
                                                const WeightedNormSpec& spec,
                                                const std::vector<double>& rho);

// max over nodes of sum_{i<=k} |grad^i s| rho^{-delta+i}
double weighted_holder_norm(const std::vector<double>& field, const GridView& grid,
                            const WeightedNormSpec& spec, const std::vector<double>& rho);
double weighted_holder_norm(const std::vector<Vec4>& field, const GridView& grid,
                            const WeightedNormSpec& spec, const std::vector<double>& rho);
double weighted_holder_norm(const std::vector<double>& field, const ParametricPatch& patch,
                            const WeightedNormSpec& spec, const std::vector<double>& rho);
double weighted_holder_norm(const std::vector<Vec4>& field, const ParametricPatch& patch,
                            const WeightedNormSpec& spec, const std::vector<double>& rho);

// int <u, v> dmu
double duality_pairing(const std::vector<double>& u, const std::vector<double>& v,
                       const GridView& grid);
double duality_pairing(const std::vector<Vec4>& u, const std::vector<Vec4>& v,
                       const GridView& grid);
double duality_pairing(const std::vector<double>& u, const std::vector<double>& v,
                       const ParametricPatch& patch);
double duality_pairing(const std::vector<Vec4>& u, const std::vector<Vec4>& v,
                       const ParametricPatch& patch);

enum class EndKind { AC, CS };

// continuous embedding L^p_{k,delta} -> L^pt_{kt,deltat} on an end of the
// given kind: (i) k - kt >= 4(1/p - 1/pt), and (ii) p <= pt with deltat >= delta
// (AC) / deltat <= delta (CS), or (ii') pt < p with deltat > delta (AC) /
// deltat < delta (CS)
bool embedding_allowed(int k, int kt, double p, double pt, double delta, double deltat,
                       EndKind kind);

// partial derivative of a scalar grid function along one axis; order-2
// stencils, one-sided at non-periodic boundaries
std::vector<double> grid_partial(const std::vector<double>& field,
                                 const std::array<GridAxis, 4>& axes, int axis);

// the 3-point stencil grid_partial applies at index i of an axis: node
// indices along the axis and their coefficients
struct AxisStencil {
  std::array<int, 3> nodes;
  std::array<double, 3> coeff;
};
std::vector<AxisStencil> axis_stencils(const GridAxis& ax);

}  // namespace cayley
