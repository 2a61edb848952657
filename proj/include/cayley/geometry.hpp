#pragma once
#include <array>
#include <functional>
#include <vector>

#include "cayley/patches.hpp"

namespace cayley {

int grid_node_count(const std::array<GridAxis, 4>& axes);
std::array<int, 4> grid_multi(const std::array<GridAxis, 4>& axes, int idx);
int grid_index(const std::array<GridAxis, 4>& axes, const std::array<int, 4>& mi);
double grid_coord_weight(const std::array<GridAxis, 4>& axes, const std::array<int, 4>& mi);

// uniform view of a structured immersion grid: analytic jets per node plus
// the axis layout needed for finite differences and quadrature
struct GridView {
  std::array<GridAxis, 4> axes;
  std::function<Jet2(const std::array<int, 4>&)> jet;

  int node_count() const { return grid_node_count(axes); }
};

GridView grid_view(const ParametricPatch& patch);

// rho = min(1, r) on radial patches, 1 on the torus
std::vector<double> radius_function(const ParametricPatch& patch);

}  // namespace cayley
