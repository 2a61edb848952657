#include "cayley/geometry.hpp"

namespace cayley {

int grid_node_count(const std::array<GridAxis, 4>& axes) {
  return axes[0].n * axes[1].n * axes[2].n * axes[3].n;
}

std::array<int, 4> grid_multi(const std::array<GridAxis, 4>& axes, int idx) {
  std::array<int, 4> mi;
  mi[3] = idx % axes[3].n;
  idx /= axes[3].n;
  mi[2] = idx % axes[2].n;
  idx /= axes[2].n;
  mi[1] = idx % axes[1].n;
  mi[0] = idx / axes[1].n;
  return mi;
}

int grid_index(const std::array<GridAxis, 4>& axes, const std::array<int, 4>& mi) {
  return ((mi[0] * axes[1].n + mi[1]) * axes[2].n + mi[2]) * axes[3].n + mi[3];
}

double grid_coord_weight(const std::array<GridAxis, 4>& axes, const std::array<int, 4>& mi) {
  return axes[0].weight(mi[0]) * axes[1].weight(mi[1]) * axes[2].weight(mi[2]) *
         axes[3].weight(mi[3]);
}

GridView grid_view(const ParametricPatch& patch) {
  GridView v;
  v.axes = patch.axes;
  v.jet = [patch](const std::array<int, 4>& mi) { return patch.eval(patch.node_coords(mi)); };
  return v;
}

std::vector<double> radius_function(const ParametricPatch& patch) {
  std::vector<double> rho(static_cast<std::size_t>(patch.node_count()), 1.0);
  if (!patch.radial()) return rho;
  for (int idx = 0; idx < patch.node_count(); ++idx) {
    double r = patch.axes[0].coord(patch.node_multi(idx)[0]);
    rho[static_cast<std::size_t>(idx)] = std::min(1.0, r);
  }
  return rho;
}

}  // namespace cayley
