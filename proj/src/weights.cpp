#include "cayley/weights.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "cayley/errors.hpp"

namespace cayley {

namespace {

struct AxisStencils {
  std::vector<std::array<int, 3>> nb;
  std::vector<std::array<double, 3>> cf;
};

AxisStencils first_derivative_stencils(const GridAxis& ax) {
  AxisStencils st;
  st.nb.resize(static_cast<std::size_t>(ax.n));
  st.cf.resize(static_cast<std::size_t>(ax.n));
  auto rows = axis_stencils(ax);
  for (int i = 0; i < ax.n; ++i) {
    st.nb[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i)].nodes;
    st.cf[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i)].coeff;
  }
  return st;
}

struct NodeMetric {
  Eigen::Matrix4d g;
  Eigen::Matrix4d ginv;
  double sqrt_det;
  double gamma[4][4][4];  // Gamma^e_ab
};

NodeMetric node_metric(const Jet2& jet) {
  NodeMetric m;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) m.g(a, b) = dot(jet.d1[a], jet.d1[b]);
  double det = m.g.determinant();
  if (!(det > 1e-300)) throw DegenerateImmersion("metric determinant not positive");
  m.ginv = m.g.inverse();
  m.sqrt_det = std::sqrt(det);
  double gam_low[4][4][4];  // <d2_ab, d1_d>
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int d = 0; d < 4; ++d) gam_low[a][b][d] = dot(jet.d2[a][b], jet.d1[d]);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int e = 0; e < 4; ++e) {
        double s = 0.0;
        for (int d = 0; d < 4; ++d) s += m.ginv(e, d) * gam_low[a][b][d];
        m.gamma[a][b][e] = s;
      }
  return m;
}

void validate_spec(const WeightedNormSpec& spec) {
  if (!(spec.p > 1.0)) {
    std::ostringstream os;
    os << "norm exponent p must exceed 1, got " << spec.p;
    throw BadRange(os.str());
  }
  if (spec.k < 0) throw BadRange("derivative count k must be >= 0");
  if (spec.k > 2) {
    std::ostringstream os;
    os << "derivatives of order " << spec.k << " exceed the order-2 stencil";
    throw MissingDerivatives(os.str());
  }
}

void validate_sizes(std::size_t field, const GridView& grid, const std::vector<double>& rho) {
  std::size_t n = static_cast<std::size_t>(grid.node_count());
  if (field != n || rho.size() != n) {
    std::ostringstream os;
    os << "field (" << field << ") and rho (" << rho.size() << ") must match grid (" << n
       << ")";
    throw GridMismatch(os.str());
  }
  for (double r : rho)
    if (!(r > 0.0) || r > 1.0) throw BadRange("radius function must lie in (0, 1]");
}

struct DerivativeStack {
  int comps = 1;
  int k = 0;
  std::vector<std::vector<double>> f;            // [c] -> values
  std::vector<std::array<std::vector<double>, 4>> d1;  // [c][a]
  std::vector<std::array<std::array<std::vector<double>, 4>, 4>> d2;  // [c][a][b]
};

std::vector<double> component(const std::vector<double>& field, int) { return field; }
std::vector<double> component(const std::vector<Vec4>& field, int c) {
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = field[i][static_cast<std::size_t>(c)];
  return out;
}
int component_count(const std::vector<double>&) { return 1; }
int component_count(const std::vector<Vec4>&) { return 4; }

template <typename Field>
DerivativeStack build_stack(const Field& field, const std::array<GridAxis, 4>& axes, int k) {
  DerivativeStack st;
  st.comps = component_count(field);
  st.k = k;
  st.f.resize(static_cast<std::size_t>(st.comps));
  st.d1.resize(static_cast<std::size_t>(st.comps));
  st.d2.resize(static_cast<std::size_t>(st.comps));
  for (int c = 0; c < st.comps; ++c) {
    st.f[static_cast<std::size_t>(c)] = component(field, c);
    if (k >= 1)
      for (int a = 0; a < 4; ++a)
        st.d1[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)] =
            grid_partial(st.f[static_cast<std::size_t>(c)], axes, a);
    if (k >= 2)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          st.d2[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)]
               [static_cast<std::size_t>(b)] = grid_partial(
                   st.d1[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)], axes, b);
  }
  return st;
}

// |grad^i s| at a node for i = 0..k
void node_magnitudes(const DerivativeStack& st, const NodeMetric& m, std::size_t node,
                     double out[3]) {
  double m0 = 0.0;
  for (int c = 0; c < st.comps; ++c) {
    double v = st.f[static_cast<std::size_t>(c)][node];
    m0 += v * v;
  }
  out[0] = std::sqrt(m0);
  if (st.k >= 1) {
    double m1 = 0.0;
    for (int c = 0; c < st.comps; ++c)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          m1 += m.ginv(a, b) * st.d1[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)][node] *
                st.d1[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)][node];
    out[1] = std::sqrt(std::max(0.0, m1));
  }
  if (st.k >= 2) {
    double m2 = 0.0;
    for (int c = 0; c < st.comps; ++c) {
      double hess[4][4];
      for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b) {
          double sym =
              0.5 * (st.d2[static_cast<std::size_t>(c)][static_cast<std::size_t>(a)]
                         [static_cast<std::size_t>(b)][node] +
                     st.d2[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)]
                         [static_cast<std::size_t>(a)][node]);
          double corr = 0.0;
          for (int e = 0; e < 4; ++e)
            corr += m.gamma[a][b][e] *
                    st.d1[static_cast<std::size_t>(c)][static_cast<std::size_t>(e)][node];
          hess[a][b] = sym - corr;
          hess[b][a] = hess[a][b];
        }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          for (int a2 = 0; a2 < 4; ++a2)
            for (int b2 = 0; b2 < 4; ++b2)
              m2 += m.ginv(a, a2) * m.ginv(b, b2) * hess[a][b] * hess[a2][b2];
    }
    out[2] = std::sqrt(std::max(0.0, m2));
  }
}

template <typename Field>
double sobolev_impl(const Field& field, const GridView& grid, const WeightedNormSpec& spec,
                    const std::vector<double>& rho, std::vector<double>* magnitudes) {
  validate_spec(spec);
  validate_sizes(field.size(), grid, rho);
  DerivativeStack st = build_stack(field, grid.axes, spec.k);
  int n = grid.node_count();
  if (magnitudes) magnitudes->assign(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (int idx = 0; idx < n; ++idx) {
    auto mi = grid_multi(grid.axes, idx);
    NodeMetric m = node_metric(grid.jet(mi));
    double mag[3] = {0, 0, 0};
    node_magnitudes(st, m, static_cast<std::size_t>(idx), mag);
    double r = rho[static_cast<std::size_t>(idx)];
    double weighted = 0.0;
    for (int i = 0; i <= spec.k; ++i)
      weighted += std::pow(mag[i] * std::pow(r, -spec.delta + i), spec.p);
    if (magnitudes) (*magnitudes)[static_cast<std::size_t>(idx)] = weighted;
    total += weighted * std::pow(r, -4.0) * grid_coord_weight(grid.axes, mi) * m.sqrt_det;
  }
  return std::pow(total, 1.0 / spec.p);
}

template <typename Field>
double holder_impl(const Field& field, const GridView& grid, const WeightedNormSpec& spec,
                   const std::vector<double>& rho) {
  validate_spec(spec);
  validate_sizes(field.size(), grid, rho);
  DerivativeStack st = build_stack(field, grid.axes, spec.k);
  int n = grid.node_count();
  double worst = 0.0;
  for (int idx = 0; idx < n; ++idx) {
    auto mi = grid_multi(grid.axes, idx);
    NodeMetric m = node_metric(grid.jet(mi));
    double mag[3] = {0, 0, 0};
    node_magnitudes(st, m, static_cast<std::size_t>(idx), mag);
    double r = rho[static_cast<std::size_t>(idx)];
    double s = 0.0;
    for (int i = 0; i <= spec.k; ++i) s += mag[i] * std::pow(r, -spec.delta + i);
    worst = std::max(worst, s);
  }
  return worst;
}

template <typename Field>
double pairing_impl(const Field& u, const Field& v, const GridView& grid) {
  std::size_t n = static_cast<std::size_t>(grid.node_count());
  if (u.size() != n || v.size() != n) {
    std::ostringstream os;
    os << "fields (" << u.size() << ", " << v.size() << ") must match grid (" << n << ")";
    throw GridMismatch(os.str());
  }
  double total = 0.0;
  for (int idx = 0; idx < static_cast<int>(n); ++idx) {
    auto mi = grid_multi(grid.axes, idx);
    NodeMetric m = node_metric(grid.jet(mi));
    double inner;
    if constexpr (std::is_same_v<typename Field::value_type, double>) {
      inner = u[static_cast<std::size_t>(idx)] * v[static_cast<std::size_t>(idx)];
    } else {
      inner = dot(u[static_cast<std::size_t>(idx)], v[static_cast<std::size_t>(idx)]);
    }
    total += inner * grid_coord_weight(grid.axes, mi) * m.sqrt_det;
  }
  return total;
}

}  // namespace

// order-2 first-derivative stencils on a possibly non-uniform axis: periodic
// axes wrap with coordinates shifted by the period, non-periodic axes fall
// back to one-sided 3-point rows at the ends
std::vector<AxisStencil> axis_stencils(const GridAxis& ax) {
  if (ax.n < 3) throw MissingDerivatives("axis too short for order-2 stencils");
  std::vector<AxisStencil> rows(static_cast<std::size_t>(ax.n));
  bool periodic = ax.kind == AxisKind::Periodic;
  double period = ax.hi - ax.lo;
  for (int i = 0; i < ax.n; ++i) {
    int il, ic, ir;
    bool left_edge = !periodic && i == 0;
    bool right_edge = !periodic && i == ax.n - 1;
    if (left_edge) {
      il = 0;
      ic = 1;
      ir = 2;
    } else if (right_edge) {
      il = ax.n - 3;
      ic = ax.n - 2;
      ir = ax.n - 1;
    } else {
      il = (i - 1 + ax.n) % ax.n;
      ic = i;
      ir = (i + 1) % ax.n;
    }
    double xl = ax.coord(il);
    double xc = ax.coord(ic);
    double xr = ax.coord(ir);
    if (periodic && i == 0) xl -= period;
    if (periodic && i == ax.n - 1) xr += period;
    double x0 = ax.coord(i);
    // derivative at x0 of the Lagrange basis polynomial anchored at xa
    auto lagrange_d = [&](double xa, double xb, double xcc) {
      return ((x0 - xb) + (x0 - xcc)) / ((xa - xb) * (xa - xcc));
    };
    rows[static_cast<std::size_t>(i)].nodes = {il, ic, ir};
    rows[static_cast<std::size_t>(i)].coeff = {lagrange_d(xl, xc, xr), lagrange_d(xc, xl, xr),
                                               lagrange_d(xr, xl, xc)};
  }
  return rows;
}

std::vector<double> grid_partial(const std::vector<double>& field,
                                 const std::array<GridAxis, 4>& axes, int axis) {
  int n = grid_node_count(axes);
  if (field.size() != static_cast<std::size_t>(n))
    throw GridMismatch("field size does not match grid");
  if (axes[axis].n < 3) throw MissingDerivatives("axis too short for order-2 stencils");
  AxisStencils st = first_derivative_stencils(axes[axis]);
  std::vector<double> out(static_cast<std::size_t>(n));
  // stride of one step along `axis` in the flat node index
  int stride = 1;
  for (int a = 3; a > axis; --a) stride *= axes[a].n;
  for (int idx = 0; idx < n; ++idx) {
    int ia = grid_multi(axes, idx)[axis];
    int base = idx - ia * stride;
    const auto& nb = st.nb[static_cast<std::size_t>(ia)];
    const auto& cf = st.cf[static_cast<std::size_t>(ia)];
    out[static_cast<std::size_t>(idx)] =
        cf[0] * field[static_cast<std::size_t>(base + nb[0] * stride)] +
        cf[1] * field[static_cast<std::size_t>(base + nb[1] * stride)] +
        cf[2] * field[static_cast<std::size_t>(base + nb[2] * stride)];
  }
  return out;
}

double weighted_sobolev_norm(const std::vector<double>& field, const GridView& grid,
                             const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return sobolev_impl(field, grid, spec, rho, nullptr);
}
double weighted_sobolev_norm(const std::vector<Vec4>& field, const GridView& grid,
                             const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return sobolev_impl(field, grid, spec, rho, nullptr);
}
double weighted_sobolev_norm(const std::vector<double>& field, const ParametricPatch& patch,
                             const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return sobolev_impl(field, grid_view(patch), spec, rho, nullptr);
}
double weighted_sobolev_norm(const std::vector<Vec4>& field, const ParametricPatch& patch,
                             const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return sobolev_impl(field, grid_view(patch), spec, rho, nullptr);
}

std::vector<double> sobolev_weighted_magnitudes(const std::vector<double>& field,
                                                const GridView& grid,
                                                const WeightedNormSpec& spec,
                                                const std::vector<double>& rho) {
  std::vector<double> mags;
  sobolev_impl(field, grid, spec, rho, &mags);
  return mags;
}

double weighted_holder_norm(const std::vector<double>& field, const GridView& grid,
                            const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return holder_impl(field, grid, spec, rho);
}
double weighted_holder_norm(const std::vector<Vec4>& field, const GridView& grid,
                            const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return holder_impl(field, grid, spec, rho);
}
double weighted_holder_norm(const std::vector<double>& field, const ParametricPatch& patch,
                            const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return holder_impl(field, grid_view(patch), spec, rho);
}
double weighted_holder_norm(const std::vector<Vec4>& field, const ParametricPatch& patch,
                            const WeightedNormSpec& spec, const std::vector<double>& rho) {
  return holder_impl(field, grid_view(patch), spec, rho);
}

double duality_pairing(const std::vector<double>& u, const std::vector<double>& v,
                       const GridView& grid) {
  return pairing_impl(u, v, grid);
}
double duality_pairing(const std::vector<Vec4>& u, const std::vector<Vec4>& v,
                       const GridView& grid) {
  return pairing_impl(u, v, grid);
}
double duality_pairing(const std::vector<double>& u, const std::vector<double>& v,
                       const ParametricPatch& patch) {
  return pairing_impl(u, v, grid_view(patch));
}
double duality_pairing(const std::vector<Vec4>& u, const std::vector<Vec4>& v,
                       const ParametricPatch& patch) {
  return pairing_impl(u, v, grid_view(patch));
}

bool embedding_allowed(int k, int kt, double p, double pt, double delta, double deltat,
                       EndKind kind) {
  if (!(p > 1.0) || !(pt > 1.0)) throw BadRange("integrability exponents must exceed 1");
  bool cond_i = (k - kt) >= 4.0 * (1.0 / p - 1.0 / pt) - 1e-12;
  bool weights_ok_wide = (kind == EndKind::AC) ? (deltat >= delta) : (deltat <= delta);
  bool weights_ok_strict = (kind == EndKind::AC) ? (deltat > delta) : (deltat < delta);
  bool cond_ii = (p <= pt) && weights_ok_wide;
  bool cond_ii_strict = (pt < p) && weights_ok_strict;
  return cond_i && (cond_ii || cond_ii_strict);
}

}  // namespace cayley
