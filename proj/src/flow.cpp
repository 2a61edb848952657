#include "cayley/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>

#include "cayley/errors.hpp"
#include "cayley/io.hpp"
#include "cayley/rng.hpp"

namespace cayley {

namespace {

const Vec8 kZero8 = zero8();

double metric_volume(const Jet2& jet) {
  Mat4 g;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g[a][b] = dot(jet.d1[a], jet.d1[b]);
  double det = det4(g);
  if (!(det > 0.0)) throw DegenerateImmersion("metric determinant not positive");
  return std::sqrt(det);
}

struct StencilPack {
  std::array<std::vector<AxisStencil>, 4> ax;
  std::array<int, 4> stride;
};

StencilPack make_stencils(const std::array<GridAxis, 4>& axes) {
  StencilPack p;
  for (int a = 0; a < 4; ++a) p.ax[a] = axis_stencils(axes[a]);
  p.stride[3] = 1;
  p.stride[2] = axes[3].n;
  p.stride[1] = axes[2].n * axes[3].n;
  p.stride[0] = axes[1].n * p.stride[1];
  return p;
}

// tangent plane of the perturbed map at node r: analytic base tangents plus
// stencil first differences of the ambient perturbation, orthonormalized
// with the same convention as the base frames
template <class WGet>
OrientedPlane4 perturbed_plane_at(const ImmersionScene& sc, const StencilPack& st, int r,
                                  const std::array<int, 4>& mi, WGet&& w) {
  Frame48 t;
  for (int i = 0; i < 4; ++i) {
    t[i] = sc.jets[static_cast<std::size_t>(r)].d1[i];
    const AxisStencil& row = st.ax[i][static_cast<std::size_t>(mi[i])];
    for (int k = 0; k < 3; ++k)
      axpy(row.coeff[k], w(r + (row.nodes[k] - mi[i]) * st.stride[i]), t[i]);
  }
  for (int i = 0; i < 4; ++i) {
    double len = norm(t[i]);
    if (!(len > 1e-150)) throw ImmersionDegenerate("perturbed tangent vanished");
    t[i] = (1.0 / len) * t[i];
  }
  Mat4 g;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g[i][j] = dot(t[i], t[j]);
  double gram = det4(g);
  if (!(gram >= 1e-8)) {
    std::ostringstream os;
    os << "perturbed unit-tangent Gram determinant " << gram << " below 1e-8";
    throw ImmersionDegenerate(os.str());
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) axpy(-dot(t[j], t[i]), t[j], t[i]);
    t[i] = (1.0 / norm(t[i])) * t[i];
  }
  if (sc.orient_swap) std::swap(t[2], t[3]);
  return OrientedPlane4{t};
}

template <class WGet>
Vec4 f_value_at(const ImmersionScene& sc, const StencilPack& st, int r,
                const std::array<int, 4>& mi, WGet&& w) {
  OrientedPlane4 pl = perturbed_plane_at(sc, st, r, mi, w);
  return sc.ebases[static_cast<std::size_t>(r)].project(tau_eval(pl).components);
}

void require_margin(const ImmersionScene& sc) {
  if (!(sc.min_margin >= 0.9)) {
    std::ostringstream os;
    os << "base margin " << sc.min_margin << " below the 0.9 working bound";
    throw MarginTooLow(os.str());
  }
}

std::vector<Vec8> ambient_perturbation(const ImmersionScene& sc, const NormalField& v) {
  std::size_t n = static_cast<std::size_t>(sc.node_count());
  if (v.size() != n) throw GridMismatch("normal field size does not match the chart");
  std::vector<Vec8> w(n, zero8());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < 4; ++a) {
      if (!std::isfinite(v[r][a])) throw BadRange("normal field entries must be finite");
      axpy(v[r][a], sc.frames[r].normal[a], w[r]);
    }
  return w;
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double vl2(const std::vector<double>& a) { return std::sqrt(vdot(a, a)); }

}  // namespace

ImmersionScene make_scene(const ParametricPatch& patch) {
  ImmersionScene sc;
  sc.axes = patch.axes;
  sc.orient_swap = orientation_swap(patch.kind);
  sc.rho = radius_function(patch);
  int n = patch.node_count();
  sc.jets.reserve(static_cast<std::size_t>(n));
  sc.frames.reserve(static_cast<std::size_t>(n));
  sc.ebases.reserve(static_cast<std::size_t>(n));
  sc.volume.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Jet2 jet = patch.eval(patch.node_coords(i));
    FrameRecord fr = frames_from_jet(jet, sc.orient_swap);
    sc.min_margin = std::min(sc.min_margin, cayley_margin(fr.tangent));
    sc.ebases.push_back(e_basis_near(fr.tangent));
    sc.volume.push_back(grid_coord_weight(sc.axes, patch.node_multi(i)) * metric_volume(jet));
    sc.jets.push_back(jet);
    sc.frames.push_back(fr);
  }
  return sc;
}

ImmersionScene make_scene(const GluedImmersion& glued, int end) {
  if (end < 0 || end >= static_cast<int>(glued.ends.size()))
    throw BadRange("end index out of range");
  const GluedEnd& e = glued.ends[static_cast<std::size_t>(end)];
  ImmersionScene sc;
  sc.axes = e.axes;
  sc.orient_swap = orientation_swap(e.cs.kind);
  sc.rho = end_slice(glued.rho, glued, end);
  sc.volume = end_slice(glued.volume, glued, end);
  int n = e.node_count();
  int base = glued.end_start[static_cast<std::size_t>(end)];
  sc.jets.reserve(static_cast<std::size_t>(n));
  sc.frames.reserve(static_cast<std::size_t>(n));
  sc.ebases.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Jet2 jet = glued.node_jet(base + i);
    FrameRecord fr = frames_from_jet(jet, sc.orient_swap);
    sc.min_margin = std::min(sc.min_margin, cayley_margin(fr.tangent));
    sc.ebases.push_back(e_basis_near(fr.tangent));
    sc.jets.push_back(jet);
    sc.frames.push_back(fr);
  }
  return sc;
}

EField nonlinear_F(const ImmersionScene& sc, const NormalField& v) {
  require_margin(sc);
  std::vector<Vec8> w = ambient_perturbation(sc, v);
  StencilPack st = make_stencils(sc.axes);
  int n = sc.node_count();
  EField out(static_cast<std::size_t>(n));
  auto wat = [&w](int i) -> const Vec8& { return w[static_cast<std::size_t>(i)]; };
  for (int r = 0; r < n; ++r)
    out[static_cast<std::size_t>(r)] = f_value_at(sc, st, r, grid_multi(sc.axes, r), wat);
  return out;
}

EField apply_D(const ImmersionScene& sc, const NormalField& v, double h) {
  if (!(h > 0.0)) throw BadRange("difference step must be positive");
  std::size_t n = static_cast<std::size_t>(sc.node_count());
  if (v.size() != n) throw GridMismatch("normal field size does not match the chart");
  NormalField vp(n), vm(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < 4; ++a) {
      vp[r][a] = h * v[r][a];
      vm[r][a] = -h * v[r][a];
    }
  EField fp = nonlinear_F(sc, vp);
  EField fm = nonlinear_F(sc, vm);
  EField out(n);
  double inv = 0.5 / h;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < 4; ++a) out[r][a] = inv * (fp[r][a] - fm[r][a]);
  return out;
}

EField quadratic_Q(const ImmersionScene& sc, const NormalField& v, double h) {
  std::size_t n = static_cast<std::size_t>(sc.node_count());
  EField f = nonlinear_F(sc, v);
  EField f0 = nonlinear_F(sc, NormalField(n, Vec4{0, 0, 0, 0}));
  EField dv = apply_D(sc, v, h);
  EField out(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < 4; ++a) out[r][a] = (f[r][a] - f0[r][a]) - dv[r][a];
  return out;
}

std::vector<double> flatten(const std::vector<Vec4>& f) {
  std::vector<double> x;
  x.reserve(4 * f.size());
  for (const Vec4& v : f)
    for (int a = 0; a < 4; ++a) x.push_back(v[static_cast<std::size_t>(a)]);
  return x;
}

std::vector<Vec4> unflatten(const std::vector<double>& x) {
  if (x.size() % 4 != 0) throw GridMismatch("flat field length must be a multiple of 4");
  std::vector<Vec4> f(x.size() / 4);
  for (std::size_t r = 0; r < f.size(); ++r)
    for (std::size_t a = 0; a < 4; ++a) f[r][a] = x[4 * r + a];
  return f;
}

std::vector<double> SparseOperator::apply(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != cols)
    throw GridMismatch("vector length does not match the operator");
  std::vector<double> y(static_cast<std::size_t>(rows), 0.0);
  for (std::size_t k = 0; k < val.size(); ++k) y[row[k]] += val[k] * x[col[k]];
  return y;
}

SparseOperator linearize_D(const ImmersionScene& sc) {
  require_margin(sc);
  int n = sc.node_count();
  StencilPack st = make_stencils(sc.axes);
  // which stencil rows along each axis touch a given index
  std::array<std::vector<std::vector<int>>, 4> touch;
  for (int a = 0; a < 4; ++a) {
    touch[a].assign(static_cast<std::size_t>(sc.axes[a].n), {});
    for (int i = 0; i < sc.axes[a].n; ++i)
      for (int k = 0; k < 3; ++k)
        touch[a][static_cast<std::size_t>(st.ax[a][static_cast<std::size_t>(i)].nodes[k])]
            .push_back(i);
  }
  SparseOperator op;
  op.rows = op.cols = 4 * n;
  std::vector<int> rows_touched;
  std::vector<std::array<int, 4>> row_multi;
  for (int q = 0; q < n; ++q) {
    std::array<int, 4> mi = grid_multi(sc.axes, q);
    rows_touched.clear();
    for (int a = 0; a < 4; ++a)
      for (int i : touch[a][static_cast<std::size_t>(mi[a])])
        rows_touched.push_back(q + (i - mi[a]) * st.stride[a]);
    std::sort(rows_touched.begin(), rows_touched.end());
    rows_touched.erase(std::unique(rows_touched.begin(), rows_touched.end()),
                       rows_touched.end());
    row_multi.clear();
    for (int r : rows_touched) row_multi.push_back(grid_multi(sc.axes, r));
    double h = 1e-5 * sc.rho[static_cast<std::size_t>(q)];
    for (int a = 0; a < 4; ++a) {
      Vec8 wp = h * sc.frames[static_cast<std::size_t>(q)].normal[static_cast<std::size_t>(a)];
      Vec8 wm = (-1.0) * wp;
      auto wp_at = [&](int i) -> const Vec8& { return i == q ? wp : kZero8; };
      auto wm_at = [&](int i) -> const Vec8& { return i == q ? wm : kZero8; };
      for (std::size_t j = 0; j < rows_touched.size(); ++j) {
        int r = rows_touched[j];
        Vec4 fp = f_value_at(sc, st, r, row_multi[j], wp_at);
        Vec4 fm = f_value_at(sc, st, r, row_multi[j], wm_at);
        for (int b = 0; b < 4; ++b) {
          double d = (fp[static_cast<std::size_t>(b)] - fm[static_cast<std::size_t>(b)]) /
                     (2.0 * h);
          if (d != 0.0) {
            op.row.push_back(static_cast<std::uint32_t>(4 * r + b));
            op.col.push_back(static_cast<std::uint32_t>(4 * q + a));
            op.val.push_back(d);
          }
        }
      }
    }
  }
  return op;
}

void write_sparse_operator(const std::string& path, const SparseOperator& op) {
  std::vector<unsigned char> bytes;
  bytes.reserve(28 + 16 * op.val.size());
  bytes.push_back('C');
  bytes.push_back('Y');
  bytes.push_back('S');
  bytes.push_back('1');
  put_u64le(bytes, static_cast<std::uint64_t>(op.rows));
  put_u64le(bytes, static_cast<std::uint64_t>(op.cols));
  put_u64le(bytes, static_cast<std::uint64_t>(op.val.size()));
  for (std::size_t k = 0; k < op.val.size(); ++k) {
    put_u32le(bytes, op.row[k]);
    put_u32le(bytes, op.col[k]);
    put_f64le(bytes, op.val[k]);
  }
  write_binary_file(path, bytes);
}

SparseOperator read_sparse_operator(const std::string& path) {
  std::vector<unsigned char> bytes = read_binary_file(path);
  if (bytes.size() < 28 || std::memcmp(bytes.data(), "CYS1", 4) != 0)
    throw IoError("not a sparse operator file: " + path);
  std::uint64_t rows = get_u64le(&bytes[4]);
  std::uint64_t cols = get_u64le(&bytes[12]);
  std::uint64_t nnz = get_u64le(&bytes[20]);
  if (rows > 0x7fffffffull || cols > 0x7fffffffull)
    throw IoError("sparse operator header out of range: " + path);
  if (bytes.size() != 28 + 16 * nnz) throw IoError("truncated sparse operator file: " + path);
  SparseOperator op;
  op.rows = static_cast<int>(rows);
  op.cols = static_cast<int>(cols);
  op.row.reserve(nnz);
  op.col.reserve(nnz);
  op.val.reserve(nnz);
  for (std::uint64_t k = 0; k < nnz; ++k) {
    const unsigned char* p = &bytes[28 + 16 * k];
    std::uint32_t r = get_u32le(p);
    std::uint32_t c = get_u32le(p + 4);
    if (r >= rows || c >= cols) throw IoError("sparse operator entry out of range: " + path);
    op.row.push_back(r);
    op.col.push_back(c);
    op.val.push_back(get_f64le(p + 8));
  }
  return op;
}

double KernelReport::gap() const { return transverse_sv / std::max(kernel_residual, 1e-300); }

KernelReport kernel_report(const SparseOperator& op,
                           const std::vector<std::vector<double>>& candidates) {
  if (op.rows != op.cols || op.rows <= 0)
    throw GridMismatch("kernel probe needs a square operator");
  std::size_t n = static_cast<std::size_t>(op.cols);
  std::vector<std::vector<double>> basis;
  basis.reserve(candidates.size());
  for (std::vector<double> b : candidates) {
    if (b.size() != n) throw GridMismatch("kernel candidate length does not match the operator");
    for (const auto& e : basis) {
      double c = vdot(e, b);
      for (std::size_t j = 0; j < n; ++j) b[j] -= c * e[j];
    }
    double len = vl2(b);
    if (!(len > 1e-12)) throw RankDeficient("kernel candidates are linearly dependent");
    for (std::size_t j = 0; j < n; ++j) b[j] /= len;
    basis.push_back(std::move(b));
  }
  KernelReport rep;
  rep.candidate_count = static_cast<int>(basis.size());
  for (const auto& b : basis)
    rep.kernel_residual = std::max(rep.kernel_residual, vl2(op.apply(b)));
  auto project = [&](std::vector<double>& x) {
    for (const auto& e : basis) {
      double c = vdot(e, x);
      for (std::size_t j = 0; j < n; ++j) x[j] -= c * e[j];
    }
  };
  auto ata = [&](const std::vector<double>& x) {
    std::vector<double> y(static_cast<std::size_t>(op.rows), 0.0), z(n, 0.0);
    for (std::size_t k = 0; k < op.val.size(); ++k) y[op.row[k]] += op.val[k] * x[op.col[k]];
    for (std::size_t k = 0; k < op.val.size(); ++k) z[op.col[k]] += op.val[k] * y[op.row[k]];
    return z;
  };
  // conjugate gradients for the deflated normal operator
  auto solve = [&](const std::vector<double>& rhs) {
    std::vector<double> x(n, 0.0), r = rhs, p, mp;
    project(r);
    p = r;
    double rr = vdot(r, r);
    double stop = 1e-26 * rr;
    for (int it = 0; it < 4000 && rr > stop; ++it) {
      mp = ata(p);
      project(mp);
      double pmp = vdot(p, mp);
      if (!(pmp > 0.0)) break;
      double alpha = rr / pmp;
      for (std::size_t j = 0; j < n; ++j) {
        x[j] += alpha * p[j];
        r[j] -= alpha * mp[j];
      }
      project(r);
      double rr2 = vdot(r, r);
      double beta = rr2 / rr;
      rr = rr2;
      for (std::size_t j = 0; j < n; ++j) p[j] = r[j] + beta * p[j];
    }
    return x;
  };
  // deflated inverse iteration toward the smallest transverse singular value
  Rng rng(20240815u);
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = rng.uniform() - 0.5;
  project(x);
  double len = vl2(x);
  if (!(len > 0.0)) throw RankDeficient("kernel candidates span the whole space");
  for (std::size_t j = 0; j < n; ++j) x[j] /= len;
  double sigma = -1.0;
  for (int it = 0; it < 50; ++it) {
    std::vector<double> y = solve(x);
    project(y);
    double ny = vl2(y);
    if (!(ny > 1e-300)) break;
    for (std::size_t j = 0; j < n; ++j) x[j] = y[j] / ny;
    double s = vl2(op.apply(x));
    if (sigma >= 0.0 && std::abs(s - sigma) <= 1e-10 * std::max(1.0, sigma)) {
      sigma = s;
      break;
    }
    sigma = s;
  }
  rep.transverse_sv = std::max(sigma, 0.0);
  return rep;
}

KernelReport constant_kernel_report(const SparseOperator& op) {
  if (op.rows != op.cols || op.rows <= 0 || op.rows % 4 != 0)
    throw GridMismatch("kernel probe needs a square operator over 4-component nodes");
  std::size_t n = static_cast<std::size_t>(op.rows) / 4;
  double inv = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<std::vector<double>> cs;
  for (int a = 0; a < 4; ++a) {
    std::vector<double> c(static_cast<std::size_t>(op.rows), 0.0);
    for (std::size_t r = 0; r < n; ++r) c[4 * r + static_cast<std::size_t>(a)] = inv;
    cs.push_back(std::move(c));
  }
  return kernel_report(op, cs);
}

std::vector<std::vector<double>> stencil_null_candidates(const std::array<GridAxis, 4>& axes) {
  int n = grid_node_count(axes);
  std::vector<int> evens;
  for (int a = 0; a < 4; ++a)
    if (axes[a].kind == AxisKind::Periodic && axes[a].n % 2 == 0) evens.push_back(a);
  double inv = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<std::vector<double>> out;
  int combos = 1 << evens.size();
  for (int m = 0; m < combos; ++m)
    for (int comp = 0; comp < 4; ++comp) {
      std::vector<double> v(static_cast<std::size_t>(4 * n), 0.0);
      for (int r = 0; r < n; ++r) {
        std::array<int, 4> mi = grid_multi(axes, r);
        int s = 0;
        for (std::size_t e = 0; e < evens.size(); ++e)
          if ((m >> e) & 1) s += mi[static_cast<std::size_t>(evens[e])];
        v[static_cast<std::size_t>(4 * r + comp)] = (s % 2 != 0) ? -inv : inv;
      }
      out.push_back(std::move(v));
    }
  return out;
}

double perturbed_min_margin(const ImmersionScene& sc, const NormalField& v) {
  std::vector<Vec8> w = ambient_perturbation(sc, v);
  StencilPack st = make_stencils(sc.axes);
  int n = sc.node_count();
  auto wat = [&w](int i) -> const Vec8& { return w[static_cast<std::size_t>(i)]; };
  double m = std::numeric_limits<double>::infinity();
  for (int r = 0; r < n; ++r)
    m = std::min(m, cayley_margin(perturbed_plane_at(sc, st, r, grid_multi(sc.axes, r), wat)));
  return m;
}

EField glued_F(const GluedImmersion& glued, const NormalField& v) {
  std::size_t n = static_cast<std::size_t>(glued.node_count());
  if (v.size() != n) throw GridMismatch("field size does not match the glued immersion");
  EField out(n);
  for (int e = 0; e < static_cast<int>(glued.ends.size()); ++e) {
    ImmersionScene sc = make_scene(glued, e);
    EField fe = nonlinear_F(sc, end_slice(v, glued, e));
    std::copy(fe.begin(), fe.end(),
              out.begin() + glued.end_start[static_cast<std::size_t>(e)]);
  }
  return out;
}

GluedImmersion build_scenario(GluedScenario which, double t, int link_res, int radial_n) {
  return which == GluedScenario::Quadric ? make_quadric_scenario(t, link_res, radial_n)
                                         : make_cone_scenario(t, link_res, radial_n);
}

GluedImmersion build_scenario(GluedScenario which, double t, double nu, int link_res,
                              int radial_n) {
  GluingData d;
  d.scales = {t};
  d.nu = nu;
  d.nu_p = 0.85 * nu;
  d.nu_pp = 0.7 * nu;
  ParametricPatch cs = make_quadric_cone(1e-3, d.R0, link_res);
  ParametricPatch ac = which == GluedScenario::Quadric
                           ? make_quadric_smoothing(0.2, 6.0, link_res)
                           : make_quadric_cone(0.21, 6.0, link_res);
  return build_glued_immersion(cs, {ac}, d, radial_n);
}

ErrorScanResult initial_error_scan(GluedScenario which, const std::vector<double>& t_list,
                                   double nu, double mu, double delta, double p, int k,
                                   int link_res, int radial_n) {
  if (t_list.size() < 3) throw BadRange("need at least 3 scales for a scaling fit");
  for (double t : t_list)
    if (!(t > 0.0)) throw BadRange("scales must be positive");
  double q0 = t_list[1] / t_list[0];
  if (std::abs(std::log(q0)) < 1e-6) throw BadRange("scales must be strictly geometric");
  for (std::size_t i = 2; i < t_list.size(); ++i) {
    double qi = t_list[i] / t_list[i - 1];
    if (std::abs(qi / q0 - 1.0) > 1e-2)
      throw BadRange("scales must be geometrically spaced");
  }
  if (!(nu > 0.0 && nu < 1.0)) throw BadRange("nu must lie in (0, 1)");
  if (!(mu > 1.0 && mu < 2.0)) throw BadRange("mu must lie in (1, 2)");
  ErrorScanResult res;
  res.lambda = (nu * mu - 1.0) / (nu - 1.0);
  res.delta_cap = (mu * (res.lambda - 2.0) + 1.0) / (res.lambda - mu);
  if (!(delta > 1.0 && delta < res.delta_cap)) {
    std::ostringstream os;
    os << "delta must lie in (1, " << res.delta_cap << "), got " << delta;
    throw BadRange(os.str());
  }
  res.predicted = nu * (mu - delta);
  WeightedNormSpec spec{p, k, delta - 1.0};
  for (double t : t_list) {
    GluedImmersion g = build_scenario(which, t, nu, link_res, radial_n);
    NormalField zero(static_cast<std::size_t>(g.node_count()), Vec4{0, 0, 0, 0});
    EField f0 = glued_F(g, zero);
    res.t_values.push_back(t);
    res.f_norms.push_back(weighted_sobolev_norm(f0, g, spec));
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double m = static_cast<double>(res.t_values.size());
  for (std::size_t i = 0; i < res.t_values.size(); ++i) {
    double x = std::log(res.t_values[i]);
    double y = std::log(std::max(res.f_norms[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  res.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return res;
}

std::string error_scan_csv(const ErrorScanResult& r) {
  std::string out = "t,f_norm\n";
  for (std::size_t i = 0; i < r.t_values.size(); ++i)
    out += fmt_double(r.t_values[i]) + "," + fmt_double(r.f_norms[i]) + "\n";
  return out;
}

IterationResult iterate_to_cayley(const GluedImmersion& glued, const IterationParams& prm) {
  if (prm.max_iter < 1) throw BadRange("max_iter must be at least 1");
  if (!(prm.tol > 0.0)) throw BadRange("tolerance must be positive");
  if (prm.clamp_layers < 1) throw BadRange("clamp_layers must be at least 1");
  for (const GluedEnd& e : glued.ends)
    if (prm.clamp_layers >= e.axes[0].n)
      throw BadRange("clamp_layers swallows an entire radial axis");
  int n = glued.node_count();
  int n4 = 4 * n;
  int num_ends = static_cast<int>(glued.ends.size());
  std::vector<ImmersionScene> scenes;
  scenes.reserve(static_cast<std::size_t>(num_ends));
  for (int e = 0; e < num_ends; ++e) scenes.push_back(make_scene(glued, e));
  for (const ImmersionScene& sc : scenes) require_margin(sc);

  auto F_all = [&](const NormalField& v) {
    EField out(static_cast<std::size_t>(n));
    for (int e = 0; e < num_ends; ++e) {
      EField fe = nonlinear_F(scenes[static_cast<std::size_t>(e)], end_slice(v, glued, e));
      std::copy(fe.begin(), fe.end(),
                out.begin() + glued.end_start[static_cast<std::size_t>(e)]);
    }
    return out;
  };
  auto margin_all = [&](const NormalField& v) {
    double m = std::numeric_limits<double>::infinity();
    for (int e = 0; e < num_ends; ++e)
      m = std::min(m, perturbed_min_margin(scenes[static_cast<std::size_t>(e)],
                                           end_slice(v, glued, e)));
    return m;
  };

  SparseOperator A;
  bool loaded = false;
  if (!prm.cache_path.empty() && std::filesystem::exists(prm.cache_path)) {
    A = read_sparse_operator(prm.cache_path);
    if (A.rows != n4 || A.cols != n4)
      throw IoError("cached operator does not match the immersion: " + prm.cache_path);
    loaded = true;
  }
  if (!loaded) {
    A.rows = A.cols = n4;
    for (int e = 0; e < num_ends; ++e) {
      SparseOperator part = linearize_D(scenes[static_cast<std::size_t>(e)]);
      std::uint32_t off = static_cast<std::uint32_t>(4 * glued.end_start[static_cast<std::size_t>(e)]);
      for (std::size_t k = 0; k < part.val.size(); ++k) {
        A.row.push_back(part.row[k] + off);
        A.col.push_back(part.col[k] + off);
        A.val.push_back(part.val[k]);
      }
    }
    if (!prm.cache_path.empty()) write_sparse_operator(prm.cache_path, A);
  }

  // clamp the outer radial layers of every end
  std::vector<char> clamped(static_cast<std::size_t>(n), 0);
  for (int e = 0; e < num_ends; ++e) {
    const std::array<GridAxis, 4>& ax = glued.ends[static_cast<std::size_t>(e)].axes;
    int base = glued.end_start[static_cast<std::size_t>(e)];
    int cnt = glued.ends[static_cast<std::size_t>(e)].node_count();
    for (int i = 0; i < cnt; ++i)
      if (grid_multi(ax, i)[0] >= ax[0].n - prm.clamp_layers)
        clamped[static_cast<std::size_t>(base + i)] = 1;
  }

  // diagonal weights mirroring L^2_{delta} -> L^2_{delta-1}
  std::vector<double> wr(static_cast<std::size_t>(n4)), xs(static_cast<std::size_t>(n4));
  for (int r = 0; r < n; ++r) {
    double sv = std::sqrt(glued.volume[static_cast<std::size_t>(r)]);
    double rr = glued.rho[static_cast<std::size_t>(r)];
    double w = sv * std::pow(rr, -prm.delta - 1.0);
    double x = clamped[static_cast<std::size_t>(r)] ? 0.0
                                                    : std::pow(rr, prm.delta + 2.0) / sv;
    for (int b = 0; b < 4; ++b) {
      wr[static_cast<std::size_t>(4 * r + b)] = w;
      xs[static_cast<std::size_t>(4 * r + b)] = x;
    }
  }

  // weighted matrix in compressed row + column form with unit column
  // equilibration on top of the rho-power scaling; clamped columns are zero
  std::vector<std::size_t> bp(static_cast<std::size_t>(n4) + 1, 0);
  std::vector<std::size_t> btp(static_cast<std::size_t>(n4) + 1, 0);
  std::vector<int> bi, bti;
  std::vector<double> bv, btv, cn(static_cast<std::size_t>(n4), 1.0);
  {
    std::vector<double> c2(static_cast<std::size_t>(n4), 0.0);
    std::size_t nnz = 0;
    for (std::size_t k = 0; k < A.val.size(); ++k) {
      double s = A.val[k] * wr[A.row[k]] * xs[A.col[k]];
      if (s == 0.0) continue;
      ++nnz;
      c2[A.col[k]] += s * s;
      ++bp[A.row[k] + 1];
      ++btp[A.col[k] + 1];
    }
    for (int j = 0; j < n4; ++j)
      if (c2[static_cast<std::size_t>(j)] > 0.0)
        cn[static_cast<std::size_t>(j)] = std::sqrt(c2[static_cast<std::size_t>(j)]);
    for (int j = 0; j < n4; ++j) {
      bp[static_cast<std::size_t>(j) + 1] += bp[static_cast<std::size_t>(j)];
      btp[static_cast<std::size_t>(j) + 1] += btp[static_cast<std::size_t>(j)];
    }
    bi.resize(nnz);
    bv.resize(nnz);
    bti.resize(nnz);
    btv.resize(nnz);
    std::vector<std::size_t> cur(bp.begin(), bp.end() - 1);
    std::vector<std::size_t> curt(btp.begin(), btp.end() - 1);
    for (std::size_t k = 0; k < A.val.size(); ++k) {
      double s = A.val[k] * wr[A.row[k]] * xs[A.col[k]];
      if (s == 0.0) continue;
      s /= cn[A.col[k]];
      std::size_t c = cur[A.row[k]]++;
      bi[c] = static_cast<int>(A.col[k]);
      bv[c] = s;
      std::size_t ct = curt[A.col[k]]++;
      bti[ct] = static_cast<int>(A.row[k]);
      btv[ct] = s;
    }
  }
  auto apply_rows = [&](const std::vector<std::size_t>& rp, const std::vector<int>& ri,
                        const std::vector<double>& rv, const std::vector<double>& x,
                        std::vector<double>& y) {
    for (int i = 0; i < n4; ++i) {
      double acc = 0.0;
      for (std::size_t k = rp[static_cast<std::size_t>(i)];
           k < rp[static_cast<std::size_t>(i) + 1]; ++k)
        acc += rv[k] * x[static_cast<std::size_t>(ri[k])];
      y[static_cast<std::size_t>(i)] = acc;
    }
  };
  auto dot_v = [n4](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (int i = 0; i < n4; ++i)
      s += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
    return s;
  };
  // conjugate gradient on the normal equations; iterates stay in the row
  // space, so the limit is the minimum-norm least-squares solution and the
  // assembled kernel receives no component.  Stagnation (no residual
  // improvement over 100 iterations) returns the best iterate seen.
  auto solve_min_norm = [&](const std::vector<double>& c, int picard_iter) -> std::vector<double> {
    std::vector<double> y(static_cast<std::size_t>(n4), 0.0);
    std::vector<double> r = c, s(static_cast<std::size_t>(n4)),
                        p(static_cast<std::size_t>(n4)), q(static_cast<std::size_t>(n4));
    apply_rows(btp, bti, btv, r, s);
    double g = dot_v(s, s);
    double g0 = g;
    if (!(g0 > 0.0)) return y;
    p = s;
    std::vector<double> best = y;
    double best_g = g;
    int since_best = 0;
    for (int it = 0; it < prm.solver_max_iter; ++it) {
      apply_rows(bp, bi, bv, p, q);
      double qq = dot_v(q, q);
      if (!(qq > 0.0)) break;
      double alpha = g / qq;
      for (int j = 0; j < n4; ++j) {
        y[static_cast<std::size_t>(j)] += alpha * p[static_cast<std::size_t>(j)];
        r[static_cast<std::size_t>(j)] -= alpha * q[static_cast<std::size_t>(j)];
      }
      apply_rows(btp, bti, btv, r, s);
      double g2 = dot_v(s, s);
      if (!std::isfinite(g2)) {
        std::ostringstream os;
        os << "normal-equation residual became non-finite at outer iteration " << picard_iter;
        throw SolverFailure(os.str());
      }
      if (g2 < best_g) {
        best_g = g2;
        best = y;
        since_best = 0;
      } else if (++since_best >= 100) {
        return best;
      }
      if (g2 <= prm.solver_tol * prm.solver_tol * g0) return y;
      double beta = g2 / g;
      g = g2;
      for (int j = 0; j < n4; ++j)
        p[static_cast<std::size_t>(j)] =
            s[static_cast<std::size_t>(j)] + beta * p[static_cast<std::size_t>(j)];
    }
    return best;
  };

  IterationResult res;
  WeightedNormSpec spec_f{prm.p, prm.k, prm.delta - 1.0};
  WeightedNormSpec spec_v{prm.p, prm.k + 1, prm.delta};
  NormalField v(static_cast<std::size_t>(n), Vec4{0, 0, 0, 0});
  EField Fv = F_all(v);
  res.initial_f_norm = weighted_sobolev_norm(Fv, glued, spec_f);
  res.initial_margin = margin_all(v);
  double prev_step = 0.0;
  double prev_ratio = 0.0;
  int streak = 0;
  for (int iter = 1; iter <= prm.max_iter; ++iter) {
    // D v_{i+1} = -F(0) - Q(v_i) with the assembled D on both sides collapses
    // to the increment system D (v_{i+1} - v_i) = -F(v_i); solving for the
    // increment keeps the solve noise proportional to |F| instead of |v|
    std::vector<double> fv = flatten(Fv);
    std::vector<double> b(static_cast<std::size_t>(n4));
    for (int j = 0; j < n4; ++j)
      b[static_cast<std::size_t>(j)] =
          -wr[static_cast<std::size_t>(j)] * fv[static_cast<std::size_t>(j)];
    std::vector<double> u = solve_min_norm(b, iter);
    // one refinement pass against the exact weighted residual recovers the
    // digits lost to normal-equation rounding
    {
      std::vector<double> r(static_cast<std::size_t>(n4));
      apply_rows(bp, bi, bv, u, r);
      for (int j = 0; j < n4; ++j)
        r[static_cast<std::size_t>(j)] = b[static_cast<std::size_t>(j)] - r[static_cast<std::size_t>(j)];
      std::vector<double> corr = solve_min_norm(r, iter);
      for (int j = 0; j < n4; ++j)
        u[static_cast<std::size_t>(j)] += corr[static_cast<std::size_t>(j)];
    }
    NormalField vn(static_cast<std::size_t>(n));
    NormalField dv(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r)
      for (int a = 0; a < 4; ++a) {
        std::size_t j = static_cast<std::size_t>(4 * r + a);
        dv[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] = xs[j] * u[j] / cn[j];
        vn[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] =
            v[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] +
            dv[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)];
      }
    double step = weighted_sobolev_norm(dv, glued, spec_v);
    double ratio = (iter >= 2 && prev_step > 0.0) ? step / prev_step : 0.0;
    Fv = F_all(vn);
    double fn = weighted_sobolev_norm(Fv, glued, spec_f);
    double margin = margin_all(vn);
    res.history.push_back({iter, step, ratio, fn, margin});
    v = vn;
    if (step < prm.tol) {
      res.converged = true;
      break;
    }
    if (iter >= 2 && ratio > 0.9) {
      ++streak;
      if (streak >= 2) {
        std::ostringstream os;
        os << "contraction ratios " << prev_ratio << " and " << ratio << " at iterations "
           << iter - 1 << " and " << iter
           << " exceed 0.9; the scale is too large for the contraction regime";
        throw NoContraction(os.str());
      }
    } else {
      streak = 0;
    }
    prev_step = step;
    prev_ratio = ratio;
  }
  res.v_final = v;
  res.final_f_norm = res.history.back().f_norm;
  res.final_margin = res.history.back().min_margin;
  return res;
}

IterationResult iterate_to_cayley(GluedScenario which, double t, const IterationParams& prm,
                                  int link_res, int radial_n) {
  return iterate_to_cayley(build_scenario(which, t, link_res, radial_n), prm);
}

std::string iteration_csv(const IterationResult& r) {
  std::string out = "iter,step_norm,ratio,F_norm,min_margin\n";
  for (const IterationStep& s : r.history)
    out += std::to_string(s.iter) + "," + fmt_double(s.step_norm) + "," + fmt_double(s.ratio) +
           "," + fmt_double(s.f_norm) + "," + fmt_double(s.min_margin) + "\n";
  return out;
}

std::vector<unsigned char> normal_field_block(const NormalField& v) {
  std::vector<unsigned char> out;
  out.reserve(8 + 32 * v.size());
  put_u64le(out, static_cast<std::uint64_t>(v.size()));
  for (const Vec4& x : v)
    for (int a = 0; a < 4; ++a) put_f64le(out, x[static_cast<std::size_t>(a)]);
  return out;
}

NormalField read_normal_field_block(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8) throw IoError("normal field block too short");
  std::uint64_t count = get_u64le(bytes.data());
  if (bytes.size() != 8 + 32 * count) throw IoError("normal field block size mismatch");
  NormalField v(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t a = 0; a < 4; ++a) v[i][a] = get_f64le(&bytes[8 + 32 * i + 8 * a]);
  return v;
}

}  // namespace cayley
