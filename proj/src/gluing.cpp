#include "cayley/gluing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cayley/errors.hpp"
#include "cayley/io.hpp"

namespace cayley {

namespace {

std::string fmt_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

struct CutJet {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

// quintic profile between the plateaus; C^2 at both joins
CutJet phi_jet(double x) {
  if (x <= 0.25) return {0.0, 0.0, 0.0};
  if (x >= 0.75) return {1.0, 0.0, 0.0};
  double u = 2.0 * (x - 0.25);
  double v = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
  double du = 30.0 * u * u * (1.0 - u) * (1.0 - u);
  double duu = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
  return {v, 2.0 * du, 4.0 * duu};
}

double smoothstep01(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

// jet of the rescaled cap s -> offset + t (Theta_cap(s/t) - offset); the
// radial derivative is scale free, link derivatives pick up factors of t
Jet2 scaled_cap_jet(const GluedEnd& e, const Vec4& coords) {
  Vec4 sigma = coords;
  sigma[0] = coords[0] / e.t;
  Jet2 J = e.ac.eval(sigma);
  const Vec8& off = e.ac.offset;
  Jet2 out;
  for (int k = 0; k < 8; ++k) {
    out.pos[k] = off[k] + e.t * (J.pos[k] - off[k]);
    out.d1[0][k] = J.d1[0][k];
    for (int j = 1; j < 4; ++j) out.d1[j][k] = e.t * J.d1[j][k];
    out.d2[0][0][k] = J.d2[0][0][k] / e.t;
    for (int j = 1; j < 4; ++j) {
      out.d2[0][j][k] = J.d2[0][j][k];
      out.d2[j][0][k] = J.d2[j][0][k];
      for (int i = 1; i < 4; ++i) out.d2[i][j][k] = e.t * J.d2[i][j][k];
    }
  }
  return out;
}

// log-spaced fill between consecutive forced radii; the forced values are
// kept bitwise so seam nodes land exactly on the grid
std::vector<double> glued_radial_nodes(double s_lo, double s_hi,
                                       const std::vector<double>& forced, int radial_n) {
  std::vector<double> marks = {s_lo, s_hi};
  for (double f : forced)
    if (f > s_lo * (1.0 + 1e-12) && f < s_hi * (1.0 - 1e-12)) marks.push_back(f);
  std::sort(marks.begin(), marks.end());
  std::vector<double> uniq;
  for (double m : marks)
    if (uniq.empty() || m > uniq.back() * (1.0 + 1e-9)) uniq.push_back(m);
  double total = std::log(s_hi / s_lo);
  std::vector<double> nodes;
  for (std::size_t j = 0; j + 1 < uniq.size(); ++j) {
    double a = uniq[j], b = uniq[j + 1];
    int fill = static_cast<int>(std::ceil(radial_n * std::log(b / a) / total));
    nodes.push_back(a);
    for (int q = 1; q < fill; ++q)
      nodes.push_back(a * std::pow(b / a, static_cast<double>(q) / fill));
  }
  nodes.push_back(uniq.back());
  return nodes;
}

Mat4 metric_of(const Jet2& J) {
  Mat4 G;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) G[a][b] = dot(J.d1[a], J.d1[b]);
  return G;
}

// Gaussian elimination with partial pivoting; G is SPD here
Vec4 solve4(Mat4 G, Vec4 b) {
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(G[r][c]) > std::abs(G[piv][c])) piv = r;
    std::swap(G[c], G[piv]);
    std::swap(b[c], b[piv]);
    if (G[c][c] == 0.0) throw DegenerateImmersion("singular metric in gradient solve");
    for (int r = c + 1; r < 4; ++r) {
      double m = G[r][c] / G[c][c];
      for (int cc = c; cc < 4; ++cc) G[r][cc] -= m * G[c][cc];
      b[r] -= m * b[c];
    }
  }
  Vec4 x{};
  for (int r = 3; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 4; ++c) s -= G[r][c] * x[c];
    x[r] = s / G[r][r];
  }
  return x;
}

template <class T>
std::vector<T> slice_range(const std::vector<T>& v, int start, int count) {
  return std::vector<T>(v.begin() + start, v.begin() + start + count);
}

}  // namespace

double cutoff_phi(double s) { return phi_jet(s).v; }

double balanced_nu(double lambda, double mu) {
  if (!(lambda < 1.0) || !(mu > 1.0))
    throw BadRange("balanced_nu: needs lambda < 1 < mu, got lambda = " + fmt_g(lambda) +
                   ", mu = " + fmt_g(mu));
  return (lambda - 1.0) / (lambda - mu);
}

double GluingData::t() const {
  double m = 0.0;
  for (double ti : scales) m = std::max(m, ti);
  return m;
}

void GluingData::validate() const {
  if (scales.empty()) throw ScaleViolation("no ends: scales is empty");
  if (!(0.0 < nu_pp && nu_pp < nu_p && nu_p < nu && nu < 1.0))
    throw ScaleViolation("exponents must satisfy 0 < nu'' < nu' < nu < 1, got nu = " +
                         fmt_g(nu) + ", nu' = " + fmt_g(nu_p) + ", nu'' = " + fmt_g(nu_pp));
  if (!(R0 > 0.0 && R0 < 1.0)) throw ScaleViolation("R0 must lie in (0, 1), got " + fmt_g(R0));
  if (!(r0 > 0.0)) throw ScaleViolation("r0 must be positive, got " + fmt_g(r0));
  for (std::size_t i = 0; i < scales.size(); ++i) {
    double ti = scales[i];
    if (ti < 0.0) throw ScaleViolation("scale t_" + std::to_string(i) + " is negative");
    if (ti == 0.0) continue;
    double tn = std::pow(ti, nu);
    if (!(r0 * ti < 0.5 * tn) || !(tn < R0))
      throw ScaleViolation("end " + std::to_string(i) +
                           ": need 0 < r0 t < t^nu/2 < t^nu < R0 < 1, got r0 t = " +
                           fmt_g(r0 * ti) + ", t^nu = " + fmt_g(tn) + ", R0 = " + fmt_g(R0));
  }
}

int GluedEnd::node_count() const { return grid_node_count(axes); }

Jet2 GluedEnd::jet_at(const Vec4& coords) const {
  if (t <= 0.0) return cs.eval(coords);
  double arg = 2.0 * coords[0] / s_neck - 1.0;
  if (arg >= 0.75) return cs.eval(coords);
  Jet2 g = scaled_cap_jet(*this, coords);
  if (arg <= 0.25) return g;
  Jet2 c = cs.eval(coords);
  CutJet ph = phi_jet(arg);
  double as = 2.0 / s_neck;
  double f = ph.v, fs = ph.d1 * as, fss = ph.d2 * as * as;
  Jet2 out;
  for (int k = 0; k < 8; ++k) {
    double dp = c.pos[k] - g.pos[k];
    out.pos[k] = g.pos[k] + f * dp;
    out.d1[0][k] = fs * dp + (1.0 - f) * g.d1[0][k] + f * c.d1[0][k];
    for (int j = 1; j < 4; ++j) out.d1[j][k] = (1.0 - f) * g.d1[j][k] + f * c.d1[j][k];
    out.d2[0][0][k] = fss * dp + 2.0 * fs * (c.d1[0][k] - g.d1[0][k]) +
                      (1.0 - f) * g.d2[0][0][k] + f * c.d2[0][0][k];
    for (int j = 1; j < 4; ++j) {
      double v = fs * (c.d1[j][k] - g.d1[j][k]) + (1.0 - f) * g.d2[0][j][k] + f * c.d2[0][j][k];
      out.d2[0][j][k] = v;
      out.d2[j][0][k] = v;
      for (int i = 1; i < 4; ++i)
        out.d2[i][j][k] = (1.0 - f) * g.d2[i][j][k] + f * c.d2[i][j][k];
    }
  }
  return out;
}

Jet2 GluedEnd::jet(const std::array<int, 4>& mi) const {
  Vec4 co;
  for (int a = 0; a < 4; ++a) co[a] = axes[a].coord(mi[a]);
  return jet_at(co);
}

GluedImmersion build_glued_immersion(const ParametricPatch& cs,
                                     const std::vector<ParametricPatch>& acs,
                                     const GluingData& data, int radial_n) {
  data.validate();
  if (!cs.radial()) throw BadRange("build_glued_immersion: singular model must be radial");
  if (acs.size() != data.scales.size())
    throw BadRange("build_glued_immersion: " + std::to_string(data.scales.size()) +
                   " scales but " + std::to_string(acs.size()) + " caps");
  if (radial_n < 8) throw BadRange("build_glued_immersion: radial_n must be >= 8");

  GluedImmersion g;
  g.data = data;
  ParametricPatch cone_cs = asymptotic_cone(cs);
  double tg_nu = data.t() > 0.0 ? std::pow(data.t(), data.nu) : 0.0;

  for (std::size_t i = 0; i < acs.size(); ++i) {
    const ParametricPatch& ac = acs[i];
    double ti = data.scales[i];
    if (!ac.radial())
      throw BadRange("build_glued_immersion: cap " + std::to_string(i) + " is not radial");
    for (int a = 1; a < 4; ++a) {
      const GridAxis& x = ac.axes[a];
      const GridAxis& y = cs.axes[a];
      if (x.kind != y.kind || x.n != y.n || x.lo != y.lo || x.hi != y.hi)
        throw ConeMismatch("link axis " + std::to_string(a) + " of cap " + std::to_string(i) +
                           " differs from the singular model");
    }
    ParametricPatch cone_ac = asymptotic_cone(ac);
    double worst = 0.0;
    for (int i1 = 0; i1 < cs.axes[1].n; ++i1)
      for (int i2 = 0; i2 < cs.axes[2].n; ++i2)
        for (int i3 = 0; i3 < cs.axes[3].n; ++i3) {
          Vec4 co{data.R0, cs.axes[1].coord(i1), cs.axes[2].coord(i2), cs.axes[3].coord(i3)};
          worst = std::max(worst, norm(cone_ac.eval(co).pos - cone_cs.eval(co).pos));
        }
    if (worst > 1e-10)
      throw ConeMismatch("cap " + std::to_string(i) + ": asymptotic cones differ by " +
                         fmt_g(worst) + " at the match radius " + fmt_g(data.R0));

    GluedEnd e;
    e.t = ti;
    e.ac = ac;
    e.cs = cs;
    if (ti > 0.0) {
      e.s_neck = std::pow(ti, data.nu);
      if (!(ac.axes[0].lo < data.r0))
        throw BadRange("cap " + std::to_string(i) + ": radial floor " + fmt_g(ac.axes[0].lo) +
                       " must lie below the joining radius r0 = " + fmt_g(data.r0));
      double sigma_top = std::pow(ti, data.nu - 1.0);
      if (ac.axes[0].hi < sigma_top)
        throw BadRange("cap " + std::to_string(i) + ": must extend to sigma = t^(nu-1) = " +
                       fmt_g(sigma_top) + ", has " + fmt_g(ac.axes[0].hi));
      double s_lo = ac.axes[0].lo * ti;
      std::vector<double> forced = {data.r0 * ti,
                                    0.25 * e.s_neck,
                                    0.5 * e.s_neck,
                                    0.625 * e.s_neck,
                                    0.75 * e.s_neck,
                                    0.875 * e.s_neck,
                                    0.95 * e.s_neck,
                                    e.s_neck,
                                    std::pow(ti, data.nu_p),
                                    std::pow(ti, data.nu_pp)};
      e.axes[0] = GridAxis::explicit_nodes(glued_radial_nodes(s_lo, data.R0, forced, radial_n));
      for (int a = 1; a < 4; ++a) e.axes[a] = cs.axes[a];
    } else {
      e.s_neck = 0.0;
      e.axes = cs.axes;  // kept singular: the model passes through untouched
    }

    g.end_start.push_back(g.node_count());
    int count = grid_node_count(e.axes);
    for (int idx = 0; idx < count; ++idx) {
      std::array<int, 4> mi = grid_multi(e.axes, idx);
      Vec4 co;
      for (int a = 0; a < 4; ++a) co[a] = e.axes[a].coord(mi[a]);
      Jet2 J = e.jet_at(co);
      double s = co[0];
      PartLabel lb;
      if (ti <= 0.0)
        lb = s < tg_nu ? PartLabel::Leftover : PartLabel::Upper;
      else if (s <= data.r0 * ti)
        lb = PartLabel::Lower;
      else if (s >= e.s_neck)
        lb = PartLabel::Upper;
      else
        lb = PartLabel::Middle;
      double dist = norm(J.pos - cs.offset);
      double rho = std::max(std::min(1.0, dist), 0.5 * data.r0 * ti);
      double dv = det4(metric_of(J));
      if (!(dv > 0.0))
        throw DegenerateImmersion("glued end " + std::to_string(i) +
                                  ": singular metric at node " + std::to_string(idx));
      g.position.push_back(J.pos);
      g.label.push_back(lb);
      g.rho.push_back(rho);
      g.volume.push_back(grid_coord_weight(e.axes, mi) * std::sqrt(dv));
      g.source_coords.push_back(co);
    }
    g.ends.push_back(std::move(e));
  }
  return g;
}

int GluedImmersion::end_of(int node) const {
  if (node < 0 || node >= node_count()) throw BadRange("end_of: node index out of range");
  auto it = std::upper_bound(end_start.begin(), end_start.end(), node);
  return static_cast<int>(it - end_start.begin()) - 1;
}

Jet2 GluedImmersion::node_jet(int node) const {
  int e = end_of(node);
  const GluedEnd& end = ends[static_cast<std::size_t>(e)];
  return end.jet(grid_multi(end.axes, node - end_start[static_cast<std::size_t>(e)]));
}

std::array<int, 4> GluedImmersion::part_counts() const {
  std::array<int, 4> c{0, 0, 0, 0};
  for (PartLabel lb : label) ++c[static_cast<int>(lb)];
  return {c[static_cast<int>(PartLabel::Upper)], c[static_cast<int>(PartLabel::Middle)],
          c[static_cast<int>(PartLabel::Lower)], c[static_cast<int>(PartLabel::Leftover)]};
}

GridView end_view(const GluedImmersion& glued, int end) {
  if (end < 0 || end >= static_cast<int>(glued.ends.size()))
    throw BadRange("end_view: end index out of range");
  const GluedEnd e = glued.ends[static_cast<std::size_t>(end)];
  GridView v;
  v.axes = e.axes;
  v.jet = [e](const std::array<int, 4>& mi) { return e.jet(mi); };
  return v;
}

std::vector<double> end_slice(const std::vector<double>& field, const GluedImmersion& glued,
                              int end) {
  if (end < 0 || end >= static_cast<int>(glued.ends.size()))
    throw BadRange("end_slice: end index out of range");
  if (static_cast<int>(field.size()) != glued.node_count())
    throw GridMismatch("end_slice: field has " + std::to_string(field.size()) + " values, grid " +
                       std::to_string(glued.node_count()));
  int start = glued.end_start[static_cast<std::size_t>(end)];
  return slice_range(field, start, glued.ends[static_cast<std::size_t>(end)].node_count());
}

std::vector<Vec4> end_slice(const std::vector<Vec4>& field, const GluedImmersion& glued,
                            int end) {
  if (end < 0 || end >= static_cast<int>(glued.ends.size()))
    throw BadRange("end_slice: end index out of range");
  if (static_cast<int>(field.size()) != glued.node_count())
    throw GridMismatch("end_slice: field has " + std::to_string(field.size()) + " values, grid " +
                       std::to_string(glued.node_count()));
  int start = glued.end_start[static_cast<std::size_t>(end)];
  return slice_range(field, start, glued.ends[static_cast<std::size_t>(end)].node_count());
}

MarginScan alpha_cayley_scan(const GluedImmersion& glued) {
  MarginScan out;
  out.min_margin = 2.0;
  for (int n = 0; n < glued.node_count(); ++n) {
    const GluedEnd& e = glued.ends[static_cast<std::size_t>(glued.end_of(n))];
    FrameRecord fr = frames_from_jet(glued.node_jet(n), orientation_swap(e.cs.kind));
    double m = cayley_margin(fr.tangent);
    if (m < out.min_margin) {
      out.min_margin = m;
      out.argmin = n;
    }
  }
  return out;
}

std::vector<double> partition_alpha(const GluedImmersion& glued, const GluingData& data) {
  std::vector<double> alpha(static_cast<std::size_t>(glued.node_count()), 0.0);
  for (int n = 0; n < glued.node_count(); ++n) {
    double ti = glued.ends[static_cast<std::size_t>(glued.end_of(n))].t;
    if (ti <= 0.0) continue;  // singular ends stay on the body side
    double x = std::log(glued.rho[static_cast<std::size_t>(n)]) / std::log(ti);
    alpha[static_cast<std::size_t>(n)] = smoothstep01((x - data.nu_pp) / (data.nu_p - data.nu_pp));
  }
  return alpha;
}

AlphaDecay alpha_decay_scan(const GluedImmersion& glued, const GluingData& data) {
  double t = data.t();
  if (!(t < 0.5))
    throw BadRange("alpha_decay_scan: global scale must be < 0.5, got " + fmt_g(t));
  std::vector<double> alpha = partition_alpha(glued, data);
  AlphaDecay out;
  for (std::size_t e = 0; e < glued.ends.size(); ++e) {
    const GluedEnd& end = glued.ends[e];
    if (end.t <= 0.0) continue;
    std::vector<double> local = end_slice(alpha, glued, static_cast<int>(e));
    std::array<std::vector<double>, 4> d;
    for (int a = 0; a < 4; ++a) d[a] = grid_partial(local, end.axes, a);
    for (int idx = 0; idx < static_cast<int>(local.size()); ++idx) {
      int n = glued.end_start[e] + idx;
      Vec4 da{d[0][static_cast<std::size_t>(idx)], d[1][static_cast<std::size_t>(idx)],
              d[2][static_cast<std::size_t>(idx)], d[3][static_cast<std::size_t>(idx)]};
      Mat4 G = metric_of(glued.node_jet(n));
      double m2 = dot(da, solve4(G, da));
      double val = glued.rho[static_cast<std::size_t>(n)] * std::sqrt(std::max(0.0, m2));
      if (val > out.sup_rho_grad_alpha) {
        out.sup_rho_grad_alpha = val;
        out.argmax = n;
      }
    }
  }
  out.normalized = t > 0.0 ? out.sup_rho_grad_alpha * std::abs(std::log(t)) : 0.0;
  return out;
}

namespace {

inline double pair_dot(double a, double b) { return a * b; }
inline double pair_dot(const Vec4& a, const Vec4& b) { return dot(a, b); }

template <class T>
double glued_norm_impl(const std::vector<T>& field, const GluedImmersion& glued,
                       const WeightedNormSpec& spec) {
  if (static_cast<int>(field.size()) != glued.node_count())
    throw GridMismatch("glued norm: field has " + std::to_string(field.size()) +
                       " values, grid " + std::to_string(glued.node_count()));
  double acc = 0.0;
  for (std::size_t e = 0; e < glued.ends.size(); ++e) {
    std::vector<T> piece = end_slice(field, glued, static_cast<int>(e));
    std::vector<double> rho = slice_range(glued.rho, glued.end_start[e],
                                          glued.ends[e].node_count());
    double ne = weighted_sobolev_norm(piece, end_view(glued, static_cast<int>(e)), spec, rho);
    acc += std::pow(ne, spec.p);
  }
  return std::pow(acc, 1.0 / spec.p);
}

template <class T>
double iip_impl(const std::vector<T>& u, const std::vector<T>& v, const GluedImmersion& glued,
                double delta, double eps) {
  if (u.size() != v.size() || static_cast<int>(u.size()) != glued.node_count())
    throw GridMismatch("interpolating inner product: got " + std::to_string(u.size()) + " and " +
                       std::to_string(v.size()) + " values, grid " +
                       std::to_string(glued.node_count()));
  if (!(eps > 0.0)) throw BadRange("interpolating inner product: eps must be positive");
  double t = glued.data.t();
  double sn = t > 0.0 ? std::pow(t, glued.data.nu) : 0.0;
  double lg_half = t > 0.0 ? std::log(0.5 * sn) : 0.0;
  double acc = 0.0;
  for (int n = 0; n < glued.node_count(); ++n) {
    std::size_t un = static_cast<std::size_t>(n);
    double rho = glued.rho[un];
    double w;
    if (t <= 0.0 || rho >= sn) {
      w = delta + eps;
    } else if (rho <= 0.5 * sn) {
      w = delta - eps;
    } else {
      double x = (std::log(rho) - lg_half) / std::log(2.0);
      w = delta - eps + 2.0 * eps * (x * x * (3.0 - 2.0 * x));
    }
    acc += pair_dot(u[un], v[un]) * std::pow(rho, w - 4.0) * glued.volume[un];
  }
  return acc;
}

}  // namespace

double weighted_sobolev_norm(const std::vector<double>& field, const GluedImmersion& glued,
                             const WeightedNormSpec& spec) {
  return glued_norm_impl(field, glued, spec);
}

double weighted_sobolev_norm(const std::vector<Vec4>& field, const GluedImmersion& glued,
                             const WeightedNormSpec& spec) {
  return glued_norm_impl(field, glued, spec);
}

double interpolating_inner_product(const std::vector<double>& u, const std::vector<double>& v,
                                   const GluedImmersion& glued, double delta, double eps) {
  return iip_impl(u, v, glued, delta, eps);
}

double interpolating_inner_product(const std::vector<Vec4>& u, const std::vector<Vec4>& v,
                                   const GluedImmersion& glued, double delta, double eps) {
  return iip_impl(u, v, glued, delta, eps);
}

std::vector<SeamRecord> seam_diagnostics(const GluedImmersion& glued) {
  std::vector<SeamRecord> out;
  for (std::size_t e = 0; e < glued.ends.size(); ++e) {
    const GluedEnd& end = glued.ends[e];
    if (end.t <= 0.0) continue;
    double h = 1e-5 * end.s_neck;
    for (int which = 0; which < 2; ++which) {
      SeamRecord rec;
      rec.end = static_cast<int>(e);
      rec.seam = which == 0 ? "cap" : "body";
      rec.s = (which == 0 ? 0.625 : 0.875) * end.s_neck;
      auto pure = [&](const Vec4& co) {
        return which == 0 ? scaled_cap_jet(end, co).pos : end.cs.eval(co).pos;
      };
      for (int i1 = 0; i1 < end.axes[1].n; ++i1)
        for (int i2 = 0; i2 < end.axes[2].n; ++i2)
          for (int i3 = 0; i3 < end.axes[3].n; ++i3) {
            Vec4 co{rec.s, end.axes[1].coord(i1), end.axes[2].coord(i2), end.axes[3].coord(i3)};
            rec.jump_pos = std::max(rec.jump_pos, norm(end.jet_at(co).pos - pure(co)));
            Vec4 cp = co, cm = co;
            cp[0] += h;
            cm[0] -= h;
            Vec8 dg = (0.5 / h) * (end.jet_at(cp).pos - end.jet_at(cm).pos);
            Vec8 dp = (0.5 / h) * (pure(cp) - pure(cm));
            rec.jump_d1 = std::max(rec.jump_d1, norm(dg - dp));
          }
      out.push_back(rec);
    }
  }
  return out;
}

std::string seam_csv(const std::vector<SeamRecord>& records) {
  std::ostringstream ss;
  ss << "end,seam,s,jump_pos,jump_d1\n";
  for (const SeamRecord& r : records)
    ss << r.end << ',' << r.seam << ',' << fmt_double(r.s) << ',' << fmt_double(r.jump_pos)
       << ',' << fmt_double(r.jump_d1) << '\n';
  return ss.str();
}

std::string glued_header_json(const GluedImmersion& glued) {
  std::ostringstream ss;
  ss << "{\n  \"scales\": [";
  for (std::size_t i = 0; i < glued.data.scales.size(); ++i)
    ss << (i ? ", " : "") << fmt_double(glued.data.scales[i]);
  ss << "],\n";
  ss << "  \"global_scale\": " << fmt_double(glued.data.t()) << ",\n";
  ss << "  \"nu\": " << fmt_double(glued.data.nu) << ",\n";
  ss << "  \"nu_p\": " << fmt_double(glued.data.nu_p) << ",\n";
  ss << "  \"nu_pp\": " << fmt_double(glued.data.nu_pp) << ",\n";
  ss << "  \"r0\": " << fmt_double(glued.data.r0) << ",\n";
  ss << "  \"R0\": " << fmt_double(glued.data.R0) << ",\n";
  ss << "  \"node_count\": " << glued.node_count() << ",\n";
  std::array<int, 4> pc = glued.part_counts();
  ss << "  \"part_counts\": {\"upper\": " << pc[0] << ", \"middle\": " << pc[1]
     << ", \"lower\": " << pc[2] << ", \"leftover\": " << pc[3] << "},\n";
  ss << "  \"end_start\": [";
  for (std::size_t i = 0; i < glued.end_start.size(); ++i)
    ss << (i ? ", " : "") << glued.end_start[i];
  ss << "]\n}\n";
  return ss.str();
}

std::vector<unsigned char> glued_node_block(const GluedImmersion& glued) {
  std::vector<unsigned char> out;
  out.reserve(static_cast<std::size_t>(glued.node_count()) * 73);
  for (int n = 0; n < glued.node_count(); ++n) {
    for (int k = 0; k < 8; ++k) put_f64le(out, glued.position[static_cast<std::size_t>(n)][k]);
    put_f64le(out, glued.rho[static_cast<std::size_t>(n)]);
  }
  for (PartLabel lb : glued.label) out.push_back(static_cast<unsigned char>(lb));
  return out;
}

GluedImmersion make_quadric_scenario(double t, int link_res, int radial_n) {
  GluingData d;
  d.scales = {t};
  d.nu = balanced_nu(-1.0, 1.5);
  d.nu_p = 0.85 * d.nu;
  d.nu_pp = 0.7 * d.nu;
  ParametricPatch cs = make_quadric_cone(1e-3, d.R0, link_res);
  ParametricPatch ac = make_quadric_smoothing(0.2, 6.0, link_res);
  return build_glued_immersion(cs, {ac}, d, radial_n);
}

GluedImmersion make_cone_scenario(double t, int link_res, int radial_n) {
  GluingData d;
  d.scales = {t};
  d.nu = balanced_nu(-1.0, 1.5);
  d.nu_p = 0.85 * d.nu;
  d.nu_pp = 0.7 * d.nu;
  ParametricPatch cs = make_quadric_cone(1e-3, d.R0, link_res);
  ParametricPatch ac = make_quadric_cone(0.21, 6.0, link_res);
  return build_glued_immersion(cs, {ac}, d, radial_n);
}

}  // namespace cayley
