#include "cayley/spin7.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cayley/errors.hpp"
#include <json.hpp>

namespace cayley {

namespace {

// Multiplication table: (e_i e_j) = MUL_SGN[i][j] * e_{MUL_IDX[i][j]}.
// Derived once from a Cayley-Dickson doubling of the quaternions with the
// basis orientation fixed so that Re of the quadruple product has the
// 14-term coefficient pattern of cayley_four_form(); then frozen.
constexpr int MUL_IDX[8][8] = {
    {0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 3, 2, 5, 4, 7, 6},
    {2, 3, 0, 1, 6, 7, 4, 5}, {3, 2, 1, 0, 7, 6, 5, 4},
    {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 7, 6, 1, 0, 3, 2},
    {6, 7, 4, 5, 2, 3, 0, 1}, {7, 6, 5, 4, 3, 2, 1, 0}};
constexpr double MUL_SGN[8][8] = {
    {1, 1, 1, 1, 1, 1, 1, 1},      {1, -1, -1, 1, 1, -1, 1, -1},
    {1, 1, -1, -1, 1, -1, -1, 1},  {1, -1, 1, -1, 1, 1, -1, -1},
    {1, -1, -1, -1, -1, 1, 1, 1},  {1, 1, 1, -1, -1, -1, 1, -1},
    {1, -1, 1, 1, -1, -1, -1, 1},  {1, 1, -1, 1, -1, 1, -1, -1}};

double det4(const double m[4][4]) {
  double d = 0.0;
  for (int c0 = 0; c0 < 4; ++c0) {
    int cols[3];
    int n = 0;
    for (int c = 0; c < 4; ++c)
      if (c != c0) cols[n++] = c;
    double minor3 =
        m[1][cols[0]] * (m[2][cols[1]] * m[3][cols[2]] - m[2][cols[2]] * m[3][cols[1]]) -
        m[1][cols[1]] * (m[2][cols[0]] * m[3][cols[2]] - m[2][cols[2]] * m[3][cols[0]]) +
        m[1][cols[2]] * (m[2][cols[0]] * m[3][cols[1]] - m[2][cols[1]] * m[3][cols[0]]);
    d += ((c0 % 2 == 0) ? 1.0 : -1.0) * m[0][c0] * minor3;
  }
  return d;
}

struct SubsetTables {
  std::array<std::array<int, 4>, 70> members{};
  int rank[8][8][8][8] = {};
  SubsetTables() {
    int n = 0;
    for (int i = 1; i <= 8; ++i)
      for (int j = i + 1; j <= 8; ++j)
        for (int k = j + 1; k <= 8; ++k)
          for (int l = k + 1; l <= 8; ++l) {
            members[n] = {i, j, k, l};
            rank[i - 1][j - 1][k - 1][l - 1] = n;
            ++n;
          }
  }
};
const SubsetTables& subset_tables() {
  static const SubsetTables t;
  return t;
}

}  // namespace

Vec8 octonion_mul(const Vec8& a, const Vec8& b) {
  Vec8 out = zero8();
  for (int i = 0; i < 8; ++i) {
    if (a[i] == 0.0) continue;
    for (int j = 0; j < 8; ++j)
      out[MUL_IDX[i][j]] += MUL_SGN[i][j] * a[i] * b[j];
  }
  return out;
}

Vec8 octonion_conj(const Vec8& a) {
  Vec8 r = a;
  for (int i = 1; i < 8; ++i) r[i] = -r[i];
  return r;
}

Vec8 triple_cross(const Vec8& x, const Vec8& y, const Vec8& z) {
  Vec8 cy = octonion_conj(y);
  Vec8 r = octonion_mul(x, octonion_mul(cy, z)) - octonion_mul(z, octonion_mul(cy, x));
  return 0.5 * r;
}

Vec8 quadruple_product(const Vec8& x, const Vec8& y, const Vec8& z, const Vec8& w) {
  Vec8 r = octonion_mul(octonion_conj(w), triple_cross(x, y, z)) -
           octonion_mul(octonion_conj(z), triple_cross(x, y, w));
  r = r + octonion_mul(octonion_conj(y), triple_cross(x, z, w));
  r = r - octonion_mul(octonion_conj(x), triple_cross(y, z, w));
  return 0.25 * r;
}

int FourForm::subset_index(int i, int j, int k, int l) {
  return subset_tables().rank[i - 1][j - 1][k - 1][l - 1];
}

std::array<int, 4> FourForm::subset_at(int index) {
  return subset_tables().members[static_cast<std::size_t>(index)];
}

double& FourForm::coeff(int i, int j, int k, int l) {
  return coeffs[static_cast<std::size_t>(subset_index(i, j, k, l))];
}
double FourForm::coeff(int i, int j, int k, int l) const {
  return coeffs[static_cast<std::size_t>(subset_index(i, j, k, l))];
}

double FourForm::eval(const Vec8& a, const Vec8& b, const Vec8& c, const Vec8& d) const {
  double total = 0.0;
  for (int s = 0; s < 70; ++s) {
    double cf = coeffs[static_cast<std::size_t>(s)];
    if (cf == 0.0) continue;
    auto sub = subset_tables().members[static_cast<std::size_t>(s)];
    double m[4][4];
    for (int col = 0; col < 4; ++col) {
      int idx = sub[static_cast<std::size_t>(col)] - 1;
      m[0][col] = a[idx];
      m[1][col] = b[idx];
      m[2][col] = c[idx];
      m[3][col] = d[idx];
    }
    total += cf * det4(m);
  }
  return total;
}

const FourForm& cayley_four_form() {
  static const FourForm f = [] {
    FourForm g;
    const int terms[14][5] = {
        {1, 2, 3, 4, +1}, {1, 2, 5, 6, -1}, {1, 2, 7, 8, -1}, {1, 3, 5, 7, -1},
        {1, 3, 6, 8, +1}, {1, 4, 5, 8, -1}, {1, 4, 6, 7, -1}, {2, 3, 5, 8, -1},
        {2, 3, 6, 7, -1}, {2, 4, 5, 7, +1}, {2, 4, 6, 8, -1}, {3, 4, 5, 6, -1},
        {3, 4, 7, 8, -1}, {5, 6, 7, 8, +1}};
    for (const auto& t : terms)
      g.coeff(t[0], t[1], t[2], t[3]) = static_cast<double>(t[4]);
    return g;
  }();
  return f;
}

FourForm four_form_from_product() {
  FourForm g;
  for (int s = 0; s < 70; ++s) {
    auto sub = FourForm::subset_at(s);
    g.coeffs[static_cast<std::size_t>(s)] =
        quadruple_product(basis8(sub[0] - 1), basis8(sub[1] - 1), basis8(sub[2] - 1),
                          basis8(sub[3] - 1))[0];
  }
  return g;
}

bool OrientedPlane4::is_orthonormal(double tol) const {
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      double want = (i == j) ? 1.0 : 0.0;
      if (std::fabs(dot(frame[i], frame[j]) - want) > tol) return false;
    }
  return true;
}

double TauValue::norm() const {
  double s = 0.0;
  for (double c : components) s += c * c;
  return std::sqrt(s);
}

double phi0_eval(const Vec8& a, const Vec8& b, const Vec8& c, const Vec8& d) {
  return quadruple_product(a, b, c, d)[0];
}

double phi0_eval(const OrientedPlane4& p) {
  return phi0_eval(p.frame[0], p.frame[1], p.frame[2], p.frame[3]);
}

TauValue tau_eval(const Vec8& a, const Vec8& b, const Vec8& c, const Vec8& d) {
  Vec8 x = quadruple_product(a, b, c, d);
  TauValue t;
  for (int i = 0; i < 7; ++i) t.components[i] = x[i + 1];
  return t;
}

TauValue tau_eval(const OrientedPlane4& p) {
  return tau_eval(p.frame[0], p.frame[1], p.frame[2], p.frame[3]);
}

double cayley_margin(const OrientedPlane4& p) { return phi0_eval(p); }

Frame48 complete_frame(const OrientedPlane4& p) {
  Frame48 normals;
  int found = 0;
  double threshold = 0.25;  // squared residual; lowered if candidates run out
  bool used[8] = {};
  while (found < 4) {
    for (int cand = 0; cand < 8 && found < 4; ++cand) {
      if (used[cand]) continue;
      Vec8 v = basis8(cand);
      for (int i = 0; i < 4; ++i) axpy(-dot(p.frame[i], v), p.frame[i], v);
      for (int i = 0; i < found; ++i) axpy(-dot(normals[i], v), normals[i], v);
      double n2 = dot(v, v);
      if (n2 >= threshold) {
        normals[found] = (1.0 / std::sqrt(n2)) * v;
        used[cand] = true;
        ++found;
      }
    }
    threshold *= 0.25;
    if (threshold < 1e-24 && found < 4)
      throw RankDeficient("cannot complete frame to a basis of R^8");
  }
  // enforce positive orientation of (frame, normals)
  Eigen::Matrix<double, 8, 8> m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c) {
      m(r, c) = p.frame[r][c];
      m(r + 4, c) = normals[r][c];
    }
  if (m.determinant() < 0.0)
    for (int c = 0; c < 8; ++c) normals[3][c] = -normals[3][c];
  return normals;
}

namespace {

// Orthonormal basis of the leading rank-4 left singular subspace of the
// tau Jacobian.  The caller supplies the admissible split: the strict form
// certifies a Cayley plane, the loose form only needs the subspace to stay
// well separated (margin >= 0.9 keeps the ratio above ~4).
EBasis tau_jacobian_basis(const OrientedPlane4& p, bool strict) {
  Frame48 normals = complete_frame(p);
  // Jacobian of tau under normal perturbations: column (slot i, normal b)
  Eigen::Matrix<double, 7, 16> jac;
  for (int i = 0; i < 4; ++i)
    for (int b = 0; b < 4; ++b) {
      Frame48 f = p.frame;
      f[i] = normals[b];
      TauValue t = tau_eval(f[0], f[1], f[2], f[3]);
      for (int r = 0; r < 7; ++r) jac(r, 4 * i + b) = t.components[r];
    }
  Eigen::JacobiSVD<Eigen::Matrix<double, 7, 16>> svd(jac, Eigen::ComputeFullU);
  EBasis out;
  out.plane = p;
  for (int i = 0; i < 7; ++i) out.singular_values[i] = svd.singularValues()(i);
  bool ok = strict ? out.singular_values[3] > 1e-6 && out.singular_values[4] < 1e-8
                   : out.singular_values[3] > 1.0 &&
                         out.singular_values[4] < 0.5 * out.singular_values[3];
  if (!ok) {
    std::ostringstream msg;
    msg << "tau-Jacobian singular values do not split rank 4:";
    for (double s : out.singular_values) msg << " " << s;
    throw RankDeficient(msg.str());
  }
  // canonical basis: Gram-Schmidt over columns projected onto the leading
  // 4-dim left singular subspace, in column order
  Eigen::Matrix<double, 7, 4> u4 = svd.matrixU().leftCols<4>();
  Eigen::Matrix<double, 7, 7> proj = u4 * u4.transpose();
  int found = 0;
  Eigen::Matrix<double, 7, 4> basis;
  for (int c = 0; c < 16 && found < 4; ++c) {
    Eigen::Matrix<double, 7, 1> v = proj * jac.col(c);
    for (int i = 0; i < found; ++i) v -= basis.col(i).dot(v) * basis.col(i);
    double n = v.norm();
    if (n > 1e-6) {
      basis.col(found) = v / n;
      ++found;
    }
  }
  if (found < 4) throw RankDeficient("projected Jacobian columns span less than rank 4");
  for (int i = 0; i < 4; ++i)
    for (int r = 0; r < 7; ++r) out.basis[i][r] = basis(r, i);
  return out;
}

}  // namespace

EBasis e_basis(const OrientedPlane4& p) { return tau_jacobian_basis(p, true); }

EBasis e_basis_near(const OrientedPlane4& p) { return tau_jacobian_basis(p, false); }

Vec4 EBasis::project(const Vec7& tau) const {
  Vec4 out;
  for (int i = 0; i < 4; ++i) out[i] = dot(basis[i], tau);
  return out;
}

AngleReport angle_criterion(const OrientedPlane4& p1, const OrientedPlane4& p2) {
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = dot(p1.frame[i], p2.frame[j]);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(m);
  AngleReport rep;
  for (int i = 0; i < 4; ++i) {
    double s = std::min(1.0, std::max(-1.0, svd.singularValues()(i)));
    rep.angles[i] = std::acos(std::fabs(s));
    // sigma within roundoff of 1 means a shared direction; acos cannot
    // resolve angles below ~1e-8 so the test is on sigma itself
    if (s >= 1.0 - 1e-14) rep.degenerate = true;
  }
  std::sort(rep.angles.begin(), rep.angles.end());
  rep.sum = rep.angles[0] + rep.angles[1] + rep.angles[2] + rep.angles[3];
  rep.passes = rep.sum <= 3.14159265358979323846 + 1e-12;
  Eigen::Matrix<double, 8, 8> s8;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c) {
      s8(r, c) = p1.frame[r][c];
      s8(r + 4, c) = p2.frame[r][c];
    }
  double det = s8.determinant();
  rep.intersection_sign = (std::fabs(det) < 1e-12) ? 0 : (det > 0 ? 1 : -1);
  return rep;
}

OrientedPlane4 random_orthonormal_plane(Rng& rng) {
  for (;;) {
    Frame48 f;
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 8; ++c) f[i][c] = rng.gaussian();
    bool ok = true;
    for (int i = 0; i < 4 && ok; ++i) {
      for (int j = 0; j < i; ++j) axpy(-dot(f[j], f[i]), f[j], f[i]);
      double n = norm(f[i]);
      if (n < 1e-6) {
        ok = false;
        break;
      }
      f[i] = (1.0 / n) * f[i];
    }
    if (ok) return OrientedPlane4{f};
  }
}

std::array<Vec8, 8> stabilizer_rotation(Rng& rng, double scale) {
  // action of so(8) basis elements E_pq on the Cayley form coefficients
  static const Eigen::MatrixXd kernel = [] {
    const FourForm& phi = cayley_four_form();
    Eigen::MatrixXd act(70, 28);
    int col = 0;
    for (int p = 0; p < 8; ++p)
      for (int q = p + 1; q < 8; ++q, ++col) {
        for (int s = 0; s < 70; ++s) {
          auto sub = FourForm::subset_at(s);
          double val = 0.0;
          for (int slot = 0; slot < 4; ++slot) {
            // E_pq e_i = delta_qi e_p - delta_pi e_q
            int i = sub[static_cast<std::size_t>(slot)] - 1;
            Vec8 repl = zero8();
            if (i == q) repl[p] = 1.0;
            if (i == p) repl[q] = -1.0;
            Vec8 args[4];
            for (int t = 0; t < 4; ++t)
              args[t] = basis8(sub[static_cast<std::size_t>(t)] - 1);
            args[slot] = repl;
            val += phi.eval(args[0], args[1], args[2], args[3]);
          }
          act(s, col) = val;
        }
      }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(act);
    lu.setThreshold(1e-9);
    return Eigen::MatrixXd(lu.kernel());  // 28 x 21
  }();

  Eigen::VectorXd g(kernel.cols());
  for (int i = 0; i < g.size(); ++i) g(i) = rng.gaussian();
  Eigen::VectorXd omega = kernel * g;
  omega *= scale / std::max(omega.norm(), 1e-300);
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  int col = 0;
  for (int p = 0; p < 8; ++p)
    for (int q = p + 1; q < 8; ++q, ++col) {
      a(p, q) += omega(col);
      a(q, p) -= omega(col);
    }
  Eigen::Matrix<double, 8, 8> r = a.exp();
  std::array<Vec8, 8> out;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) out[i][j] = r(i, j);
  return out;
}

Vec8 apply_rotation(const std::array<Vec8, 8>& rot, const Vec8& v) {
  Vec8 out = zero8();
  for (int i = 0; i < 8; ++i) out[i] = dot(rot[i], v);
  return out;
}

OrientedPlane4 rotate_plane(const std::array<Vec8, 8>& rot, const OrientedPlane4& p) {
  OrientedPlane4 out;
  for (int i = 0; i < 4; ++i) out.frame[i] = apply_rotation(rot, p.frame[i]);
  return out;
}

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}
}  // namespace

std::string plane_to_json(const OrientedPlane4& p) {
  std::ostringstream os;
  os << "{\"frame\": [";
  for (int i = 0; i < 4; ++i) {
    os << (i ? ", [" : "[");
    for (int c = 0; c < 8; ++c) os << (c ? ", " : "") << fmt(p.frame[i][c]);
    os << "]";
  }
  os << "]}";
  return os.str();
}

OrientedPlane4 plane_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("frame")) throw IoError("plane JSON lacks \"frame\"");
  OrientedPlane4 p;
  auto rows = j.at("frame");
  if (rows.size() != 4) throw IoError("plane frame must have 4 rows");
  for (int i = 0; i < 4; ++i) {
    if (rows[i].size() != 8) throw IoError("plane frame rows must have 8 entries");
    for (int c = 0; c < 8; ++c) p.frame[i][c] = rows[i][c].get<double>();
  }
  return p;
}

std::string four_form_to_json(const FourForm& f) {
  std::ostringstream os;
  os << "{\"coeffs\": {";
  bool first = true;
  for (int s = 0; s < 70; ++s) {
    if (f.coeffs[static_cast<std::size_t>(s)] == 0.0) continue;
    auto sub = FourForm::subset_at(s);
    if (!first) os << ", ";
    first = false;
    os << "\"" << sub[0] << sub[1] << sub[2] << sub[3]
       << "\": " << fmt(f.coeffs[static_cast<std::size_t>(s)]);
  }
  os << "}}";
  return os.str();
}

FourForm four_form_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  FourForm f;
  for (auto it = j.at("coeffs").begin(); it != j.at("coeffs").end(); ++it) {
    const std::string& key = it.key();
    if (key.size() != 4) throw IoError("four-form key must have 4 digits");
    f.coeff(key[0] - '0', key[1] - '0', key[2] - '0', key[3] - '0') =
        it.value().get<double>();
  }
  return f;
}

}  // namespace cayley
