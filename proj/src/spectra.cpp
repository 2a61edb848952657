#include "cayley/spectra.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <utility>

#include "cayley/errors.hpp"
#include "cayley/rng.hpp"
#include "cayley/spin7.hpp"

namespace cayley {
namespace {

std::string fmt_e12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// ---- exact rational elimination -----------------------------------------

using QVec = std::vector<mpq_class>;
using QMat = std::vector<QVec>;

// reduced row echelon form in place; returns the rank
int rref(QMat& a) {
  if (a.empty()) return 0;
  const int rows = static_cast<int>(a.size());
  const int cols = static_cast<int>(a[0].size());
  int rank = 0;
  for (int c = 0; c < cols && rank < rows; ++c) {
    int piv = -1;
    for (int r = rank; r < rows; ++r)
      if (a[r][c] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    std::swap(a[rank], a[piv]);
    const mpq_class inv = 1 / a[rank][c];
    for (int cc = c; cc < cols; ++cc) a[rank][cc] *= inv;
    for (int r = 0; r < rows; ++r) {
      if (r == rank || a[r][c] == 0) continue;
      const mpq_class f = a[r][c];
      for (int cc = c; cc < cols; ++cc)
        if (a[rank][cc] != 0) a[r][cc] -= f * a[rank][cc];
    }
    ++rank;
  }
  return rank;
}

int rank_of(QMat a) { return rref(a); }

// basis of { v : a v = 0 }, one vector per free column
std::vector<QVec> kernel_basis(QMat a, int cols) {
  const int rank = rref(a);
  std::vector<int> pivot_col(rank);
  std::vector<bool> is_pivot(static_cast<std::size_t>(cols), false);
  for (int r = 0; r < rank; ++r) {
    int c = 0;
    while (a[r][c] == 0) ++c;
    pivot_col[r] = c;
    is_pivot[static_cast<std::size_t>(c)] = true;
  }
  std::vector<QVec> basis;
  for (int f = 0; f < cols; ++f) {
    if (is_pivot[static_cast<std::size_t>(f)]) continue;
    QVec v(static_cast<std::size_t>(cols), mpq_class(0));
    v[static_cast<std::size_t>(f)] = 1;
    for (int r = 0; r < rank; ++r) v[static_cast<std::size_t>(pivot_col[r])] = -a[r][static_cast<std::size_t>(f)];
    basis.push_back(std::move(v));
  }
  return basis;
}

// random invertible change of basis on the column space, applied as a
// sequence of elementary column operations (permutation, scaling by
// +-1, +-2, +-1/2, shears); the rank and the kernel dimension are
// invariant under it
void shuffle_columns(QMat& a, int cols, Rng& rng) {
  if (a.empty() || cols < 2) return;
  const mpq_class scales[6] = {1, -1, 2, -2, mpq_class(1, 2), mpq_class(-1, 2)};
  auto pick = [&](int n) { return static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n)); };
  for (int c = cols - 1; c > 0; --c) {
    const int o = pick(c + 1);
    if (o != c)
      for (auto& row : a) std::swap(row[static_cast<std::size_t>(c)], row[static_cast<std::size_t>(o)]);
  }
  for (int c = 0; c < cols; ++c) {
    const mpq_class& s = scales[pick(6)];
    if (s != 1)
      for (auto& row : a) row[static_cast<std::size_t>(c)] *= s;
  }
  const int shears = 4 * cols;
  for (int k = 0; k < shears; ++k) {
    const int c1 = pick(cols), c2 = pick(cols);
    if (c1 == c2) continue;
    const mpq_class& f = scales[pick(6)];
    for (auto& row : a) row[static_cast<std::size_t>(c2)] += f * row[static_cast<std::size_t>(c1)];
  }
}

// ---- homogeneous polynomial bookkeeping ----------------------------------

using Expo = std::array<int, 4>;

// degree-d monomials in 4 variables, exponent-lexicographic
std::vector<Expo> monomials(int d) {
  std::vector<Expo> out;
  for (int a = d; a >= 0; --a)
    for (int b = d - a; b >= 0; --b)
      for (int c = d - a - b; c >= 0; --c) out.push_back({a, b, c, d - a - b - c});
  return out;
}

struct MonoTable {
  std::vector<Expo> list;
  std::map<Expo, int> rank;
  explicit MonoTable(int d) : list(monomials(d)) {
    for (int i = 0; i < static_cast<int>(list.size()); ++i) rank[list[static_cast<std::size_t>(i)]] = i;
  }
  int size() const { return static_cast<int>(list.size()); }
};

// coefficient layout: index = component * n_monomials + monomial
using QB = std::array<std::array<std::array<mpq_class, 4>, 4>, 4>;  // [i][row][col]

QB exact_coeffs(const ConstantCoeffOperator& op) {
  QB q;
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) q[i][a][b] = mpq_class(op.B[i][a][b]);  // doubles are dyadic, exact
  return q;
}

// matrix of v -> Dv from degree-d fields to degree d-1 fields
QMat d_matrix(const QB& bq, int d) {
  if (d == 0) return {};
  const MonoTable dom(d), tgt(d - 1);
  const int n = dom.size(), m = tgt.size();
  QMat a(static_cast<std::size_t>(4 * m), QVec(static_cast<std::size_t>(4 * n), mpq_class(0)));
  for (int b = 0; b < 4; ++b)
    for (int j = 0; j < n; ++j) {
      const Expo& al = dom.list[static_cast<std::size_t>(j)];
      for (int i = 0; i < 4; ++i) {
        if (al[i] == 0) continue;
        Expo be = al;
        be[i] -= 1;
        const int t = tgt.rank.at(be);
        for (int r = 0; r < 4; ++r)
          if (bq[i][r][b] != 0) a[static_cast<std::size_t>(r * m + t)][static_cast<std::size_t>(b * n + j)] += al[i] * bq[i][r][b];
      }
    }
  return a;
}

// matrix of P -> |x|^2 DP - 2m (sum_i x_i B_i) P from degree-k fields to
// degree k+1 fields; its kernel gives the rate lambda = k - 2m solutions
QMat ansatz_matrix(const QB& bq, int k, int m) {
  const MonoTable dom(k), tgt(k + 1);
  const int n = dom.size(), mm = tgt.size();
  QMat a(static_cast<std::size_t>(4 * mm), QVec(static_cast<std::size_t>(4 * n), mpq_class(0)));
  for (int b = 0; b < 4; ++b)
    for (int j = 0; j < n; ++j) {
      const Expo& al = dom.list[static_cast<std::size_t>(j)];
      for (int i = 0; i < 4; ++i) {
        if (al[i] > 0) {
          for (int l = 0; l < 4; ++l) {
            Expo be = al;
            be[i] -= 1;
            be[l] += 2;
            const int t = tgt.rank.at(be);
            for (int r = 0; r < 4; ++r)
              if (bq[i][r][b] != 0) a[static_cast<std::size_t>(r * mm + t)][static_cast<std::size_t>(b * n + j)] += al[i] * bq[i][r][b];
          }
        }
        Expo be = al;
        be[i] += 1;
        const int t = tgt.rank.at(be);
        for (int r = 0; r < 4; ++r)
          if (bq[i][r][b] != 0) a[static_cast<std::size_t>(r * mm + t)][static_cast<std::size_t>(b * n + j)] -= 2 * m * bq[i][r][b];
      }
    }
  return a;
}

// multiply a degree-k coefficient vector by (x1^2+..+x4^2)^s
QVec lift_by_r2(QVec cur, int k, int s) {
  int deg = k;
  for (int step = 0; step < s; ++step) {
    const MonoTable dom(deg), tgt(deg + 2);
    const int n = dom.size(), m = tgt.size();
    QVec next(static_cast<std::size_t>(4 * m), mpq_class(0));
    for (int b = 0; b < 4; ++b)
      for (int j = 0; j < n; ++j) {
        const mpq_class& c = cur[static_cast<std::size_t>(b * n + j)];
        if (c == 0) continue;
        for (int l = 0; l < 4; ++l) {
          Expo be = dom.list[static_cast<std::size_t>(j)];
          be[l] += 2;
          next[static_cast<std::size_t>(b * m + tgt.rank.at(be))] += c;
        }
      }
    cur = std::move(next);
    deg += 2;
  }
  return cur;
}

// ---- defect of a linear graph over the flat plane -------------------------

Frame48 orthonormalize(Frame48 f) {
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) axpy(-dot(f[i], f[j]), f[j], f[i]);
    f[i] = (1.0 / norm(f[i])) * f[i];
  }
  return f;
}

// nearest p/q with q <= 4 when within 1e-8, else x unchanged
double round_small_rational(double x) {
  for (int q = 1; q <= 4; ++q) {
    const double p = std::round(x * q);
    if (std::abs(x - p / q) <= 1e-8) return p / q;
  }
  return x;
}

std::string table_to_string(const std::vector<RateEntry>& entries) {
  std::string s = "{";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) s += ", ";
    s += "(" + fmt_g(entries[i].lambda) + ", " + std::to_string(entries[i].d) + ")";
  }
  return s + "}";
}

}  // namespace

Mat4 ConstantCoeffOperator::symbol(const Vec4& xi) const {
  Mat4 m{};
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) m[a][b] += xi[i] * B[i][a][b];
  return m;
}

bool ConstantCoeffOperator::is_elliptic(std::uint64_t seed, int samples, double tol) const {
  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    Vec4 xi{};
    double n2 = 0.0;
    do {
      for (int k = 0; k < 4; ++k) xi[k] = rng.gaussian();
      n2 = dot(xi, xi);
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    for (int k = 0; k < 4; ++k) xi[k] *= inv;
    if (std::abs(det4(symbol(xi))) < tol) return false;
  }
  return true;
}

ConstantCoeffOperator extract_operator_coeffs() {
  OrientedPlane4 flat;
  for (int i = 0; i < 4; ++i) flat.frame[i] = basis8(i);
  const EBasis eb = e_basis(flat);
  const Frame48 normals = complete_frame(flat);
  const double h = 1e-5;

  // defect of the plane graphing eps * x_i in the normal direction c
  auto defect = [&](int i, int c, double eps) {
    Frame48 t = flat.frame;
    axpy(eps, normals[c], t[i]);
    OrientedPlane4 p{orthonormalize(t)};
    return eb.project(tau_eval(p).components);
  };

  ConstantCoeffOperator op;
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 4; ++c) {
      const Vec4 fp = defect(i, c, h), fm = defect(i, c, -h), f0 = defect(i, c, 0.0);
      for (int a = 0; a < 4; ++a) {
        const double second = fp[a] + fm[a] - 2.0 * f0[a];
        if (std::abs(second) > 1e-6)
          throw NonLinearityDetected("second difference " + fmt_e12(second) +
                                     " for the field x_" + std::to_string(i + 1) +
                                     " n_" + std::to_string(c + 1));
        op.B[i][a][c] = round_small_rational((fp[a] - fm[a]) / (2.0 * h));
      }
    }
  if (!op.is_elliptic())
    throw RankDeficient("extracted operator has a singular symbol");
  return op;
}

int homogeneous_kernel_dim(const ConstantCoeffOperator& op, int degree,
                           std::uint64_t basis_shuffle_seed) {
  if (degree < 0 || degree > 6)
    throw BadRange("homogeneous degree must lie in [0, 6], got " + std::to_string(degree));
  QMat a = d_matrix(exact_coeffs(op), degree);
  const int cols = 4 * MonoTable(degree).size();
  if (basis_shuffle_seed) {
    Rng rng(basis_shuffle_seed);
    shuffle_columns(a, cols, rng);
  }
  return cols - rank_of(std::move(a));
}

int negative_rate_kernel_dim(const ConstantCoeffOperator& op, int lambda,
                             std::uint64_t basis_shuffle_seed) {
  if (lambda < -3 || lambda > -1)
    throw BadRange("negative rate must be -3, -2 or -1, got " + std::to_string(lambda));
  const QB bq = exact_coeffs(op);
  const int m_max = 4;
  const int lift_cols = 4 * MonoTable(lambda + 2 * m_max).size();

  std::vector<QVec> lifted;
  int rank_prev = 0, rank_last = 0;
  for (int m = 1; m <= m_max; ++m) {
    const int k = lambda + 2 * m;
    if (k >= 0) {
      const int cols = 4 * MonoTable(k).size();
      for (auto& v : kernel_basis(ansatz_matrix(bq, k, m), cols))
        lifted.push_back(lift_by_r2(std::move(v), k, m_max - m));
    }
    if (m >= m_max - 1) {
      QMat s = lifted;
      if (basis_shuffle_seed) {
        Rng rng(basis_shuffle_seed);
        shuffle_columns(s, lift_cols, rng);
      }
      (m == m_max ? rank_last : rank_prev) = rref(s);
    }
  }
  if (rank_prev != rank_last)
    throw AnsatzExhausted("rate " + std::to_string(lambda) +
                          ": joint solution space still growing at m = 4 (rank " +
                          std::to_string(rank_prev) + " -> " + std::to_string(rank_last) + ")");
  return rank_last;
}

RateTable assemble_rate_table(const ConstantCoeffOperator& op, double lambda_min,
                              double lambda_max) {
  if (!(lambda_min < lambda_max))
    throw BadRange("rate range needs lambda_min < lambda_max");
  if (lambda_min < -4.0 || lambda_max > 7.0)
    throw BadRange("polynomial rate analysis covers integer rates -3..6; range must lie in [-4, 7]");
  if (!op.is_elliptic())
    throw RankDeficient("rate analysis needs an elliptic operator (singular symbol found)");
  RateTable t;
  t.lambda_min = lambda_min;
  t.lambda_max = lambda_max;
  for (int lam = -3; lam <= 6; ++lam) {
    if (!(lam > lambda_min && lam < lambda_max)) continue;
    const int d = lam < 0 ? negative_rate_kernel_dim(op, lam) : homogeneous_kernel_dim(op, lam);
    if (d >= 1) t.entries.push_back({static_cast<double>(lam), d});
  }
  return t;
}

RateTable flat_plane_rate_table(double lambda_min, double lambda_max) {
  const RateTable t = assemble_rate_table(extract_operator_coeffs(), lambda_min, lambda_max);
  static const RateEntry reference[] = {{-3.0, 1}, {-1.0, 1}, {0.0, 4}, {1.0, 12}};
  std::vector<RateEntry> expect;
  for (const auto& e : reference)
    if (e.lambda > lambda_min && e.lambda < lambda_max) expect.push_back(e);
  if (!(t.entries == expect))
    throw RateTableMismatch("flat-plane table over (" + fmt_g(lambda_min) + ", " +
                            fmt_g(lambda_max) + ") came out " + table_to_string(t.entries) +
                            " but the reference is " + table_to_string(expect));
  return t;
}

int index_change(const RateTable& table, double delta1, double delta2) {
  if (!(delta1 < delta2)) throw BadRange("index_change needs delta1 < delta2");
  for (const auto& e : table.entries) {
    if (std::abs(delta1 - e.lambda) <= 1e-9)
      throw CriticalEndpoint("delta1 = " + fmt_g(delta1) + " hits the critical rate " + fmt_g(e.lambda));
    if (std::abs(delta2 - e.lambda) <= 1e-9)
      throw CriticalEndpoint("delta2 = " + fmt_g(delta2) + " hits the critical rate " + fmt_g(e.lambda));
  }
  int sum = 0;
  for (const auto& e : table.entries)
    if (e.lambda > delta1 && e.lambda < delta2) sum += e.d;
  return sum;
}

int compact_index_formula(int sigma, int euler, int self_intersection, int dim_family) {
  if (dim_family < 0) throw BadRange("dim_family must be >= 0");
  if ((sigma + euler) % 2 != 0)
    throw ParityError("sigma + euler = " + std::to_string(sigma + euler) + " must be even");
  return (sigma + euler) / 2 - self_intersection + dim_family;
}

std::vector<std::vector<double>> operator_matrix(const ConstantCoeffOperator& op, int degree) {
  if (degree < 0 || degree > 6)
    throw BadRange("homogeneous degree must lie in [0, 6], got " + std::to_string(degree));
  const QMat a = d_matrix(exact_coeffs(op), degree);
  std::vector<std::vector<double>> out(a.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    out[r].resize(a[r].size());
    for (std::size_t c = 0; c < a[r].size(); ++c) out[r][c] = a[r][c].get_d();
  }
  return out;
}

std::string rate_table_to_csv(const RateTable& t) {
  std::string out = "lambda,d\n";
  for (const auto& e : t.entries) out += fmt_e12(e.lambda) + "," + std::to_string(e.d) + "\n";
  return out;
}

RateTable rate_table_from_csv(const std::string& text, double lambda_min, double lambda_max) {
  if (!(lambda_min < lambda_max))
    throw BadRange("rate range needs lambda_min < lambda_max");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "lambda,d")
    throw IoError("rate table must start with the header \"lambda,d\"");
  RateTable t;
  t.lambda_min = lambda_min;
  t.lambda_max = lambda_max;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError("rate table line " + std::to_string(lineno) + ": missing comma");
    std::size_t used = 0;
    double lambda = 0.0;
    int d = 0;
    try {
      lambda = std::stod(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing junk");
      d = std::stoi(line.substr(comma + 1), &used);
      if (comma + 1 + used != line.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw IoError("rate table line " + std::to_string(lineno) + ": cannot parse \"" + line + "\"");
    }
    if (d < 1)
      throw IoError("rate table line " + std::to_string(lineno) + ": d must be >= 1");
    if (!(lambda > lambda_min && lambda < lambda_max))
      throw IoError("rate table line " + std::to_string(lineno) + ": rate " + fmt_g(lambda) +
                    " outside (" + fmt_g(lambda_min) + ", " + fmt_g(lambda_max) + ")");
    if (!t.entries.empty() && !(lambda > t.entries.back().lambda))
      throw IoError("rate table line " + std::to_string(lineno) + ": rates must increase strictly");
    t.entries.push_back({lambda, d});
  }
  return t;
}

}  // namespace cayley
