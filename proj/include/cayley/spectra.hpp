#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "cayley/linalg.hpp"

namespace cayley {

// Constant-coefficient first-order operator D = sum_i B[i] d/dx_i acting on
// 4-component fields over R^4. On the flat Cayley plane span(e1..e4) the
// B[i] are the coefficients of the linearized calibration defect.
struct ConstantCoeffOperator {
  std::array<Mat4, 4> B{};

  // principal symbol sum_i xi[i] B[i]
  Mat4 symbol(const Vec4& xi) const;

  // |det symbol(xi)| >= tol for `samples` random unit covectors
  bool is_elliptic(std::uint64_t seed = 0x0e11u, int samples = 100,
                   double tol = 1e-6) const;
};

struct RateEntry {
  double lambda = 0.0;
  int d = 0;
};

inline bool operator==(const RateEntry& a, const RateEntry& b) {
  return a.lambda == b.lambda && a.d == b.d;
}

// Critical rates with index jumps d(lambda) over an open interval
// (lambda_min, lambda_max). Rates strictly increasing, d >= 1.
struct RateTable {
  std::vector<RateEntry> entries;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

// Linearization of the calibration defect at the flat plane: evaluate the
// defect of the graph of h * (linear normal field), centered-difference in h.
// Entries are snapped to the nearest rational with denominator <= 4 when
// within 1e-8. NonLinearityDetected if second differences exceed 1e-6.
ConstantCoeffOperator extract_operator_coeffs();

// Dimension of { v homogeneous polynomial of the given degree : Dv = 0 },
// by exact rational elimination on the coefficient space. Degree <= 6.
// A nonzero shuffle seed precomposes the coefficient space with a random
// invertible rational change of basis first; the dimension must not change.
int homogeneous_kernel_dim(const ConstantCoeffOperator& op, int degree,
                           std::uint64_t basis_shuffle_seed = 0);

// Dimension of rate-lambda homogeneous solutions, lambda in {-3,-2,-1},
// via the ansatz v = P(x)/|x|^(2m), P polynomial of degree lambda + 2m,
// m = 1..4, deduplicated by lifting every solution to the common
// denominator |x|^8 and taking the joint rank. AnsatzExhausted if the
// joint space is still growing at m = 4.
int negative_rate_kernel_dim(const ConstantCoeffOperator& op, int lambda,
                             std::uint64_t basis_shuffle_seed = 0);

// Table of integer rates in (lambda_min, lambda_max) with d >= 1. The
// polynomial methods cover rates -3..6, so the range must lie in [-4, 7].
// Requires an elliptic operator.
RateTable assemble_rate_table(const ConstantCoeffOperator& op,
                              double lambda_min, double lambda_max);

// assemble_rate_table for the extracted flat-plane operator, checked
// against the reference table {(-3,1), (-1,1), (0,4), (1,12)} restricted
// to the range. On mismatch raises RateTableMismatch with the computed
// table spelled out in the message.
RateTable flat_plane_rate_table(double lambda_min, double lambda_max);

// sum of d(lambda) over listed rates in (delta1, delta2); CriticalEndpoint
// if either endpoint is within 1e-9 of a listed rate
int index_change(const RateTable& table, double delta1, double delta2);

// (sigma + euler)/2 - self_intersection + dim_family; ParityError if
// sigma + euler is odd
int compact_index_formula(int sigma, int euler, int self_intersection,
                          int dim_family);

// dense coefficient matrix of D from degree-d fields to degree d-1 fields
// (components major, monomials in exponent-lexicographic order); used for
// floating cross-checks of the exact kernel dimensions
std::vector<std::vector<double>> operator_matrix(const ConstantCoeffOperator& op,
                                                 int degree);

// CSV with header "lambda,d", one row per entry, lambda in %.12e
std::string rate_table_to_csv(const RateTable& t);
RateTable rate_table_from_csv(const std::string& text, double lambda_min,
                              double lambda_max);

}  // namespace cayley
