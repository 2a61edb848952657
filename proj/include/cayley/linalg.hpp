#pragma once
#include <array>
#include <cmath>
#include <cstddef>

namespace cayley {

using Vec4 = std::array<double, 4>;
using Vec7 = std::array<double, 7>;
using Vec8 = std::array<double, 8>;
using Mat4 = std::array<std::array<double, 4>, 4>;

template <std::size_t N>
inline double dot(const std::array<double, N>& a, const std::array<double, N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t N>
inline double norm(const std::array<double, N>& a) {
  return std::sqrt(dot(a, a));
}

template <std::size_t N>
inline std::array<double, N> operator+(std::array<double, N> a,
                                       const std::array<double, N>& b) {
  for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
  return a;
}

template <std::size_t N>
inline std::array<double, N> operator-(std::array<double, N> a,
                                       const std::array<double, N>& b) {
  for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
  return a;
}

template <std::size_t N>
inline std::array<double, N> operator*(double c, std::array<double, N> a) {
  for (std::size_t i = 0; i < N; ++i) a[i] *= c;
  return a;
}

template <std::size_t N>
inline void axpy(double c, const std::array<double, N>& x, std::array<double, N>& y) {
  for (std::size_t i = 0; i < N; ++i) y[i] += c * x[i];
}

inline Vec8 zero8() { return Vec8{0, 0, 0, 0, 0, 0, 0, 0}; }

inline Vec8 basis8(int i) {
  Vec8 v = zero8();
  v[static_cast<std::size_t>(i)] = 1.0;
  return v;
}

// 4 row vectors in R^8 (frames, tangent/normal bundles)
using Frame48 = std::array<Vec8, 4>;

inline double det3(const std::array<std::array<double, 3>, 3>& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline double det4(const Mat4& m) {
  double d = 0.0;
  for (int c0 = 0; c0 < 4; ++c0) {
    std::array<std::array<double, 3>, 3> minor{};
    for (int r = 1; r < 4; ++r) {
      int cc = 0;
      for (int c = 0; c < 4; ++c)
        if (c != c0) minor[r - 1][cc++] = m[r][c];
    }
    d += ((c0 % 2 == 0) ? 1.0 : -1.0) * m[0][c0] * det3(minor);
  }
  return d;
}

}  // namespace cayley
