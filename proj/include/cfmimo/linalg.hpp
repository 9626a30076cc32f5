#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace cfmimo {

// Plain (re, im) pair. Kept free of std::complex so the differentiable path
// and the reference path run exactly the same floating point operations.
struct Cx {
  double re = 0.0;
  double im = 0.0;
};

inline Cx cx(double re, double im = 0.0) { return Cx{re, im}; }
inline Cx operator+(Cx a, Cx b) { return {a.re + b.re, a.im + b.im}; }
inline Cx operator-(Cx a, Cx b) { return {a.re - b.re, a.im - b.im}; }
inline Cx operator*(Cx a, Cx b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline Cx operator*(double s, Cx a) { return {s * a.re, s * a.im}; }
inline Cx conj(Cx a) { return {a.re, -a.im}; }
inline double abs2(Cx a) { return a.re * a.re + a.im * a.im; }
inline Cx operator/(Cx a, double s) { return {a.re / s, a.im / s}; }
inline Cx operator/(Cx a, Cx b) {
  double d = abs2(b);
  Cx n = a * conj(b);
  return {n.re / d, n.im / d};
}

// Row-major dense real matrix used for beta, association and power tables.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;
  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// Complex matrix held as separate re/im parts (row-major). The physical
// layer uses this split form so its arithmetic can mirror the tape ops.
struct CMatPair {
  Mat re, im;
  CMatPair() = default;
  CMatPair(int r, int c) : re(r, c), im(r, c) {}
  int rows() const { return re.rows; }
  int cols() const { return re.cols; }
};

// Column-major dense complex matrix, sized at construction.
struct CMat {
  int rows = 0, cols = 0;
  std::vector<Cx> a;
  CMat() = default;
  CMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}
  Cx& at(int r, int c) { return a[static_cast<size_t>(c) * rows + r]; }
  const Cx& at(int r, int c) const {
    return a[static_cast<size_t>(c) * rows + r];
  }
};

using CVec = std::vector<Cx>;

// conj(x) . y
inline Cx cdot(const CVec& x, const CVec& y) {
  Cx s;
  for (size_t n = 0; n < x.size(); ++n) s = s + conj(x[n]) * y[n];
  return s;
}

inline double norm2(const CVec& x) {
  double s = 0.0;
  for (const Cx& v : x) s += abs2(v);
  return s;
}

// In-place Cholesky A = L L^H of a Hermitian positive definite matrix.
// Only the lower triangle of A is read. Throws std::runtime_error if a
// pivot is not positive.
void cholesky_hermitian(CMat& A);

// Solve A X = B for Hermitian positive definite A (B overwritten with X).
void solve_hermitian(const CMat& A, CMat& B);
CVec solve_hermitian(const CMat& A, const CVec& b);

// Forward/back substitution with an already computed Cholesky factor L.
void solve_cholesky_factor(const CMat& L, CMat& B);

}  // namespace cfmimo
