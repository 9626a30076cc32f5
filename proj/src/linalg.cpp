#include "cfmimo/linalg.hpp"

#include <stdexcept>

namespace cfmimo {

void cholesky_hermitian(CMat& A) {
  const int n = A.rows;
  if (A.cols != n) throw std::invalid_argument("cholesky: matrix not square");
  for (int j = 0; j < n; ++j) {
    double d = A.at(j, j).re;
    for (int k = 0; k < j; ++k) d -= abs2(A.at(j, k));
    if (!(d > 0.0)) throw std::runtime_error("cholesky: matrix not positive definite");
    double ljj = std::sqrt(d);
    A.at(j, j) = cx(ljj);
    for (int i = j + 1; i < n; ++i) {
      Cx s = A.at(i, j);
      for (int k = 0; k < j; ++k) s = s - A.at(i, k) * conj(A.at(j, k));
      A.at(i, j) = s / ljj;
    }
  }
  // zero the strict upper triangle so L is usable as-is
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < j; ++i) A.at(i, j) = cx(0.0);
}

void solve_cholesky_factor(const CMat& L, CMat& B) {
  const int n = L.rows;
  if (B.rows != n) throw std::invalid_argument("solve: dimension mismatch");
  // forward substitution L y = b, then back substitution L^H x = y
  for (int c = 0; c < B.cols; ++c) {
    for (int i = 0; i < n; ++i) {
      Cx s = B.at(i, c);
      for (int k = 0; k < i; ++k) s = s - L.at(i, k) * B.at(k, c);
      B.at(i, c) = s / L.at(i, i).re;
    }
    for (int i = n - 1; i >= 0; --i) {
      Cx s = B.at(i, c);
      for (int k = i + 1; k < n; ++k) s = s - conj(L.at(k, i)) * B.at(k, c);
      B.at(i, c) = s / L.at(i, i).re;
    }
  }
}

void solve_hermitian(const CMat& A, CMat& B) {
  CMat L = A;
  cholesky_hermitian(L);
  solve_cholesky_factor(L, B);
}

CVec solve_hermitian(const CMat& A, const CVec& b) {
  CMat B(A.rows, 1);
  for (int i = 0; i < A.rows; ++i) B.at(i, 0) = b[i];
  solve_hermitian(A, B);
  CVec x(A.rows);
  for (int i = 0; i < A.rows; ++i) x[i] = B.at(i, 0);
  return x;
}

}  // namespace cfmimo
