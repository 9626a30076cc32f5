#pragma once

#include <cstddef>

namespace cfmimo::kern {

// Shared inner kernels. The reference physical-layer path and the tape ops
// both call these, so the two routes round identically (the relaxation
// consistency check compares them at 1e-12). Accumulation order: for each
// output element, the inner index ascends.

// 1/ln(2); both net-SE routes must scale by the identical constant
inline constexpr double kInvLn2 = 1.4426950408889634073599246810019;

// C[n x p] = A[n x m] * B[m x p], all row-major, C zero-initialized inside
inline void matmul(const double* A, const double* B, double* C, int n, int m,
                   int p) {
  for (int i = 0; i < n * p; ++i) C[i] = 0.0;
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < m; ++j) {
      const double a = A[static_cast<size_t>(r) * m + j];
      const double* brow = B + static_cast<size_t>(j) * p;
      double* crow = C + static_cast<size_t>(r) * p;
      for (int c = 0; c < p; ++c) crow[c] += a * brow[c];
    }
}

// C[n x p] = A^T[n x m] * B[m x p] with A stored [m x n] row-major
inline void matmul_tA(const double* A, const double* B, double* C, int n,
                      int m, int p) {
  for (int i = 0; i < n * p; ++i) C[i] = 0.0;
  for (int j = 0; j < m; ++j) {
    const double* arow = A + static_cast<size_t>(j) * n;
    const double* brow = B + static_cast<size_t>(j) * p;
    for (int r = 0; r < n; ++r) {
      const double a = arow[r];
      double* crow = C + static_cast<size_t>(r) * p;
      for (int c = 0; c < p; ++c) crow[c] += a * brow[c];
    }
  }
}

// C[n x p] = A[n x m] * B^T with B stored [p x m] row-major
inline void matmul_tB(const double* A, const double* B, double* C, int n,
                      int m, int p) {
  for (int r = 0; r < n; ++r) {
    const double* arow = A + static_cast<size_t>(r) * m;
    double* crow = C + static_cast<size_t>(r) * p;
    for (int c = 0; c < p; ++c) {
      const double* brow = B + static_cast<size_t>(c) * m;
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += arow[j] * brow[j];
      crow[c] = acc;
    }
  }
}

}  // namespace cfmimo::kern
