#pragma once

#include <string>
#include <vector>

#include "cfmimo/linalg.hpp"

namespace cfmimo {

// Pilot assignments are P x K matrices: row g = pilot sequence g, column
// k = UE k. Binary assignments have exactly one 1 per column; soft
// assignments have nonnegative columns summing to 1.
struct CompactAssignment {
  int tau_p = 0;
  Mat X_o;  // tau_p x K, binary, no all-zero rows
};

bool is_binary_assignment(const Mat& X, double tol = 0.0);

// Number of pilots in use. Binary: count of nonzero rows. Soft:
// sum_g (1 - prod_k (1 - x_gk)), the smooth row-occupancy count.
double psi(const Mat& X);
// Gradient of soft psi, same shape as X (prefix/suffix products, no division).
Mat psi_grad(const Mat& X);

// Drop all-zero rows, keep row order. Throws if some column has no 1.
CompactAssignment compact(const Mat& X);
// Pad X_o with zero rows back to n_rows (inverse of compact on valid inputs).
Mat expand(const CompactAssignment& ca, int n_rows);

// Column-wise argmax; ties resolved to the smallest pilot index.
Mat discretize(const Mat& X_soft);

// {"K":..,"X":[[..]]} round trip
std::string assignment_to_json(const Mat& X);
Mat assignment_from_json(const std::string& text);
// {"tau_p":..,"X_o":[[..]]} round trip
std::string compact_to_json(const CompactAssignment& ca);
CompactAssignment compact_from_json(const std::string& text);

// Index maps for relabeling tests. sigma[i] = source index: the permuted
// object's element i is the original element sigma[i].
struct PermutationSpec {
  std::vector<int> ue;  // size K
  std::vector<int> ap;  // size M
  std::vector<int> ps;  // size P
};

std::vector<int> random_permutation(int n, std::uint64_t seed);
std::vector<int> identity_permutation(int n);

// out[i][j] = in[row_sigma[i]][col_sigma[j]]
Mat permute_rows_cols(const Mat& in, const std::vector<int>& row_sigma,
                      const std::vector<int>& col_sigma);

// AN axis is m-major over all (m,k) pairs: index m*K+k. Under an AP relabel
// sigma_ap and UE relabel sigma_ue the AN index (m,k) pulls from
// (sigma_ap[m], sigma_ue[k]).
std::vector<int> an_permutation(const std::vector<int>& sigma_ap,
                                const std::vector<int>& sigma_ue, int K);

}  // namespace cfmimo
