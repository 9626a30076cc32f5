#pragma once

#include <vector>

#include "cfmimo/ad/tape.hpp"
#include "cfmimo/linalg.hpp"

namespace cfmimo::gnn {

// Bipartite-edge layout for the pilot net. AP-UE edge rows are m-major
// (row m*K + k), PS-UE edge rows are g-major (row g*K + k). Features are
// taken exactly as handed in (callers normalize the gains).
struct PilotGraph {
  int M = 0, K = 0, n_ps = 0;
  ad::Tensor f_apue;  // [M*K, 2]: (beta, a)
  ad::Tensor f_psue;  // [n_ps*K, 1]: lambda, or zeros with enhancement off
  std::vector<int> ue_of_apue;  // row -> k
  std::vector<int> ap_of_apue;  // row -> m
  std::vector<int> ue_of_psue;  // row -> k
  std::vector<int> ps_of_psue;  // row -> g
};

// Lambda is n_ps x K; pass feature_enhancement=false to zero the PS-UE
// features while keeping the edge set.
PilotGraph build_pilot_graph(const Mat& beta, const Mat& A, const Mat& Lambda,
                             bool feature_enhancement = true);

// Edge layout for the power net. One AN-vertex per associated (m,k) pair,
// listed m-major; every AN-vertex connects to all K UE-vertices, edge row
// an*K + k. The edge to the AN's own UE is the SIG edge, the rest are INF.
struct PowerGraph {
  int M = 0, K = 0, n_an = 0;
  std::vector<int> an_ap;  // [n_an] -> m
  std::vector<int> an_ue;  // [n_an] -> own UE
  ad::Tensor feat;         // [n_an*K, 2]: (Re ghat, Im ghat)
  std::vector<int> seg_an;        // [n_an*K] -> an
  std::vector<int> seg_ue;        // [n_an*K] -> k
  std::vector<int> sig_row;       // [n_an] -> edge row of the AN's SIG edge
  std::vector<int> sig_ue;        // [n_an] -> that edge's UE (= an_ue)
  std::vector<double> sig_mask;   // [n_an*K] 1.0 on SIG rows
  std::vector<double> inf_mask;   // [n_an*K] 1.0 on INF rows
  std::vector<double> w_inf_ue;   // [n_an*K] 1/(M*|A_m(an)|)
  std::vector<int> s_count;       // [K] |S_k|
  std::vector<int> a_count;       // [M] |A_m|
  std::vector<int> an_index;      // [M*K] (m,k) -> an, or -1
};

// Ghat is the estimated equivalent channel table, K x (M*K), as produced by
// estimated_equivalent_channels (scaled by the caller). Throws if some UE
// has no serving AP.
PowerGraph build_power_graph(const CMatPair& Ghat, const Mat& A);

}  // namespace cfmimo::gnn
