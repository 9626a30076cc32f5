#pragma once

#include <cstdint>
#include <vector>

#include "cfmimo/config.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

// Large-scale gain (linear) for one AP-UE link.
double lsf_gain(double s_m, const SystemConfig& cfg, double chi_db);

// Association: for each UE, the strongest AP plus every AP whose gain clears
// the threshold rho_lin. Returns a 0/1 matrix of shape M x K with every
// column sum >= 1.
Mat associate(const Mat& beta, double rho_lin);

// One frame of channel state: large-scale gains, association, and N_T
// independent small-scale fading draws. H[t] stores h_mk in column
// (m*K + k) of an N x (M*K) complex matrix; the full channel is
// sqrt(beta_mk) * h_mk.
struct ChannelSet {
  int M = 0, N = 0, K = 0, N_T = 0;
  Mat beta;                // M x K linear gains
  Mat A;                   // M x K 0/1 association
  std::vector<CMat> H;     // N_T matrices, each N x (M*K)
  double noise_ap_W = 0.0; // sigma^2_AP
  double noise_ue_W = 0.0; // sigma^2_UE

  const Cx* h(int t, int m, int k) const {
    return &H[t].at(0, m * K + k);
  }
};

// beta from a topology plus iid log-normal shadowing drawn from `seed`.
Mat draw_beta(const Topology& topo, const SystemConfig& cfg,
              std::uint64_t seed);

// Full frame draw: topology -> shadowing -> beta -> association -> N_T
// Rayleigh subframes. Deterministic in (cfg, seed).
ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed);

// As above but for a fixed topology (used when sweeping over fading only).
ChannelSet generate_channels(const SystemConfig& cfg, const Topology& topo,
                             std::uint64_t seed);

}  // namespace cfmimo
