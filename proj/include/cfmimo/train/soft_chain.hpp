#pragma once

#include <vector>

#include "cfmimo/ad/tape.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"

namespace cfmimo::train {

// Differentiable relaxation of the downlink pipeline. Binary assignments
// make every stage here round identically to the plain evaluation path
// (shared kernels, same op composition), which the relaxation-consistency
// test pins at 1e-12.

// Frame-level quantities shared by all subframes: soft pilot length,
// pre-log factor, pilot cross-correlations and estimation coefficients.
// fixed_tau >= 0 pins the pilot length (schemes with a predetermined
// number of pilot symbols); otherwise the soft pilot-use count of x is used.
struct SoftFrame {
  ad::Val x;        // [n_ps, K]
  ad::Val tau;      // [1,1]
  ad::Val prelog;   // [1,1] max(1 - tau/tau_c, 0)
  bool prelog_clamped = false;
  ad::Val gram;     // [K,K] soft column inner products
  ad::Val scale;    // [1,1] sqrt(p_ul * tau)
  ad::Val c_masked; // [M,K] estimation coefficients, zero off association
  std::vector<std::vector<int>> assoc;  // served UEs per AP
};

SoftFrame soft_frame(ad::Tape& tp, ad::Val x, const ChannelSet& cs,
                     const SystemConfig& cfg, double fixed_tau = -1.0);

// Subframe-level estimates. Per-AP blocks cover that AP's K columns
// (hhat, [N,K]) or its served subset (v, [N, n_assoc]); APs serving nobody
// hold unset handles. ghat is the full estimated-equivalent-channel table
// in the binary-path layout [K, M*K].
struct SoftSubframe {
  std::vector<ad::Val> hhat_re, hhat_im;
  std::vector<ad::Val> v_re, v_im;
  ad::Val ghat_re, ghat_im;
};

SoftSubframe soft_estimate(ad::Tape& tp, const SoftFrame& fr,
                           const ChannelSet& cs, const SystemConfig& cfg,
                           int t, const CMatPair& noise);

// Net-SE of subframe t given powers P ([M,K] tape value), through the true
// channels of the subframe.
ad::Val soft_eta(ad::Tape& tp, const SoftFrame& fr, const SoftSubframe& sf,
                 ad::Val P, const ChannelSet& cs, int t);

// Power-net input features [n_an*K, 2] from the differentiable estimated
// channels; row an*K + j holds ghat(j, column of AN an) / sqrt(rho_lin).
// an_ap/an_ue follow the power graph's AN ordering.
ad::Val soft_power_features(ad::Tape& tp, const SoftSubframe& sf,
                            const std::vector<int>& an_ap,
                            const std::vector<int>& an_ue, int M, int K,
                            double rho_lin);

// One-call net-SE for subframe t with explicit pilot noise.
ad::Val soft_net_se(ad::Tape& tp, ad::Val x, ad::Val P, const ChannelSet& cs,
                    const SystemConfig& cfg, int t, const CMatPair& noise,
                    double fixed_tau = -1.0);

}  // namespace cfmimo::train
