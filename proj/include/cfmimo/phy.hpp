#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/pilot.hpp"

namespace cfmimo {

// sqrt(beta_mk) * h_mk for one subframe, N x (M*K) split re/im.
CMatPair scaled_channel(const ChannelSet& cs, int t);

// CN(0, noise_W) entries, N x cols.
CMatPair draw_complex_noise(int N, int cols, double noise_W,
                            std::uint64_t seed);

// Correlated pilot observations y_mk for every (m,k), N x (M*K).
// X may be binary or soft (P x K); tau defaults to psi(X). For binary X an
// explicit tau must be >= psi(X) (a longer frame may carry unused pilots).
CMatPair received_pilot(const ChannelSet& cs, const Mat& X, double p_ul_W,
                        int t, const CMatPair& noise, double tau = -1.0);

// Per-link MMSE scaling c_mk (M x K) given the pilot Gram; hhat_mk = c_mk * y_mk.
// Scaling convention follows cfg.mmse_scaling (pilot energy p*tau or p).
Mat mmse_coefficients(const Mat& X, const Mat& beta, const SystemConfig& cfg,
                      double tau = -1.0);

// Channel estimates for associated links only; columns for k not in A_m are
// zero. hhat estimates the full channel sqrt(beta)*h.
CMatPair mmse_estimate(const ChannelSet& cs, const Mat& X, const CMatPair& Y,
                       const SystemConfig& cfg, double tau = -1.0);

// Closed-form NMSE of the estimate at link (m,k): 1 - beta^2 / (sum_j
// (x_k.x_j) beta_mk beta_mj + sigma^2 beta_mk / p_eff) with p_eff = p*tau or
// p depending on cfg.mmse_scaling.
double nmse(const Mat& X, const Mat& beta, int m, int k,
            const SystemConfig& cfg, double tau = -1.0);

// Regularized zero-forcing directions v_mk (unit norm), N x (M*K); zero
// columns for non-associated pairs.
CMatPair rzf_beamforming(const CMatPair& Hhat, const ChannelSet& cs,
                         const SystemConfig& cfg);

// True equivalent channels G[k, (m,i)] = (sqrt(beta_mk) h_mk)^H v_mi for
// i in A_m (zero columns otherwise), K x (M*K).
CMatPair equivalent_channels(const ChannelSet& cs, int t, const CMatPair& V);

// Estimated equivalent channels: (hhat_mk)^H v_mi when both i,k in A_m;
// sqrt(beta_mk) when i in A_m, k not in A_m; zero when i not in A_m.
CMatPair estimated_equivalent_channels(const CMatPair& Hhat,
                                       const CMatPair& V,
                                       const ChannelSet& cs);

struct SeResult {
  std::vector<double> gamma;  // per-UE SINR
  std::vector<double> rate;   // log2(1+gamma)
  double eta = 0.0;           // (1 - tau_p/tau_c) * sum rate
};

// Eq.-3 style SINR from equivalent channels G (K x M*K) and powers P (M x K,
// nonzero only on the association support).
SeResult sinr_and_net_se(const CMatPair& G, const Mat& P, const Mat& A,
                         double sigma2_ue, double tau_p, int tau_c);

double avg_net_se(const std::vector<double>& etas);

// Power allocation callback: subframe index + estimated equivalent channels
// -> M x K power matrix.
using PowerProvider =
    std::function<Mat(int t, const CMatPair& Ghat, const CMatPair& Hhat,
                      const CMatPair& V)>;

Mat equal_power(const Mat& A, double P_max_W);

struct FrameEval {
  std::vector<double> eta;  // per subframe
  double eta_bar = 0.0;
  std::vector<Mat> P;       // per subframe powers actually used
  double tau_p = 0.0;
};

// Full downlink evaluation of a binary assignment over all subframes of a
// ChannelSet. noise_seed fixes the pilot noise stream so rival assignments
// are compared on identical realizations.
FrameEval evaluate_assignment(const ChannelSet& cs, const SystemConfig& cfg,
                              const Mat& X, const PowerProvider& power,
                              std::uint64_t noise_seed, double tau = -1.0);

// Convenience: equal-power evaluation.
FrameEval evaluate_equal_power(const ChannelSet& cs, const SystemConfig& cfg,
                               const Mat& X, std::uint64_t noise_seed,
                               double tau = -1.0);

}  // namespace cfmimo
