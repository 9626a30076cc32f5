#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmimo/ad/nn.hpp"
#include "cfmimo/ad/tape.hpp"
#include "cfmimo/gnn/graphs.hpp"

namespace cfmimo::gnn {

// Architecture switches shared by checkpoints and builders. widths lists the
// output width of every layer (the last entry is the head width).
struct GnnSpec {
  std::vector<int> widths;
  bool attention = true;            // gated same-PS aggregation
  bool feature_enhancement = true;  // lambda features on PS-UE edges
  int n_ps = 0;                     // 0: one pilot slot per UE (K)
};

inline GnnSpec pilot_default_spec() { return {{8, 8, 8, 8, 8, 8, 1}, true, true, 0}; }
inline GnnSpec sts_default_spec() { return {{8, 8, 8, 8, 8, 8, 2}, true, true, 0}; }
inline GnnSpec power_default_spec() { return {{16, 16, 16, 2}, true, true, 0}; }

// All weight tensors are stored input-width x output-width; edge
// representations multiply from the left as [E, F_in] * W.
struct PilotLayer {
  ad::Tensor Q_AP1, U_AP1, U_AP2;
  ad::Tensor Q_PS1, U_PS1, U_PS2, U_PS3, U_PS4, U_PS5;
  ad::BatchNorm bn_apue, bn_psue;
};

struct PilotModel {
  GnnSpec spec;
  int in_apue = 2, in_psue = 1;
  std::vector<PilotLayer> layers;

  void init(const GnnSpec& s, std::uint64_t seed);
  // trainable tensors in a fixed order (attention weights only when used;
  // batch-norm scale/shift on hidden layers)
  std::vector<ad::Tensor*> trainable();
  std::vector<const ad::Tensor*> trainable() const;
};

struct PowerLayer {
  ad::Tensor Q_AN1, U_AN1, U_AN2, U_AN3;
  ad::Tensor Q_INF1, U_INF1, U_INF2, U_INF3, U_INF4;
  ad::BatchNorm bn_sig, bn_inf;
};

struct PowerModel {
  GnnSpec spec;
  int in_feat = 2;
  std::vector<PowerLayer> layers;
  ad::Tensor u_out;  // final width x 1 projection to the power logit

  void init(const GnnSpec& s, std::uint64_t seed);
  std::vector<ad::Tensor*> trainable();
  std::vector<const ad::Tensor*> trainable() const;
};

// Values registered on the tape for each tensor of trainable(), same order.
// Empty when the forward ran in inference mode (constants).
struct ForwardOpts {
  bool train = false;  // batch-norm batch stats + parameters as tape params
};

struct PilotForwardResult {
  ad::Val x_soft;             // [n_ps, K] column-stochastic
  ad::Val power;              // [M, K]; set only for 2-wide heads (joint net)
  bool has_power = false;
  std::vector<ad::Val> params;
};

// Runs the pilot net (or the joint pilot+power net when the head width is 2)
// over one graph. P_max_W is only used by the power head.
PilotForwardResult pilot_forward(ad::Tape& tp, PilotModel& model,
                                 const PilotGraph& g, double P_max_W,
                                 const ForwardOpts& opts = {});

struct PowerForwardResult {
  ad::Val P;  // [M, K], zero off the association support
  std::vector<ad::Val> params;
};

PowerForwardResult power_forward(ad::Tape& tp, PowerModel& model,
                                 const PowerGraph& g, double P_max_W,
                                 const ForwardOpts& opts = {});

// As above but with the edge features supplied as a tape value [n_an*K, 2]
// (row an*K + j holds the channel entry of AN an seen at UE j). Lets the
// joint training chain backpropagate through the estimated channels feeding
// the power net; the graph's own feature tensor is ignored.
PowerForwardResult power_forward(ad::Tape& tp, PowerModel& model,
                                 const PowerGraph& g, ad::Val feat,
                                 double P_max_W, const ForwardOpts& opts = {});

// Attention scores c_(j,k) as a [K*K, F_out] tensor (j-major) from AP-UE
// representations [M*K, F_in]. Exposed with an activation switch so the
// first-layer similarity form can be inspected directly.
ad::Val attention_scores(ad::Val d_apue, ad::Val U4, ad::Val U5, int M, int K,
                         bool apply_tanh = true);

}  // namespace cfmimo::gnn
