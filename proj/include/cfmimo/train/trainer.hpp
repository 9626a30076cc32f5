#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/gnn/checkpoint.hpp"
#include "cfmimo/gnn/model.hpp"
#include "cfmimo/phy.hpp"

namespace cfmimo::train {

// Frames with independent topology/large-scale state; every frame carries
// its own N_T small-scale subframes. Deterministic in (cfg, seed).
struct Dataset {
  std::vector<ChannelSet> samples;
};

Dataset generate_dataset(const SystemConfig& cfg, int n_samples,
                         std::uint64_t seed);

struct TrainOptions {
  int epochs = 40;
  int batch = 50;          // samples per optimizer step
  double lr = 0.01;
  double weight = 0.2;     // binarization penalty weight
  int n_train = 300;
  std::uint64_t seed = 1;  // weights, shuffling, random features, pilot noise
  int fixed_tau = -1;      // >= 0: predetermined pilot length (and PS count)
  bool attention = true;
  bool feature_enhancement = true;
  std::vector<int> pilot_widths;  // empty: variant default
  std::vector<int> power_widths;  // empty: default (joint-pair training only)
};

struct CurveRow {
  int epoch = 0;
  double loss = 0.0;     // mean per-sample objective (minimized)
  double eta = 0.0;      // mean relaxed net-SE term
  double penalty = 0.0;  // mean weighted binarization penalty
};

struct TrainResult {
  gnn::Checkpoint ckpt;  // parameters of the best epoch
  std::vector<CurveRow> curve;
  int best_epoch = -1;
  double best_loss = 0.0;
};

// Single net with pilot + power heads; powers are reused across the frame's
// subframes.
TrainResult train_sts(const SystemConfig& cfg, const TrainOptions& opt);

// Pilot net per frame plus a weight-shared power net applied per subframe on
// the differentiable estimated channels; both nets take one joint Adam step
// per batch.
TrainResult train_dts(const SystemConfig& cfg, const TrainOptions& opt);

// "# cfmimo-curve v1" CSV: epoch,loss,eta,penalty
std::string curve_to_csv(const std::vector<CurveRow>& rows);

// sum_g sum_k ln(x) ln(1-x), entries clamped to [1e-6, 1-1e-6]. Zero at
// (clamped) binary points, maximal at 1/2; subtracted from the relaxed
// net-SE with the penalty weight during training.
ad::Val binarization_penalty(ad::Val x);

// ---- test-phase pipeline (binary re-evaluation, no relaxation) ---------

struct ModelEval {
  CompactAssignment ca;  // discretized assignment actually evaluated
  FrameEval fe;
};

// Inference forward -> column argmax -> compact -> full binary evaluation.
// lambda_seed fixes the frame's random PS-UE features, noise_seed the pilot
// noise streams. Models with a fixed PS count evaluate at that pilot length.
ModelEval eval_sts(gnn::PilotModel& model, const ChannelSet& cs,
                   const SystemConfig& cfg, std::uint64_t lambda_seed,
                   std::uint64_t noise_seed);
ModelEval eval_dts(gnn::PilotModel& pilot, gnn::PowerModel& power,
                   const ChannelSet& cs, const SystemConfig& cfg,
                   std::uint64_t lambda_seed, std::uint64_t noise_seed);

// Front half of the test-phase pipeline: soft outputs of one inference
// forward (power_out may be null; filled only for two-wide heads).
Mat pilot_soft_output(gnn::PilotModel& model, const ChannelSet& cs,
                      const SystemConfig& cfg, std::uint64_t lambda_seed,
                      Mat* power_out = nullptr);

}  // namespace cfmimo::train
