#pragma once

#include <cstdint>
#include <vector>

#include "cfmimo/ad/tape.hpp"

namespace cfmimo::ad {

// Adam with bias correction. Slot layout follows the param list order given
// at init; step() must receive the same list.
struct Adam {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  std::vector<Tensor> m, v;

  void init(const std::vector<Tensor*>& params);
  void step(const std::vector<Tensor*>& params,
            const std::vector<const Tensor*>& grads);
};

// Per-feature batch normalization over the row axis. One instance per
// (layer, edge type); gamma/beta are trainable, running stats are EMA
// buffers used in inference mode.
struct BatchNorm {
  Tensor gamma, beta;      // [1, F]
  Tensor run_mean, run_var;  // [1, F]
  double momentum = 0.1;
  double eps = 1e-5;

  void init(int F);
};

// Training mode: batch statistics over rows (>= 2 required); running stats
// are updated as a side effect while the tape is built.
Val batch_norm_train(Val x, Val gamma, Val beta, BatchNorm& bn);
// Inference mode: running statistics enter as constants.
Val batch_norm_infer(Val x, const BatchNorm& bn);

// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(int rows, int cols, std::uint64_t seed);

}  // namespace cfmimo::ad
