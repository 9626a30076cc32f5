#include "cfmimo/train/trainer.hpp"

#include "cfmimo/rng.hpp"

namespace cfmimo::train {

Dataset generate_dataset(const SystemConfig& cfg, int n_samples,
                         std::uint64_t seed) {
  Dataset ds;
  ds.samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i)
    ds.samples.push_back(
        generate_channels(cfg, derive_seed(seed, "sample", i)));
  return ds;
}

}  // namespace cfmimo::train
