#include <stdexcept>

#include "cfmimo/solvers.hpp"

namespace cfmimo::solvers {

OracleResult exhaustive_oracle(const ChannelSet& cs, const SystemConfig& cfg,
                               PowerRule rule, std::uint64_t noise_seed) {
  const int K = cs.K;
  if (K < 1) throw std::invalid_argument("oracle: no UEs");
  if (K > 7) throw std::invalid_argument("oracle: K > 7 not enumerable");

  PowerProvider prov;
  if (rule == PowerRule::equal) {
    Mat A = cs.A;
    double P_max = cfg.P_max_W();
    prov = [A, P_max](int, const CMatPair&, const CMatPair&, const CMatPair&) {
      return equal_power(A, P_max);
    };
  } else {
    prov = wmmse_provider(cs.A, cfg);
  }

  OracleResult best;
  best.eta_bar = -1.0;
  std::vector<int> label(K, 0);

  // restricted growth strings: label[0] = 0, label[i] <= max(prefix) + 1;
  // every set partition appears exactly once, labels already canonical
  auto recurse = [&](auto&& self, int pos, int max_used) -> void {
    if (pos == K) {
      CompactAssignment ca = labels_to_assignment(label);
      FrameEval fe =
          evaluate_assignment(cs, cfg, ca.X_o, prov, noise_seed);
      ++best.n_candidates;
      if (fe.eta_bar > best.eta_bar) {
        best.eta_bar = fe.eta_bar;
        best.assignment = ca;
        best.eval = fe;
      }
      return;
    }
    for (int g = 0; g <= max_used + 1 && g < K; ++g) {
      label[pos] = g;
      self(self, pos + 1, g > max_used ? g : max_used);
    }
  };
  label[0] = 0;
  recurse(recurse, 1, 0);
  return best;
}

}  // namespace cfmimo::solvers
