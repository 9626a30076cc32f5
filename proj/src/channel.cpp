#include "cfmimo/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "cfmimo/rng.hpp"

namespace cfmimo {

double lsf_gain(double s_m, const SystemConfig& cfg, double chi_db) {
  return db_to_lin(
      pathloss_db(s_m, cfg.f_c_GHz, cfg.scen.pathloss_exponent, chi_db));
}

Mat associate(const Mat& beta, double rho_lin) {
  Mat A(beta.rows, beta.cols, 0.0);
  for (int k = 0; k < beta.cols; ++k) {
    int best = 0;
    for (int m = 1; m < beta.rows; ++m)
      if (beta.at(m, k) > beta.at(best, k)) best = m;
    A.at(best, k) = 1.0;
    for (int m = 0; m < beta.rows; ++m)
      if (beta.at(m, k) >= rho_lin) A.at(m, k) = 1.0;
  }
  return A;
}

Mat draw_beta(const Topology& topo, const SystemConfig& cfg,
              std::uint64_t seed) {
  Rng rng(derive_seed(seed, "shadowing"));
  Mat beta(topo.M, topo.K);
  for (int m = 0; m < topo.M; ++m)
    for (int k = 0; k < topo.K; ++k) {
      double chi = rng.normal(0.0, cfg.scen.shadowing_std_db);
      beta.at(m, k) = lsf_gain(topo.s(m, k), cfg, chi);
    }
  return beta;
}

ChannelSet generate_channels(const SystemConfig& cfg, const Topology& topo,
                             std::uint64_t seed) {
  cfg.validate();
  ChannelSet cs;
  cs.M = cfg.M;
  cs.N = cfg.N;
  cs.K = cfg.K;
  cs.N_T = cfg.N_T;
  cs.beta = draw_beta(topo, cfg, seed);
  cs.A = associate(cs.beta, cfg.rho_lin());
  cs.noise_ap_W = cfg.noise_power_W();
  cs.noise_ue_W = cfg.noise_power_W();
  cs.H.reserve(cfg.N_T);
  const double inv_sqrt2 = 0.7071067811865475244;
  for (int t = 0; t < cfg.N_T; ++t) {
    Rng rng(derive_seed(seed, "ssf", static_cast<std::uint64_t>(t)));
    CMat Ht(cfg.N, cfg.M * cfg.K);
    for (int m = 0; m < cfg.M; ++m)
      for (int k = 0; k < cfg.K; ++k)
        for (int n = 0; n < cfg.N; ++n) {
          double re = rng.normal() * inv_sqrt2;
          double im = rng.normal() * inv_sqrt2;
          Ht.at(n, m * cfg.K + k) = Cx{re, im};
        }
    cs.H.push_back(std::move(Ht));
  }
  return cs;
}

ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t seed) {
  Topology topo = generate_topology(cfg, seed);
  return generate_channels(cfg, topo, seed);
}

}  // namespace cfmimo
