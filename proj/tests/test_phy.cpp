#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cfmimo/phy.hpp"
#include "cfmimo/rng.hpp"

using namespace cfmimo;

namespace {

Mat from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  int R = (int)rows.size();
  int C = (int)rows.begin()->size();
  Mat m(R, C);
  int r = 0;
  for (auto& row : rows) {
    int c = 0;
    for (double v : row) m.at(r, c++) = v;
    ++r;
  }
  return m;
}

// config with sigma^2 = 0.1 W and p_ul = 0.4 W for hand-sized numbers
SystemConfig toy_config(int M, int N, int K) {
  SystemConfig cfg;
  cfg.M = M;
  cfg.N = N;
  cfg.K = K;
  cfg.N_T = 1;
  cfg.B_Hz = 1.0;
  cfg.N0_dBm_per_Hz = 20.0;
  cfg.N_F_dB = 0.0;
  cfg.p_ul_dBm = watt_to_dbm(0.4);
  return cfg;
}

ChannelSet toy_channels(int M, int N, int K, int N_T, const Mat& beta,
                        const Mat& A, std::uint64_t seed) {
  ChannelSet cs;
  cs.M = M;
  cs.N = N;
  cs.K = K;
  cs.N_T = N_T;
  cs.beta = beta;
  cs.A = A;
  cs.noise_ap_W = 0.1;
  cs.noise_ue_W = 0.1;
  Rng r(seed);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  cs.H.assign(N_T, CMat(N, M * K));
  for (int t = 0; t < N_T; ++t)
    for (int c = 0; c < M * K; ++c)
      for (int n = 0; n < N; ++n)
        cs.H[t].at(n, c) = Cx{r.normal() * inv_sqrt2, r.normal() * inv_sqrt2};
  return cs;
}

}  // namespace

TEST_CASE("pilot observation without contamination or noise") {
  const int M = 2, N = 2, K = 3;
  Mat beta = from_rows({{2.0, 0.5, 1.0}, {0.3, 1.5, 0.8}});
  Mat A(M, K, 1.0);
  auto cs = toy_channels(M, N, K, 1, beta, A, 11);
  Mat X = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CMatPair zero_noise(N, M * K);
  const double p = 0.4;
  auto Y = received_pilot(cs, X, p, 0, zero_noise);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        double scale = std::sqrt(p * 3.0) * std::sqrt(beta.at(m, k));
        const Cx& h = cs.H[0].at(n, m * K + k);
        CHECK(Y.re.at(n, m * K + k) ==
              doctest::Approx(scale * h.re).epsilon(1e-12));
        CHECK(Y.im.at(n, m * K + k) ==
              doctest::Approx(scale * h.im).epsilon(1e-12));
      }
}

TEST_CASE("pilot observation sums contaminating users") {
  const int M = 1, N = 1, K = 3;
  Mat beta = from_rows({{2.0, 0.5, 1.0}});
  Mat A(M, K, 1.0);
  auto cs = toy_channels(M, N, K, 1, beta, A, 12);
  // UEs 0 and 2 share a pilot
  Mat X = from_rows({{1, 0, 1}, {0, 1, 0}});
  CMatPair zero_noise(N, M * K);
  const double p = 0.4;
  auto Y = received_pilot(cs, X, p, 0, zero_noise);
  const double s = std::sqrt(p * 2.0);
  Cx h0 = cs.H[0].at(0, 0), h1 = cs.H[0].at(0, 1), h2 = cs.H[0].at(0, 2);
  Cx want0 = s * (std::sqrt(2.0) * h0 + std::sqrt(1.0) * h2);
  Cx want1 = s * (std::sqrt(0.5) * h1);
  CHECK(Y.re.at(0, 0) == doctest::Approx(want0.re).epsilon(1e-12));
  CHECK(Y.im.at(0, 0) == doctest::Approx(want0.im).epsilon(1e-12));
  CHECK(Y.re.at(0, 1) == doctest::Approx(want1.re).epsilon(1e-12));
  // observation for UE2 equals the one for its pilot partner UE0
  CHECK(Y.re.at(0, 2) == doctest::Approx(want0.re).epsilon(1e-12));
}

TEST_CASE("explicit frame length and its validity window") {
  const int M = 1, N = 1, K = 2;
  Mat beta = from_rows({{1.0, 1.0}});
  Mat A(M, K, 1.0);
  auto cs = toy_channels(M, N, K, 1, beta, A, 13);
  Mat X = from_rows({{1, 0}, {0, 1}});
  CMatPair zero_noise(N, M * K);
  auto Y2 = received_pilot(cs, X, 0.4, 0, zero_noise);          // tau = 2
  auto Y5 = received_pilot(cs, X, 0.4, 0, zero_noise, 5.0);     // longer frame
  CHECK(Y5.re.at(0, 0) ==
        doctest::Approx(Y2.re.at(0, 0) * std::sqrt(5.0 / 2.0)).epsilon(1e-12));
  CHECK_THROWS(received_pilot(cs, X, 0.4, 0, zero_noise, 1.0));  // below use count
}

TEST_CASE("channel estimate error matches the closed form") {
  const int M = 2, N = 1, K = 3;
  Mat beta = from_rows({{2.0, 0.5, 1.0}, {0.3, 1.5, 0.8}});
  Mat A(M, K, 1.0);
  SystemConfig cfg = toy_config(M, N, K);
  REQUIRE(cfg.noise_power_W() == doctest::Approx(0.1).epsilon(1e-12));
  REQUIRE(cfg.p_ul_W() == doctest::Approx(0.4).epsilon(1e-12));

  // single-pilot frame (tau_p = 1): the error formula with pilot energy = p
  Mat Xall = from_rows({{1, 1, 1}});
  CHECK(nmse(Xall, beta, 0, 0, cfg) ==
        doctest::Approx(0.4666666666666667).epsilon(1e-9));
  CHECK(nmse(Xall, beta, 1, 2, cfg) ==
        doctest::Approx(0.7192982456140351).epsilon(1e-9));

  // two pilots, UEs 0 and 2 share; estimator-consistent energy p * tau
  Mat X2 = from_rows({{1, 0, 1}, {0, 1, 0}});
  CHECK(nmse(X2, beta, 0, 0, cfg) == doctest::Approx(0.36).epsilon(1e-9));
  CHECK(nmse(X2, beta, 0, 1, cfg) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(nmse(X2, beta, 1, 2, cfg) ==
        doctest::Approx(0.346938775510204).epsilon(1e-9));

  // orthogonal pilots: small error, below any contaminated value
  Mat X3 = from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(nmse(X3, beta, 0, 0, cfg) == doctest::Approx(0.04).epsilon(1e-9));
  CHECK(nmse(X3, beta, 0, 0, cfg) < nmse(X2, beta, 0, 0, cfg));
  CHECK(nmse(X2, beta, 0, 0, cfg) < nmse(Xall, beta, 0, 0, cfg));
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      double v = nmse(X2, beta, m, k, cfg);
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }

  // Monte Carlo against the closed form through the actual pipeline
  const int draws = 10000;
  for (auto& Xcase : {Xall, X2}) {
    auto cs = toy_channels(M, N, K, draws, beta, A, 77);
    std::vector<double> err(M * K, 0.0);
    for (int t = 0; t < draws; ++t) {
      auto noise = draw_complex_noise(N, M * K, 0.1,
                                      derive_seed(500, "mc_noise", t));
      auto Y = received_pilot(cs, Xcase, 0.4, t, noise);
      auto Hhat = mmse_estimate(cs, Xcase, Y, cfg);
      for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
          const Cx h = cs.H[t].at(0, m * K + k);
          const double sb = std::sqrt(beta.at(m, k));
          const double er = sb * h.re - Hhat.re.at(0, m * K + k);
          const double ei = sb * h.im - Hhat.im.at(0, m * K + k);
          err[m * K + k] += er * er + ei * ei;
        }
    }
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k) {
        double mc = err[m * K + k] / draws / beta.at(m, k);
        CHECK(mc == doctest::Approx(nmse(Xcase, beta, m, k, cfg)).epsilon(0.02));
      }
  }
}

TEST_CASE("estimates vanish off the association support") {
  const int M = 2, N = 2, K = 2;
  Mat beta = from_rows({{1.0, 0.2}, {0.3, 1.5}});
  Mat A = from_rows({{1, 0}, {0, 1}});
  auto cs = toy_channels(M, N, K, 1, beta, A, 14);
  SystemConfig cfg = toy_config(M, N, K);
  Mat X = from_rows({{1, 0}, {0, 1}});
  auto noise = draw_complex_noise(N, M * K, 0.1, 9);
  auto Y = received_pilot(cs, X, 0.4, 0, noise);
  auto Hhat = mmse_estimate(cs, X, Y, cfg);
  for (int n = 0; n < N; ++n) {
    CHECK(Hhat.re.at(n, 0 * K + 1) == 0.0);
    CHECK(Hhat.im.at(n, 0 * K + 1) == 0.0);
    CHECK(Hhat.re.at(n, 1 * K + 0) == 0.0);
    CHECK(Hhat.re.at(n, 0 * K + 0) != 0.0);
  }
}

TEST_CASE("beamforming directions: known two-user solution") {
  const int M = 1, N = 2, K = 2;
  Mat beta = from_rows({{1.0, 1.0}});
  Mat A(M, K, 1.0);
  ChannelSet cs;
  cs.M = M;
  cs.N = N;
  cs.K = K;
  cs.N_T = 1;
  cs.beta = beta;
  cs.A = A;
  cs.noise_ap_W = 0.1;
  cs.noise_ue_W = 0.1;
  SystemConfig cfg = toy_config(M, N, K);

  CMatPair Hhat(N, M * K);
  // hhat_0 = [1+0.5i, -0.3+0.2i], hhat_1 = [0.2-0.1i, 0.8+0.4i]
  Hhat.re.at(0, 0) = 1.0;  Hhat.im.at(0, 0) = 0.5;
  Hhat.re.at(1, 0) = -0.3; Hhat.im.at(1, 0) = 0.2;
  Hhat.re.at(0, 1) = 0.2;  Hhat.im.at(0, 1) = -0.1;
  Hhat.re.at(1, 1) = 0.8;  Hhat.im.at(1, 1) = 0.4;
  auto V = rzf_beamforming(Hhat, cs, cfg);
  CHECK(V.re.at(0, 0) == doctest::Approx(0.9042547733842216).epsilon(1e-9));
  CHECK(V.im.at(0, 0) == doctest::Approx(0.3886408086746227).epsilon(1e-9));
  CHECK(V.re.at(1, 0) == doctest::Approx(-0.11153047489558711).epsilon(1e-9));
  CHECK(V.im.at(1, 0) == doctest::Approx(-0.13726827679456874).epsilon(1e-9));
  CHECK(V.re.at(0, 1) == doctest::Approx(0.0710619014552845).epsilon(1e-9));
  CHECK(V.im.at(0, 1) == doctest::Approx(0.23835346113126687).epsilon(1e-9));
  CHECK(V.re.at(1, 1) == doctest::Approx(0.8919749088918527).epsilon(1e-9));
  CHECK(V.im.at(1, 1) == doctest::Approx(0.37751635148119905).epsilon(1e-9));

  // unassociated users enter the regularizer as raw gains
  cs.A = from_rows({{1, 0}});
  cs.beta = from_rows({{1.0, 0.37}});
  auto V2 = rzf_beamforming(Hhat, cs, cfg);
  CHECK(V2.re.at(0, 0) == doctest::Approx(0.8512565307587486).epsilon(1e-9));
  CHECK(V2.im.at(0, 0) == doctest::Approx(0.4256282653793743).epsilon(1e-9));
  CHECK(V2.re.at(1, 0) == doctest::Approx(-0.25537695922762454).epsilon(1e-9));
  CHECK(V2.im.at(1, 0) == doctest::Approx(0.1702513061517498).epsilon(1e-9));
  CHECK(V2.re.at(0, 1) == 0.0);
  CHECK(V2.im.at(1, 1) == 0.0);
}

TEST_CASE("beamforming columns are unit vectors on the support") {
  const int M = 3, N = 2, K = 5;
  SystemConfig cfg = toy_config(M, N, K);
  Rng r(21);
  Mat beta(M, K);
  for (double& b : beta.a) b = 0.2 + std::abs(r.normal());
  Mat A = associate(beta, 0.5);
  auto cs = toy_channels(M, N, K, 1, beta, A, 15);
  Mat X = from_rows(
      {{1, 0, 1, 0, 0}, {0, 1, 0, 0, 1}, {0, 0, 0, 1, 0}});
  auto noise = draw_complex_noise(N, M * K, 0.1, 10);
  auto Y = received_pilot(cs, X, 0.4, 0, noise);
  auto Hhat = mmse_estimate(cs, X, Y, cfg);
  auto V = rzf_beamforming(Hhat, cs, cfg);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      double n2 = 0.0;
      for (int n = 0; n < N; ++n)
        n2 += V.re.at(n, m * K + k) * V.re.at(n, m * K + k) +
              V.im.at(n, m * K + k) * V.im.at(n, m * K + k);
      if (cs.A.at(m, k) != 0.0)
        CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
      else
        CHECK(n2 == 0.0);
    }
}

TEST_CASE("effective rate from equivalent channels, frozen values") {
  // one AP, two served UEs; gains picked by hand
  const int M = 1, K = 2;
  CMatPair G(K, M * K);
  // G[k, stream i] with values (stream, listener):
  // (0,0)=1.2+0.3i (0,1)=0.2-0.1i (1,0)=-0.4+0.5i (1,1)=0.9-0.2i
  G.re.at(0, 0) = 1.2;  G.im.at(0, 0) = 0.3;
  G.re.at(1, 0) = 0.2;  G.im.at(1, 0) = -0.1;
  G.re.at(0, 1) = -0.4; G.im.at(0, 1) = 0.5;
  G.re.at(1, 1) = 0.9;  G.im.at(1, 1) = -0.2;
  Mat P = from_rows({{0.7, 0.5}});
  Mat A(M, K, 1.0);
  auto se = sinr_and_net_se(G, P, A, 0.05, 2.0, 10);
  CHECK(se.gamma[0] == doctest::Approx(4.199999999999998).epsilon(1e-12));
  CHECK(se.gamma[1] == doctest::Approx(5.000000000000001).epsilon(1e-12));
  CHECK(se.eta == doctest::Approx(3.970779299179909).epsilon(1e-12));
  CHECK_THROWS(sinr_and_net_se(G, P, A, 0.05, 11.0, 10));
}

TEST_CASE("true and estimated equivalent channels") {
  const int M = 2, N = 2, K = 2;
  Mat beta = from_rows({{1.0, 0.2}, {0.3, 1.5}});
  Mat A = from_rows({{1, 0}, {0, 1}});
  auto cs = toy_channels(M, N, K, 1, beta, A, 44);
  SystemConfig cfg = toy_config(M, N, K);
  Mat X = from_rows({{1, 0}, {0, 1}});
  auto noise = draw_complex_noise(N, M * K, 0.1, 3);
  auto Y = received_pilot(cs, X, 0.4, 0, noise);
  auto Hhat = mmse_estimate(cs, X, Y, cfg);
  auto V = rzf_beamforming(Hhat, cs, cfg);
  auto G = equivalent_channels(cs, 0, V);
  // manual check of one entry: G[k=1, (m=0, i=0)] = (sqrt(b_01) h_01)^H v_00
  {
    CVec hk(N), vi(N);
    for (int n = 0; n < N; ++n) {
      const Cx h = cs.H[0].at(n, 0 * K + 1);
      hk[n] = Cx{std::sqrt(0.2) * h.re, std::sqrt(0.2) * h.im};
      vi[n] = Cx{V.re.at(n, 0), V.im.at(n, 0)};
    }
    Cx want = cdot(hk, vi);
    CHECK(G.re.at(1, 0) == doctest::Approx(want.re).epsilon(1e-12));
    CHECK(G.im.at(1, 0) == doctest::Approx(want.im).epsilon(1e-12));
  }
  // streams for unassociated pairs carry no gain
  CHECK(G.re.at(0, 0 * K + 1) == 0.0);
  CHECK(G.re.at(1, 1 * K + 0) == 0.0);

  auto Ghat = estimated_equivalent_channels(Hhat, V, cs);
  // (i,k) both in A_m: hhat^H v; here i=k=0 at m=0
  {
    CVec hk(N), vi(N);
    for (int n = 0; n < N; ++n) {
      hk[n] = Cx{Hhat.re.at(n, 0), Hhat.im.at(n, 0)};
      vi[n] = Cx{V.re.at(n, 0), V.im.at(n, 0)};
    }
    Cx want = cdot(hk, vi);
    CHECK(Ghat.re.at(0, 0) == doctest::Approx(want.re).epsilon(1e-12));
  }
  // i in A_m, k not: statistical fallback sqrt(beta_mk), real
  CHECK(Ghat.re.at(1, 0 * K + 0) == doctest::Approx(std::sqrt(0.2)));
  CHECK(Ghat.im.at(1, 0 * K + 0) == 0.0);
  // i not in A_m: zero column
  CHECK(Ghat.re.at(0, 0 * K + 1) == 0.0);
  CHECK(Ghat.re.at(1, 0 * K + 1) == 0.0);
}

TEST_CASE("equal power split") {
  Mat A = from_rows({{1, 0}, {1, 1}});
  Mat P = equal_power(A, 2.0);
  CHECK(P.at(0, 0) == 2.0);
  CHECK(P.at(0, 1) == 0.0);
  CHECK(P.at(1, 0) == 1.0);
  CHECK(P.at(1, 1) == 1.0);
}

TEST_CASE("frame evaluation is deterministic and noise-seeded") {
  SystemConfig cfg = toy_config(2, 2, 3);
  cfg.N_T = 4;
  cfg.tau_c = 20;
  Mat beta = from_rows({{2.0, 0.5, 1.0}, {0.3, 1.5, 0.8}});
  Mat A(2, 3, 1.0);
  auto cs = toy_channels(2, 2, 3, 4, beta, A, 88);
  Mat X = from_rows({{1, 0, 1}, {0, 1, 0}});
  auto r1 = evaluate_equal_power(cs, cfg, X, 123);
  auto r2 = evaluate_equal_power(cs, cfg, X, 123);
  auto r3 = evaluate_equal_power(cs, cfg, X, 124);
  REQUIRE((int)r1.eta.size() == 4);
  CHECK(r1.eta_bar == r2.eta_bar);
  CHECK(r1.eta_bar != r3.eta_bar);
  CHECK(r1.tau_p == 2.0);
  double s = 0.0;
  for (double e : r1.eta) {
    CHECK(e > 0.0);
    s += e;
  }
  CHECK(r1.eta_bar == doctest::Approx(s / 4).epsilon(1e-15));
  // per-subframe noise differs
  CHECK(r1.eta[0] != r1.eta[1]);
  // non-binary input is rejected
  Mat soft = from_rows({{0.5, 0, 1}, {0.5, 1, 0}});
  CHECK_THROWS(evaluate_equal_power(cs, cfg, soft, 123));
}
