#include "cfmimo/phy.hpp"

#include <cmath>
#include <stdexcept>

#include "cfmimo/kernels.hpp"
#include "cfmimo/rng.hpp"

// The arithmetic here deliberately mirrors the differentiable path op for
// op (same kernels, same association order, products before sums in the same
// sequence). The relaxation consistency check compares the two routes at
// 1e-12, which only holds if both round identically.

namespace cfmimo {

namespace {

using kern::kInvLn2;

Mat matmul(const Mat& A, const Mat& B) {
  Mat C(A.rows, B.cols);
  kern::matmul(A.a.data(), B.a.data(), C.a.data(), A.rows, A.cols, B.cols);
  return C;
}

Mat matmul_tA(const Mat& A, const Mat& B) {
  Mat C(A.cols, B.cols);
  kern::matmul_tA(A.a.data(), B.a.data(), C.a.data(), A.cols, A.rows, B.cols);
  return C;
}

Mat transpose(const Mat& A) {
  Mat T(A.cols, A.rows);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < A.cols; ++c) T.at(c, r) = A.at(r, c);
  return T;
}

Mat add(const Mat& A, const Mat& B) {
  Mat C(A.rows, A.cols);
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] = A.a[i] + B.a[i];
  return C;
}

Mat sub(const Mat& A, const Mat& B) {
  Mat C(A.rows, A.cols);
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] = A.a[i] - B.a[i];
  return C;
}

// columns [c0, c0+n) of M as a contiguous copy
Mat slice_cols(const Mat& A, int c0, int n) {
  Mat S(A.rows, n);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < n; ++c) S.at(r, c) = A.at(r, c0 + c);
  return S;
}

Mat gather_cols(const Mat& A, const std::vector<int>& idx) {
  Mat S(A.rows, static_cast<int>(idx.size()));
  for (int r = 0; r < A.rows; ++r)
    for (size_t c = 0; c < idx.size(); ++c) S.at(r, (int)c) = A.at(r, idx[c]);
  return S;
}

std::vector<int> assoc_list(const Mat& A, int m) {
  std::vector<int> idx;
  for (int k = 0; k < A.cols; ++k)
    if (A.at(m, k) != 0.0) idx.push_back(k);
  return idx;
}

double effective_tau(const Mat& X, double tau) {
  double tau_x = psi(X);
  if (tau < 0.0) return tau_x;
  if (is_binary_assignment(X) && tau < tau_x - 1e-12)
    throw std::invalid_argument(
        "received_pilot: tau smaller than the number of pilots in use");
  return tau;
}

}  // namespace

CMatPair scaled_channel(const ChannelSet& cs, int t) {
  CMatPair S(cs.N, cs.M * cs.K);
  for (int m = 0; m < cs.M; ++m)
    for (int k = 0; k < cs.K; ++k) {
      double sb = std::sqrt(cs.beta.at(m, k));
      const Cx* h = cs.h(t, m, k);
      for (int n = 0; n < cs.N; ++n) {
        S.re.at(n, m * cs.K + k) = sb * h[n].re;
        S.im.at(n, m * cs.K + k) = sb * h[n].im;
      }
    }
  return S;
}

CMatPair draw_complex_noise(int N, int cols, double noise_W,
                            std::uint64_t seed) {
  Rng rng(seed);
  CMatPair Z(N, cols);
  double s = std::sqrt(noise_W / 2.0);
  for (int c = 0; c < cols; ++c)
    for (int n = 0; n < N; ++n) {
      Z.re.at(n, c) = s * rng.normal();
      Z.im.at(n, c) = s * rng.normal();
    }
  return Z;
}

CMatPair received_pilot(const ChannelSet& cs, const Mat& X, double p_ul_W,
                        int t, const CMatPair& noise, double tau) {
  if (X.cols != cs.K)
    throw std::invalid_argument("received_pilot: X column count != K");
  const double tau_eff = effective_tau(X, tau);
  const double scale = std::sqrt(p_ul_W * tau_eff);
  Mat C = matmul_tA(X, X);  // C[i,k] = x_i . x_k
  CMatPair S = scaled_channel(cs, t);
  CMatPair Y(cs.N, cs.M * cs.K);
  for (int m = 0; m < cs.M; ++m) {
    Mat Sr = slice_cols(S.re, m * cs.K, cs.K);
    Mat Si = slice_cols(S.im, m * cs.K, cs.K);
    Mat Mr = matmul(Sr, C);
    Mat Mi = matmul(Si, C);
    for (int n = 0; n < cs.N; ++n)
      for (int k = 0; k < cs.K; ++k) {
        Y.re.at(n, m * cs.K + k) =
            Mr.at(n, k) * scale + noise.re.at(n, m * cs.K + k);
        Y.im.at(n, m * cs.K + k) =
            Mi.at(n, k) * scale + noise.im.at(n, m * cs.K + k);
      }
  }
  return Y;
}

Mat mmse_coefficients(const Mat& X, const Mat& beta, const SystemConfig& cfg,
                      double tau) {
  const double tau_eff = effective_tau(X, tau);
  const double p_eff = cfg.mmse_scaling == MmseScaling::self_consistent
                           ? cfg.p_ul_W() * tau_eff
                           : cfg.p_ul_W();
  const double s_eff = std::sqrt(p_eff);
  const double sigma2 = cfg.noise_power_W();
  Mat C = matmul_tA(X, X);
  Mat BC = matmul(beta, C);  // BC[m,k] = sum_i beta_mi (x_i . x_k)
  Mat c(beta.rows, beta.cols);
  for (int m = 0; m < beta.rows; ++m)
    for (int k = 0; k < beta.cols; ++k) {
      double denom = BC.at(m, k) * p_eff + sigma2;
      c.at(m, k) = beta.at(m, k) * s_eff / denom;
    }
  return c;
}

CMatPair mmse_estimate(const ChannelSet& cs, const Mat& X, const CMatPair& Y,
                       const SystemConfig& cfg, double tau) {
  Mat c = mmse_coefficients(X, cs.beta, cfg, tau);
  CMatPair Hhat(cs.N, cs.M * cs.K);
  for (int m = 0; m < cs.M; ++m)
    for (int k = 0; k < cs.K; ++k) {
      if (cs.A.at(m, k) == 0.0) continue;
      double cmk = c.at(m, k);
      for (int n = 0; n < cs.N; ++n) {
        Hhat.re.at(n, m * cs.K + k) = Y.re.at(n, m * cs.K + k) * cmk;
        Hhat.im.at(n, m * cs.K + k) = Y.im.at(n, m * cs.K + k) * cmk;
      }
    }
  return Hhat;
}

double nmse(const Mat& X, const Mat& beta, int m, int k,
            const SystemConfig& cfg, double tau) {
  const double tau_eff = effective_tau(X, tau);
  const double p_eff = cfg.mmse_scaling == MmseScaling::self_consistent
                           ? cfg.p_ul_W() * tau_eff
                           : cfg.p_ul_W();
  const double sigma2 = cfg.noise_power_W();
  Mat C = matmul_tA(X, X);
  double b = beta.at(m, k);
  double denom = 0.0;
  for (int j = 0; j < beta.cols; ++j)
    denom += C.at(k, j) * b * beta.at(m, j);
  denom += sigma2 * b / p_eff;
  return 1.0 - b * b / denom;
}

namespace {

double rzf_regularizer(const ChannelSet& cs, const SystemConfig& cfg, int m) {
  double acc = 0.0;
  for (int j = 0; j < cs.K; ++j)
    if (cs.A.at(m, j) == 0.0) acc += cs.beta.at(m, j);
  return acc + cs.noise_ue_W / cfg.p_ul_W();
}

}  // namespace

CMatPair rzf_beamforming(const CMatPair& Hhat, const ChannelSet& cs,
                         const SystemConfig& cfg) {
  CMatPair V(cs.N, cs.M * cs.K);
  for (int m = 0; m < cs.M; ++m) {
    std::vector<int> loc = assoc_list(cs.A, m);
    if (loc.empty()) continue;
    std::vector<int> cols;
    for (int k : loc) cols.push_back(m * cs.K + k);
    Mat Hr = gather_cols(Hhat.re, cols);
    Mat Hi = gather_cols(Hhat.im, cols);
    Mat HrT = transpose(Hr), HiT = transpose(Hi);
    Mat Zr = add(matmul(Hr, HrT), matmul(Hi, HiT));
    Mat Zi = sub(matmul(Hi, HrT), matmul(Hr, HiT));
    double reg = rzf_regularizer(cs, cfg, m);
    for (int n = 0; n < cs.N; ++n) Zr.at(n, n) = Zr.at(n, n) + reg;
    // shared complex solve
    CMat Z(cs.N, cs.N);
    for (int r = 0; r < cs.N; ++r)
      for (int c = 0; c < cs.N; ++c) Z.at(r, c) = Cx{Zr.at(r, c), Zi.at(r, c)};
    CMat B(cs.N, static_cast<int>(loc.size()));
    for (int l = 0; l < (int)loc.size(); ++l)
      for (int n = 0; n < cs.N; ++n)
        B.at(n, l) = Cx{Hr.at(n, l), Hi.at(n, l)};
    solve_hermitian(Z, B);
    // normalize each direction
    for (int l = 0; l < (int)loc.size(); ++l) {
      double s = 0.0;
      for (int n = 0; n < cs.N; ++n) {
        double wr = B.at(n, l).re, wi = B.at(n, l).im;
        s += wr * wr + wi * wi;
      }
      double nrm = std::sqrt(s);
      for (int n = 0; n < cs.N; ++n) {
        V.re.at(n, cols[l]) = B.at(n, l).re / nrm;
        V.im.at(n, cols[l]) = B.at(n, l).im / nrm;
      }
    }
  }
  return V;
}

namespace {

// (A^H B) per AP block with the same accumulation structure as the tape
// composition (separate real products, then add/sub).
void herm_dot_block(const Mat& Ar, const Mat& Ai, const Mat& Br, const Mat& Bi,
                    Mat& out_re, Mat& out_im) {
  Mat t1 = matmul_tA(Ar, Br);
  Mat t2 = matmul_tA(Ai, Bi);
  Mat t3 = matmul_tA(Ar, Bi);
  Mat t4 = matmul_tA(Ai, Br);
  out_re = add(t1, t2);
  out_im = sub(t3, t4);
}

}  // namespace

CMatPair equivalent_channels(const ChannelSet& cs, int t, const CMatPair& V) {
  CMatPair S = scaled_channel(cs, t);
  CMatPair G(cs.K, cs.M * cs.K);
  for (int m = 0; m < cs.M; ++m) {
    std::vector<int> loc = assoc_list(cs.A, m);
    if (loc.empty()) continue;
    std::vector<int> cols;
    for (int k : loc) cols.push_back(m * cs.K + k);
    Mat Sr = slice_cols(S.re, m * cs.K, cs.K);
    Mat Si = slice_cols(S.im, m * cs.K, cs.K);
    Mat Vr = gather_cols(V.re, cols);
    Mat Vi = gather_cols(V.im, cols);
    Mat Gr, Gi;
    herm_dot_block(Sr, Si, Vr, Vi, Gr, Gi);  // K x n_loc
    for (int k = 0; k < cs.K; ++k)
      for (int l = 0; l < (int)loc.size(); ++l) {
        G.re.at(k, cols[l]) = Gr.at(k, l);
        G.im.at(k, cols[l]) = Gi.at(k, l);
      }
  }
  return G;
}

CMatPair estimated_equivalent_channels(const CMatPair& Hhat,
                                       const CMatPair& V,
                                       const ChannelSet& cs) {
  CMatPair G(cs.K, cs.M * cs.K);
  for (int m = 0; m < cs.M; ++m) {
    std::vector<int> loc = assoc_list(cs.A, m);
    if (loc.empty()) continue;
    std::vector<int> cols;
    for (int k : loc) cols.push_back(m * cs.K + k);
    Mat Hr = slice_cols(Hhat.re, m * cs.K, cs.K);
    Mat Hi = slice_cols(Hhat.im, m * cs.K, cs.K);
    Mat Vr = gather_cols(V.re, cols);
    Mat Vi = gather_cols(V.im, cols);
    Mat Gr, Gi;
    herm_dot_block(Hr, Hi, Vr, Vi, Gr, Gi);  // K x n_loc
    for (int k = 0; k < cs.K; ++k)
      for (int l = 0; l < (int)loc.size(); ++l) {
        if (cs.A.at(m, k) != 0.0) {
          G.re.at(k, cols[l]) = Gr.at(k, l);
          G.im.at(k, cols[l]) = Gi.at(k, l);
        } else {
          // AP m has no estimate for k; only the statistical gain is known
          G.re.at(k, cols[l]) = std::sqrt(cs.beta.at(m, k));
          G.im.at(k, cols[l]) = 0.0;
        }
      }
  }
  return G;
}

SeResult sinr_and_net_se(const CMatPair& G, const Mat& P, const Mat& A,
                         double sigma2_ue, double tau_p, int tau_c) {
  const int K = G.rows();
  const int M = A.rows;
  if (tau_p > tau_c)
    throw std::invalid_argument("sinr_and_net_se: tau_p exceeds tau_c");
  // E[i][k]: combined amplitude of stream i at UE k
  Mat Er(K, K, 0.0), Ei(K, K, 0.0);
  for (int i = 0; i < K; ++i)
    for (int m = 0; m < M; ++m) {
      if (A.at(m, i) == 0.0) continue;
      double amp = std::sqrt(P.at(m, i));
      int col = m * K + i;
      for (int k = 0; k < K; ++k) {
        Er.at(i, k) += G.re.at(k, col) * amp;
        Ei.at(i, k) += G.im.at(k, col) * amp;
      }
    }
  SeResult res;
  res.gamma.resize(K);
  res.rate.resize(K);
  double sum_rate = 0.0;
  for (int k = 0; k < K; ++k) {
    double total = 0.0;
    for (int i = 0; i < K; ++i) {
      double re = Er.at(i, k), im = Ei.at(i, k);
      total += re * re + im * im;
    }
    double sr = Er.at(k, k), si = Ei.at(k, k);
    double sig = sr * sr + si * si;
    double intf = total - sig;
    double gamma = sig / (intf + sigma2_ue);
    res.gamma[k] = gamma;
    res.rate[k] = std::log(1.0 + gamma) * kInvLn2;
    sum_rate += res.rate[k];
  }
  double factor = 1.0 + tau_p * (-1.0 / static_cast<double>(tau_c));
  res.eta = sum_rate * factor;
  return res;
}

double avg_net_se(const std::vector<double>& etas) {
  double s = 0.0;
  for (double e : etas) s += e;
  return s * (1.0 / static_cast<double>(etas.size()));
}

Mat equal_power(const Mat& A, double P_max_W) {
  Mat P(A.rows, A.cols, 0.0);
  for (int m = 0; m < A.rows; ++m) {
    int served = 0;
    for (int k = 0; k < A.cols; ++k)
      if (A.at(m, k) != 0.0) ++served;
    if (served == 0) continue;
    double p = P_max_W / static_cast<double>(served);
    for (int k = 0; k < A.cols; ++k)
      if (A.at(m, k) != 0.0) P.at(m, k) = p;
  }
  return P;
}

FrameEval evaluate_assignment(const ChannelSet& cs, const SystemConfig& cfg,
                              const Mat& X, const PowerProvider& power,
                              std::uint64_t noise_seed, double tau) {
  if (!is_binary_assignment(X))
    throw std::invalid_argument("evaluate_assignment: X must be binary");
  FrameEval fe;
  fe.tau_p = effective_tau(X, tau);
  const double sigma2_ue = cs.noise_ue_W;
  for (int t = 0; t < cs.N_T; ++t) {
    CMatPair noise =
        draw_complex_noise(cs.N, cs.M * cs.K, cs.noise_ap_W,
                           derive_seed(noise_seed, "pilot_noise", t));
    CMatPair Y = received_pilot(cs, X, cfg.p_ul_W(), t, noise, fe.tau_p);
    CMatPair Hhat = mmse_estimate(cs, X, Y, cfg, fe.tau_p);
    CMatPair V = rzf_beamforming(Hhat, cs, cfg);
    CMatPair Ghat = estimated_equivalent_channels(Hhat, V, cs);
    Mat P = power(t, Ghat, Hhat, V);
    CMatPair G = equivalent_channels(cs, t, V);
    SeResult se = sinr_and_net_se(G, P, cs.A, sigma2_ue, fe.tau_p, cfg.tau_c);
    fe.eta.push_back(se.eta);
    fe.P.push_back(std::move(P));
  }
  fe.eta_bar = avg_net_se(fe.eta);
  return fe;
}

FrameEval evaluate_equal_power(const ChannelSet& cs, const SystemConfig& cfg,
                               const Mat& X, std::uint64_t noise_seed,
                               double tau) {
  Mat P = equal_power(cs.A, cfg.P_max_W());
  return evaluate_assignment(
      cs, cfg, X,
      [&P](int, const CMatPair&, const CMatPair&, const CMatPair&) {
        return P;
      },
      noise_seed, tau);
}

}  // namespace cfmimo
