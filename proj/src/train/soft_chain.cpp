#include "cfmimo/train/soft_chain.hpp"

#include <cmath>
#include <stdexcept>

#include "cfmimo/kernels.hpp"
#include "cfmimo/phy.hpp"

// Every composition here mirrors the plain path in phy.cpp op for op: the
// same kernels run in the same order on the same values, so a binary x
// reproduces the reference net-SE bit for bit.

namespace cfmimo::train {

using ad::Tape;
using ad::Tensor;
using ad::Val;

namespace {

// columns [c0, c0+n) of a Mat as a tape constant
Val const_slice(Tape& tp, const Mat& A, int c0, int n) {
  Tensor t(A.rows, n);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < n; ++c) t.at(r, c) = A.at(r, c0 + c);
  return tp.constant(std::move(t));
}

// gather of columns via the transpose route (copies only)
Val cols_of(Val a, const std::vector<int>& idx) {
  return ad::transpose(ad::gather_rows(ad::transpose(a), idx));
}

}  // namespace

SoftFrame soft_frame(Tape& tp, Val x, const ChannelSet& cs,
                     const SystemConfig& cfg, double fixed_tau) {
  const int M = cs.M, K = cs.K;
  if (tp.cols(x) != K)
    throw std::invalid_argument("soft_frame: x column count != K");
  SoftFrame fr;
  fr.x = x;
  fr.tau = fixed_tau >= 0.0 ? tp.scalar(fixed_tau) : ad::pilot_count(x);
  fr.prelog_clamped = tp.val(fr.tau).v[0] > static_cast<double>(cfg.tau_c);
  fr.prelog = ad::max_const(
      ad::add_const(
          ad::scale_const(fr.tau, -1.0 / static_cast<double>(cfg.tau_c)), 1.0),
      0.0);
  fr.gram = ad::matmul(ad::transpose(x), x);
  fr.scale = ad::sqrt_op(ad::scale_const(fr.tau, cfg.p_ul_W()));

  // estimation coefficient c_mk = beta sqrt(p_eff) / (p_eff (B Gram) + sigma2)
  Val p_eff = cfg.mmse_scaling == MmseScaling::self_consistent
                  ? ad::scale_const(fr.tau, cfg.p_ul_W())
                  : tp.scalar(cfg.p_ul_W());
  Val s_eff = ad::sqrt_op(p_eff);
  Val beta_c = tp.constant(cs.beta);
  Val bc = ad::matmul(beta_c, fr.gram);
  Val denom = ad::add_const(ad::mul_scalar(bc, p_eff), cfg.noise_power_W());
  Val c = ad::div(ad::mul_scalar(beta_c, s_eff), denom);
  fr.c_masked = ad::mul(c, tp.constant(cs.A));

  fr.assoc.resize(M);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      if (cs.A.at(m, k) != 0.0) fr.assoc[m].push_back(k);
  return fr;
}

SoftSubframe soft_estimate(Tape& tp, const SoftFrame& fr, const ChannelSet& cs,
                           const SystemConfig& cfg, int t,
                           const CMatPair& noise) {
  const int M = cs.M, N = cs.N, K = cs.K;
  if (noise.rows() != N || noise.cols() != M * K)
    throw std::invalid_argument("soft_estimate: noise shape mismatch");
  CMatPair S = scaled_channel(cs, t);
  SoftSubframe sf;
  sf.hhat_re.resize(M);
  sf.hhat_im.resize(M);
  sf.v_re.resize(M);
  sf.v_im.resize(M);

  Val c_row = ad::reshape(fr.c_masked, 1, M * K);
  std::vector<Val> g_re(M), g_im(M);  // per-AP [K, n_assoc] estimate blocks
  for (int m = 0; m < M; ++m) {
    Val Sr = const_slice(tp, S.re, m * K, K);
    Val Si = const_slice(tp, S.im, m * K, K);
    Val Nr = const_slice(tp, noise.re, m * K, K);
    Val Ni = const_slice(tp, noise.im, m * K, K);
    // received pilots, then per-column estimation scaling
    Val Yr = ad::add(ad::mul_scalar(ad::matmul(Sr, fr.gram), fr.scale), Nr);
    Val Yi = ad::add(ad::mul_scalar(ad::matmul(Si, fr.gram), fr.scale), Ni);
    Val cm = ad::slice_cols(c_row, m * K, m * K + K);
    Val Hr = ad::mul_rowvec(Yr, cm);
    Val Hi = ad::mul_rowvec(Yi, cm);
    sf.hhat_re[m] = Hr;
    sf.hhat_im[m] = Hi;

    const std::vector<int>& loc = fr.assoc[m];
    if (loc.empty()) continue;
    // RZF: (H H^H + reg I)^{-1} H, columns normalized
    Val HgT_r = ad::gather_rows(ad::transpose(Hr), loc);  // [n, N]
    Val HgT_i = ad::gather_rows(ad::transpose(Hi), loc);
    Val Hg_r = ad::transpose(HgT_r);                      // [N, n]
    Val Hg_i = ad::transpose(HgT_i);
    Val Zr = ad::add(ad::matmul(Hg_r, HgT_r), ad::matmul(Hg_i, HgT_i));
    Val Zi = ad::sub(ad::matmul(Hg_i, HgT_r), ad::matmul(Hg_r, HgT_i));
    double reg = 0.0;
    for (int j = 0; j < K; ++j)
      if (cs.A.at(m, j) == 0.0) reg += cs.beta.at(m, j);
    reg = reg + cs.noise_ue_W / cfg.p_ul_W();
    Tensor regm(N, N, 0.0);
    for (int n = 0; n < N; ++n) regm.at(n, n) = reg;
    Zr = ad::add(Zr, tp.constant(std::move(regm)));
    Val sol = ad::hermitian_solve(Zr, Zi, Hg_r, Hg_i);    // [2N, n]
    Val solT = ad::transpose(sol);
    Val wr = ad::transpose(ad::slice_cols(solT, 0, N));
    Val wi = ad::transpose(ad::slice_cols(solT, N, 2 * N));
    Val nrm = ad::sqrt_op(ad::sum_rows(ad::magsq2(wr, wi)));
    Val Vr = ad::div_rowvec(wr, nrm);
    Val Vi = ad::div_rowvec(wi, nrm);
    sf.v_re[m] = Vr;
    sf.v_im[m] = Vi;

    // estimated equivalent channels of this AP: (hhat)^H v on associated
    // rows, statistical gain sqrt(beta) elsewhere
    Val t1 = ad::matmul(ad::transpose(Hr), Vr);
    Val t2 = ad::matmul(ad::transpose(Hi), Vi);
    Val t3 = ad::matmul(ad::transpose(Hr), Vi);
    Val t4 = ad::matmul(ad::transpose(Hi), Vr);
    Val Gr = ad::add(t1, t2);
    Val Gi = ad::sub(t3, t4);
    Tensor mask(K, 1, 0.0);
    Tensor fb(K, static_cast<int>(loc.size()), 0.0);
    for (int k = 0; k < K; ++k) {
      if (cs.A.at(m, k) != 0.0) {
        mask.at(k, 0) = 1.0;
      } else {
        double sb = std::sqrt(cs.beta.at(m, k));
        for (int l = 0; l < (int)loc.size(); ++l) fb.at(k, l) = sb;
      }
    }
    Val maskv = tp.constant(std::move(mask));
    g_re[m] = ad::add(ad::mul_colvec(Gr, maskv), tp.constant(std::move(fb)));
    g_im[m] = ad::mul_colvec(Gi, maskv);
  }

  // scatter the per-AP blocks into the full [K, M*K] table
  Val cat{};
  Val cat_im{};
  std::vector<int> seg;
  for (int m = 0; m < M; ++m) {
    if (fr.assoc[m].empty()) continue;
    Val Tr = ad::transpose(g_re[m]);  // [n_assoc, K]
    Val Ti = ad::transpose(g_im[m]);
    cat = cat.ok() ? ad::concat_rows(cat, Tr) : Tr;
    cat_im = cat_im.ok() ? ad::concat_rows(cat_im, Ti) : Ti;
    for (int k : fr.assoc[m]) seg.push_back(m * K + k);
  }
  if (!cat.ok()) throw std::invalid_argument("soft_estimate: empty association");
  sf.ghat_re = ad::transpose(ad::segment_sum(cat, seg, M * K));
  sf.ghat_im = ad::transpose(ad::segment_sum(cat_im, seg, M * K));
  return sf;
}

Val soft_eta(Tape& tp, const SoftFrame& fr, const SoftSubframe& sf, Val P,
             const ChannelSet& cs, int t) {
  const int M = cs.M, N = cs.N, K = cs.K;
  if (tp.rows(P) != M || tp.cols(P) != K)
    throw std::invalid_argument("soft_eta: power shape mismatch");
  CMatPair S = scaled_channel(cs, t);

  // per-stream receive amplitudes E[i,k] = sum_m sqrt(p_mi) g_k,(m,i)
  Val cat_re{}, cat_im{};
  std::vector<int> seg_i;   // stream index per (m,i) pair row
  std::vector<int> cell;    // m*K+i per pair row
  for (int m = 0; m < M; ++m) {
    const std::vector<int>& loc = fr.assoc[m];
    if (loc.empty()) continue;
    Val Sr = const_slice(tp, S.re, m * K, K);
    Val Si = const_slice(tp, S.im, m * K, K);
    Val t1 = ad::matmul(ad::transpose(Sr), sf.v_re[m]);
    Val t2 = ad::matmul(ad::transpose(Si), sf.v_im[m]);
    Val t3 = ad::matmul(ad::transpose(Sr), sf.v_im[m]);
    Val t4 = ad::matmul(ad::transpose(Si), sf.v_re[m]);
    Val Gr = ad::add(t1, t2);  // [K, n_assoc] true equivalent channels
    Val Gi = ad::sub(t3, t4);
    Val Tr = ad::transpose(Gr);  // [n_assoc, K]
    Val Ti = ad::transpose(Gi);
    cat_re = cat_re.ok() ? ad::concat_rows(cat_re, Tr) : Tr;
    cat_im = cat_im.ok() ? ad::concat_rows(cat_im, Ti) : Ti;
    for (int i : loc) {
      seg_i.push_back(i);
      cell.push_back(m * K + i);
    }
  }
  if (!cat_re.ok()) throw std::invalid_argument("soft_eta: empty association");
  Val amp = ad::sqrt_op(ad::gather_rows(ad::reshape(P, M * K, 1), cell));
  Val Er = ad::segment_sum(ad::mul_colvec(cat_re, amp), seg_i, K);
  Val Ei = ad::segment_sum(ad::mul_colvec(cat_im, amp), seg_i, K);

  Val sq = ad::magsq2(Er, Ei);                      // [K(i), K(k)]
  Val total = ad::reshape(ad::sum_rows(sq), K, 1);  // received power per UE
  std::vector<int> diag(K);
  for (int k = 0; k < K; ++k) diag[k] = k * K + k;
  Val sig = ad::gather_rows(ad::reshape(sq, K * K, 1), diag);
  Val intf = ad::sub(total, sig);
  Val gamma = ad::div(sig, ad::add_const(intf, cs.noise_ue_W));
  Val rate = ad::scale_const(ad::log_clamped(ad::add_const(gamma, 1.0)),
                             kern::kInvLn2);
  return ad::mul(ad::sum_all(rate), fr.prelog);
}

Val soft_power_features(Tape& tp, const SoftSubframe& sf,
                        const std::vector<int>& an_ap,
                        const std::vector<int>& an_ue, int M, int K,
                        double rho_lin) {
  const int n_an = static_cast<int>(an_ap.size());
  if ((int)an_ue.size() != n_an)
    throw std::invalid_argument("soft_power_features: AN list mismatch");
  std::vector<int> idx(static_cast<size_t>(n_an) * K);
  for (int an = 0; an < n_an; ++an) {
    const int col = an_ap[an] * K + an_ue[an];
    for (int j = 0; j < K; ++j) idx[static_cast<size_t>(an) * K + j] = col * K + j;
  }
  Val fre = ad::gather_rows(
      ad::reshape(ad::transpose(sf.ghat_re), M * K * K, 1), idx);
  Val fim = ad::gather_rows(
      ad::reshape(ad::transpose(sf.ghat_im), M * K * K, 1), idx);
  return ad::scale_const(ad::concat_cols(fre, fim),
                         1.0 / std::sqrt(rho_lin));
}

Val soft_net_se(Tape& tp, Val x, Val P, const ChannelSet& cs,
                const SystemConfig& cfg, int t, const CMatPair& noise,
                double fixed_tau) {
  SoftFrame fr = soft_frame(tp, x, cs, cfg, fixed_tau);
  SoftSubframe sf = soft_estimate(tp, fr, cs, cfg, t, noise);
  return soft_eta(tp, fr, sf, P, cs, t);
}

}  // namespace cfmimo::train
