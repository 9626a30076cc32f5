#include "cfmimo/gnn/graphs.hpp"

#include <stdexcept>

namespace cfmimo::gnn {

PilotGraph build_pilot_graph(const Mat& beta, const Mat& A, const Mat& Lambda,
                             bool feature_enhancement) {
  const int M = beta.rows, K = beta.cols;
  if (A.rows != M || A.cols != K)
    throw std::invalid_argument("pilot graph: association shape mismatch");
  if (Lambda.cols != K)
    throw std::invalid_argument("pilot graph: lambda column count mismatch");
  const int n_ps = Lambda.rows;
  PilotGraph g;
  g.M = M;
  g.K = K;
  g.n_ps = n_ps;
  g.f_apue = ad::Tensor(M * K, 2);
  g.ue_of_apue.resize(M * K);
  g.ap_of_apue.resize(M * K);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      const int e = m * K + k;
      g.f_apue.at(e, 0) = beta.at(m, k);
      g.f_apue.at(e, 1) = A.at(m, k);
      g.ue_of_apue[e] = k;
      g.ap_of_apue[e] = m;
    }
  g.f_psue = ad::Tensor(n_ps * K, 1);
  g.ue_of_psue.resize(n_ps * K);
  g.ps_of_psue.resize(n_ps * K);
  for (int p = 0; p < n_ps; ++p)
    for (int k = 0; k < K; ++k) {
      const int e = p * K + k;
      g.f_psue.at(e, 0) = feature_enhancement ? Lambda.at(p, k) : 0.0;
      g.ue_of_psue[e] = k;
      g.ps_of_psue[e] = p;
    }
  return g;
}

PowerGraph build_power_graph(const CMatPair& Ghat, const Mat& A) {
  const int M = A.rows, K = A.cols;
  if (Ghat.rows() != K || Ghat.cols() != M * K)
    throw std::invalid_argument("power graph: channel table shape mismatch");
  PowerGraph g;
  g.M = M;
  g.K = K;
  g.s_count.assign(K, 0);
  g.a_count.assign(M, 0);
  g.an_index.assign(M * K, -1);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      if (A.at(m, k) != 0.0) {
        g.an_index[m * K + k] = (int)g.an_ap.size();
        g.an_ap.push_back(m);
        g.an_ue.push_back(k);
        ++g.s_count[k];
        ++g.a_count[m];
      }
  for (int k = 0; k < K; ++k)
    if (g.s_count[k] == 0)
      throw std::invalid_argument("power graph: UE without serving AP");
  g.n_an = (int)g.an_ap.size();
  const int E = g.n_an * K;
  g.feat = ad::Tensor(E, 2);
  g.seg_an.resize(E);
  g.seg_ue.resize(E);
  g.sig_row.resize(g.n_an);
  g.sig_ue = g.an_ue;
  g.sig_mask.assign(E, 0.0);
  g.inf_mask.assign(E, 0.0);
  g.w_inf_ue.resize(E);
  for (int an = 0; an < g.n_an; ++an) {
    const int m = g.an_ap[an];
    const int i = g.an_ue[an];
    for (int k = 0; k < K; ++k) {
      const int e = an * K + k;
      g.feat.at(e, 0) = Ghat.re.at(k, m * K + i);
      g.feat.at(e, 1) = Ghat.im.at(k, m * K + i);
      g.seg_an[e] = an;
      g.seg_ue[e] = k;
      g.w_inf_ue[e] = 1.0 / (double(M) * g.a_count[m]);
      if (k == i) {
        g.sig_row[an] = e;
        g.sig_mask[e] = 1.0;
      } else {
        g.inf_mask[e] = 1.0;
      }
    }
  }
  return g;
}

}  // namespace cfmimo::gnn
