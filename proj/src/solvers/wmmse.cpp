#include <cmath>
#include <stdexcept>

#include "cfmimo/solvers.hpp"

namespace cfmimo::solvers {

namespace {

struct Links {
  int M = 0, K = 0;
  const CMatPair* G = nullptr;
  Cx at(int k, int m, int i) const {  // beam (m,i) seen at UE k
    return {G->re.at(k, m * K + i), G->im.at(k, m * K + i)};
  }
};

}  // namespace

WmmseResult wmmse_power(const CMatPair& Ghat, const Mat& A,
                        const SystemConfig& cfg, const WmmseOptions& opt) {
  const int M = A.rows, K = A.cols;
  if (Ghat.rows() != K || Ghat.cols() != M * K)
    throw std::invalid_argument("wmmse: channel shape mismatch");
  for (double v : Ghat.re.a)
    if (!std::isfinite(v)) throw std::invalid_argument("wmmse: non-finite channel");
  for (double v : Ghat.im.a)
    if (!std::isfinite(v)) throw std::invalid_argument("wmmse: non-finite channel");

  const double sigma2 = cfg.noise_power_W();
  const double P_max = cfg.P_max_W();
  Links L{M, K, &Ghat};

  std::vector<std::vector<int>> serve(K);  // APs serving each UE
  std::vector<std::vector<int>> ues(M);    // UEs served by each AP
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k)
      if (A.at(m, k) != 0.0) {
        serve[k].push_back(m);
        ues[m].push_back(k);
      }

  Mat q(M, K);  // amplitudes, sqrt of power
  for (int m = 0; m < M; ++m)
    if (!ues[m].empty()) {
      double v = std::sqrt(P_max / (double)ues[m].size());
      for (int k : ues[m]) q.at(m, k) = v;
    }

  // t[i][k]: effective link from UE i's beams to UE k
  std::vector<std::vector<Cx>> t(K, std::vector<Cx>(K));
  auto refresh_links = [&]() {
    for (int i = 0; i < K; ++i)
      for (int k = 0; k < K; ++k) {
        Cx s{0, 0};
        for (int m : serve[i]) s = s + q.at(m, i) * L.at(k, m, i);
        t[i][k] = s;
      }
  };
  refresh_links();

  WmmseResult res;
  std::vector<Cx> u(K);
  std::vector<double> w(K, 1.0), alpha(K, 0.0);

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    // receiver and weight updates (closed form)
    double bound = 0.0;
    for (int k = 0; k < K; ++k) {
      double D = sigma2;
      for (int i = 0; i < K; ++i) D += abs2(t[i][k]);
      u[k] = t[k][k] / D;
      double e = 1.0 - abs2(t[k][k]) / D;
      w[k] = 1.0 / e;
      alpha[k] = w[k] * abs2(u[k]);
      bound += std::log2(w[k]);
    }
    res.surrogate.push_back(bound);
    res.iters = iter + 1;
    if (iter >= 1 &&
        bound - res.surrogate[iter - 1] < opt.tol)
      break;

    // amplitude update, one sweep over per-AP budget subproblems
    for (int m = 0; m < M; ++m) {
      if (ues[m].empty()) continue;
      std::vector<double> a, b;
      for (int k : ues[m]) {
        double akk = 0.0, bk = 0.0;
        for (int j = 0; j < K; ++j)
          akk += alpha[j] * abs2(L.at(j, m, k));
        bk = w[k] * (conj(u[k]) * L.at(k, m, k)).re;
        for (int m2 : serve[k]) {
          if (m2 == m) continue;
          double cross = 0.0;
          for (int j = 0; j < K; ++j)
            cross += alpha[j] * (L.at(j, m, k) * conj(L.at(j, m2, k))).re;
          bk -= cross * q.at(m2, k);
        }
        a.push_back(akk);
        b.push_back(bk);
      }
      auto q_of = [&](double mu, size_t idx) {
        if (b[idx] <= 0.0) return 0.0;
        return b[idx] / (a[idx] + mu);
      };
      auto power_of = [&](double mu) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) {
          double v = q_of(mu, i);
          s += v * v;
        }
        return s;
      };
      double mu = 0.0;
      if (power_of(0.0) > P_max) {
        double lo = 0.0, hi = 1.0;
        int guard = 0;
        while (power_of(hi) > P_max && ++guard < 200) hi *= 2.0;
        for (int it2 = 0; it2 < 200; ++it2) {
          double mid = 0.5 * (lo + hi);
          (power_of(mid) > P_max ? lo : hi) = mid;
        }
        mu = hi;  // feasible side
      }
      for (size_t i = 0; i < ues[m].size(); ++i)
        q.at(m, ues[m][i]) = q_of(mu, i);
    }
    refresh_links();
  }

  res.P = Mat(M, K);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) res.P.at(m, k) = q.at(m, k) * q.at(m, k);
  return res;
}

PowerProvider wmmse_provider(const Mat& A, const SystemConfig& cfg,
                             const WmmseOptions& opt) {
  return [A, cfg, opt](int, const CMatPair& Ghat, const CMatPair&,
                       const CMatPair&) {
    return wmmse_power(Ghat, A, cfg, opt).P;
  };
}

}  // namespace cfmimo::solvers
