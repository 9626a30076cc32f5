#include <stdexcept>

#include "cfmimo/solvers.hpp"

namespace cfmimo::solvers {

InterferenceGraph build_interference_graph(const Mat& beta, const Mat& A) {
  if (beta.rows != A.rows || beta.cols != A.cols)
    throw std::invalid_argument("interference graph: shape mismatch");
  const int M = beta.rows, K = beta.cols;
  InterferenceGraph g;
  g.K = K;
  g.W = Mat(K, K);
  g.shared_ap.assign((size_t)K * K, 0);
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) {
      if (j == k) continue;
      double w = 0.0;
      bool shared = false;
      for (int m = 0; m < M; ++m) {
        w += beta.at(m, j) * beta.at(m, k);
        if (A.at(m, j) != 0.0 && A.at(m, k) != 0.0) shared = true;
      }
      g.W.at(j, k) = w / M;
      g.shared_ap[(size_t)j * K + k] = shared ? 1 : 0;
    }
  return g;
}

}  // namespace cfmimo::solvers
