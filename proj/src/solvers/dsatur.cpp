#include <algorithm>
#include <stdexcept>

#include "cfmimo/solvers.hpp"

namespace cfmimo::solvers {

Coloring dsatur_coloring(const InterferenceGraph& g, double edge_threshold) {
  if (edge_threshold < 0)
    throw std::invalid_argument("dsatur: negative threshold");
  const int K = g.K;
  std::vector<std::vector<char>> adj(K, std::vector<char>(K, 0));
  std::vector<int> degree(K, 0);
  for (int j = 0; j < K; ++j)
    for (int k = 0; k < K; ++k) {
      if (j == k) continue;
      if (g.W.at(j, k) >= edge_threshold || g.shares(j, k)) {
        adj[j][k] = 1;
        ++degree[j];
      }
    }

  Coloring c;
  c.color.assign(K, -1);
  for (int step = 0; step < K; ++step) {
    int pick = -1, best_sat = -1, best_deg = -1;
    for (int v = 0; v < K; ++v) {
      if (c.color[v] >= 0) continue;
      std::vector<char> seen(K, 0);
      int sat = 0;
      for (int u = 0; u < K; ++u)
        if (adj[v][u] && c.color[u] >= 0 && !seen[c.color[u]]) {
          seen[c.color[u]] = 1;
          ++sat;
        }
      if (sat > best_sat || (sat == best_sat && degree[v] > best_deg)) {
        pick = v;
        best_sat = sat;
        best_deg = degree[v];
      }
    }
    std::vector<char> used(K + 1, 0);
    for (int u = 0; u < K; ++u)
      if (adj[pick][u] && c.color[u] >= 0) used[c.color[u]] = 1;
    int col = 0;
    while (used[col]) ++col;
    c.color[pick] = col;
    c.n_colors = std::max(c.n_colors, col + 1);
  }
  return c;
}

CompactAssignment dsatur_assign(const InterferenceGraph& g,
                                double edge_threshold) {
  Coloring c = dsatur_coloring(g, edge_threshold);
  CompactAssignment ca;
  ca.tau_p = c.n_colors;
  ca.X_o = Mat(c.n_colors, g.K);
  for (int k = 0; k < g.K; ++k) ca.X_o.at(c.color[k], k) = 1.0;
  return ca;
}

}  // namespace cfmimo::solvers
