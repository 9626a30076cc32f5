#include <map>
#include <stdexcept>

#include "cfmimo/solvers.hpp"

namespace cfmimo::solvers {

CompactAssignment labels_to_assignment(const std::vector<int>& label) {
  const int K = (int)label.size();
  std::vector<int> remap(K, -1);
  int next = 0;
  for (int k = 0; k < K; ++k)
    if (remap[label[k]] < 0) remap[label[k]] = next++;
  CompactAssignment ca;
  ca.tau_p = next;
  ca.X_o = Mat(next, K);
  for (int k = 0; k < K; ++k) ca.X_o.at(remap[label[k]], k) = 1.0;
  return ca;
}

namespace {

std::vector<int> labels_of(const CompactAssignment& ca) {
  std::vector<int> label(ca.X_o.cols, -1);
  for (int k = 0; k < ca.X_o.cols; ++k)
    for (int g = 0; g < ca.X_o.rows; ++g)
      if (ca.X_o.at(g, k) != 0.0) label[k] = g;
  for (int v : label)
    if (v < 0) throw std::invalid_argument("tabu: column without slot");
  return label;
}

}  // namespace

TabuResult tabu_refine(const CompactAssignment& x0, const ChannelSet& cs,
                       const SystemConfig& cfg, const TabuOptions& opt) {
  const int K = cs.K;
  if (x0.X_o.cols != K) throw std::invalid_argument("tabu: K mismatch");
  const int tabu_len = opt.tabu_len > 0 ? opt.tabu_len : K;

  auto objective = [&](const std::vector<int>& label) {
    CompactAssignment ca = labels_to_assignment(label);
    return evaluate_equal_power(cs, cfg, ca.X_o, opt.noise_seed).eta_bar;
  };

  std::vector<int> cur = labels_of(x0);
  double cur_obj = objective(cur);
  std::vector<int> best = cur;
  double best_obj = cur_obj;
  std::map<std::pair<int, int>, int> tabu_until;  // (UE, slot) -> iteration

  for (int it = 1; it <= opt.max_iters; ++it) {
    int mv_k = -1, mv_g = -1;
    double mv_obj = -1.0;
    for (int k = 0; k < K; ++k)
      for (int g = 0; g < K; ++g) {
        if (g == cur[k]) continue;
        auto t = tabu_until.find({k, g});
        bool is_tabu = t != tabu_until.end() && t->second >= it;
        std::vector<int> cand = cur;
        cand[k] = g;
        double obj = objective(cand);
        if (is_tabu && obj <= best_obj) continue;  // aspiration only
        if (obj > mv_obj) {
          mv_obj = obj;
          mv_k = k;
          mv_g = g;
        }
      }
    if (mv_k < 0) break;  // everything tabu and nothing aspirates
    tabu_until[{mv_k, cur[mv_k]}] = it + tabu_len;  // forbid moving back
    cur[mv_k] = mv_g;
    cur_obj = mv_obj;
    if (cur_obj > best_obj) {
      best_obj = cur_obj;
      best = cur;
    }
  }

  TabuResult r;
  r.assignment = labels_to_assignment(best);
  r.objective = best_obj;
  return r;
}

BaselineResult dsatur_tabu_wmmse(const ChannelSet& cs, const SystemConfig& cfg,
                                 std::uint64_t noise_seed,
                                 double edge_threshold,
                                 const TabuOptions& topt) {
  if (edge_threshold < 0)
    edge_threshold = cfg.rho_lin() * cfg.rho_lin();
  InterferenceGraph g = build_interference_graph(cs.beta, cs.A);
  CompactAssignment seed = dsatur_assign(g, edge_threshold);
  TabuOptions to = topt;
  to.noise_seed = noise_seed;
  TabuResult t = tabu_refine(seed, cs, cfg, to);
  BaselineResult r;
  r.assignment = t.assignment;
  r.tabu_objective = t.objective;
  r.eval = evaluate_assignment(cs, cfg, t.assignment.X_o,
                               wmmse_provider(cs.A, cfg), noise_seed);
  return r;
}

}  // namespace cfmimo::solvers
