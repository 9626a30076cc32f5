#pragma once

#include <cstdint>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/phy.hpp"
#include "cfmimo/pilot.hpp"

namespace cfmimo::solvers {

// Pairwise UE conflict weights w_jk = (1/M) beta_j . beta_k plus the
// shared-serving-AP relation. Symmetric, zero diagonal.
struct InterferenceGraph {
  int K = 0;
  Mat W;
  std::vector<char> shared_ap;  // K*K
  bool shares(int j, int k) const { return shared_ap[(size_t)j * K + k] != 0; }
};

InterferenceGraph build_interference_graph(const Mat& beta, const Mat& A);

struct Coloring {
  std::vector<int> color;  // per UE, 0-based
  int n_colors = 0;
};

// Saturation-first greedy coloring of the hard-edge graph. Hard edges:
// w_jk >= edge_threshold or the two UEs share a serving AP. Vertex pick:
// max saturation, then max hard degree, then smallest index; color pick:
// smallest feasible.
Coloring dsatur_coloring(const InterferenceGraph& g, double edge_threshold);

// Colors become pilot slots; tau_p = number of colors.
CompactAssignment dsatur_assign(const InterferenceGraph& g,
                                double edge_threshold);

struct TabuOptions {
  int max_iters = 10;
  int tabu_len = -1;             // default: K
  std::uint64_t noise_seed = 1;  // pilot noise stream for the objective
};

struct TabuResult {
  CompactAssignment assignment;
  double objective = 0.0;  // equal-power avg net SE of `assignment`
};

// Best-admissible-move search over single-UE slot reassignments. The
// objective is the equal-power average net SE over the subframes of `cs`,
// evaluated on a fixed pilot-noise stream so candidates are comparable.
// Result is never worse than the input under that objective.
TabuResult tabu_refine(const CompactAssignment& x0, const ChannelSet& cs,
                       const SystemConfig& cfg, const TabuOptions& opt = {});

struct WmmseOptions {
  double tol = 1e-5;
  int max_iters = 200;
};

struct WmmseResult {
  Mat P;                          // M x K, zero off the association support
  std::vector<double> surrogate;  // bound value per iteration, nondecreasing
  int iters = 0;
};

// Block-coordinate weighted-MMSE power allocation on the scalar effective
// links Ghat[k, (m,i)]: closed-form receiver and weight updates, then
// per-AP-budget amplitude updates with a bisected multiplier.
WmmseResult wmmse_power(const CMatPair& Ghat, const Mat& A,
                        const SystemConfig& cfg, const WmmseOptions& opt = {});

// Power callback running wmmse_power on each subframe's estimated links.
PowerProvider wmmse_provider(const Mat& A, const SystemConfig& cfg,
                             const WmmseOptions& opt = {});

struct BaselineResult {
  CompactAssignment assignment;
  double tabu_objective = 0.0;  // equal-power objective of `assignment`
  FrameEval eval;               // final evaluation with WMMSE powers
};

// Full pipeline: conflict-graph coloring seed, tabu refinement under
// equal power, then WMMSE power allocation on the chosen assignment.
// edge_threshold < 0 uses the squared association threshold.
BaselineResult dsatur_tabu_wmmse(const ChannelSet& cs, const SystemConfig& cfg,
                                 std::uint64_t noise_seed,
                                 double edge_threshold = -1.0,
                                 const TabuOptions& topt = {});

enum class PowerRule { equal, wmmse };

struct OracleResult {
  CompactAssignment assignment;
  double eta_bar = 0.0;
  FrameEval eval;
  long n_candidates = 0;  // Bell(K)
};

// Exhaustive search over all set partitions of the UEs (slot labels
// canonicalized by first occurrence). Refuses K > 7.
OracleResult exhaustive_oracle(const ChannelSet& cs, const SystemConfig& cfg,
                               PowerRule rule, std::uint64_t noise_seed);

// Canonical assignment from per-UE labels: slots ordered by first use.
CompactAssignment labels_to_assignment(const std::vector<int>& label);

}  // namespace cfmimo::solvers
