#pragma once

#include <cstdint>
#include <vector>

#include "cfmimo/config.hpp"

namespace cfmimo {

struct Pos {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Topology {
  std::vector<Pos> ap;         // size M
  std::vector<Pos> ue;         // size K
  std::vector<double> dist;    // M*K row-major 3D distances s_mk
  int M = 0, K = 0;
  double& s(int m, int k) { return dist[static_cast<size_t>(m) * K + k]; }
  double s(int m, int k) const { return dist[static_cast<size_t>(m) * K + k]; }
};

// APs on a hexagonal spiral with spacing isd_m (M=1: origin; M<=7: center
// plus first ring). UEs uniform over the covering disc, redrawn until the
// horizontal distance to every AP is >= min_distance_m.
Topology generate_topology(const SystemConfig& cfg, std::uint64_t seed);

// First n points of the hexagonal spiral lattice with unit spacing,
// ordered by ring then angle. Exposed for tests.
std::vector<Pos> hex_spiral(int n);

}  // namespace cfmimo
