#include "cfmimo/topology.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cfmimo/rng.hpp"

namespace cfmimo {

std::vector<Pos> hex_spiral(int n) {
  // axial hex coordinates: ring r has 6r points, walked corner to corner
  std::vector<Pos> pts;
  pts.push_back({0.0, 0.0, 0.0});
  static const double dirx[6] = {-0.5, -1.0, -0.5, 0.5, 1.0, 0.5};
  static const double diry[6] = {0.8660254037844386, 0.0, -0.8660254037844386,
                                 -0.8660254037844386, 0.0, 0.8660254037844386};
  for (int ring = 1; static_cast<int>(pts.size()) < n; ++ring) {
    // start at the "east" corner of the ring
    double x = static_cast<double>(ring);
    double y = 0.0;
    for (int side = 0; side < 6; ++side) {
      for (int step = 0; step < ring; ++step) {
        pts.push_back({x, y, 0.0});
        if (static_cast<int>(pts.size()) == n) return pts;
        x += dirx[side];
        y += diry[side];
      }
    }
  }
  pts.resize(n);
  return pts;
}

Topology generate_topology(const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Topology t;
  t.M = cfg.M;
  t.K = cfg.K;
  const double isd = cfg.scen.isd_m;

  t.ap = hex_spiral(cfg.M);
  double max_r = 0.0;
  for (Pos& p : t.ap) {
    p.x *= isd;
    p.y *= isd;
    p.z = cfg.scen.ap_height_m;
    max_r = std::max(max_r, std::hypot(p.x, p.y));
  }
  const double cov_radius = max_r + 0.5 * isd;

  Rng rng(derive_seed(seed, "topology"));
  t.ue.resize(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      // uniform over the disc of radius cov_radius
      double r = cov_radius * std::sqrt(rng.uniform());
      double phi = 2.0 * M_PI * rng.uniform();
      Pos u{r * std::cos(phi), r * std::sin(phi), cfg.scen.ue_height_m};
      bool ok = true;
      for (const Pos& a : t.ap) {
        if (std::hypot(u.x - a.x, u.y - a.y) < cfg.scen.min_distance_m) {
          ok = false;
          break;
        }
      }
      if (ok) {
        t.ue[k] = u;
        break;
      }
      if (attempt == 99999)
        throw std::runtime_error("topology: cannot place UE at min distance");
    }
  }

  t.dist.resize(static_cast<size_t>(cfg.M) * cfg.K);
  for (int m = 0; m < cfg.M; ++m)
    for (int k = 0; k < cfg.K; ++k) {
      const Pos& a = t.ap[m];
      const Pos& u = t.ue[k];
      double dx = a.x - u.x, dy = a.y - u.y, dz = a.z - u.z;
      t.s(m, k) = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  return t;
}

}  // namespace cfmimo
