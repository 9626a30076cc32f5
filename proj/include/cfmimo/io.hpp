#pragma once

#include <string>

#include "cfmimo/channel.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

// Binary channel dump: "CFMM", u32 version=1, u32 M,N,K,N_T, then f64 data:
// ap positions (M x 3), ue positions (K x 3), beta (M x K row-major),
// association mask (M x K), noise_ap_W, noise_ue_W, and the fades as
// N_T x M x K x N x (re, im). Little-endian throughout.
struct SimDump {
  Topology topo;
  ChannelSet cs;
};

void write_channels(const std::string& path, const Topology& topo,
                    const ChannelSet& cs);
SimDump read_channels(const std::string& path);

}  // namespace cfmimo
