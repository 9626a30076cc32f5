#include "cfmimo/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace cfmimo {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  os.write((const char*)b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read((char*)b, 4);
  if (!is) throw std::runtime_error("channel file: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= (std::uint32_t)b[i] << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((u >> (8 * i)) & 0xff);
  os.write((const char*)b, 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read((char*)b, 8);
  if (!is) throw std::runtime_error("channel file: truncated payload");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= (std::uint64_t)b[i] << (8 * i);
  double x;
  std::memcpy(&x, &u, 8);
  return x;
}

constexpr std::uint32_t kMagic = 0x4d4d4643u;  // "CFMM"

}  // namespace

void write_channels(const std::string& path, const Topology& topo,
                    const ChannelSet& cs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  put_u32(os, kMagic);
  put_u32(os, 1);
  put_u32(os, (std::uint32_t)cs.M);
  put_u32(os, (std::uint32_t)cs.N);
  put_u32(os, (std::uint32_t)cs.K);
  put_u32(os, (std::uint32_t)cs.N_T);
  for (const Pos& p : topo.ap) {
    put_f64(os, p.x);
    put_f64(os, p.y);
    put_f64(os, p.z);
  }
  for (const Pos& p : topo.ue) {
    put_f64(os, p.x);
    put_f64(os, p.y);
    put_f64(os, p.z);
  }
  for (int m = 0; m < cs.M; ++m)
    for (int k = 0; k < cs.K; ++k) put_f64(os, cs.beta.at(m, k));
  for (int m = 0; m < cs.M; ++m)
    for (int k = 0; k < cs.K; ++k) put_f64(os, cs.A.at(m, k));
  put_f64(os, cs.noise_ap_W);
  put_f64(os, cs.noise_ue_W);
  for (int t = 0; t < cs.N_T; ++t)
    for (int m = 0; m < cs.M; ++m)
      for (int k = 0; k < cs.K; ++k)
        for (int n = 0; n < cs.N; ++n) {
          const Cx& h = cs.H[t].at(n, m * cs.K + k);
          put_f64(os, h.re);
          put_f64(os, h.im);
        }
  if (!os) throw std::runtime_error("write failed: " + path);
}

SimDump read_channels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  if (get_u32(is) != kMagic) throw std::runtime_error("channel file: bad magic");
  const std::uint32_t ver = get_u32(is);
  if (ver != 1) throw std::runtime_error("channel file: unsupported version");
  SimDump d;
  ChannelSet& cs = d.cs;
  cs.M = (int)get_u32(is);
  cs.N = (int)get_u32(is);
  cs.K = (int)get_u32(is);
  cs.N_T = (int)get_u32(is);
  if (cs.M <= 0 || cs.N <= 0 || cs.K <= 0 || cs.N_T <= 0)
    throw std::runtime_error("channel file: bad dimensions");
  d.topo.M = cs.M;
  d.topo.K = cs.K;
  d.topo.ap.resize(cs.M);
  d.topo.ue.resize(cs.K);
  for (Pos& p : d.topo.ap) {
    p.x = get_f64(is);
    p.y = get_f64(is);
    p.z = get_f64(is);
  }
  for (Pos& p : d.topo.ue) {
    p.x = get_f64(is);
    p.y = get_f64(is);
    p.z = get_f64(is);
  }
  d.topo.dist.assign((size_t)cs.M * cs.K, 0.0);
  for (int m = 0; m < cs.M; ++m)
    for (int k = 0; k < cs.K; ++k) {
      const double dx = d.topo.ap[m].x - d.topo.ue[k].x;
      const double dy = d.topo.ap[m].y - d.topo.ue[k].y;
      const double dz = d.topo.ap[m].z - d.topo.ue[k].z;
      d.topo.s(m, k) = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  cs.beta = Mat(cs.M, cs.K);
  for (int m = 0; m < cs.M; ++m)
    for (int k = 0; k < cs.K; ++k) cs.beta.at(m, k) = get_f64(is);
  cs.A = Mat(cs.M, cs.K);
  for (int m = 0; m < cs.M; ++m)
    for (int k = 0; k < cs.K; ++k) cs.A.at(m, k) = get_f64(is) != 0.0 ? 1.0 : 0.0;
  cs.noise_ap_W = get_f64(is);
  cs.noise_ue_W = get_f64(is);
  cs.H.assign(cs.N_T, CMat(cs.N, cs.M * cs.K));
  for (int t = 0; t < cs.N_T; ++t)
    for (int m = 0; m < cs.M; ++m)
      for (int k = 0; k < cs.K; ++k)
        for (int n = 0; n < cs.N; ++n) {
          Cx& h = cs.H[t].at(n, m * cs.K + k);
          h.re = get_f64(is);
          h.im = get_f64(is);
        }
  return d;
}

}  // namespace cfmimo
