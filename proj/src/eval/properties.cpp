#include "cfmimo/eval/properties.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cfmimo/ad/tape.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/gnn/graphs.hpp"
#include "cfmimo/gnn/model.hpp"
#include "cfmimo/phy.hpp"
#include "cfmimo/pilot.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/solvers.hpp"
#include "cfmimo/train/soft_chain.hpp"
#include "cfmimo/train/trainer.hpp"

namespace cfmimo::eval {

using ad::Tape;
using ad::Tensor;
using ad::Val;
using train::SoftFrame;
using train::SoftSubframe;
using train::soft_frame;
using train::soft_estimate;
using train::soft_eta;
using train::soft_net_se;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Mat rand_beta(int M, int K, Rng& rng) {
  Mat b(M, K);
  for (auto& v : b.a) v = rng.uniform(0.2, 2.0);
  return b;
}

Mat rand_assoc(const Mat& beta, Rng& rng) {
  Mat A(beta.rows, beta.cols);
  for (int k = 0; k < beta.cols; ++k) {
    int best = 0;
    for (int m = 1; m < beta.rows; ++m)
      if (beta.at(m, k) > beta.at(best, k)) best = m;
    for (int m = 0; m < beta.rows; ++m)
      A.at(m, k) = (m == best || rng.uniform() < 0.4) ? 1.0 : 0.0;
  }
  return A;
}

Mat rand_lambda(int n_ps, int K, Rng& rng) {
  Mat L(n_ps, K);
  for (auto& v : L.a) v = rng.uniform();
  return L;
}

CMatPair rand_ghat(int M, int K, Rng& rng) {
  CMatPair G(K, M * K);
  for (auto& v : G.re.a) v = rng.normal() * 0.5;
  for (auto& v : G.im.a) v = rng.normal() * 0.5;
  return G;
}

// make inference-mode normalization stats non-trivial
void scramble_bn(ad::BatchNorm& bn) {
  for (size_t i = 0; i < bn.run_mean.v.size(); ++i) {
    bn.run_mean.v[i] = 0.1 * (double)i - 0.2;
    bn.run_var.v[i] = 1.0 + 0.05 * (double)i;
  }
}

void scramble_stats(gnn::PilotModel& m) {
  for (auto& ly : m.layers) {
    scramble_bn(ly.bn_apue);
    scramble_bn(ly.bn_psue);
  }
}

void scramble_stats(gnn::PowerModel& m) {
  for (auto& ly : m.layers) {
    scramble_bn(ly.bn_sig);
    scramble_bn(ly.bn_inf);
  }
}

SystemConfig sized_cfg(int M, int N, int K, int tau_c, int N_T) {
  SystemConfig cfg;
  cfg.M = M;
  cfg.N = N;
  cfg.K = K;
  cfg.tau_c = tau_c;
  cfg.N_T = N_T;
  return cfg;
}

}  // namespace

PropertyResult check_equivariance(std::uint64_t seed, int n_draws) {
  PropertyResult r{"equivariance", true, "", 0.0};
  const double t0 = now_s();
  double worst = 0.0;
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, "equiv", d));
    const int M = 2 + (int)rng.uniform_int(3);
    const int K = 3 + (int)rng.uniform_int(4);
    Mat beta = rand_beta(M, K, rng);
    Mat A = rand_assoc(beta, rng);
    Mat L = rand_lambda(K, K, rng);
    std::vector<int> s_ue = random_permutation(K, rng.next_u64());
    std::vector<int> s_ap = random_permutation(M, rng.next_u64());
    std::vector<int> s_ps = random_permutation(K, rng.next_u64());
    Mat beta_p = permute_rows_cols(beta, s_ap, s_ue);
    Mat A_p = permute_rows_cols(A, s_ap, s_ue);
    Mat L_p = permute_rows_cols(L, s_ps, s_ue);
    const double Pmax = 3.0;

    gnn::PilotModel net;
    net.init(gnn::sts_default_spec(), rng.next_u64());
    scramble_stats(net);
    Tape t1, t2;
    auto o1 = gnn::pilot_forward(t1, net, gnn::build_pilot_graph(beta, A, L),
                                 Pmax);
    auto o2 = gnn::pilot_forward(
        t2, net, gnn::build_pilot_graph(beta_p, A_p, L_p), Pmax);
    const Tensor& x1 = t1.val(o1.x_soft);
    const Tensor& x2 = t2.val(o2.x_soft);
    for (int p = 0; p < K; ++p)
      for (int k = 0; k < K; ++k)
        worst = std::max(worst,
                         std::fabs(x2.at(p, k) - x1.at(s_ps[p], s_ue[k])));
    const Tensor& P1 = t1.val(o1.power);
    const Tensor& P2 = t2.val(o2.power);
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k)
        worst = std::max(worst,
                         std::fabs(P2.at(m, k) - P1.at(s_ap[m], s_ue[k])));

    gnn::PowerModel pw;
    pw.init(gnn::power_default_spec(), rng.next_u64());
    scramble_stats(pw);
    CMatPair G = rand_ghat(M, K, rng);
    CMatPair G_p(K, M * K);
    for (int k = 0; k < K; ++k)
      for (int m = 0; m < M; ++m)
        for (int i = 0; i < K; ++i) {
          G_p.re.at(k, m * K + i) =
              G.re.at(s_ue[k], s_ap[m] * K + s_ue[i]);
          G_p.im.at(k, m * K + i) =
              G.im.at(s_ue[k], s_ap[m] * K + s_ue[i]);
        }
    Tape t3, t4;
    auto o3 = gnn::power_forward(t3, pw, gnn::build_power_graph(G, A), Pmax);
    auto o4 =
        gnn::power_forward(t4, pw, gnn::build_power_graph(G_p, A_p), Pmax);
    const Tensor& Q1 = t3.val(o3.P);
    const Tensor& Q2 = t4.val(o4.P);
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k)
        worst = std::max(worst,
                         std::fabs(Q2.at(m, k) - Q1.at(s_ap[m], s_ue[k])));
  }
  r.pass = worst <= 1e-6;
  r.detail = fmt("worst deviation %.3g over %d draws (tol 1e-6)", worst,
                 n_draws);
  r.seconds = now_s() - t0;
  return r;
}

PropertyResult check_degeneracy(std::uint64_t seed, int n_draws) {
  PropertyResult r{"degeneracy", true, "", 0.0};
  const double t0 = now_s();
  bool exact_ok = true;
  int vanished = 0;
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, "degen", d));
    const int M = 2 + (int)rng.uniform_int(2);
    const int K = 3 + (int)rng.uniform_int(4);
    Mat beta = rand_beta(M, K, rng);
    Mat A = rand_assoc(beta, rng);
    // duplicate UE 1 onto UE 0's large-scale inputs
    for (int m = 0; m < M; ++m) {
      beta.at(m, 1) = beta.at(m, 0);
      A.at(m, 1) = A.at(m, 0);
    }
    Mat L = rand_lambda(K, K, rng);
    gnn::PilotModel net;
    net.init(gnn::sts_default_spec(), rng.next_u64());
    const double Pmax = 3.0;
    // the collapse matters while the net is being trained, so run the
    // forwards the way training does (batch statistics, not running ones)
    const gnn::ForwardOpts train_mode{true};

    {  // random-feature channel off: columns collapse to uniform
      Tape tp;
      auto o = gnn::pilot_forward(
          tp, net, gnn::build_pilot_graph(beta, A, L, false), Pmax,
          train_mode);
      const Tensor& x = tp.val(o.x_soft);
      const double u = 1.0 / (double)K;
      for (double v : x.v)
        if (v != u) exact_ok = false;
      const Tensor& P = tp.val(o.power);
      for (int m = 0; m < M; ++m)
        if (P.at(m, 0) != P.at(m, 1)) exact_ok = false;
      for (int g = 0; g < K; ++g)
        if (x.at(g, 0) != x.at(g, 1)) exact_ok = false;
    }
    {  // random features on: both degeneracies must break
      Tape tp;
      auto o = gnn::pilot_forward(
          tp, net, gnn::build_pilot_graph(beta, A, L, true), Pmax,
          train_mode);
      const Tensor& x = tp.val(o.x_soft);
      const double u = 1.0 / (double)K;
      double dev_uniform = 0.0, dev_dup = 0.0;
      for (double v : x.v) dev_uniform = std::max(dev_uniform, std::fabs(v - u));
      for (int g = 0; g < K; ++g)
        dev_dup = std::max(dev_dup, std::fabs(x.at(g, 0) - x.at(g, 1)));
      if (dev_uniform > 1e-9 && dev_dup > 1e-9) ++vanished;
    }
  }
  r.pass = exact_ok && vanished >= (99 * n_draws) / 100;
  r.detail = fmt("uniform/duplicate collapse exact: %s; broken by features "
                 "%d/%d draws",
                 exact_ok ? "yes" : "NO", vanished, n_draws);
  r.seconds = now_s() - t0;
  return r;
}

namespace {

struct OpCase {
  std::string name;
  std::vector<Mat> in;
  std::function<Val(Tape&, const std::vector<Val>&)> build;
};

double op_worst_rel(const OpCase& oc, std::uint64_t probe_seed) {
  Tape tp;
  std::vector<Val> ps;
  for (const Mat& m : oc.in) ps.push_back(tp.param(Tensor::from_mat(m)));
  Val out = oc.build(tp, ps);
  Mat probe(tp.rows(out), tp.cols(out));
  {
    Rng prng(probe_seed);
    for (auto& v : probe.a) v = prng.uniform(0.5, 1.5);
  }
  Val root = ad::sum_all(ad::mul(out, tp.constant(probe)));
  tp.backward(root);
  std::vector<Tensor> grads;
  for (Val p : ps) grads.push_back(tp.grad(p));

  std::vector<Mat> cur = oc.in;
  auto eval = [&]() {
    Tape t2;
    std::vector<Val> qs;
    for (const Mat& m : cur) qs.push_back(t2.constant(m));
    Val o = oc.build(t2, qs);
    Val rt = ad::sum_all(ad::mul(o, t2.constant(probe)));
    return t2.val(rt).v[0];
  };

  double worst = 0.0;
  for (size_t i = 0; i < cur.size(); ++i)
    for (size_t q = 0; q < cur[i].a.size(); ++q) {
      const double keep = cur[i].a[q];
      const double h = 1e-5 * std::max(1.0, std::fabs(keep));
      cur[i].a[q] = keep + h;
      const double fp = eval();
      cur[i].a[q] = keep - h;
      const double fm = eval();
      cur[i].a[q] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double g = grads[i].v[q];
      const double rel =
          std::fabs(fd - g) / std::max({std::fabs(fd), std::fabs(g), 1e-6});
      worst = std::max(worst, rel);
    }
  return worst;
}

Mat rmat(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (auto& v : m.a) v = rng.uniform(lo, hi);
  return m;
}

std::vector<OpCase> op_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<OpCase> cs;
  auto one = [](Val v) { return v; };
  (void)one;
  auto add_case = [&](std::string name, std::vector<Mat> in,
                      std::function<Val(Tape&, const std::vector<Val>&)> f) {
    cs.push_back({std::move(name), std::move(in), std::move(f)});
  };

  add_case("add", {rmat(3, 2, rng), rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::add(v[0], v[1]); });
  add_case("sub", {rmat(3, 2, rng), rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::sub(v[0], v[1]); });
  add_case("mul", {rmat(3, 2, rng), rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::mul(v[0], v[1]); });
  add_case("div", {rmat(3, 2, rng), rmat(3, 2, rng, 0.5, 1.5)},
           [](Tape&, const std::vector<Val>& v) { return ad::div(v[0], v[1]); });
  add_case("scale_const", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::scale_const(v[0], 1.7);
           });
  add_case("add_const", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::add_const(v[0], 0.3);
           });
  add_case("neg", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::neg(v[0]); });
  add_case("matmul", {rmat(2, 3, rng), rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::matmul(v[0], v[1]);
           });
  add_case("transpose", {rmat(2, 3, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::transpose(v[0]); });
  add_case("relu", {rmat(3, 2, rng, 0.2, 1.0)},
           [](Tape&, const std::vector<Val>& v) { return ad::relu(v[0]); });
  add_case("tanh", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::tanh_op(v[0]); });
  add_case("sigmoid", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::sigmoid(v[0]); });
  add_case("log_clamped", {rmat(3, 2, rng, 0.5, 2.0)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::log_clamped(v[0]);
           });
  add_case("sqrt", {rmat(3, 2, rng, 0.5, 2.0)},
           [](Tape&, const std::vector<Val>& v) { return ad::sqrt_op(v[0]); });
  add_case("exp", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::exp_op(v[0]); });
  add_case("softmax_cols", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::softmax_cols(v[0]);
           });
  add_case("clamp", {rmat(3, 2, rng, 0.3, 0.7)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::clamp(v[0], 0.2, 0.8);
           });
  add_case("max_const", {rmat(3, 2, rng, 0.3, 1.0)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::max_const(v[0], 0.1);
           });
  add_case("sum_all", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::sum_all(v[0]); });
  add_case("sum_rows", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::sum_rows(v[0]); });
  add_case("sum_cols", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) { return ad::sum_cols(v[0]); });
  add_case("gather_rows", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::gather_rows(v[0], {2, 0, 1, 0});
           });
  add_case("segment_sum", {rmat(4, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::segment_sum(v[0], {0, 1, 0, 1}, 2);
           });
  add_case("row_scale_const", {rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::row_scale_const(v[0], {0.5, 1.5, 2.0});
           });
  add_case("mul_colvec", {rmat(3, 2, rng), rmat(3, 1, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::mul_colvec(v[0], v[1]);
           });
  add_case("mul_rowvec", {rmat(3, 2, rng), rmat(1, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::mul_rowvec(v[0], v[1]);
           });
  add_case("div_rowvec", {rmat(3, 2, rng), rmat(1, 2, rng, 0.5, 1.5)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::div_rowvec(v[0], v[1]);
           });
  add_case("sub_rowvec", {rmat(3, 2, rng), rmat(1, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::sub_rowvec(v[0], v[1]);
           });
  add_case("add_rowvec", {rmat(3, 2, rng), rmat(1, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::add_rowvec(v[0], v[1]);
           });
  add_case("mul_scalar", {rmat(3, 2, rng), rmat(1, 1, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::mul_scalar(v[0], v[1]);
           });
  add_case("concat_cols", {rmat(2, 2, rng), rmat(2, 3, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::concat_cols(v[0], v[1]);
           });
  add_case("concat_rows", {rmat(2, 2, rng), rmat(3, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::concat_rows(v[0], v[1]);
           });
  add_case("slice_cols", {rmat(2, 4, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::slice_cols(v[0], 1, 3);
           });
  add_case("reshape", {rmat(2, 3, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::reshape(v[0], 3, 2);
           });
  add_case("magsq2", {rmat(2, 2, rng), rmat(2, 2, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::magsq2(v[0], v[1]);
           });
  add_case("fbmm", {rmat(4, 3, rng), rmat(4, 3, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::fbmm(v[0], v[1], 2, 2, 2);
           });
  add_case("fbmm_tA", {rmat(4, 3, rng), rmat(4, 3, rng)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::fbmm_tA(v[0], v[1], 2, 2, 2);
           });
  add_case("pilot_count", {rmat(3, 3, rng, 0.1, 0.9)},
           [](Tape&, const std::vector<Val>& v) {
             return ad::pilot_count(v[0]);
           });
  {
    Mat ar = rmat(2, 2, rng, -0.5, 0.5);
    ar.at(0, 0) += 2.5;
    ar.at(1, 1) += 2.5;
    add_case("hermitian_solve",
             {ar, rmat(2, 2, rng, -0.5, 0.5), rmat(2, 3, rng),
              rmat(2, 3, rng)},
             [](Tape&, const std::vector<Val>& v) {
               return ad::hermitian_solve(v[0], v[1], v[2], v[3]);
             });
  }
  return cs;
}

}  // namespace

PropertyResult check_gradient_fidelity(std::uint64_t seed) {
  PropertyResult r{"gradient_fidelity", true, "", 0.0};
  const double t0 = now_s();

  double worst_op = 0.0;
  std::string worst_name = "-";
  std::vector<OpCase> cases = op_cases(derive_seed(seed, "grad_ops"));
  for (size_t i = 0; i < cases.size(); ++i) {
    double w = op_worst_rel(cases[i], derive_seed(seed, "grad_probe", i));
    if (w > worst_op) {
      worst_op = w;
      worst_name = cases[i].name;
    }
  }

  // end-to-end: loss of a tiny joint model through the relaxed chain
  SystemConfig cfg = sized_cfg(2, 1, 2, 20, 1);
  ChannelSet cs = generate_channels(cfg, derive_seed(seed, "grad_cs"));
  Mat beta_s(cs.beta.rows, cs.beta.cols);
  for (size_t i = 0; i < beta_s.a.size(); ++i)
    beta_s.a[i] = cs.beta.a[i] / cfg.rho_lin();
  Rng lr(derive_seed(seed, "grad_lambda"));
  Mat L = rand_lambda(cfg.K, cfg.K, lr);
  gnn::PilotGraph g = gnn::build_pilot_graph(beta_s, cs.A, L);
  CMatPair noise = draw_complex_noise(cfg.N, cfg.M * cfg.K, cs.noise_ap_W,
                                      derive_seed(seed, "grad_noise"));
  gnn::GnnSpec spec;
  spec.widths = {3, 2};
  gnn::PilotModel model;
  model.init(spec, derive_seed(seed, "grad_init"));

  auto loss_value = [&]() {
    Tape tp;
    auto fwd = gnn::pilot_forward(tp, model, g, cfg.P_max_W(), {true});
    SoftFrame fr = soft_frame(tp, fwd.x_soft, cs, cfg);
    SoftSubframe sf = soft_estimate(tp, fr, cs, cfg, 0, noise);
    Val eta = soft_eta(tp, fr, sf, fwd.power, cs, 0);
    Val pen = train::binarization_penalty(fwd.x_soft);
    Val root =
        ad::scale_const(ad::sub(eta, ad::scale_const(pen, 0.2)), -1.0);
    return tp.val(root).v[0];
  };

  std::vector<Tensor> grads;
  {
    Tape tp;
    auto fwd = gnn::pilot_forward(tp, model, g, cfg.P_max_W(), {true});
    SoftFrame fr = soft_frame(tp, fwd.x_soft, cs, cfg);
    SoftSubframe sf = soft_estimate(tp, fr, cs, cfg, 0, noise);
    Val eta = soft_eta(tp, fr, sf, fwd.power, cs, 0);
    Val pen = train::binarization_penalty(fwd.x_soft);
    Val root =
        ad::scale_const(ad::sub(eta, ad::scale_const(pen, 0.2)), -1.0);
    tp.backward(root);
    for (Val p : fwd.params) grads.push_back(tp.grad(p));
  }

  double worst_e2e = 0.0;
  std::vector<Tensor*> params = model.trainable();
  for (size_t i = 0; i < params.size(); ++i)
    for (size_t q = 0; q < params[i]->v.size(); ++q) {
      const double keep = params[i]->v[q];
      const double h = 1e-5 * std::max(1.0, std::fabs(keep));
      params[i]->v[q] = keep + h;
      const double fp = loss_value();
      params[i]->v[q] = keep - h;
      const double fm = loss_value();
      params[i]->v[q] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double gv = grads[i].v[q];
      const double rel =
          std::fabs(fd - gv) / std::max({std::fabs(fd), std::fabs(gv), 1e-6});
      worst_e2e = std::max(worst_e2e, rel);
    }

  r.pass = worst_op < 1e-4 && worst_e2e < 1e-3;
  r.detail = fmt("ops worst %.3g (%s; tol 1e-4); end-to-end worst %.3g "
                 "(tol 1e-3)",
                 worst_op, worst_name.c_str(), worst_e2e);
  r.seconds = now_s() - t0;
  return r;
}

PropertyResult check_constraints(std::uint64_t seed, int n_draws) {
  PropertyResult r{"constraints", true, "", 0.0};
  const double t0 = now_s();
  int violations = 0;
  double worst_col = 0.0, worst_budget = -1e300;
  gnn::GnnSpec small;
  small.widths = {4, 2};
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, "cons", d));
    const int M = 2 + (int)rng.uniform_int(3);
    const int K = 2 + (int)rng.uniform_int(5);
    const int n_ps = 2 + (int)rng.uniform_int(K - 1);
    const double Pmax = rng.uniform(0.5, 30.0);
    Mat beta = rand_beta(M, K, rng);
    Mat A = rand_assoc(beta, rng);
    Mat L = rand_lambda(n_ps, K, rng);

    gnn::PilotModel net;
    net.init(small, rng.next_u64());
    Tape tp;
    auto o = gnn::pilot_forward(tp, net,
                                gnn::build_pilot_graph(beta, A, L), Pmax);
    const Tensor& x = tp.val(o.x_soft);
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int g = 0; g < n_ps; ++g) s += x.at(g, k);
      worst_col = std::max(worst_col, std::fabs(s - 1.0));
      if (std::fabs(s - 1.0) > 1e-12) ++violations;
    }
    Mat xb = discretize(x.to_mat());
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int g = 0; g < xb.rows; ++g) s += xb.at(g, k);
      if (s != 1.0) ++violations;
    }
    const Tensor& P = tp.val(o.power);
    for (int m = 0; m < M; ++m) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) {
        if (P.at(m, k) < 0.0) ++violations;
        s += P.at(m, k);
      }
      worst_budget = std::max(worst_budget, s - Pmax);
      if (s > Pmax + 1e-9) ++violations;
    }

    gnn::PowerModel pw;
    pw.init(small, rng.next_u64());
    CMatPair G = rand_ghat(M, K, rng);
    Tape tq;
    auto oq = gnn::power_forward(tq, pw, gnn::build_power_graph(G, A), Pmax);
    const Tensor& Q = tq.val(oq.P);
    for (int m = 0; m < M; ++m) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) {
        if (Q.at(m, k) < 0.0) ++violations;
        s += Q.at(m, k);
      }
      worst_budget = std::max(worst_budget, s - Pmax);
      if (s > Pmax + 1e-9) ++violations;
    }
  }
  r.pass = violations == 0;
  r.detail = fmt("%d violations in %d draws; worst column-sum dev %.3g; "
                 "worst budget excess %.3g",
                 violations, n_draws, worst_col, worst_budget);
  r.seconds = now_s() - t0;
  return r;
}

PropertyResult check_relaxation_consistency(std::uint64_t seed, int n_draws) {
  PropertyResult r{"relaxation_consistency", true, "", 0.0};
  const double t0 = now_s();
  double worst = 0.0;
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, "relax", d));
    SystemConfig cfg =
        sized_cfg(2 + (int)rng.uniform_int(2), 1 + (int)rng.uniform_int(2),
                  3 + (int)rng.uniform_int(4), 30 + (int)rng.uniform_int(70),
                  1);
    cfg.mmse_scaling = (d % 2 == 0) ? MmseScaling::self_consistent
                                    : MmseScaling::paper_eq2;
    ChannelSet cs = generate_channels(cfg, rng.next_u64());
    const int tau_p = 1 + (int)rng.uniform_int(cfg.K);
    Mat X(tau_p, cfg.K);
    for (int k = 0; k < cfg.K; ++k)
      X.at((int)rng.uniform_int(tau_p), k) = 1.0;
    Mat P(cfg.M, cfg.K);
    for (int m = 0; m < cfg.M; ++m) {
      double tot = 0.0;
      for (int k = 0; k < cfg.K; ++k)
        if (cs.A.at(m, k) != 0.0) {
          P.at(m, k) = rng.uniform(0.05, 1.0);
          tot += P.at(m, k);
        }
      if (tot > 0.0) {
        const double budget = cfg.P_max_W() * rng.uniform(0.3, 1.0);
        for (int k = 0; k < cfg.K; ++k) P.at(m, k) *= budget / tot;
      }
    }
    CMatPair noise = draw_complex_noise(cfg.N, cfg.M * cfg.K, cs.noise_ap_W,
                                        rng.next_u64());

    CMatPair Y = received_pilot(cs, X, cfg.p_ul_W(), 0, noise);
    CMatPair Hhat = mmse_estimate(cs, X, Y, cfg);
    CMatPair V = rzf_beamforming(Hhat, cs, cfg);
    CMatPair G = equivalent_channels(cs, 0, V);
    SeResult se = sinr_and_net_se(G, P, cs.A, cs.noise_ue_W, psi(X),
                                  cfg.tau_c);

    Tape tp;
    Val eta =
        soft_net_se(tp, tp.constant(X), tp.constant(P), cs, cfg, 0, noise);
    worst = std::max(worst, std::fabs(tp.val(eta).v[0] - se.eta));
  }
  r.pass = worst <= 1e-12;
  r.detail =
      fmt("worst |soft - binary| %.3g over %d instances (tol 1e-12)", worst,
          n_draws);
  r.seconds = now_s() - t0;
  return r;
}

PropertyResult check_solver_quality(std::uint64_t seed) {
  PropertyResult r{"solver_quality", true, "", 0.0};
  const double t0 = now_s();

  // slot search against the exhaustive partition oracle, equal power
  double worst_gap = 0.0;
  SystemConfig cfg = sized_cfg(2, 2, 4, 50, 3);
  for (int i = 0; i < 20; ++i) {
    ChannelSet cs = generate_channels(cfg, derive_seed(seed, "sol", i));
    solvers::InterferenceGraph ig =
        solvers::build_interference_graph(cs.beta, cs.A);
    CompactAssignment x0 = solvers::dsatur_assign(
        ig, cfg.rho_lin() * cfg.rho_lin());
    solvers::TabuOptions topt;
    topt.noise_seed = derive_seed(seed, "sol_noise", i);
    solvers::TabuResult tr = solvers::tabu_refine(x0, cs, cfg, topt);
    solvers::OracleResult orc = solvers::exhaustive_oracle(
        cs, cfg, solvers::PowerRule::equal, topt.noise_seed);
    const double gap =
        orc.eta_bar > 0.0 ? (orc.eta_bar - tr.objective) / orc.eta_bar : 0.0;
    worst_gap = std::max(worst_gap, gap);
  }

  // power allocation against a fine grid on 2 AP / 2 UE effective links
  double worst_ratio = 1.0;
  for (int inst = 0; inst < 3; ++inst) {
    SystemConfig tcfg = sized_cfg(2, 1, 2, 10, 1);
    tcfg.B_Hz = 1.0;  // round synthetic noise
    tcfg.N0_dBm_per_Hz = 20.0;
    tcfg.N_F_dB = 0.0;
    tcfg.p_ul_dBm = watt_to_dbm(0.4);
    tcfg.P_max_dBm = watt_to_dbm(2.0);
    const double sigma2 = tcfg.noise_power_W();
    const double P = tcfg.P_max_W();
    Mat A(2, 2);
    for (auto& v : A.a) v = 1.0;
    Rng rng(derive_seed(seed, "wmmse", inst));
    CMatPair G(2, 4);
    for (auto& v : G.re.a) v = rng.normal() * 0.5;
    for (auto& v : G.im.a) v = rng.normal() * 0.5;

    auto sum_rate = [&](double p00, double p01, double p10, double p11) {
      const double q[2][2] = {{std::sqrt(p00), std::sqrt(p01)},
                              {std::sqrt(p10), std::sqrt(p11)}};
      double total = 0.0;
      for (int k = 0; k < 2; ++k) {
        Cx sig{0, 0}, cross{0, 0};
        for (int m = 0; m < 2; ++m) {
          sig = sig + q[m][k] * Cx{G.re.at(k, m * 2 + k), G.im.at(k, m * 2 + k)};
          cross = cross + q[m][1 - k] * Cx{G.re.at(k, m * 2 + 1 - k),
                                           G.im.at(k, m * 2 + 1 - k)};
        }
        total += std::log2(1.0 + abs2(sig) / (abs2(cross) + sigma2));
      }
      return total;
    };

    const int steps = 100;
    double best = 0.0;
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; i + j <= steps; ++j)
        for (int a = 0; a <= steps; ++a)
          for (int b = 0; a + b <= steps; ++b)
            best = std::max(best, sum_rate(P * i / steps, P * j / steps,
                                           P * a / steps, P * b / steps));

    solvers::WmmseResult wr = solvers::wmmse_power(G, A, tcfg);
    const double got =
        sum_rate(wr.P.at(0, 0), wr.P.at(0, 1), wr.P.at(1, 0), wr.P.at(1, 1));
    worst_ratio = std::min(worst_ratio, best > 0.0 ? got / best : 1.0);
  }

  r.pass = worst_gap <= 0.02 && worst_ratio >= 0.99;
  r.detail = fmt("tabu-vs-oracle worst gap %.3g%% (tol 2%%); "
                 "power-vs-grid worst ratio %.4f (floor 0.99)",
                 100.0 * worst_gap, worst_ratio);
  r.seconds = now_s() - t0;
  return r;
}

PropertyResult check_nmse_closed_form(std::uint64_t seed) {
  PropertyResult r{"nmse_closed_form", true, "", 0.0};
  const double t0 = now_s();
  const int n_draws = 10000;
  double worst = 0.0;

  for (int c = 0; c < 2; ++c) {
    SystemConfig cfg = sized_cfg(2, 4, c == 0 ? 3 : 4, 100, n_draws);
    ChannelSet cs = generate_channels(cfg, derive_seed(seed, "nmse_cs", c));
    const int tau_p = c == 0 ? cfg.K : 2;  // orthogonal vs contaminated
    Mat X(tau_p, cfg.K);
    for (int k = 0; k < cfg.K; ++k) X.at(k % tau_p, k) = 1.0;

    Mat acc(cfg.M, cfg.K);
    for (int t = 0; t < n_draws; ++t) {
      CMatPair noise =
          draw_complex_noise(cfg.N, cfg.M * cfg.K, cs.noise_ap_W,
                             derive_seed(seed, "nmse_n", c, t));
      CMatPair Y = received_pilot(cs, X, cfg.p_ul_W(), t, noise);
      CMatPair Hhat = mmse_estimate(cs, X, Y, cfg);
      for (int m = 0; m < cfg.M; ++m)
        for (int k = 0; k < cfg.K; ++k) {
          if (cs.A.at(m, k) == 0.0) continue;
          const double rb = std::sqrt(cs.beta.at(m, k));
          const Cx* h = cs.h(t, m, k);
          double e = 0.0;
          for (int n = 0; n < cfg.N; ++n) {
            const double dr = Hhat.re.at(n, m * cfg.K + k) - rb * h[n].re;
            const double di = Hhat.im.at(n, m * cfg.K + k) - rb * h[n].im;
            e += dr * dr + di * di;
          }
          acc.at(m, k) += e;
        }
    }
    for (int m = 0; m < cfg.M; ++m)
      for (int k = 0; k < cfg.K; ++k) {
        if (cs.A.at(m, k) == 0.0) continue;
        const double mc = acc.at(m, k) /
                          ((double)n_draws * cfg.N * cs.beta.at(m, k));
        const double cf = nmse(X, cs.beta, m, k, cfg);
        worst = std::max(worst, std::fabs(mc - cf) / cf);
      }
  }
  r.pass = worst <= 0.02;
  r.detail = fmt("worst relative deviation %.3g over %d draws/config "
                 "(tol 0.02)",
                 worst, n_draws);
  r.seconds = now_s() - t0;
  return r;
}

std::vector<PropertyResult> run_property_suite(std::uint64_t seed) {
  std::vector<PropertyResult> rs;
  rs.push_back(check_equivariance(seed));
  rs.push_back(check_degeneracy(seed));
  rs.push_back(check_gradient_fidelity(seed));
  rs.push_back(check_constraints(seed));
  rs.push_back(check_relaxation_consistency(seed));
  rs.push_back(check_solver_quality(seed));
  rs.push_back(check_nmse_closed_form(seed));
  return rs;
}

bool all_pass(const std::vector<PropertyResult>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

std::string properties_report(const std::vector<PropertyResult>& rs) {
  std::string out;
  int ok = 0;
  for (const auto& r : rs) {
    out += fmt("[%s] %-24s %6.2fs  %s\n", r.pass ? "PASS" : "FAIL",
               r.name.c_str(), r.seconds, r.detail.c_str());
    if (r.pass) ++ok;
  }
  out += fmt("%d/%zu checks passed\n", ok, rs.size());
  return out;
}

std::string properties_csv(const std::vector<PropertyResult>& rs) {
  std::string out = "# cfmimo-properties v1\ncheck,pass,seconds,detail\n";
  for (const auto& r : rs) {
    std::string d = r.detail;
    for (char& ch : d)
      if (ch == ',') ch = ';';
    out += fmt("%s,%d,%.3f,%s\n", r.name.c_str(), r.pass ? 1 : 0, r.seconds,
               d.c_str());
  }
  return out;
}

}  // namespace cfmimo::eval
