#include "cfmimo/gnn/model.hpp"

#include <stdexcept>

#include "cfmimo/rng.hpp"

namespace cfmimo::gnn {

using ad::Tape;
using ad::Tensor;
using ad::Val;

namespace {

int layer_count(const GnnSpec& s) { return (int)s.widths.size(); }

bool hidden_layer(const GnnSpec& s, int l) { return l + 1 < layer_count(s); }

// registers model tensors on the tape in trainable() order
struct Binder {
  Tape& tp;
  bool train;
  std::vector<Val>* out;
  Val operator()(Tensor& t) {
    Val v = train ? tp.param(t) : tp.constant(t);
    if (train) out->push_back(v);
    return v;
  }
};

}  // namespace

void PilotModel::init(const GnnSpec& s, std::uint64_t seed) {
  if (s.widths.empty()) throw std::invalid_argument("pilot model: no layers");
  spec = s;
  layers.assign(layer_count(s), PilotLayer{});
  for (int l = 0; l < layer_count(s); ++l) {
    const int ia = l == 0 ? in_apue : s.widths[l - 1];
    const int ip = l == 0 ? in_psue : s.widths[l - 1];
    const int o = s.widths[l];
    PilotLayer& L = layers[l];
    int slot = 0;
    auto mk = [&](int r, int c) {
      return ad::glorot_uniform(r, c, derive_seed(seed, "pilot_glorot", l, slot++));
    };
    L.Q_AP1 = mk(ia, o);
    L.U_AP1 = mk(ia, o);
    L.U_AP2 = mk(ia, o);
    L.Q_PS1 = mk(ip, o);
    L.U_PS1 = mk(ia, o);
    L.U_PS2 = mk(ip, o);
    L.U_PS3 = mk(ip, o);
    L.U_PS4 = mk(ia, o);
    L.U_PS5 = mk(ia, o);
    if (hidden_layer(s, l)) {
      L.bn_apue.init(o);
      L.bn_psue.init(o);
    }
  }
}

std::vector<Tensor*> PilotModel::trainable() {
  std::vector<Tensor*> out;
  for (int l = 0; l < (int)layers.size(); ++l) {
    PilotLayer& L = layers[l];
    out.insert(out.end(), {&L.Q_AP1, &L.U_AP1, &L.U_AP2, &L.Q_PS1, &L.U_PS1,
                           &L.U_PS2, &L.U_PS3});
    if (spec.attention) {
      out.push_back(&L.U_PS4);
      out.push_back(&L.U_PS5);
    }
    if (hidden_layer(spec, l)) {
      out.insert(out.end(), {&L.bn_apue.gamma, &L.bn_apue.beta,
                             &L.bn_psue.gamma, &L.bn_psue.beta});
    }
  }
  return out;
}

std::vector<const Tensor*> PilotModel::trainable() const {
  auto v = const_cast<PilotModel*>(this)->trainable();
  return {v.begin(), v.end()};
}

void PowerModel::init(const GnnSpec& s, std::uint64_t seed) {
  if (s.widths.empty()) throw std::invalid_argument("power model: no layers");
  spec = s;
  layers.assign(layer_count(s), PowerLayer{});
  for (int l = 0; l < layer_count(s); ++l) {
    const int i = l == 0 ? in_feat : s.widths[l - 1];
    const int o = s.widths[l];
    PowerLayer& L = layers[l];
    int slot = 0;
    auto mk = [&](int) {
      return ad::glorot_uniform(i, o, derive_seed(seed, "power_glorot", l, slot++));
    };
    L.Q_AN1 = mk(0);
    L.U_AN1 = mk(0);
    L.U_AN2 = mk(0);
    L.U_AN3 = mk(0);
    L.Q_INF1 = mk(0);
    L.U_INF1 = mk(0);
    L.U_INF2 = mk(0);
    L.U_INF3 = mk(0);
    L.U_INF4 = mk(0);
    if (hidden_layer(s, l)) {
      L.bn_sig.init(o);
      L.bn_inf.init(o);
    }
  }
  u_out = ad::glorot_uniform(s.widths.back(), 1, derive_seed(seed, "power_glorot", 99, 0));
}

std::vector<Tensor*> PowerModel::trainable() {
  std::vector<Tensor*> out;
  for (int l = 0; l < (int)layers.size(); ++l) {
    PowerLayer& L = layers[l];
    out.insert(out.end(), {&L.Q_AN1, &L.U_AN1, &L.U_AN2, &L.U_AN3, &L.Q_INF1,
                           &L.U_INF1, &L.U_INF2, &L.U_INF3, &L.U_INF4});
    if (hidden_layer(spec, l)) {
      out.insert(out.end(), {&L.bn_sig.gamma, &L.bn_sig.beta, &L.bn_inf.gamma,
                             &L.bn_inf.beta});
    }
  }
  out.push_back(&u_out);
  return out;
}

std::vector<const Tensor*> PowerModel::trainable() const {
  auto v = const_cast<PowerModel*>(this)->trainable();
  return {v.begin(), v.end()};
}

Val attention_scores(Val d_apue, Val U4, Val U5, int M, int K,
                     bool apply_tanh) {
  Val p4 = ad::matmul(d_apue, U4);
  Val p5 = ad::matmul(d_apue, U5);
  Val pre = ad::scale_const(ad::fbmm_tA(p4, p5, M, K, K), 1.0 / M);
  return apply_tanh ? ad::tanh_op(pre) : pre;
}

PilotForwardResult pilot_forward(Tape& tp, PilotModel& model,
                                 const PilotGraph& g, double P_max_W,
                                 const ForwardOpts& opts) {
  const int M = g.M, K = g.K, P = g.n_ps;
  const int L = layer_count(model.spec);
  PilotForwardResult res;
  Binder bind{tp, opts.train, &res.params};

  std::vector<int> diag_idx(K);
  for (int k = 0; k < K; ++k) diag_idx[k] = k * K + k;

  Val d_ap = tp.constant(g.f_apue);
  Val d_ps = tp.constant(g.f_psue);
  for (int l = 0; l < L; ++l) {
    PilotLayer& Ly = model.layers[l];
    Val Qap = bind(Ly.Q_AP1), Uap1 = bind(Ly.U_AP1), Uap2 = bind(Ly.U_AP2);
    Val Qps = bind(Ly.Q_PS1), Ups1 = bind(Ly.U_PS1), Ups2 = bind(Ly.U_PS2),
        Ups3 = bind(Ly.U_PS3);
    Val U4{}, U5{};
    if (model.spec.attention) {
      U4 = bind(Ly.U_PS4);
      U5 = bind(Ly.U_PS5);
    }

    // AP-UE update: other APs at the same UE (1/M), other UEs at the same
    // AP (1/K), both as total-minus-self sums.
    Val sum_ue = ad::segment_sum(d_ap, g.ue_of_apue, K);  // [K, F]
    Val other_ap = ad::sub(ad::gather_rows(sum_ue, g.ue_of_apue), d_ap);
    Val sum_ap = ad::segment_sum(d_ap, g.ap_of_apue, M);  // [M, F]
    Val other_ue = ad::sub(ad::gather_rows(sum_ap, g.ap_of_apue), d_ap);
    Val z_ap = ad::add(
        ad::matmul(d_ap, Qap),
        ad::add(ad::matmul(ad::scale_const(other_ap, 1.0 / M), Uap1),
                ad::matmul(ad::scale_const(other_ue, 1.0 / K), Uap2)));

    // PS-UE update: all AP-UE edges of the UE (1/M), other pilot slots at
    // the UE (1/n_ps), same slot at other UEs, gated when attention is on.
    Val t1 = ad::matmul(
        ad::gather_rows(ad::scale_const(sum_ue, 1.0 / M), g.ue_of_psue), Ups1);
    Val sum_ps = ad::segment_sum(d_ps, g.ue_of_psue, K);  // [K, Fp]
    Val other_ps = ad::sub(ad::gather_rows(sum_ps, g.ue_of_psue), d_ps);
    Val t2 = ad::matmul(ad::scale_const(other_ps, 1.0 / P), Ups2);
    Val T = ad::matmul(d_ps, Ups3);  // [P*K, F_out]
    Val t3{};
    if (model.spec.attention) {
      Val c = attention_scores(d_ap, U4, U5, M, K, true);  // [(j,k), F_out]
      Val gated_total = ad::fbmm(T, c, P, K, K);
      Val c_diag = ad::gather_rows(c, diag_idx);  // [K, F_out]
      Val self_term = ad::mul(ad::gather_rows(c_diag, g.ue_of_psue), T);
      t3 = ad::scale_const(ad::sub(gated_total, self_term), 1.0 / K);
    } else {
      Val sum_over_ue = ad::segment_sum(T, g.ps_of_psue, P);  // [P, F_out]
      t3 = ad::scale_const(
          ad::sub(ad::gather_rows(sum_over_ue, g.ps_of_psue), T), 1.0 / K);
    }
    Val z_ps = ad::add(ad::add(ad::matmul(d_ps, Qps), t1), ad::add(t2, t3));

    if (hidden_layer(model.spec, l)) {
      Val ga = bind(Ly.bn_apue.gamma), ba = bind(Ly.bn_apue.beta);
      Val gp = bind(Ly.bn_psue.gamma), bp = bind(Ly.bn_psue.beta);
      if (opts.train) {
        z_ap = ad::batch_norm_train(z_ap, ga, ba, Ly.bn_apue);
        z_ps = ad::batch_norm_train(z_ps, gp, bp, Ly.bn_psue);
      } else {
        z_ap = ad::batch_norm_infer(z_ap, Ly.bn_apue);
        z_ps = ad::batch_norm_infer(z_ps, Ly.bn_psue);
      }
      d_ap = ad::relu(z_ap);
      d_ps = ad::relu(z_ps);
    } else {
      d_ap = z_ap;
      d_ps = z_ps;
    }
  }

  const int head = model.spec.widths.back();
  Val logits = head == 1 ? d_ps : ad::slice_cols(d_ps, 0, 1);
  res.x_soft = ad::softmax_cols(ad::reshape(logits, P, K));

  if (head >= 2) {
    // power head on AP-UE edges: sigmoid, then a per-AP conditional split
    std::vector<double> a_mask(M * K);
    for (int e = 0; e < M * K; ++e) a_mask[e] = g.f_apue.at(e, 1);
    Val q = ad::sigmoid(ad::slice_cols(d_ap, 1, 2));  // [M*K, 1]
    Val qa = ad::row_scale_const(q, a_mask);
    Val per_ap = ad::segment_sum(qa, g.ap_of_apue, M);      // [M, 1]
    Val denom = ad::max_const(per_ap, 1.0);
    Val p = ad::scale_const(
        ad::div(qa, ad::gather_rows(denom, g.ap_of_apue)), P_max_W);
    res.power = ad::reshape(p, M, K);
    res.has_power = true;
  }
  return res;
}

PowerForwardResult power_forward(Tape& tp, PowerModel& model,
                                 const PowerGraph& g, double P_max_W,
                                 const ForwardOpts& opts) {
  return power_forward(tp, model, g, tp.constant(g.feat), P_max_W, opts);
}

PowerForwardResult power_forward(Tape& tp, PowerModel& model,
                                 const PowerGraph& g, Val feat, double P_max_W,
                                 const ForwardOpts& opts) {
  const int K = g.K, n_an = g.n_an, E = n_an * K;
  const int L = layer_count(model.spec);
  PowerForwardResult res;
  Binder bind{tp, opts.train, &res.params};

  std::vector<int> sig_of_edge(E);
  for (int e = 0; e < E; ++e) sig_of_edge[e] = g.sig_row[g.seg_an[e]];
  std::vector<double> w_sig(n_an);
  for (int an = 0; an < n_an; ++an) w_sig[an] = g.w_inf_ue[g.sig_row[an]];
  std::vector<double> s_inv(E);
  for (int e = 0; e < E; ++e) s_inv[e] = 1.0 / g.s_count[g.seg_ue[e]];
  std::vector<int> inf_rows;
  inf_rows.reserve(E - n_an);
  for (int e = 0; e < E; ++e)
    if (g.inf_mask[e] != 0.0) inf_rows.push_back(e);
  std::vector<int> an_cell(n_an);
  for (int an = 0; an < n_an; ++an)
    an_cell[an] = g.an_ap[an] * K + g.an_ue[an];

  if (tp.rows(feat) != E || tp.cols(feat) != model.in_feat)
    throw std::invalid_argument("power forward: feature shape mismatch");
  Val d = feat;
  for (int l = 0; l < L; ++l) {
    PowerLayer& Ly = model.layers[l];
    Val Qs = bind(Ly.Q_AN1), Us1 = bind(Ly.U_AN1), Us2 = bind(Ly.U_AN2),
        Us3 = bind(Ly.U_AN3);
    Val Qi = bind(Ly.Q_INF1), Ui1 = bind(Ly.U_INF1), Ui2 = bind(Ly.U_INF2),
        Ui3 = bind(Ly.U_INF3), Ui4 = bind(Ly.U_INF4);

    Val sum_an = ad::segment_sum(d, g.seg_an, n_an);   // [n_an, F]
    Val tot_an = ad::gather_rows(sum_an, g.seg_an);    // [E, F]
    Val d_sig_an = ad::gather_rows(d, sig_of_edge);    // [E, F] own AN's SIG
    Val d_sig_rows = ad::gather_rows(d, g.sig_row);    // [n_an, F]

    // weighted interference flowing into each UE: total minus the SIG part
    Val dw = ad::row_scale_const(d, g.w_inf_ue);
    Val wsum_ue = ad::segment_sum(dw, g.seg_ue, K);    // [K, F]
    Val wsig_ue = ad::segment_sum(ad::row_scale_const(d_sig_rows, w_sig),
                                  g.sig_ue, K);        // [K, F]
    Val infw_ue = ad::sub(wsum_ue, wsig_ue);
    Val infw_e = ad::gather_rows(infw_ue, g.seg_ue);   // [E, F]

    Val sig_sum_ue = ad::segment_sum(d_sig_rows, g.sig_ue, K);  // [K, F]
    Val sig_ue_e = ad::gather_rows(sig_sum_ue, g.seg_ue);       // [E, F]

    // SIG-row aggregations
    Val a1 = ad::scale_const(ad::sub(tot_an, d), 1.0 / K);
    Val a2 = infw_e;
    Val a3 = ad::row_scale_const(ad::sub(sig_ue_e, d), s_inv);
    Val z_sig = ad::add(ad::add(ad::matmul(d, Qs), ad::matmul(a1, Us1)),
                        ad::add(ad::matmul(a2, Us2), ad::matmul(a3, Us3)));

    // INF-row aggregations
    Val b1 = ad::scale_const(ad::sub(ad::sub(tot_an, d), d_sig_an), 1.0 / K);
    Val b2 = d_sig_an;
    Val b3 = ad::sub(infw_e, dw);
    Val b4 = ad::row_scale_const(sig_ue_e, s_inv);
    Val z_inf = ad::add(
        ad::add(ad::matmul(d, Qi), ad::matmul(b1, Ui1)),
        ad::add(ad::add(ad::matmul(b3, Ui2), ad::matmul(b2, Ui3)),
                ad::matmul(b4, Ui4)));

    Val zs_rows = ad::gather_rows(z_sig, g.sig_row);   // [n_an, F_out]
    Val zi_rows = ad::gather_rows(z_inf, inf_rows);    // [E-n_an, F_out]
    if (hidden_layer(model.spec, l)) {
      Val gs = bind(Ly.bn_sig.gamma), bs = bind(Ly.bn_sig.beta);
      Val gi = bind(Ly.bn_inf.gamma), bi = bind(Ly.bn_inf.beta);
      if (opts.train) {
        zs_rows = ad::batch_norm_train(zs_rows, gs, bs, Ly.bn_sig);
        zi_rows = ad::batch_norm_train(zi_rows, gi, bi, Ly.bn_inf);
      } else {
        zs_rows = ad::batch_norm_infer(zs_rows, Ly.bn_sig);
        zi_rows = ad::batch_norm_infer(zi_rows, Ly.bn_inf);
      }
      zs_rows = ad::relu(zs_rows);
      zi_rows = ad::relu(zi_rows);
    }
    d = ad::add(ad::segment_sum(zs_rows, g.sig_row, E),
                ad::segment_sum(zi_rows, inf_rows, E));
  }

  Val uo = bind(model.u_out);
  Val q = ad::sigmoid(ad::matmul(ad::gather_rows(d, g.sig_row), uo));  // [n_an,1]
  Val per_ap = ad::segment_sum(q, g.an_ap, g.M);
  Val denom = ad::max_const(per_ap, 1.0);
  Val p_an = ad::scale_const(ad::div(q, ad::gather_rows(denom, g.an_ap)),
                             P_max_W);
  res.P = ad::reshape(ad::segment_sum(p_an, an_cell, g.M * K), g.M, K);
  return res;
}

}  // namespace cfmimo::gnn
