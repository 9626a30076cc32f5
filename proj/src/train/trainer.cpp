#include "cfmimo/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "cfmimo/ad/nn.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/train/soft_chain.hpp"

namespace cfmimo::train {

using ad::Tape;
using ad::Tensor;
using ad::Val;

namespace {

// Edge features are fed in units of the association threshold: gains as
// beta/rho, channel entries as g/sqrt(rho). Keeps magnitudes O(1) at any
// carrier/noise setting.
Mat scaled_beta(const ChannelSet& cs, const SystemConfig& cfg) {
  const double inv = 1.0 / cfg.rho_lin();
  Mat b(cs.beta.rows, cs.beta.cols);
  for (size_t i = 0; i < b.a.size(); ++i) b.a[i] = cs.beta.a[i] * inv;
  return b;
}

CMatPair scaled_ghat(const CMatPair& G, const SystemConfig& cfg) {
  const double inv = 1.0 / std::sqrt(cfg.rho_lin());
  CMatPair S(G.rows(), G.cols());
  for (size_t i = 0; i < S.re.a.size(); ++i) {
    S.re.a[i] = G.re.a[i] * inv;
    S.im.a[i] = G.im.a[i] * inv;
  }
  return S;
}

Mat draw_lambda(int n_ps, int K, std::uint64_t seed) {
  Rng rng(seed);
  Mat lam(n_ps, K);
  for (int p = 0; p < n_ps; ++p)
    for (int k = 0; k < K; ++k) lam.at(p, k) = rng.uniform();
  return lam;
}

gnn::PilotGraph frame_pilot_graph(const ChannelSet& cs,
                                  const SystemConfig& cfg, int n_ps,
                                  std::uint64_t lambda_seed, bool fe) {
  return gnn::build_pilot_graph(scaled_beta(cs, cfg), cs.A,
                                draw_lambda(n_ps, cs.K, lambda_seed), fe);
}

int resolve_n_ps(const TrainOptions& opt, int K) {
  if (opt.fixed_tau == 0) throw std::invalid_argument("trainer: fixed_tau 0");
  return opt.fixed_tau > 0 ? opt.fixed_tau : K;
}

void check_options(const TrainOptions& opt) {
  if (opt.batch < 2)
    throw std::invalid_argument("trainer: batch must be >= 2");
  if (opt.weight < 0.0)
    throw std::invalid_argument("trainer: negative penalty weight");
  if (opt.n_train < 1 || opt.epochs < 0)
    throw std::invalid_argument("trainer: empty training run");
}

struct EpochStats {
  double loss = 0.0, eta = 0.0, penalty = 0.0;
};

void accumulate(std::vector<Tensor>& acc, size_t base,
                const std::vector<Val>& params, const Tape& tp, int bsz) {
  for (size_t j = 0; j < params.size(); ++j) {
    const Tensor& g = tp.grad(params[j]);
    Tensor& a = acc[base + j];
    for (size_t q = 0; q < g.size(); ++q) a.v[q] += g.v[q] / bsz;
  }
}

}  // namespace

Val binarization_penalty(Val x) {
  Val xc = ad::clamp(x, 1e-6, 1.0 - 1e-6);
  Val ln_x = ad::log_clamped(xc);
  Val ln_1mx = ad::log_clamped(ad::add_const(ad::neg(xc), 1.0));
  return ad::sum_all(ad::mul(ln_x, ln_1mx));
}

std::string curve_to_csv(const std::vector<CurveRow>& rows) {
  std::string out = "# cfmimo-curve v1\nepoch,loss,eta,penalty\n";
  char buf[160];
  for (const CurveRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.epoch, r.loss,
                  r.eta, r.penalty);
    out += buf;
  }
  return out;
}

TrainResult train_sts(const SystemConfig& cfg, const TrainOptions& opt) {
  check_options(opt);
  const int n_ps = resolve_n_ps(opt, cfg.K);
  gnn::GnnSpec spec;
  spec.widths = opt.pilot_widths.empty() ? gnn::sts_default_spec().widths
                                         : opt.pilot_widths;
  spec.attention = opt.attention;
  spec.feature_enhancement = opt.feature_enhancement;
  spec.n_ps = opt.fixed_tau > 0 ? n_ps : 0;
  if (spec.widths.back() < 2)
    throw std::invalid_argument("train_sts: joint head needs width 2");

  gnn::PilotModel model;
  model.init(spec, derive_seed(opt.seed, "sts_init"));
  Dataset ds = generate_dataset(cfg, opt.n_train, derive_seed(opt.seed, "data"));

  std::vector<Tensor*> params = model.trainable();
  ad::Adam adam;
  adam.lr = opt.lr;
  adam.init(params);

  TrainResult res;
  gnn::PilotModel best = model;
  double best_loss = 0.0;
  bool have_best = false;
  const int n = opt.n_train;
  const double f_tau = opt.fixed_tau > 0 ? (double)opt.fixed_tau : -1.0;

  for (int e = 0; e < opt.epochs; ++e) {
    std::vector<int> order =
        random_permutation(n, derive_seed(opt.seed, "shuffle", e));
    EpochStats st;
    for (int b0 = 0; b0 < n; b0 += opt.batch) {
      const int bsz = std::min(opt.batch, n - b0);
      std::vector<Tensor> acc;
      acc.reserve(params.size());
      for (Tensor* p : params) acc.emplace_back(p->rows, p->cols, 0.0);

      for (int bi = 0; bi < bsz; ++bi) {
        const int idx = order[b0 + bi];
        const ChannelSet& cs = ds.samples[idx];
        Tape tp;
        gnn::PilotGraph g = frame_pilot_graph(
            cs, cfg, n_ps, derive_seed(opt.seed, "lambda", e, idx),
            opt.feature_enhancement);
        gnn::PilotForwardResult fwd =
            gnn::pilot_forward(tp, model, g, cfg.P_max_W(), {true});
        SoftFrame fr = soft_frame(tp, fwd.x_soft, cs, cfg, f_tau);
        Val eta_sum{};
        for (int t = 0; t < cs.N_T; ++t) {
          CMatPair noise = draw_complex_noise(
              cs.N, cs.M * cs.K, cs.noise_ap_W,
              derive_seed(opt.seed, "train_noise", e, idx, t));
          SoftSubframe sf = soft_estimate(tp, fr, cs, cfg, t, noise);
          Val eta_t = soft_eta(tp, fr, sf, fwd.power, cs, t);
          eta_sum = eta_sum.ok() ? ad::add(eta_sum, eta_t) : eta_t;
        }
        Val eta_mean = ad::scale_const(eta_sum, 1.0 / cs.N_T);
        Val pen = binarization_penalty(fwd.x_soft);
        Val root = ad::scale_const(
            ad::sub(eta_mean, ad::scale_const(pen, opt.weight)), -1.0);
        const double loss_n = tp.val(root).v[0];
        if (!std::isfinite(loss_n))
          throw std::runtime_error("train_sts: non-finite loss at epoch " +
                                   std::to_string(e) + ", sample " +
                                   std::to_string(idx));
        tp.backward(root);
        st.loss += loss_n;
        st.eta += tp.val(eta_mean).v[0];
        st.penalty += opt.weight * tp.val(pen).v[0];
        accumulate(acc, 0, fwd.params, tp, bsz);
      }
      std::vector<const Tensor*> gp;
      gp.reserve(acc.size());
      for (const Tensor& a : acc) gp.push_back(&a);
      adam.step(params, gp);
    }
    res.curve.push_back(
        {e, st.loss / n, st.eta / n, st.penalty / n});
    if (!have_best || st.loss / n < best_loss) {
      have_best = true;
      best_loss = st.loss / n;
      best = model;
      res.best_epoch = e;
    }
  }

  res.best_loss = best_loss;
  res.ckpt.has_pilot = true;
  res.ckpt.pilot_variant = "sts";
  res.ckpt.pilot = have_best ? best : model;
  return res;
}

TrainResult train_dts(const SystemConfig& cfg, const TrainOptions& opt) {
  check_options(opt);
  const int n_ps = resolve_n_ps(opt, cfg.K);
  gnn::GnnSpec spec_p;
  spec_p.widths = opt.pilot_widths.empty() ? gnn::pilot_default_spec().widths
                                           : opt.pilot_widths;
  spec_p.attention = opt.attention;
  spec_p.feature_enhancement = opt.feature_enhancement;
  spec_p.n_ps = opt.fixed_tau > 0 ? n_ps : 0;
  gnn::GnnSpec spec_q;
  spec_q.widths = opt.power_widths.empty() ? gnn::power_default_spec().widths
                                           : opt.power_widths;

  gnn::PilotModel pilot;
  pilot.init(spec_p, derive_seed(opt.seed, "dts_pilot_init"));
  gnn::PowerModel power;
  power.init(spec_q, derive_seed(opt.seed, "dts_power_init"));
  Dataset ds = generate_dataset(cfg, opt.n_train, derive_seed(opt.seed, "data"));

  std::vector<Tensor*> params = pilot.trainable();
  const size_t n_pp = params.size();
  for (Tensor* t : power.trainable()) params.push_back(t);
  ad::Adam adam;
  adam.lr = opt.lr;
  adam.init(params);

  TrainResult res;
  gnn::PilotModel best_p = pilot;
  gnn::PowerModel best_q = power;
  double best_loss = 0.0;
  bool have_best = false;
  const int n = opt.n_train;
  const double f_tau = opt.fixed_tau > 0 ? (double)opt.fixed_tau : -1.0;

  for (int e = 0; e < opt.epochs; ++e) {
    std::vector<int> order =
        random_permutation(n, derive_seed(opt.seed, "shuffle", e));
    EpochStats st;
    for (int b0 = 0; b0 < n; b0 += opt.batch) {
      const int bsz = std::min(opt.batch, n - b0);
      std::vector<Tensor> acc;
      acc.reserve(params.size());
      for (Tensor* p : params) acc.emplace_back(p->rows, p->cols, 0.0);

      for (int bi = 0; bi < bsz; ++bi) {
        const int idx = order[b0 + bi];
        const ChannelSet& cs = ds.samples[idx];
        Tape tp;
        gnn::PilotGraph g = frame_pilot_graph(
            cs, cfg, n_ps, derive_seed(opt.seed, "lambda", e, idx),
            opt.feature_enhancement);
        gnn::PilotForwardResult fwd =
            gnn::pilot_forward(tp, pilot, g, cfg.P_max_W(), {true});
        SoftFrame fr = soft_frame(tp, fwd.x_soft, cs, cfg, f_tau);
        // association structure is frame-level; per-subframe features are
        // supplied on the tape
        gnn::PowerGraph pg =
            gnn::build_power_graph(CMatPair(cs.K, cs.M * cs.K), cs.A);
        Val eta_sum{};
        std::vector<std::vector<Val>> qparams;
        for (int t = 0; t < cs.N_T; ++t) {
          CMatPair noise = draw_complex_noise(
              cs.N, cs.M * cs.K, cs.noise_ap_W,
              derive_seed(opt.seed, "train_noise", e, idx, t));
          SoftSubframe sf = soft_estimate(tp, fr, cs, cfg, t, noise);
          Val feat = soft_power_features(tp, sf, pg.an_ap, pg.an_ue, cs.M,
                                         cs.K, cfg.rho_lin());
          gnn::PowerForwardResult pf =
              gnn::power_forward(tp, power, pg, feat, cfg.P_max_W(), {true});
          qparams.push_back(pf.params);
          Val eta_t = soft_eta(tp, fr, sf, pf.P, cs, t);
          eta_sum = eta_sum.ok() ? ad::add(eta_sum, eta_t) : eta_t;
        }
        Val eta_mean = ad::scale_const(eta_sum, 1.0 / cs.N_T);
        Val pen = binarization_penalty(fwd.x_soft);
        Val root = ad::scale_const(
            ad::sub(eta_mean, ad::scale_const(pen, opt.weight)), -1.0);
        const double loss_n = tp.val(root).v[0];
        if (!std::isfinite(loss_n))
          throw std::runtime_error("train_dts: non-finite loss at epoch " +
                                   std::to_string(e) + ", sample " +
                                   std::to_string(idx));
        tp.backward(root);
        st.loss += loss_n;
        st.eta += tp.val(eta_mean).v[0];
        st.penalty += opt.weight * tp.val(pen).v[0];
        accumulate(acc, 0, fwd.params, tp, bsz);
        // the shared-weight power net ran once per subframe; total
        // derivative sums over the uses
        for (const std::vector<Val>& qp : qparams)
          accumulate(acc, n_pp, qp, tp, bsz);
      }
      std::vector<const Tensor*> gp;
      gp.reserve(acc.size());
      for (const Tensor& a : acc) gp.push_back(&a);
      adam.step(params, gp);
    }
    res.curve.push_back({e, st.loss / n, st.eta / n, st.penalty / n});
    if (!have_best || st.loss / n < best_loss) {
      have_best = true;
      best_loss = st.loss / n;
      best_p = pilot;
      best_q = power;
      res.best_epoch = e;
    }
  }

  res.best_loss = best_loss;
  res.ckpt.has_pilot = true;
  res.ckpt.has_power = true;
  res.ckpt.pilot_variant = "dts_pilot";
  res.ckpt.pilot = have_best ? best_p : pilot;
  res.ckpt.power = have_best ? best_q : power;
  return res;
}

Mat pilot_soft_output(gnn::PilotModel& model, const ChannelSet& cs,
                      const SystemConfig& cfg, std::uint64_t lambda_seed,
                      Mat* power_out) {
  Tape tp;
  const int n_ps = model.spec.n_ps != 0 ? model.spec.n_ps : cs.K;
  gnn::PilotGraph g = frame_pilot_graph(cs, cfg, n_ps, lambda_seed,
                                        model.spec.feature_enhancement);
  gnn::PilotForwardResult fwd =
      gnn::pilot_forward(tp, model, g, cfg.P_max_W(), {});
  if (power_out) {
    if (fwd.has_power)
      *power_out = tp.val(fwd.power).to_mat();
    else
      *power_out = Mat();
  }
  return tp.val(fwd.x_soft).to_mat();
}

ModelEval eval_sts(gnn::PilotModel& model, const ChannelSet& cs,
                   const SystemConfig& cfg, std::uint64_t lambda_seed,
                   std::uint64_t noise_seed) {
  Mat P;
  Mat xs = pilot_soft_output(model, cs, cfg, lambda_seed, &P);
  if (P.rows == 0)
    throw std::invalid_argument("eval_sts: model has no power head");
  ModelEval me;
  me.ca = compact(discretize(xs));
  const double tau =
      model.spec.n_ps != 0 ? (double)model.spec.n_ps : -1.0;
  me.fe = evaluate_assignment(
      cs, cfg, me.ca.X_o,
      [&P](int, const CMatPair&, const CMatPair&, const CMatPair&) {
        return P;
      },
      noise_seed, tau);
  return me;
}

ModelEval eval_dts(gnn::PilotModel& pilot, gnn::PowerModel& power,
                   const ChannelSet& cs, const SystemConfig& cfg,
                   std::uint64_t lambda_seed, std::uint64_t noise_seed) {
  Mat xs = pilot_soft_output(pilot, cs, cfg, lambda_seed, nullptr);
  ModelEval me;
  me.ca = compact(discretize(xs));
  const double tau =
      pilot.spec.n_ps != 0 ? (double)pilot.spec.n_ps : -1.0;
  PowerProvider prov = [&power, &cs, &cfg](int, const CMatPair& Ghat,
                                           const CMatPair&, const CMatPair&) {
    gnn::PowerGraph pg = gnn::build_power_graph(scaled_ghat(Ghat, cfg), cs.A);
    Tape tp;
    gnn::PowerForwardResult pf =
        gnn::power_forward(tp, power, pg, cfg.P_max_W(), {});
    return tp.val(pf.P).to_mat();
  };
  me.fe = evaluate_assignment(cs, cfg, me.ca.X_o, prov, noise_seed, tau);
  return me;
}

}  // namespace cfmimo::train
