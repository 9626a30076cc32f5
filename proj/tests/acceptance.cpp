// Acceptance harness: one pass/fail line per criterion. --fast runs the
// property criteria (1-7), --training runs the desk-scale study (8-9),
// no flag runs everything. Exit 0 iff every executed criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/eval/properties.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/train/trainer.hpp"

using namespace cfmimo;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

struct Line {
  int idx;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

void emit(const Line& l) {
  std::printf("[%s] criterion %d %s: %s (%.1fs)\n", l.pass ? "PASS" : "FAIL",
              l.idx, l.name.c_str(), l.detail.c_str(), l.seconds);
  std::fflush(stdout);
}

Line from_check(int idx, const eval::PropertyResult& r, double budget_s) {
  Line l{idx, r.name, r.pass, r.detail, r.seconds};
  if (budget_s > 0.0 && r.seconds >= budget_s) {
    l.pass = false;
    l.detail += " [over time budget " + std::to_string((int)budget_s) + "s]";
  }
  return l;
}

struct StudyPoint {
  double sts = 0.0, fix_k = 0.0, fix_2 = 0.0, no_fe = 0.0, dts = 0.0;
  double sts_tau = 0.0;
};

struct EvalStats {
  double eta = 0.0, tau = 0.0;
};

EvalStats mean_eval(train::TrainResult& tr, const SystemConfig& cfg,
                    std::uint64_t eval_seed, int n_test) {
  EvalStats s;
  for (int i = 0; i < n_test; ++i) {
    ChannelSet cs = generate_channels(cfg, derive_seed(eval_seed, "test", i));
    train::ModelEval me;
    if (tr.ckpt.has_power)
      me = train::eval_dts(tr.ckpt.pilot, tr.ckpt.power, cs, cfg,
                           derive_seed(eval_seed, "lam", i),
                           derive_seed(eval_seed, "noise", i));
    else
      me = train::eval_sts(tr.ckpt.pilot, cs, cfg,
                           derive_seed(eval_seed, "lam", i),
                           derive_seed(eval_seed, "noise", i));
    s.eta += me.fe.eta_bar;
    s.tau += me.fe.tau_p;
  }
  s.eta /= n_test;
  s.tau /= n_test;
  return s;
}

StudyPoint run_point(int tau_c, std::uint64_t seed, int epochs, int n_train,
                     int n_test) {
  SystemConfig cfg;
  cfg.M = 3;
  cfg.N = 2;
  cfg.K = 6;
  cfg.tau_c = tau_c;
  cfg.N_T = 5;

  train::TrainOptions opt;
  opt.epochs = epochs;
  opt.n_train = n_train;
  opt.batch = 50;
  opt.seed = derive_seed(seed, "study", tau_c);
  const std::uint64_t es = derive_seed(seed, "eval", tau_c);

  StudyPoint p;
  {
    train::TrainResult r = train_sts(cfg, opt);
    EvalStats s = mean_eval(r, cfg, es, n_test);
    p.sts = s.eta;
    p.sts_tau = s.tau;
  }
  {
    train::TrainOptions o = opt;
    o.fixed_tau = cfg.K;
    train::TrainResult r = train_sts(cfg, o);
    p.fix_k = mean_eval(r, cfg, es, n_test).eta;
  }
  {
    train::TrainOptions o = opt;
    o.fixed_tau = 2;
    train::TrainResult r = train_sts(cfg, o);
    p.fix_2 = mean_eval(r, cfg, es, n_test).eta;
  }
  {
    train::TrainOptions o = opt;
    o.feature_enhancement = false;
    train::TrainResult r = train_sts(cfg, o);
    p.no_fe = mean_eval(r, cfg, es, n_test).eta;
  }
  {
    train::TrainResult r = train_dts(cfg, opt);
    p.dts = mean_eval(r, cfg, es, n_test).eta;
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  bool fast = false, training = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--fast")) fast = true;
    if (!std::strcmp(argv[i], "--training")) training = true;
  }
  if (!fast && !training) fast = training = true;

  const std::uint64_t seed = 20240501;
  std::vector<Line> lines;

  if (fast) {
    lines.push_back(from_check(1, eval::check_equivariance(seed), 60.0));
    emit(lines.back());
    lines.push_back(from_check(2, eval::check_degeneracy(seed), 0.0));
    emit(lines.back());
    lines.push_back(
        from_check(3, eval::check_gradient_fidelity(seed), 120.0));
    emit(lines.back());
    lines.push_back(from_check(4, eval::check_constraints(seed), 0.0));
    emit(lines.back());
    lines.push_back(
        from_check(5, eval::check_relaxation_consistency(seed), 0.0));
    emit(lines.back());
    lines.push_back(from_check(6, eval::check_solver_quality(seed), 0.0));
    emit(lines.back());
    lines.push_back(from_check(7, eval::check_nmse_closed_form(seed), 0.0));
    emit(lines.back());
  }

  if (training) {
    const double t0 = now_s();
    const int epochs = 12, n_train = 300, n_test = 50;
    std::vector<int> taus = {50, 100, 200};
    std::vector<StudyPoint> pts;
    for (int tc : taus) pts.push_back(run_point(tc, seed, epochs, n_train,
                                                n_test));
    const double elapsed = now_s() - t0;

    bool order_ok = true;
    std::string det;
    char buf[256];
    for (size_t i = 0; i < taus.size(); ++i) {
      const StudyPoint& p = pts[i];
      const bool ok = p.sts >= p.fix_k && p.sts >= p.fix_2 &&
                      p.sts >= p.no_fe && p.dts >= 0.99 * p.sts;
      order_ok = order_ok && ok;
      std::snprintf(buf, sizeof buf,
                    "tau_c=%d sts=%.3f fixK=%.3f fix2=%.3f noFE=%.3f "
                    "dts=%.3f%s ",
                    taus[i], p.sts, p.fix_k, p.fix_2, p.no_fe, p.dts,
                    ok ? "" : " <-");
      det += buf;
    }
    const bool time_ok = elapsed < 1800.0;
    std::snprintf(buf, sizeof buf, "(total %.0fs, budget 1800s)", elapsed);
    det += buf;
    lines.push_back({8, "desk-scale ordering", order_ok && time_ok, det,
                     elapsed});
    emit(lines.back());

    const bool adapt = pts[0].sts_tau < pts[2].sts_tau;
    std::snprintf(buf, sizeof buf,
                  "mean learned tau_p %.3f @tau_c=50 vs %.3f @tau_c=200",
                  pts[0].sts_tau, pts[2].sts_tau);
    lines.push_back({9, "pilot-length adaptivity", adapt, buf, 0.0});
    emit(lines.back());
  }

  int failed = 0;
  for (const Line& l : lines)
    if (!l.pass) ++failed;
  std::printf("%zu/%zu criteria passed\n", lines.size() - failed,
              lines.size());
  return failed == 0 ? 0 : 1;
}
