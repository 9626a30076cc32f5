#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/eval/experiments.hpp"
#include "cfmimo/eval/properties.hpp"
#include "cfmimo/gnn/checkpoint.hpp"
#include "cfmimo/io.hpp"
#include "cfmimo/phy.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/solvers.hpp"
#include "cfmimo/topology.hpp"
#include "cfmimo/train/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cfmimo;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_simulate(const std::string& config, std::uint64_t seed,
                 const std::string& out) {
  SystemConfig cfg = SystemConfig::from_json_file(config);
  Topology topo = generate_topology(cfg, seed);
  ChannelSet cs = generate_channels(cfg, topo, seed);
  write_channels(out, topo, cs);
  int assoc = 0;
  for (double a : cs.A.a) assoc += a != 0.0;
  std::printf("simulate: M=%d N=%d K=%d N_T=%d seed=%llu -> %s\n", cfg.M,
              cfg.N, cfg.K, cfg.N_T, (unsigned long long)seed, out.c_str());
  std::printf("  %d of %d AP-UE links associated (rho %.1f dB)\n", assoc,
              cfg.M * cfg.K, cfg.scen.rho_db);
  return 0;
}

int cmd_baseline(const std::string& config, std::uint64_t seed,
                 const std::string& algo, const std::string& out) {
  SystemConfig cfg = SystemConfig::from_json_file(config);
  ChannelSet cs = generate_channels(cfg, seed);
  const std::uint64_t noise_seed = derive_seed(seed, "baseline_noise");

  CompactAssignment ca;
  FrameEval fe;
  json extra;
  if (algo == "dsatur-tabu-wmmse") {
    solvers::BaselineResult br = solvers::dsatur_tabu_wmmse(cs, cfg, noise_seed);
    ca = br.assignment;
    fe = br.eval;
    extra["tabu_objective"] = br.tabu_objective;
  } else {
    solvers::OracleResult orc =
        solvers::exhaustive_oracle(cs, cfg, solvers::PowerRule::wmmse, noise_seed);
    ca = orc.assignment;
    fe = orc.eval;
    extra["n_candidates"] = orc.n_candidates;
  }

  json j;
  j["algo"] = algo;
  j["seed"] = seed;
  j["tau_p"] = ca.tau_p;
  j["X"] = mat_to_json(ca.X_o);
  j["eta"] = fe.eta;
  j["eta_bar"] = fe.eta_bar;
  json P = json::array();
  for (const Mat& p : fe.P) P.push_back(mat_to_json(p));
  j["P"] = std::move(P);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_text(out, j.dump(2) + "\n");

  std::printf("baseline %s: tau_p=%d eta_bar=%.4f -> %s\n", algo.c_str(),
              ca.tau_p, fe.eta_bar, out.c_str());
  return 0;
}

struct TrainArgs {
  std::string variant, config, out, curve;
  std::uint64_t seed = 1;
  int epochs = 40, n_train = 300, batch = 50, fixed_tau = -1;
  double lr = 0.01;
  bool no_attention = false, no_fe = false;
};

int cmd_train(const TrainArgs& a) {
  SystemConfig cfg = SystemConfig::from_json_file(a.config);
  train::TrainOptions opt;
  opt.seed = a.seed;
  opt.epochs = a.epochs;
  opt.n_train = a.n_train;
  opt.batch = a.batch;
  opt.lr = a.lr;
  opt.fixed_tau = a.fixed_tau;
  opt.attention = !a.no_attention;
  opt.feature_enhancement = !a.no_fe;

  train::TrainResult res = a.variant == "dts" ? train::train_dts(cfg, opt)
                                              : train::train_sts(cfg, opt);
  gnn::save_checkpoint(a.out, res.ckpt);
  if (!a.curve.empty()) write_text(a.curve, train::curve_to_csv(res.curve));

  for (const train::CurveRow& r : res.curve)
    std::printf("  epoch %3d  loss %+.5f  eta %.5f  penalty %.5f\n", r.epoch,
                r.loss, r.eta, r.penalty);
  std::printf("train %s: best epoch %d (loss %+.5f) -> %s\n",
              a.variant.c_str(), res.best_epoch, res.best_loss, a.out.c_str());
  return 0;
}

int cmd_eval_sweep(const std::string& spec_path, const fs::path& out_dir) {
  eval::ExperimentSpec spec = eval::experiment_from_json_file(spec_path);
  eval::SweepOutput out = eval::run_sweep(spec);
  fs::create_directories(out_dir);
  write_text(out_dir / "results.csv", out.results_csv);
  write_text(out_dir / "timing.csv", out.timing_csv);
  std::fputs(out.summary.c_str(), stdout);
  std::printf("wrote %s and timing.csv\n",
              (out_dir / "results.csv").string().c_str());
  return 0;
}

int cmd_eval_generalize(const std::string& spec_path, const fs::path& out_dir) {
  eval::GeneralizationSpec spec = eval::generalization_from_json_file(spec_path);
  eval::GeneralizationOutput out = eval::run_generalization(spec);
  fs::create_directories(out_dir);
  write_text(out_dir / "generalize.csv", out.csv);
  std::fputs(out.summary.c_str(), stdout);
  std::printf("wrote %s\n", (out_dir / "generalize.csv").string().c_str());
  return 0;
}

int cmd_eval_properties(std::uint64_t seed, const fs::path& out_dir) {
  std::vector<eval::PropertyResult> rs = eval::run_property_suite(seed);
  fs::create_directories(out_dir);
  write_text(out_dir / "properties.csv", eval::properties_csv(rs));
  std::fputs(eval::properties_report(rs).c_str(), stdout);
  return eval::all_pass(rs) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"user-centric cell-free massive MIMO: pilot + power toolkit"};
  app.require_subcommand(1);

  std::string config, out, algo = "dsatur-tabu-wmmse", spec_path, curve;
  std::uint64_t seed = 1;

  CLI::App* sim = app.add_subcommand("simulate", "draw one frame and dump it");
  sim->add_option("--config", config, "system config JSON")->required();
  sim->add_option("--seed", seed, "frame seed");
  sim->add_option("--out", out, "output channels.bin")->required();

  CLI::App* base = app.add_subcommand("baseline", "classical pilot + power pipeline");
  base->add_option("--config", config, "system config JSON")->required();
  base->add_option("--seed", seed, "frame seed");
  base->add_option("--algo", algo, "dsatur-tabu-wmmse | oracle")
      ->check(CLI::IsMember({"dsatur-tabu-wmmse", "oracle"}));
  base->add_option("--out", out, "result JSON")->required();

  TrainArgs ta;
  CLI::App* tr = app.add_subcommand("train", "train a pilot/power model");
  tr->add_option("--variant", ta.variant, "dts | sts")
      ->required()
      ->check(CLI::IsMember({"dts", "sts"}));
  tr->add_option("--config", ta.config, "system config JSON")->required();
  tr->add_option("--train-seed", ta.seed, "training seed");
  tr->add_option("--epochs", ta.epochs, "epochs");
  tr->add_option("--out", ta.out, "checkpoint JSON")->required();
  tr->add_option("--curve", ta.curve, "training curve CSV");
  tr->add_option("--n-train", ta.n_train, "training frames");
  tr->add_option("--batch", ta.batch, "frames per optimizer step");
  tr->add_option("--lr", ta.lr, "Adam step size");
  tr->add_option("--fixed-tau", ta.fixed_tau, "predetermined pilot length");
  tr->add_flag("--no-attention", ta.no_attention, "plain aggregation");
  tr->add_flag("--no-feature-enhancement", ta.no_fe,
               "drop the random edge features");

  CLI::App* ev = app.add_subcommand("eval", "experiments and property checks");
  ev->require_subcommand(1);
  CLI::App* sw = ev->add_subcommand("sweep", "method x sweep-value grid");
  sw->add_option("--spec", spec_path, "experiment spec JSON")->required();
  sw->add_option("--out", out, "output directory")->required();
  CLI::App* ge = ev->add_subcommand("generalize", "zero-shot transfer table");
  ge->add_option("--spec", spec_path, "generalization spec JSON")->required();
  ge->add_option("--out", out, "output directory")->required();
  std::uint64_t prop_seed = 20240501;
  CLI::App* pr = ev->add_subcommand("properties", "run the invariant suite");
  pr->add_option("--seed", prop_seed, "suite seed");
  pr->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config, seed, out);
    if (base->parsed()) return cmd_baseline(config, seed, algo, out);
    if (tr->parsed()) return cmd_train(ta);
    if (sw->parsed()) return cmd_eval_sweep(spec_path, out);
    if (ge->parsed()) return cmd_eval_generalize(spec_path, out);
    if (pr->parsed()) return cmd_eval_properties(prop_seed, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
