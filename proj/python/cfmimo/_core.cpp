#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/config.hpp"
#include "cfmimo/eval/experiments.hpp"
#include "cfmimo/eval/properties.hpp"
#include "cfmimo/gnn/checkpoint.hpp"
#include "cfmimo/phy.hpp"
#include "cfmimo/pilot.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/solvers.hpp"
#include "cfmimo/train/trainer.hpp"

namespace py = pybind11;
using namespace cfmimo;

namespace {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Mat& m) {
  Rows out(m.rows, std::vector<double>(m.cols));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out[r][c] = m.at(r, c);
  return out;
}

Mat from_rows(const Rows& rows) {
  if (rows.empty()) throw std::invalid_argument("matrix: no rows");
  Mat m((int)rows.size(), (int)rows[0].size());
  for (int r = 0; r < m.rows; ++r) {
    if ((int)rows[r].size() != m.cols)
      throw std::invalid_argument("matrix: ragged rows");
    for (int c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
  }
  return m;
}

py::dict frame_dict(const SystemConfig& cfg, const ChannelSet& cs) {
  py::dict d;
  d["M"] = cs.M;
  d["N"] = cs.N;
  d["K"] = cs.K;
  d["N_T"] = cs.N_T;
  d["beta"] = to_rows(cs.beta);
  d["A"] = to_rows(cs.A);
  d["noise_W"] = cs.noise_ap_W;
  d["P_max_W"] = cfg.P_max_W();
  return d;
}

py::dict draw_frame(const std::string& config_json, std::uint64_t seed) {
  SystemConfig cfg = SystemConfig::from_json_text(config_json);
  ChannelSet cs = generate_channels(cfg, seed);
  return frame_dict(cfg, cs);
}

py::dict baseline(const std::string& config_json, std::uint64_t seed,
                  const std::string& algo) {
  SystemConfig cfg = SystemConfig::from_json_text(config_json);
  ChannelSet cs = generate_channels(cfg, seed);
  const std::uint64_t noise_seed = derive_seed(seed, "baseline_noise");
  CompactAssignment ca;
  FrameEval fe;
  py::dict d;
  if (algo == "dsatur-tabu-wmmse") {
    solvers::BaselineResult br = solvers::dsatur_tabu_wmmse(cs, cfg, noise_seed);
    ca = br.assignment;
    fe = br.eval;
    d["tabu_objective"] = br.tabu_objective;
  } else if (algo == "oracle") {
    solvers::OracleResult orc =
        solvers::exhaustive_oracle(cs, cfg, solvers::PowerRule::wmmse, noise_seed);
    ca = orc.assignment;
    fe = orc.eval;
    d["n_candidates"] = orc.n_candidates;
  } else {
    throw std::invalid_argument("baseline: unknown algo '" + algo + "'");
  }
  d["algo"] = algo;
  d["tau_p"] = ca.tau_p;
  d["X"] = to_rows(ca.X_o);
  d["eta"] = fe.eta;
  d["eta_bar"] = fe.eta_bar;
  return d;
}

py::dict train(const std::string& variant, const std::string& config_json,
               int epochs, int n_train, int batch, std::uint64_t seed,
               double lr, int fixed_tau, bool attention,
               bool feature_enhancement) {
  SystemConfig cfg = SystemConfig::from_json_text(config_json);
  train::TrainOptions opt;
  opt.epochs = epochs;
  opt.n_train = n_train;
  opt.batch = batch;
  opt.seed = seed;
  opt.lr = lr;
  opt.fixed_tau = fixed_tau;
  opt.attention = attention;
  opt.feature_enhancement = feature_enhancement;
  train::TrainResult res;
  if (variant == "sts")
    res = train::train_sts(cfg, opt);
  else if (variant == "dts")
    res = train::train_dts(cfg, opt);
  else
    throw std::invalid_argument("train: variant must be 'sts' or 'dts'");
  py::dict d;
  d["checkpoint"] = gnn::checkpoint_to_json(res.ckpt);
  d["best_epoch"] = res.best_epoch;
  d["best_loss"] = res.best_loss;
  py::list curve;
  for (const train::CurveRow& r : res.curve) {
    py::dict row;
    row["epoch"] = r.epoch;
    row["loss"] = r.loss;
    row["eta"] = r.eta;
    row["penalty"] = r.penalty;
    curve.append(row);
  }
  d["curve"] = curve;
  return d;
}

py::dict evaluate_checkpoint(const std::string& checkpoint_json,
                             const std::string& config_json,
                             std::uint64_t frame_seed,
                             std::uint64_t lambda_seed,
                             std::uint64_t noise_seed) {
  SystemConfig cfg = SystemConfig::from_json_text(config_json);
  gnn::Checkpoint ck = gnn::checkpoint_from_json(checkpoint_json);
  if (!ck.has_pilot)
    throw std::invalid_argument("evaluate_checkpoint: no pilot net");
  ChannelSet cs = generate_channels(cfg, frame_seed);
  train::ModelEval me =
      ck.has_power
          ? train::eval_dts(ck.pilot, ck.power, cs, cfg, lambda_seed, noise_seed)
          : train::eval_sts(ck.pilot, cs, cfg, lambda_seed, noise_seed);
  py::dict d;
  d["eta_bar"] = me.fe.eta_bar;
  d["eta"] = me.fe.eta;
  d["tau_p"] = me.ca.tau_p;
  d["X"] = to_rows(me.ca.X_o);
  return d;
}

py::dict sweep(const std::string& spec_json) {
  eval::SweepOutput out =
      eval::run_sweep(eval::experiment_from_json_text(spec_json));
  py::dict d;
  d["results_csv"] = out.results_csv;
  d["timing_csv"] = out.timing_csv;
  d["summary"] = out.summary;
  return d;
}

py::dict generalize(const std::string& spec_json) {
  eval::GeneralizationOutput out =
      eval::run_generalization(eval::generalization_from_json_text(spec_json));
  py::dict d;
  d["csv"] = out.csv;
  d["summary"] = out.summary;
  return d;
}

py::list properties(std::uint64_t seed) {
  py::list out;
  for (const eval::PropertyResult& r : eval::run_property_suite(seed)) {
    py::dict d;
    d["name"] = r.name;
    d["pass"] = r.pass;
    d["seconds"] = r.seconds;
    d["detail"] = r.detail;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "joint pilot-length / pilot-assignment / power optimization for "
            "user-centric cell-free massive MIMO";

  m.def("default_config", [] { return SystemConfig().to_json_text(); },
        "system defaults as a JSON string");
  m.def("draw_frame", &draw_frame, py::arg("config_json"), py::arg("seed"),
        "large-scale state of one frame: beta, association mask, noise");
  m.def("psi", [](const Rows& x) { return psi(from_rows(x)); }, py::arg("X"),
        "pilots in use: nonzero rows of a binary assignment, smooth "
        "row-occupancy count of a soft one");
  m.def("discretize", [](const Rows& x) { return to_rows(discretize(from_rows(x))); },
        py::arg("X_soft"), "column-wise argmax onto a binary assignment");
  m.def("baseline", &baseline, py::arg("config_json"), py::arg("seed"),
        py::arg("algo") = "dsatur-tabu-wmmse",
        "classical pipeline ('dsatur-tabu-wmmse') or exhaustive search "
        "('oracle', K <= 7) on one frame");
  m.def("train", &train, py::arg("variant"), py::arg("config_json"),
        py::arg("epochs") = 40, py::arg("n_train") = 300,
        py::arg("batch") = 50, py::arg("seed") = 1, py::arg("lr") = 0.01,
        py::arg("fixed_tau") = -1, py::arg("attention") = true,
        py::arg("feature_enhancement") = true,
        "train the joint net ('sts') or the pilot/power pair ('dts'); "
        "returns the best-epoch checkpoint JSON and the training curve");
  m.def("evaluate_checkpoint", &evaluate_checkpoint,
        py::arg("checkpoint_json"), py::arg("config_json"),
        py::arg("frame_seed"), py::arg("lambda_seed") = 0,
        py::arg("noise_seed") = 0,
        "binary re-evaluation of a trained model on one fresh frame");
  m.def("sweep", &sweep, py::arg("spec_json"),
        "method x sweep-value grid; returns CSV strings");
  m.def("generalize", &generalize, py::arg("spec_json"),
        "zero-shot transfer table; returns a CSV string");
  m.def("properties", &properties, py::arg("seed") = 20240501,
        "run the invariant suite; one dict per check");

  m.attr("__version__") = "0.1.0";
}
