#include "cfmimo/eval/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include "cfmimo/channel.hpp"
#include "cfmimo/gnn/checkpoint.hpp"
#include "cfmimo/phy.hpp"
#include "cfmimo/pilot.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/solvers.hpp"
#include "cfmimo/train/trainer.hpp"
#include "json.hpp"

namespace cfmimo::eval {

using nlohmann::json;

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

bool is_sts_method(const std::string& m) {
  return m == "sts_agnn" || m == "sts_gnn" || m == "sts_no_fe" ||
         m == "sts_fixed_tau";
}

bool is_dts_method(const std::string& m) {
  return m == "dts_agnn" || m == "dts_gnn";
}

bool is_learning_method(const std::string& m) {
  return is_sts_method(m) || is_dts_method(m);
}

bool known_method(const std::string& m) {
  return is_learning_method(m) || m == "dsatur_tabu_wmmse" || m == "oracle" ||
         m == "equal_power_random_pilots";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "UMi") return Scenario::UMi;
  if (s == "UMa") return Scenario::UMa;
  throw std::invalid_argument("experiment: unknown scenario '" + s + "'");
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(std::string(what) + ": cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Loaded checkpoints, aligned with the spec's method list (unset for
// non-learning methods).
std::vector<gnn::Checkpoint> load_method_checkpoints(
    const std::vector<MethodSpec>& methods) {
  std::vector<gnn::Checkpoint> cks(methods.size());
  for (size_t i = 0; i < methods.size(); ++i) {
    const MethodSpec& ms = methods[i];
    if (!is_learning_method(ms.method)) continue;
    if (ms.checkpoint.empty())
      throw std::invalid_argument("experiment: method '" + ms.method +
                                  "' needs a checkpoint path");
    gnn::Checkpoint ck = gnn::load_checkpoint(ms.checkpoint);
    auto bad = [&](const std::string& why) {
      throw std::runtime_error("experiment: checkpoint '" + ms.checkpoint +
                               "' does not fit method '" + ms.method +
                               "': " + why);
    };
    if (!ck.has_pilot) bad("no pilot net");
    if (is_sts_method(ms.method)) {
      if (ck.pilot_variant != "sts") bad("pilot variant is not 'sts'");
      if (ck.has_power) bad("unexpected separate power net");
    } else {
      if (ck.pilot_variant != "dts_pilot") bad("pilot variant is not 'dts_pilot'");
      if (!ck.has_power) bad("no power net");
    }
    const gnn::GnnSpec& ps = ck.pilot.spec;
    if (ms.method == "sts_agnn" || ms.method == "dts_agnn") {
      if (!ps.attention) bad("trained without attention");
      if (!ps.feature_enhancement) bad("trained without random features");
    } else if (ms.method == "sts_gnn" || ms.method == "dts_gnn") {
      if (ps.attention) bad("trained with attention");
    } else if (ms.method == "sts_no_fe") {
      if (ps.feature_enhancement) bad("trained with random features");
    } else if (ms.method == "sts_fixed_tau") {
      if (ms.z < 1)
        throw std::invalid_argument(
            "experiment: sts_fixed_tau needs a pilot length z >= 1");
      if (ps.n_ps != ms.z)
        bad(fmt("fixed pilot length %d does not match z=%d", ps.n_ps, ms.z));
    }
    cks[i] = std::move(ck);
  }
  return cks;
}

struct SampleResult {
  double eta = 0.0;
  double tau = 0.0;
};

SampleResult run_method_sample(const MethodSpec& ms, gnn::Checkpoint& ck,
                               const ChannelSet& cs, const SystemConfig& cfg,
                               std::uint64_t lam_seed, std::uint64_t noise_seed,
                               std::uint64_t pick_seed) {
  if (is_sts_method(ms.method)) {
    train::ModelEval me = train::eval_sts(ck.pilot, cs, cfg, lam_seed, noise_seed);
    return {me.fe.eta_bar, me.fe.tau_p};
  }
  if (is_dts_method(ms.method)) {
    train::ModelEval me =
        train::eval_dts(ck.pilot, ck.power, cs, cfg, lam_seed, noise_seed);
    return {me.fe.eta_bar, me.fe.tau_p};
  }
  if (ms.method == "dsatur_tabu_wmmse") {
    solvers::BaselineResult br = solvers::dsatur_tabu_wmmse(cs, cfg, noise_seed);
    return {br.eval.eta_bar, br.eval.tau_p};
  }
  if (ms.method == "oracle") {
    solvers::OracleResult orc =
        solvers::exhaustive_oracle(cs, cfg, solvers::PowerRule::wmmse, noise_seed);
    return {orc.eval.eta_bar, orc.eval.tau_p};
  }
  // equal_power_random_pilots: a random pilot length, every UE on a random
  // slot, all reserved slots paid for in the pre-log factor
  Rng rng(pick_seed);
  const int tau_p = 1 + (int)rng.uniform_int(cfg.K);
  Mat X(tau_p, cfg.K);
  for (int k = 0; k < cfg.K; ++k) X.at((int)rng.uniform_int(tau_p), k) = 1.0;
  FrameEval fe = evaluate_equal_power(cs, cfg, X, noise_seed, (double)tau_p);
  return {fe.eta_bar, fe.tau_p};
}

struct PointTask {
  SystemConfig cfg;
  std::string value;
};

PointTask point_config(const ExperimentSpec& spec, size_t pi) {
  PointTask pt{spec.base, ""};
  if (spec.sweep == "scenario") {
    const std::string& name = spec.scenarios[pi];
    const Scenario sc = parse_scenario(name);
    pt.cfg.scenario = sc;
    pt.cfg.scen = ScenarioParams::defaults_for(sc);
    pt.cfg.P_max_dBm = sc == Scenario::UMa ? 49.0 : 44.0;
    pt.value = name;
  } else {
    const double v = spec.values[pi];
    const int iv = (int)std::llround(v);
    if (spec.sweep == "tau_c")
      pt.cfg.tau_c = iv;
    else if (spec.sweep == "K")
      pt.cfg.K = iv;
    else if (spec.sweep == "M")
      pt.cfg.M = iv;
    else if (spec.sweep == "N")
      pt.cfg.N = iv;
    else
      throw std::invalid_argument("experiment: unknown sweep '" + spec.sweep +
                                  "'");
    pt.value = fmt("%g", v);
  }
  pt.cfg.validate();
  return pt;
}

struct PointOutput {
  std::vector<ResultRow> rows;
  std::vector<std::string> notes;
};

PointOutput eval_point(const ExperimentSpec& spec, const PointTask& pt,
                       std::vector<gnn::Checkpoint> cks) {
  PointOutput out;
  std::vector<ChannelSet> tests;
  tests.reserve(spec.n_test);
  for (int i = 0; i < spec.n_test; ++i)
    tests.push_back(
        generate_channels(pt.cfg, derive_seed(spec.seed, "test", i)));

  for (size_t mi = 0; mi < spec.methods.size(); ++mi) {
    const MethodSpec& ms = spec.methods[mi];
    if (ms.method == "oracle" && pt.cfg.K > 7) {
      out.notes.push_back(fmt("oracle skipped at %s=%s: K=%d exceeds the "
                              "exhaustive-search limit of 7",
                              spec.sweep.c_str(), pt.value.c_str(), pt.cfg.K));
      continue;
    }
    const double t0 = now_s();
    double se = 0.0, se2 = 0.0, st = 0.0;
    for (int i = 0; i < spec.n_test; ++i) {
      SampleResult sr = run_method_sample(
          ms, cks[mi], tests[i], pt.cfg, derive_seed(spec.seed, "lam", i),
          derive_seed(spec.seed, "noise", i),
          derive_seed(spec.seed, "rand_pilot", i));
      se += sr.eta;
      se2 += sr.eta * sr.eta;
      st += sr.tau;
    }
    const double n = (double)spec.n_test;
    ResultRow row;
    row.method = ms.method == "sts_fixed_tau"
                     ? fmt("sts_fixed_tau%d", ms.z)
                     : ms.method;
    row.sweep = spec.sweep;
    row.value = pt.value;
    row.n = spec.n_test;
    row.eta_mean = se / n;
    row.eta_std =
        spec.n_test > 1
            ? std::sqrt(std::max(0.0, (se2 - se * se / n) / (n - 1.0)))
            : 0.0;
    row.tau_mean = st / n;
    row.ms_per_sample = (now_s() - t0) * 1000.0 / n;
    out.rows.push_back(std::move(row));
  }
  return out;
}

void validate_experiment(const ExperimentSpec& spec) {
  spec.base.validate();
  if (spec.n_test < 1)
    throw std::invalid_argument("experiment: n_test must be >= 1");
  if (spec.methods.empty())
    throw std::invalid_argument("experiment: no methods listed");
  for (const MethodSpec& ms : spec.methods) {
    if (!known_method(ms.method))
      throw std::invalid_argument("experiment: unknown method '" + ms.method +
                                  "'");
    if (ms.method == "sts_fixed_tau" && ms.z < 1)
      throw std::invalid_argument(
          "experiment: sts_fixed_tau needs a pilot length z >= 1");
  }
  if (spec.sweep == "scenario") {
    if (spec.scenarios.empty())
      throw std::invalid_argument("experiment: scenario sweep needs scenarios");
    for (const std::string& s : spec.scenarios) parse_scenario(s);
  } else if (spec.sweep == "tau_c" || spec.sweep == "K" || spec.sweep == "M" ||
             spec.sweep == "N") {
    if (spec.values.empty())
      throw std::invalid_argument("experiment: sweep needs values");
  } else {
    throw std::invalid_argument("experiment: unknown sweep '" + spec.sweep +
                                "'");
  }
}

}  // namespace

ExperimentSpec experiment_from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentSpec spec;
  if (j.contains("config"))
    spec.base = SystemConfig::from_json_text(j.at("config").dump());
  if (j.contains("sweep")) spec.sweep = j.at("sweep").get<std::string>();
  if (j.contains("values"))
    spec.values = j.at("values").get<std::vector<double>>();
  if (j.contains("scenarios"))
    spec.scenarios = j.at("scenarios").get<std::vector<std::string>>();
  if (j.contains("n_test")) spec.n_test = j.at("n_test").get<int>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("methods")) {
    for (const json& m : j.at("methods")) {
      MethodSpec ms;
      ms.method = m.at("method").get<std::string>();
      if (m.contains("checkpoint"))
        ms.checkpoint = m.at("checkpoint").get<std::string>();
      if (m.contains("z")) ms.z = m.at("z").get<int>();
      spec.methods.push_back(std::move(ms));
    }
  }
  validate_experiment(spec);
  return spec;
}

ExperimentSpec experiment_from_json_file(const std::string& path) {
  return experiment_from_json_text(read_file(path, "experiment"));
}

SweepOutput run_sweep(const ExperimentSpec& spec) {
  validate_experiment(spec);
  // load + validate checkpoints up front so bad specs fail synchronously
  std::vector<gnn::Checkpoint> cks = load_method_checkpoints(spec.methods);

  const size_t n_points =
      spec.sweep == "scenario" ? spec.scenarios.size() : spec.values.size();
  std::vector<PointTask> pts;
  for (size_t pi = 0; pi < n_points; ++pi) pts.push_back(point_config(spec, pi));

  // points are independent; each task owns copies of the models
  std::vector<std::future<PointOutput>> futs;
  futs.reserve(n_points);
  for (size_t pi = 0; pi < n_points; ++pi)
    futs.push_back(std::async(std::launch::async, [&spec, &pts, &cks, pi] {
      return eval_point(spec, pts[pi], cks);
    }));

  SweepOutput out;
  out.results_csv = "# cfmimo-results v1\n";
  out.results_csv += "method,sweep,value,n,eta_mean,eta_std,tau_mean\n";
  out.timing_csv = "# cfmimo-timing v1\n";
  out.timing_csv += "method,sweep,value,ms_per_sample\n";
  out.summary = fmt("sweep over %s: %zu points x %zu methods, %d test frames "
                    "each\n",
                    spec.sweep.c_str(), n_points, spec.methods.size(),
                    spec.n_test);
  std::vector<std::string> notes;
  for (size_t pi = 0; pi < n_points; ++pi) {
    PointOutput po = futs[pi].get();
    for (const ResultRow& r : po.rows) {
      out.rows.push_back(r);
      out.results_csv += fmt("%s,%s,%s,%d,%.17g,%.17g,%.17g\n",
                             r.method.c_str(), r.sweep.c_str(), r.value.c_str(),
                             r.n, r.eta_mean, r.eta_std, r.tau_mean);
      out.timing_csv += fmt("%s,%s,%s,%.3f\n", r.method.c_str(),
                            r.sweep.c_str(), r.value.c_str(), r.ms_per_sample);
      out.summary += fmt("  %s=%-6s %-22s eta %.4f +- %.4f  tau %.2f\n",
                         r.sweep.c_str(), r.value.c_str(), r.method.c_str(),
                         r.eta_mean, r.eta_std, r.tau_mean);
    }
    notes.insert(notes.end(), po.notes.begin(), po.notes.end());
  }
  for (const std::string& n : notes) out.summary += "  note: " + n + "\n";
  return out;
}

GeneralizationSpec generalization_from_json_text(const std::string& text) {
  json j = json::parse(text);
  GeneralizationSpec spec;
  if (j.contains("train_config"))
    spec.train_config = SystemConfig::from_json_text(j.at("train_config").dump());
  spec.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("n_test")) spec.n_test = j.at("n_test").get<int>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (!j.contains("tests") || j.at("tests").empty())
    throw std::invalid_argument("generalization: no test cases");
  const std::string train_json = spec.train_config.to_json_text();
  for (const json& t : j.at("tests")) {
    GeneralizationCase gc;
    gc.name = t.at("name").get<std::string>();
    gc.config = t.contains("config")
                    ? SystemConfig::from_json_text(t.at("config").dump())
                    : spec.train_config;
    if (t.contains("reference_checkpoint"))
      gc.reference_checkpoint = t.at("reference_checkpoint").get<std::string>();
    if (gc.reference_checkpoint.empty() &&
        gc.config.to_json_text() != train_json)
      throw std::invalid_argument(
          "generalization: case '" + gc.name +
          "' needs a reference_checkpoint (its config differs from the "
          "train config)");
    spec.tests.push_back(std::move(gc));
  }
  if (spec.n_test < 1)
    throw std::invalid_argument("generalization: n_test must be >= 1");
  return spec;
}

GeneralizationSpec generalization_from_json_file(const std::string& path) {
  return generalization_from_json_text(read_file(path, "generalization"));
}

namespace {

double mean_eta(gnn::Checkpoint& ck, const SystemConfig& cfg, int n_test,
                std::uint64_t seed, size_t ci) {
  double s = 0.0;
  for (int i = 0; i < n_test; ++i) {
    ChannelSet cs = generate_channels(cfg, derive_seed(seed, "gtest", ci, i));
    const std::uint64_t lam = derive_seed(seed, "glam", ci, i);
    const std::uint64_t noi = derive_seed(seed, "gnoise", ci, i);
    train::ModelEval me =
        ck.has_power ? train::eval_dts(ck.pilot, ck.power, cs, cfg, lam, noi)
                     : train::eval_sts(ck.pilot, cs, cfg, lam, noi);
    s += me.fe.eta_bar;
  }
  return s / n_test;
}

}  // namespace

GeneralizationOutput run_generalization(const GeneralizationSpec& spec) {
  spec.train_config.validate();
  gnn::Checkpoint transfer = gnn::load_checkpoint(spec.checkpoint);
  if (!transfer.has_pilot)
    throw std::runtime_error("generalization: checkpoint '" + spec.checkpoint +
                             "' has no pilot net");

  GeneralizationOutput out;
  out.csv = "# cfmimo-generalize v1\n";
  out.csv += "name,eta_transfer,eta_reference,ratio_percent\n";
  out.summary = fmt("zero-shot transfer of %s over %zu deployments\n",
                    spec.checkpoint.c_str(), spec.tests.size());
  for (size_t ci = 0; ci < spec.tests.size(); ++ci) {
    const GeneralizationCase& gc = spec.tests[ci];
    gc.config.validate();
    GeneralizationRow row;
    row.name = gc.name;
    row.eta_transfer =
        mean_eta(transfer, gc.config, spec.n_test, spec.seed, ci);
    if (gc.reference_checkpoint.empty()) {
      // the transfer model *is* the reference here (same deployment)
      row.eta_reference = row.eta_transfer;
      row.ratio_percent = 100.0;
    } else {
      gnn::Checkpoint ref = gnn::load_checkpoint(gc.reference_checkpoint);
      if (!ref.has_pilot)
        throw std::runtime_error("generalization: reference '" +
                                 gc.reference_checkpoint + "' has no pilot net");
      row.eta_reference = mean_eta(ref, gc.config, spec.n_test, spec.seed, ci);
      row.ratio_percent = 100.0 * row.eta_transfer / row.eta_reference;
    }
    out.csv += fmt("%s,%.17g,%.17g,%.17g\n", row.name.c_str(),
                   row.eta_transfer, row.eta_reference, row.ratio_percent);
    out.summary += fmt("  %-16s %.2f%% of the locally trained reference "
                       "(%.4f vs %.4f)\n",
                       row.name.c_str(), row.ratio_percent, row.eta_transfer,
                       row.eta_reference);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace cfmimo::eval
