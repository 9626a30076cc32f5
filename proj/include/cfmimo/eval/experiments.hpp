#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmimo/config.hpp"

namespace cfmimo::eval {

// One evaluated method. Learning methods need a checkpoint path;
// sts_fixed_tau additionally carries the predetermined pilot length z.
struct MethodSpec {
  std::string method;
  std::string checkpoint;
  int z = -1;
};

struct ExperimentSpec {
  SystemConfig base;
  std::string sweep = "tau_c";  // tau_c | K | M | N | scenario
  std::vector<double> values;
  std::vector<std::string> scenarios;  // used when sweep == "scenario"
  int n_test = 50;
  std::uint64_t seed = 1;
  std::vector<MethodSpec> methods;
};

ExperimentSpec experiment_from_json_text(const std::string& text);
ExperimentSpec experiment_from_json_file(const std::string& path);

struct ResultRow {
  std::string method, sweep, value;
  int n = 0;
  double eta_mean = 0.0, eta_std = 0.0, tau_mean = 0.0;
  double ms_per_sample = 0.0;  // wall clock, reported in the timing sidecar
};

struct SweepOutput {
  std::vector<ResultRow> rows;
  std::string results_csv;  // deterministic for identical spec + seed
  std::string timing_csv;   // wall-clock sidecar, not reproducible
  std::string summary;      // human-readable
};

// Evaluates every (method, sweep value) pair on a fresh test set. Learning
// methods run discretize + compact + the binary evaluation path only.
// Points run in parallel; output order is fixed by the spec.
SweepOutput run_sweep(const ExperimentSpec& spec);

struct GeneralizationCase {
  std::string name;
  SystemConfig config;
  // η̄ denominator: a model trained at `config`. Empty is allowed only
  // when `config` equals the train config (the transfer model itself).
  std::string reference_checkpoint;
};

struct GeneralizationSpec {
  SystemConfig train_config;
  std::string checkpoint;  // model trained at train_config
  std::vector<GeneralizationCase> tests;
  int n_test = 50;
  std::uint64_t seed = 1;
};

GeneralizationSpec generalization_from_json_text(const std::string& text);
GeneralizationSpec generalization_from_json_file(const std::string& path);

struct GeneralizationRow {
  std::string name;
  double eta_transfer = 0.0, eta_reference = 0.0, ratio_percent = 0.0;
};

struct GeneralizationOutput {
  std::vector<GeneralizationRow> rows;
  std::string csv;
  std::string summary;
};

// Zero-shot evaluation of one checkpoint across differently sized/located
// deployments; edge-typed weights carry over between graph sizes.
GeneralizationOutput run_generalization(const GeneralizationSpec& spec);

}  // namespace cfmimo::eval
