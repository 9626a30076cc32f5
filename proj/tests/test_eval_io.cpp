#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfmimo/config.hpp"
#include "cfmimo/eval/experiments.hpp"
#include "cfmimo/eval/properties.hpp"
#include "cfmimo/gnn/checkpoint.hpp"
#include "cfmimo/train/trainer.hpp"
#include "json.hpp"

using namespace cfmimo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path& tmp_dir() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / "cfmimo_eval_io";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

SystemConfig tiny_sys() {
  SystemConfig c;
  c.M = 2;
  c.N = 1;
  c.K = 3;
  c.tau_c = 40;
  c.N_T = 2;
  return c;
}

train::TrainOptions tiny_opts(std::uint64_t seed) {
  train::TrainOptions o;
  o.seed = seed;
  o.epochs = 6;
  o.n_train = 2;
  o.batch = 2;
  return o;
}

const std::string& sts_path() {
  static const std::string p = [] {
    train::TrainOptions o = tiny_opts(11);
    o.pilot_widths = {4, 2};
    train::TrainResult r = train::train_sts(tiny_sys(), o);
    std::string path = (tmp_dir() / "sts.json").string();
    gnn::save_checkpoint(path, r.ckpt);
    return path;
  }();
  return p;
}

const std::string& dts_path() {
  static const std::string p = [] {
    train::TrainOptions o = tiny_opts(12);
    o.pilot_widths = {4, 1};
    o.power_widths = {4, 2};
    train::TrainResult r = train::train_dts(tiny_sys(), o);
    std::string path = (tmp_dir() / "dts.json").string();
    gnn::save_checkpoint(path, r.ckpt);
    return path;
  }();
  return p;
}

const std::string& fixed2_path() {
  static const std::string p = [] {
    train::TrainOptions o = tiny_opts(13);
    o.pilot_widths = {4, 2};
    o.fixed_tau = 2;
    train::TrainResult r = train::train_sts(tiny_sys(), o);
    std::string path = (tmp_dir() / "sts_fixed2.json").string();
    gnn::save_checkpoint(path, r.ckpt);
    return path;
  }();
  return p;
}

json base_json() { return json::parse(tiny_sys().to_json_text()); }

const eval::ResultRow& find_row(const std::vector<eval::ResultRow>& rows,
                                const std::string& method,
                                const std::string& value) {
  for (const auto& r : rows)
    if (r.method == method && r.value == value) return r;
  REQUIRE(false);
  return rows.front();
}

}  // namespace

TEST_CASE("experiment spec parsing and validation") {
  json j{{"config", base_json()},
         {"sweep", "tau_c"},
         {"values", {50, 100}},
         {"n_test", 4},
         {"seed", 9},
         {"methods",
          json::array({{{"method", "dsatur_tabu_wmmse"}},
                       {{"method", "sts_fixed_tau"},
                        {"checkpoint", "x.json"},
                        {"z", 2}}})}};
  eval::ExperimentSpec s = eval::experiment_from_json_text(j.dump());
  CHECK(s.base.K == 3);
  CHECK(s.sweep == "tau_c");
  CHECK(s.values == std::vector<double>{50, 100});
  CHECK(s.n_test == 4);
  CHECK(s.seed == 9);
  REQUIRE(s.methods.size() == 2);
  CHECK(s.methods[1].z == 2);

  SUBCASE("file round trip") {
    const std::string path = (tmp_dir() / "exp.json").string();
    std::ofstream(path) << j.dump();
    eval::ExperimentSpec f = eval::experiment_from_json_file(path);
    CHECK(f.values == s.values);
    CHECK_THROWS_AS(eval::experiment_from_json_file(
                        (tmp_dir() / "nope.json").string()),
                    std::runtime_error);
  }
  SUBCASE("scenario sweep wants scenario names") {
    json k = j;
    k["sweep"] = "scenario";
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
    k["scenarios"] = {"UMi", "UMa"};
    CHECK(eval::experiment_from_json_text(k.dump()).scenarios.size() == 2);
    k["scenarios"] = {"urban"};
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
  }
  SUBCASE("bad fields throw") {
    json k = j;
    k["methods"][0]["method"] = "magic";
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
    k = j;
    k["sweep"] = "tau_p";
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
    k = j;
    k["values"] = json::array();
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
    k = j;
    k["methods"][1].erase("z");
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
    k = j;
    k["n_test"] = 0;
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
    k = j;
    k["methods"] = json::array();
    CHECK_THROWS_AS(eval::experiment_from_json_text(k.dump()),
                    std::invalid_argument);
  }
}

TEST_CASE("generalization spec validation") {
  json j{{"train_config", base_json()},
         {"checkpoint", "m.json"},
         {"n_test", 2},
         {"seed", 5},
         {"tests", json::array({{{"name", "same"}}})}};
  eval::GeneralizationSpec s = eval::generalization_from_json_text(j.dump());
  REQUIRE(s.tests.size() == 1);
  CHECK(s.tests[0].reference_checkpoint.empty());
  CHECK(s.tests[0].config.to_json_text() == s.train_config.to_json_text());

  json bigger = base_json();
  bigger["K"] = 5;
  SUBCASE("different deployment needs a reference") {
    json k = j;
    k["tests"].push_back({{"name", "K5"}, {"config", bigger}});
    CHECK_THROWS_AS(eval::generalization_from_json_text(k.dump()),
                    std::invalid_argument);
    k["tests"][1]["reference_checkpoint"] = "ref.json";
    CHECK(eval::generalization_from_json_text(k.dump()).tests.size() == 2);
  }
  SUBCASE("missing pieces throw") {
    json k = j;
    k.erase("checkpoint");
    CHECK_THROWS(eval::generalization_from_json_text(k.dump()));
    k = j;
    k["tests"] = json::array();
    CHECK_THROWS_AS(eval::generalization_from_json_text(k.dump()),
                    std::invalid_argument);
    k = j;
    k["n_test"] = 0;
    CHECK_THROWS_AS(eval::generalization_from_json_text(k.dump()),
                    std::invalid_argument);
  }
}

TEST_CASE("sweep output shape and determinism") {
  json j{{"config", base_json()},
         {"sweep", "tau_c"},
         {"values", {40, 60}},
         {"n_test", 3},
         {"seed", 7},
         {"methods",
          json::array({{{"method", "sts_agnn"}, {"checkpoint", sts_path()}},
                       {{"method", "dts_agnn"}, {"checkpoint", dts_path()}},
                       {{"method", "sts_fixed_tau"},
                        {"checkpoint", fixed2_path()},
                        {"z", 2}},
                       {{"method", "dsatur_tabu_wmmse"}},
                       {{"method", "oracle"}},
                       {{"method", "equal_power_random_pilots"}}})}};
  eval::ExperimentSpec spec = eval::experiment_from_json_text(j.dump());
  eval::SweepOutput a = eval::run_sweep(spec);
  eval::SweepOutput b = eval::run_sweep(spec);

  CHECK(a.results_csv == b.results_csv);  // byte-identical reruns
  CHECK(a.rows.size() == 12);
  CHECK(a.results_csv.rfind("# cfmimo-results v1\n"
                            "method,sweep,value,n,eta_mean,eta_std,tau_mean\n",
                            0) == 0);
  CHECK(a.timing_csv.rfind("# cfmimo-timing v1\n", 0) == 0);
  // one timing line per result row plus the two header lines
  CHECK(std::count(a.timing_csv.begin(), a.timing_csv.end(), '\n') == 14);

  for (const auto& r : a.rows) {
    CHECK(r.n == 3);
    CHECK(r.sweep == "tau_c");
    CHECK(r.eta_mean > 0.0);
    CHECK(r.eta_std >= 0.0);
    CHECK(r.tau_mean >= 1.0);
    CHECK(r.tau_mean <= 3.0);
  }
  for (const char* v : {"40", "60"}) {
    // the exhaustive search bounds the heuristic on every shared frame
    CHECK(find_row(a.rows, "oracle", v).eta_mean >=
          find_row(a.rows, "dsatur_tabu_wmmse", v).eta_mean - 1e-12);
    CHECK(find_row(a.rows, "sts_fixed_tau2", v).tau_mean == 2.0);
  }
}

TEST_CASE("sweep rejects mismatched checkpoints") {
  auto spec_for = [&](json method) {
    json j{{"config", base_json()},
           {"sweep", "tau_c"},
           {"values", {40}},
           {"n_test", 1},
           {"seed", 3},
           {"methods", json::array({method})}};
    return eval::experiment_from_json_text(j.dump());
  };
  CHECK_THROWS_AS(
      eval::run_sweep(spec_for({{"method", "sts_agnn"},
                                {"checkpoint", dts_path()}})),
      std::runtime_error);
  CHECK_THROWS_AS(
      eval::run_sweep(spec_for({{"method", "dts_agnn"},
                                {"checkpoint", sts_path()}})),
      std::runtime_error);
  CHECK_THROWS_AS(
      eval::run_sweep(spec_for({{"method", "sts_gnn"},
                                {"checkpoint", sts_path()}})),
      std::runtime_error);  // trained with attention
  CHECK_THROWS_AS(
      eval::run_sweep(spec_for({{"method", "sts_no_fe"},
                                {"checkpoint", sts_path()}})),
      std::runtime_error);
  CHECK_THROWS_AS(
      eval::run_sweep(spec_for({{"method", "sts_fixed_tau"},
                                {"checkpoint", fixed2_path()},
                                {"z", 3}})),
      std::runtime_error);  // pilot length mismatch
  CHECK_THROWS_AS(
      eval::run_sweep(spec_for({{"method", "sts_agnn"},
                                {"checkpoint",
                                 (tmp_dir() / "missing.json").string()}})),
      std::runtime_error);
  CHECK_THROWS_AS(
      eval::run_sweep(spec_for({{"method", "sts_agnn"}})),
      std::invalid_argument);  // no checkpoint at all
}

TEST_CASE("oracle rows are skipped beyond the exhaustive limit") {
  json j{{"config", base_json()},
         {"sweep", "K"},
         {"values", {3, 8}},
         {"n_test", 1},
         {"seed", 4},
         {"methods", json::array({{{"method", "oracle"}},
                                  {{"method", "dsatur_tabu_wmmse"}}})}};
  eval::SweepOutput out = eval::run_sweep(eval::experiment_from_json_text(j.dump()));
  CHECK(out.rows.size() == 3);  // oracle present at K=3 only
  CHECK(find_row(out.rows, "dsatur_tabu_wmmse", "8").eta_mean > 0.0);
  CHECK(out.summary.find("oracle skipped") != std::string::npos);
  for (const auto& r : out.rows)
    CHECK(!(r.method == "oracle" && r.value == "8"));
}

TEST_CASE("generalization identity is exactly 100 percent") {
  json bigger = base_json();
  bigger["K"] = 4;
  json j{{"train_config", base_json()},
         {"checkpoint", sts_path()},
         {"n_test", 2},
         {"seed", 21},
         {"tests",
          json::array({{{"name", "same"}},
                       {{"name", "self_ref"},
                        {"config", base_json()},
                        {"reference_checkpoint", sts_path()}},
                       {{"name", "K4"},
                        {"config", bigger},
                        {"reference_checkpoint", fixed2_path()}}})}};
  eval::GeneralizationSpec spec = eval::generalization_from_json_text(j.dump());
  eval::GeneralizationOutput out = eval::run_generalization(spec);
  REQUIRE(out.rows.size() == 3);
  CHECK(out.csv.rfind("# cfmimo-generalize v1\n"
                      "name,eta_transfer,eta_reference,ratio_percent\n",
                      0) == 0);
  CHECK(out.rows[0].ratio_percent == 100.0);
  CHECK(out.rows[1].ratio_percent == 100.0);  // same file both roles
  CHECK(out.rows[0].eta_transfer > 0.0);
  CHECK(out.rows[2].eta_transfer > 0.0);
  CHECK(out.rows[2].eta_reference > 0.0);
  CHECK(out.rows[2].ratio_percent ==
        doctest::Approx(100.0 * out.rows[2].eta_transfer /
                        out.rows[2].eta_reference));

  eval::GeneralizationOutput again = eval::run_generalization(spec);
  CHECK(again.csv == out.csv);
}

TEST_CASE("property report and csv shapes") {
  eval::PropertyResult r = eval::check_constraints(3, 10);
  CHECK(r.pass);
  std::vector<eval::PropertyResult> rs{r};
  CHECK(eval::properties_report(rs).find("[PASS] constraints") !=
        std::string::npos);
  std::string csv = eval::properties_csv(rs);
  CHECK(csv.rfind("# cfmimo-properties v1\ncheck,pass,seconds,detail\n", 0) ==
        0);
  CHECK(csv.find("\nconstraints,1,") != std::string::npos);
}
