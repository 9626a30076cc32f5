#include "cfmimo/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cfmimo {

using nlohmann::json;

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
double lin_to_db(double lin) { return 10.0 * std::log10(lin); }

double pathloss_db(double s_m, double f_c_GHz, double exponent, double chi_db) {
  return -32.4 - 20.0 * std::log10(f_c_GHz) - exponent * std::log10(s_m) +
         chi_db;
}

ScenarioParams ScenarioParams::defaults_for(Scenario sc) {
  ScenarioParams p;
  if (sc == Scenario::UMi) {
    p.pathloss_exponent = 31.9;
    p.shadowing_std_db = 8.2;
    p.isd_m = 200.0;
    p.ap_height_m = 10.0;
    p.ue_height_m = 1.5;
    p.min_distance_m = 10.0;
    // pathloss at the ISD with no shadowing
    p.rho_db = pathloss_db(200.0, 6.0, 31.9, 0.0);
  } else {
    p.pathloss_exponent = 30.0;
    p.shadowing_std_db = 7.8;
    p.isd_m = 500.0;
    p.ap_height_m = 25.0;
    p.ue_height_m = 1.5;
    p.min_distance_m = 35.0;
    p.rho_db = pathloss_db(450.0, 6.0, 30.0, 0.0);
  }
  return p;
}

double SystemConfig::P_max_W() const { return dbm_to_watt(P_max_dBm); }
double SystemConfig::p_ul_W() const { return dbm_to_watt(p_ul_dBm); }

double SystemConfig::noise_power_dBm() const {
  return N0_dBm_per_Hz + 10.0 * std::log10(B_Hz) + N_F_dB;
}

double SystemConfig::noise_power_W() const {
  return dbm_to_watt(noise_power_dBm());
}

double SystemConfig::rho_lin() const { return db_to_lin(scen.rho_db); }

void SystemConfig::validate() const {
  if (M < 1) throw std::invalid_argument("config: M must be >= 1");
  if (N < 1) throw std::invalid_argument("config: N must be >= 1");
  if (K < 1) throw std::invalid_argument("config: K must be >= 1");
  if (tau_c < 1) throw std::invalid_argument("config: tau_c must be >= 1");
  if (N_T < 1) throw std::invalid_argument("config: N_T must be >= 1");
  if (B_Hz <= 0) throw std::invalid_argument("config: B_Hz must be > 0");
  if (f_c_GHz <= 0) throw std::invalid_argument("config: f_c_GHz must be > 0");
  if (scen.isd_m <= 0)
    throw std::invalid_argument("config: isd_m must be > 0");
  if (scen.min_distance_m < 0)
    throw std::invalid_argument("config: min_distance_m must be >= 0");
}

static Scenario scenario_from_string(const std::string& s) {
  if (s == "UMi") return Scenario::UMi;
  if (s == "UMa") return Scenario::UMa;
  throw std::invalid_argument("config: unknown scenario '" + s + "'");
}

static const char* scenario_to_string(Scenario sc) {
  return sc == Scenario::UMi ? "UMi" : "UMa";
}

SystemConfig SystemConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  SystemConfig c;
  auto get = [&](const char* name, auto& field) {
    if (j.contains(name)) field = j.at(name).template get<std::decay_t<decltype(field)>>();
  };
  get("M", c.M);
  get("N", c.N);
  get("K", c.K);
  get("tau_c", c.tau_c);
  get("N_T", c.N_T);
  get("P_max_dBm", c.P_max_dBm);
  get("p_ul_dBm", c.p_ul_dBm);
  get("f_c_GHz", c.f_c_GHz);
  get("B_Hz", c.B_Hz);
  get("N0_dBm_per_Hz", c.N0_dBm_per_Hz);
  get("N_F_dB", c.N_F_dB);
  if (j.contains("scenario"))
    c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  c.scen = ScenarioParams::defaults_for(c.scenario);
  if (c.scenario == Scenario::UMa && !j.contains("P_max_dBm")) c.P_max_dBm = 49.0;
  if (j.contains("scenario_params")) {
    const json& s = j.at("scenario_params");
    auto gets = [&](const char* name, double& field) {
      if (s.contains(name)) field = s.at(name).get<double>();
    };
    gets("pathloss_exponent", c.scen.pathloss_exponent);
    gets("shadowing_std_db", c.scen.shadowing_std_db);
    gets("isd_m", c.scen.isd_m);
    gets("ap_height_m", c.scen.ap_height_m);
    gets("ue_height_m", c.scen.ue_height_m);
    gets("min_distance_m", c.scen.min_distance_m);
    gets("rho_db", c.scen.rho_db);
  }
  if (j.contains("mmse_scaling")) {
    std::string m = j.at("mmse_scaling").get<std::string>();
    if (m == "self_consistent")
      c.mmse_scaling = MmseScaling::self_consistent;
    else if (m == "paper_eq2")
      c.mmse_scaling = MmseScaling::paper_eq2;
    else
      throw std::invalid_argument("config: unknown mmse_scaling '" + m + "'");
  }
  if (j.contains("rng_seed")) c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

SystemConfig SystemConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string SystemConfig::to_json_text() const {
  json j;
  j["M"] = M;
  j["N"] = N;
  j["K"] = K;
  j["tau_c"] = tau_c;
  j["N_T"] = N_T;
  j["P_max_dBm"] = P_max_dBm;
  j["p_ul_dBm"] = p_ul_dBm;
  j["f_c_GHz"] = f_c_GHz;
  j["B_Hz"] = B_Hz;
  j["N0_dBm_per_Hz"] = N0_dBm_per_Hz;
  j["N_F_dB"] = N_F_dB;
  j["scenario"] = scenario_to_string(scenario);
  j["scenario_params"] = {{"pathloss_exponent", scen.pathloss_exponent},
                          {"shadowing_std_db", scen.shadowing_std_db},
                          {"isd_m", scen.isd_m},
                          {"ap_height_m", scen.ap_height_m},
                          {"ue_height_m", scen.ue_height_m},
                          {"min_distance_m", scen.min_distance_m},
                          {"rho_db", scen.rho_db}};
  j["mmse_scaling"] = mmse_scaling == MmseScaling::self_consistent
                          ? "self_consistent"
                          : "paper_eq2";
  j["rng_seed"] = rng_seed;
  return j.dump(2);
}

}  // namespace cfmimo
