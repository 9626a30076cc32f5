#pragma once

#include <cstdint>
#include <string>

namespace cfmimo {

enum class Scenario { UMi, UMa };

enum class MmseScaling {
  self_consistent,  // pilot energy p_ul * tau_p in the estimator (default)
  paper_eq2         // pilot energy p_ul only
};

// Scenario-dependent propagation constants. Filled by defaults_for() and then
// individually overridable from JSON.
struct ScenarioParams {
  double pathloss_exponent = 31.9;  // dB per decade of distance
  double shadowing_std_db = 8.2;
  double isd_m = 200.0;
  double ap_height_m = 10.0;
  double ue_height_m = 1.5;
  double min_distance_m = 10.0;
  double rho_db = 0.0;  // association threshold in dB, set by defaults_for

  static ScenarioParams defaults_for(Scenario sc);
};

struct SystemConfig {
  int M = 3;   // APs
  int N = 2;   // antennas per AP
  int K = 6;   // UEs
  int tau_c = 200;
  int N_T = 10;  // small-scale fading subframes per frame
  double P_max_dBm = 44.0;
  double p_ul_dBm = 23.0;
  double f_c_GHz = 6.0;
  double B_Hz = 20e6;
  double N0_dBm_per_Hz = -174.0;
  double N_F_dB = 9.0;
  Scenario scenario = Scenario::UMi;
  ScenarioParams scen = ScenarioParams::defaults_for(Scenario::UMi);
  MmseScaling mmse_scaling = MmseScaling::self_consistent;
  std::uint64_t rng_seed = 1;

  double P_max_W() const;
  double p_ul_W() const;
  double noise_power_W() const;    // sigma^2 (same value at AP and UE)
  double noise_power_dBm() const;
  double rho_lin() const;          // linear association threshold

  void validate() const;  // throws std::invalid_argument on bad fields

  static SystemConfig from_json_file(const std::string& path);
  static SystemConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

double dbm_to_watt(double dbm);
double watt_to_dbm(double w);
double db_to_lin(double db);
double lin_to_db(double lin);

// UMi/UMa pathloss in dB at 3D distance s_m (chi_db = shadowing realization)
double pathloss_db(double s_m, double f_c_GHz, double exponent, double chi_db);

}  // namespace cfmimo
