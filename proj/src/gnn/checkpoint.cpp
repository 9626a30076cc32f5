#include "cfmimo/gnn/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

namespace cfmimo::gnn {

using ad::Tensor;
using json = nlohmann::json;

namespace {

constexpr const char* kFormat = "cfmimo-checkpoint v1";

using SlotList = std::vector<std::tuple<int, std::string, Tensor*>>;

void bn_slots(SlotList& out, int l, const std::string& prefix, ad::BatchNorm& bn) {
  out.emplace_back(l, prefix + "_gamma", &bn.gamma);
  out.emplace_back(l, prefix + "_beta", &bn.beta);
  out.emplace_back(l, prefix + "_run_mean", &bn.run_mean);
  out.emplace_back(l, prefix + "_run_var", &bn.run_var);
}

SlotList pilot_slots(PilotModel& m) {
  SlotList out;
  const int L = (int)m.layers.size();
  for (int l = 0; l < L; ++l) {
    PilotLayer& Ly = m.layers[l];
    out.emplace_back(l, "Q_AP1", &Ly.Q_AP1);
    out.emplace_back(l, "U_AP1", &Ly.U_AP1);
    out.emplace_back(l, "U_AP2", &Ly.U_AP2);
    out.emplace_back(l, "Q_PS1", &Ly.Q_PS1);
    out.emplace_back(l, "U_PS1", &Ly.U_PS1);
    out.emplace_back(l, "U_PS2", &Ly.U_PS2);
    out.emplace_back(l, "U_PS3", &Ly.U_PS3);
    if (m.spec.attention) {
      out.emplace_back(l, "U_PS4", &Ly.U_PS4);
      out.emplace_back(l, "U_PS5", &Ly.U_PS5);
    }
    if (l + 1 < L) {
      bn_slots(out, l, "bn_apue", Ly.bn_apue);
      bn_slots(out, l, "bn_psue", Ly.bn_psue);
    }
  }
  return out;
}

SlotList power_slots(PowerModel& m) {
  SlotList out;
  const int L = (int)m.layers.size();
  for (int l = 0; l < L; ++l) {
    PowerLayer& Ly = m.layers[l];
    out.emplace_back(l, "Q_AN1", &Ly.Q_AN1);
    out.emplace_back(l, "U_AN1", &Ly.U_AN1);
    out.emplace_back(l, "U_AN2", &Ly.U_AN2);
    out.emplace_back(l, "U_AN3", &Ly.U_AN3);
    out.emplace_back(l, "Q_INF1", &Ly.Q_INF1);
    out.emplace_back(l, "U_INF1", &Ly.U_INF1);
    out.emplace_back(l, "U_INF2", &Ly.U_INF2);
    out.emplace_back(l, "U_INF3", &Ly.U_INF3);
    out.emplace_back(l, "U_INF4", &Ly.U_INF4);
    if (l + 1 < L) {
      bn_slots(out, l, "bn_sig", Ly.bn_sig);
      bn_slots(out, l, "bn_inf", Ly.bn_inf);
    }
  }
  out.emplace_back(-1, "u_out", &m.u_out);
  return out;
}

json spec_header(const std::string& variant, const GnnSpec& s) {
  json j;
  j["variant"] = variant;
  j["widths"] = s.widths;
  j["attention"] = s.attention;
  j["feature_enhancement"] = s.feature_enhancement;
  if (s.n_ps == 0)
    j["n_ps_mode"] = "K";
  else
    j["n_ps_mode"] = s.n_ps;
  return j;
}

json dump_params(const SlotList& slots) {
  json arr = json::array();
  for (const auto& [l, name, t] : slots) {
    json e;
    e["layer"] = l;
    e["name"] = name;
    e["shape"] = {t->rows, t->cols};
    e["data"] = t->v;
    arr.push_back(e);
  }
  return arr;
}

GnnSpec spec_from_header(const json& j) {
  GnnSpec s;
  s.widths = j.at("widths").get<std::vector<int>>();
  s.attention = j.at("attention").get<bool>();
  s.feature_enhancement = j.at("feature_enhancement").get<bool>();
  const json& nm = j.at("n_ps_mode");
  s.n_ps = nm.is_string() ? 0 : nm.get<int>();
  if (nm.is_string() && nm.get<std::string>() != "K")
    throw std::runtime_error("checkpoint: bad n_ps_mode");
  return s;
}

void load_params(const json& arr, const SlotList& slots) {
  std::set<std::pair<int, std::string>> filled;
  for (const json& e : arr) {
    const int l = e.at("layer").get<int>();
    const std::string name = e.at("name").get<std::string>();
    Tensor* target = nullptr;
    for (const auto& [sl, sn, t] : slots)
      if (sl == l && sn == name) {
        target = t;
        break;
      }
    if (!target)
      throw std::runtime_error("checkpoint: unknown param " + name +
                               " at layer " + std::to_string(l));
    auto shape = e.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != target->rows || shape[1] != target->cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    auto data = e.at("data").get<std::vector<double>>();
    if (data.size() != target->v.size())
      throw std::runtime_error("checkpoint: data size mismatch for " + name);
    target->v = std::move(data);
    filled.insert({l, name});
  }
  for (const auto& [l, name, t] : slots) {
    (void)t;
    if (!filled.count({l, name}))
      throw std::runtime_error("checkpoint: missing param " + name +
                               " at layer " + std::to_string(l));
  }
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ck) {
  json j;
  j["format"] = kFormat;
  json models = json::array();
  if (ck.has_pilot) {
    json m = spec_header(ck.pilot_variant, ck.pilot.spec);
    m["params"] = dump_params(pilot_slots(const_cast<PilotModel&>(ck.pilot)));
    models.push_back(m);
  }
  if (ck.has_power) {
    json m = spec_header("dts_power", ck.power.spec);
    m["params"] = dump_params(power_slots(const_cast<PowerModel&>(ck.power)));
    models.push_back(m);
  }
  j["models"] = models;
  return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("format").get<std::string>() != kFormat)
    throw std::runtime_error("checkpoint: unknown format");
  Checkpoint ck;
  for (const json& m : j.at("models")) {
    const std::string variant = m.at("variant").get<std::string>();
    GnnSpec s = spec_from_header(m);
    if (variant == "dts_pilot" || variant == "sts") {
      if (ck.has_pilot) throw std::runtime_error("checkpoint: duplicate pilot model");
      ck.pilot.init(s, 0);
      load_params(m.at("params"), pilot_slots(ck.pilot));
      ck.has_pilot = true;
      ck.pilot_variant = variant;
    } else if (variant == "dts_power") {
      if (ck.has_power) throw std::runtime_error("checkpoint: duplicate power model");
      ck.power.init(s, 0);
      load_params(m.at("params"), power_slots(ck.power));
      ck.has_power = true;
    } else {
      throw std::runtime_error("checkpoint: unknown variant " + variant);
    }
  }
  if (!ck.has_pilot && !ck.has_power)
    throw std::runtime_error("checkpoint: no models");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << checkpoint_to_json(ck);
  f << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace cfmimo::gnn
