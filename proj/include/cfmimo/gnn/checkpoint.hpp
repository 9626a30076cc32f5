#pragma once

#include <string>

#include "cfmimo/gnn/model.hpp"

namespace cfmimo::gnn {

// A checkpoint file holds one trained setup: either a joint model
// ("sts") or a pilot/power pair ("dts_pilot" + "dts_power").
struct Checkpoint {
  bool has_pilot = false;
  bool has_power = false;
  std::string pilot_variant = "dts_pilot";  // "dts_pilot" or "sts"
  PilotModel pilot;
  PowerModel power;
};

std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cfmimo::gnn
