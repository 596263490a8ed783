#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtc/io.hpp"
#include "dtc/sweep.hpp"

namespace dtc {

// Parameter sets of the published figures, as key-value maps for resolve_simulation.
std::optional<KeyValues> simulation_preset(const std::string& name);
std::vector<std::string> simulation_preset_names();

// Sweep presets carry axis1/axis2 ("name:min:max:count"), base_seed and workers on top of
// the simulation keys.
std::optional<KeyValues> sweep_preset(const std::string& name);
std::vector<std::string> sweep_preset_names();

SweepAxis parse_axis(const std::string& text);
std::string format_axis(const SweepAxis& axis);

struct ResolvedSweep {
  SweepSpec spec;
  KeyValues resolved;
};
ResolvedSweep resolve_sweep(const KeyValues& kv);

}  // namespace dtc
