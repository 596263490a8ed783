#include "dtc/presets.hpp"

#include <map>

namespace dtc {

namespace {

const std::map<std::string, KeyValues>& simulation_presets() {
  // m = kappa0/4 = 0.675 and m = kappa0/5 = 0.54 for kappa0 = 2.7.
  static const std::map<std::string, KeyValues> presets = [] {
    const KeyValues markov_dtc = {{"lambda0", "1"},      {"kappa0", "0.05"},  {"schedule", "constant"},
                                  {"omega_T", "1"},      {"epsilon", "0.02"}, {"periods_total", "2000"}};
    const KeyValues markov_tiss = {{"lambda0", "1"}, {"kappa0", "2.7"}, {"schedule", "constant"},
                                   {"omega_T", "1"}, {"epsilon", "0.02"}};
    const KeyValues nm_dtc = {{"lambda0", "1"},   {"kappa0", "2.7"},       {"m", "0.675"},
                              {"kappa_max", "5"}, {"drive_period", "nm"}, {"epsilon", "0.02"}};
    auto with = [](KeyValues kv, const KeyValues& extra) { return merge(kv, extra); };
    // fig2: m and epsilon taken from a sweep, one phase per panel.
    // The step matches the sweep step at the longer drive period.
    const KeyValues fig2 = {{"lambda0", "1"}, {"kappa0", "2.7"}, {"kappa_max", "5"}, {"drive_period", "nm"}};
    return std::map<std::string, KeyValues>{
        {"fig1a", markov_dtc},
        {"fig1b", markov_dtc},
        {"fig1c", markov_tiss},
        {"fig1d", markov_tiss},
        {"fig1e", nm_dtc},
        {"fig1f", nm_dtc},
        {"fig2a", with(fig2, {{"m", "0.135"}, {"epsilon", "0.07"}, {"steps_per_period", "9718"}})},
        {"fig2b", with(fig2, {{"m", "0.27"}, {"epsilon", "0.02"}, {"steps_per_period", "6962"}})},
        {"fig2c", with(fig2, {{"m", "0.27"}, {"epsilon", "0.005"}, {"steps_per_period", "6962"}})},
        {"fig2d", with(fig2, {{"m", "0.27"}, {"epsilon", "0.07"}, {"steps_per_period", "6962"}})},
        {"fig4", with(nm_dtc, {{"epsilon", "0.03"}, {"a0", "0.5"}})},
        {"appB-a", with(nm_dtc, {{"kappa_max", "10"}, {"m", "2.7"}})},
        {"appB-b", with(nm_dtc, {{"kappa_max", "10"}})},
        {"appC", with(nm_dtc, {{"kappa_max", "3"}, {"m", "0.54"}, {"epsilon", "0.07"}})},
        {"ideal", {{"lambda0", "1"}, {"kappa0", "0"}, {"schedule", "constant"}, {"omega_T", "1"}, {"epsilon", "0"},
                   {"periods_total", "500"}}},
    };
  }();
  return presets;
}

const std::map<std::string, KeyValues>& sweep_presets() {
  static const std::map<std::string, KeyValues> presets = [] {
    // epsilon in [0, 0.1] x m / kappa0 in [0.05, 3.0] on a 41 x 41 grid.
    const KeyValues fig3 = {{"lambda0", "1"},
                            {"kappa0", "2.7"},
                            {"m", "2.7"},
                            {"omega_T", "1"},
                            {"epsilon", "0"},
                            {"axis1", "epsilon:0:0.1:41"},
                            {"axis2", "m:0.135:8.1:41"},
                            {"base_seed", "0"}};
    return std::map<std::string, KeyValues>{
        {"fig3a", merge(fig3, {{"kappa_max", "5"}})},
        {"fig3b", merge(fig3, {{"kappa_max", "3"}})},
    };
  }();
  return presets;
}

template <class Map>
std::vector<std::string> keys_of(const Map& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

}  // namespace

std::optional<KeyValues> simulation_preset(const std::string& name) {
  const auto& p = simulation_presets();
  const auto it = p.find(name);
  if (it == p.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> simulation_preset_names() { return keys_of(simulation_presets()); }

std::optional<KeyValues> sweep_preset(const std::string& name) {
  const auto& p = sweep_presets();
  const auto it = p.find(name);
  if (it == p.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> sweep_preset_names() { return keys_of(sweep_presets()); }

SweepAxis parse_axis(const std::string& text) {
  const auto f = split(text, ':');
  if (f.size() != 4) throw ConfigError("axis must be name:min:max:count, got '" + text + "'");
  SweepAxis a;
  a.name = f[0];
  try {
    a.min = parse_double(f[1]);
    a.max = parse_double(f[2]);
    const double count = parse_double(f[3]);
    if (count != std::floor(count) || count < 1) throw std::invalid_argument("count");
    a.count = static_cast<int>(count);
  } catch (const std::invalid_argument&) {
    throw ConfigError("malformed axis '" + text + "'");
  }
  return a;
}

std::string format_axis(const SweepAxis& a) {
  return a.name + ":" + format_double(a.min) + ":" + format_double(a.max) + ":" + std::to_string(a.count);
}

ResolvedSweep resolve_sweep(const KeyValues& kv) {
  KeyValues sim = kv;
  ResolvedSweep out;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = sim.find(key);
    if (it == sim.end()) return std::nullopt;
    std::string v = it->second;
    sim.erase(it);
    return v;
  };
  const auto axis1 = take("axis1");
  const auto axis2 = take("axis2");
  if (!axis1 || !axis2) throw ConfigError("sweep needs axis1 and axis2");
  out.spec.axis1 = parse_axis(*axis1);
  out.spec.axis2 = parse_axis(*axis2);
  const auto seed = take("base_seed");
  const auto workers = take("workers");
  const auto checkpoint = take("checkpoint");
  try {
    out.spec.base_seed = seed ? static_cast<std::uint64_t>(std::stoull(*seed)) : 0;
    out.spec.workers = workers ? std::stoi(*workers) : 1;
  } catch (const std::exception&) {
    throw ConfigError("base_seed and workers must be integers");
  }
  if (checkpoint) out.spec.checkpoint_path = *checkpoint;

  // Markovian cells use omega_T; non-Markovian cells re-derive their period per cell.
  sim["drive_period"] = "omega_T";
  // Swept parameters need a valid base value even when the base itself is unused.
  if (!sim.count("m") && (out.spec.axis1.name == "m" || out.spec.axis2.name == "m")) sim["m"] = "1";
  const ResolvedSimulation base = resolve_simulation(sim);
  out.spec.base = base.config;
  out.spec.thresholds = base.thresholds;
  try {
    out.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  out.resolved = base.resolved;
  out.resolved["axis1"] = format_axis(out.spec.axis1);
  out.resolved["axis2"] = format_axis(out.spec.axis2);
  out.resolved["base_seed"] = std::to_string(out.spec.base_seed);
  return out;
}

}  // namespace dtc
