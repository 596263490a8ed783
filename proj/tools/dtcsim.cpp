// dtcsim: simulate, sweep and inspect the driven open Dicke model at mean-field level.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dtc/analysis.hpp"
#include "dtc/integrator.hpp"
#include "dtc/io.hpp"
#include "dtc/presets.hpp"
#include "dtc/sweep.hpp"

namespace fs = std::filesystem;
using namespace dtc;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configuration sources shared by every subcommand; precedence is flags > file > preset.
struct ConfigSources {
  std::string preset;
  std::string config_file;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigSources& src) {
  cmd->add_option("--preset", src.preset, "Named parameter set");
  cmd->add_option("--config", src.config_file, "Key = value configuration file");
  cmd->add_option("--set", src.sets, "Override one key (key=value), repeatable");
}

KeyValues flag_overrides(const std::vector<std::string>& sets) {
  KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

KeyValues gather(const ConfigSources& src, const std::optional<KeyValues>& preset, KeyValues flags) {
  KeyValues kv;
  if (!src.preset.empty()) {
    if (!preset) throw UsageError("unknown preset: " + src.preset);
    kv = *preset;
  }
  if (!src.config_file.empty()) kv = merge(kv, read_key_values_file(src.config_file));
  return merge(kv, merge(flag_overrides(src.sets), flags));
}

nlohmann::json kv_to_json(const KeyValues& kv) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string state_line(const MeanFieldState& s) {
  return "x=" + format_double(s.x) + " p=" + format_double(s.p) + " jx=" + format_double(s.jx) +
         " jy=" + format_double(s.jy) + " jz=" + format_double(s.jz);
}

// simulate -------------------------------------------------------------------

struct SimulateArgs {
  ConfigSources src;
  std::string out_dir = ".";
  std::string prefix;
  std::string from_manifest;
  std::optional<long> seed;
};

int cmd_simulate(const SimulateArgs& a) {
  KeyValues kv;
  std::string prefix = a.prefix;
  if (!a.from_manifest.empty()) {
    std::ifstream in(a.from_manifest);
    if (!in) throw UsageError("cannot open manifest: " + a.from_manifest);
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(in);
      for (const auto& [k, v] : m.at("config").items()) kv[k] = v.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("malformed manifest: ") + e.what());
    }
    if (prefix.empty()) prefix = m.value("prefix", "run");
  } else {
    KeyValues flags;
    if (a.seed) flags["seed"] = std::to_string(*a.seed);
    kv = gather(a.src, simulation_preset(a.src.preset), flags);
  }
  if (prefix.empty()) prefix = a.src.preset.empty() ? "run" : a.src.preset;

  const ResolvedSimulation res = resolve_simulation(kv);
  const std::string started = utc_timestamp();
  const SimulationResult sim = simulate(res.config);
  // A record too short to classify still gets written out.
  PhaseLabel label;
  std::string classify_note;
  try {
    label = classify(sim.trajectory, sim.strobe, res.thresholds);
  } catch (const std::invalid_argument& e) {
    classify_note = e.what();
  }

  const fs::path dir(a.out_dir);
  const fs::path traj = dir / (prefix + "_trajectory.csv");
  const fs::path strobe = dir / (prefix + "_strobe.csv");
  const fs::path manifest = dir / (prefix + "_manifest.json");

  std::ostringstream t;
  write_trajectory_csv(t, sim.trajectory);
  write_text(traj, t.str());
  std::ostringstream s;
  write_stroboscopic_csv(s, sim.strobe);
  write_text(strobe, s.str());

  const auto& cfg = res.config;
  nlohmann::json m = {
      {"tool", "dtcsim"},
      {"command", "simulate"},
      {"version", std::string(kVersion)},
      {"csv_schema_version", kCsvSchemaVersion},
      {"prefix", prefix},
      {"config", kv_to_json(res.resolved)},
      {"thresholds", to_json(res.thresholds)},
      {"seed", cfg.noise ? cfg.noise->seed : 0},
      {"variant", std::string(to_string(cfg.variant))},
      {"regime", std::string(to_string(cfg.schedule.regime()))},
      {"drive_period", cfg.drive.period()},
      {"critical_coupling", critical_coupling(cfg.frequencies().omega, cfg.frequencies().omega0, cfg.schedule.kappa0())},
      {"integrator", to_json(sim.trajectory.stats)},
      {"phase", to_json(label)},
      {"outputs", {{"trajectory", traj.filename().string()}, {"stroboscopic", strobe.filename().string()}}},
      {"timestamps", {{"started", started}, {"finished", utc_timestamp()}}},
  };
  if (!classify_note.empty()) m["phase"]["note"] = classify_note;
  write_text(manifest, m.dump(2) + "\n");

  std::cout << "phase: " << label.name() << "\n";
  if (!classify_note.empty()) std::cout << "not classified: " << classify_note << "\n";
  std::cout << "regime: " << to_string(cfg.schedule.regime()) << "  T = " << format_double(cfg.drive.period()) << "\n";
  if (label.diagnostics.period) std::cout << "stroboscopic period: " << *label.diagnostics.period << "\n";
  std::cout << "max spin-norm drift: " << sim.trajectory.stats.max_norm_drift << "\n";
  std::cout << "wrote " << traj.string() << ", " << strobe.string() << ", " << manifest.string() << "\n";
  return 0;
}

// sweep ----------------------------------------------------------------------

struct SweepArgs {
  ConfigSources src;
  std::string out;
  std::string checkpoint;
  std::string resume;
  int workers = 0;
  bool quiet = false;
};

int cmd_sweep(const SweepArgs& a) {
  const int workers = a.workers > 0 ? a.workers : std::max(1u, std::thread::hardware_concurrency());
  SweepProgress progress;
  if (!a.quiet) {
    progress = [](int done, int total) {
      std::fprintf(stderr, "\r%d / %d cells", done, total);
      if (done == total) std::fprintf(stderr, "\n");
    };
  }

  SweepResult result;
  std::string out = a.out;
  KeyValues resolved;
  if (!a.resume.empty()) {
    if (!fs::exists(a.resume)) throw UsageError("no checkpoint at " + a.resume);
    if (out.empty()) {
      const fs::path p(a.resume);
      out = p.extension() == ".ckpt" ? fs::path(p).replace_extension(".csv").string() : a.resume + ".csv";
    }
    result = resume_sweep(a.resume, workers, progress);
  } else {
    ResolvedSweep rs = resolve_sweep(gather(a.src, sweep_preset(a.src.preset), {}));
    if (out.empty()) out = (a.src.preset.empty() ? std::string("sweep") : a.src.preset) + ".csv";
    rs.spec.workers = workers;
    rs.spec.checkpoint_path = a.checkpoint.empty() ? fs::path(out).replace_extension(".ckpt").string() : a.checkpoint;
    resolved = rs.resolved;
    result = run_sweep(rs.spec, progress);
  }

  std::ostringstream csv;
  write_sweep_csv(csv, result);
  write_text(out, csv.str());
  nlohmann::json m = result.manifest;
  m["tool"] = "dtcsim";
  m["command"] = "sweep";
  if (!resolved.empty()) m["config"] = kv_to_json(resolved);
  m["cells_computed"] = result.cells_computed;
  m["timestamps"] = {{"finished", utc_timestamp()}};
  const std::string manifest = fs::path(out).replace_extension("").string() + "_manifest.json";
  write_text(manifest, m.dump(2) + "\n");

  std::map<std::string, int> counts;
  for (const auto& row : result.rows) ++counts[row.label.name()];
  std::cout << "cells: " << result.rows.size() << " (computed " << result.cells_computed << ")\n";
  for (const auto& [name, n] : counts) std::cout << "  " << name << ": " << n << "\n";
  std::cout << "wrote " << out << ", " << manifest << "\n";
  return 0;
}

// kappa ----------------------------------------------------------------------

struct KappaArgs {
  ConfigSources src;
  double span = 0.0;
  int samples = 1001;
  std::string out;
  std::optional<long> seed;
};

int cmd_kappa(const KappaArgs& a) {
  KeyValues flags;
  if (a.seed) flags["seed"] = std::to_string(*a.seed);
  KeyValues kv = gather(a.src, simulation_preset(a.src.preset), flags);
  if (!kv.count("lambda0")) kv["lambda0"] = "1";
  // The resample interval only has to line up with integrator steps inside simulate.
  std::optional<double> resample;
  if (const auto it = kv.find("resample_interval"); it != kv.end()) {
    try {
      resample = parse_double(it->second);
    } catch (const std::invalid_argument&) {
      throw ConfigError("resample_interval must be a number");
    }
    kv.erase(it);
  }
  const ResolvedSimulation res = resolve_simulation(kv);
  const auto& cfg = res.config;
  if (a.samples < 2) throw UsageError("--samples must be at least 2");
  const double span = a.span > 0.0 ? a.span : 4.0 * cfg.drive.period();

  std::optional<NoiseSettings> noise = cfg.noise;
  if (noise) noise->resample_interval = resample && *resample > 0.0 ? *resample : cfg.step_size();

  std::ostringstream csv;
  csv << "t,kappa\n";
  for (int i = 0; i < a.samples; ++i) {
    const double t = span * i / (a.samples - 1);
    const double k = noise ? noisy_kappa_at(t, cfg.schedule, *noise) : kappa_at(t, cfg.schedule);
    csv << format_double(t) << ',' << format_double(k) << '\n';
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(a.out, csv.str());
    std::cerr << "wrote " << a.out << "\n";
  }
  return 0;
}

// steady-state ---------------------------------------------------------------

struct SteadyArgs {
  std::optional<double> lambda0;
  std::optional<double> kappa0;
  double omega = 1.0;
  double omega0 = 1.0;
  bool normal = false;
};

int cmd_steady_state(const SteadyArgs& a) {
  if (!a.lambda0) throw UsageError("--lambda0 is required");
  if (!a.kappa0) throw UsageError("--kappa0 is required");
  ModelFrequencies f{a.omega, a.omega0};
  double lc = 0.0;
  try {
    lc = critical_coupling(f.omega, f.omega0, *a.kappa0);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::cout << "critical coupling: " << format_double(lc) << "\n";
  auto report = [&](const char* name, const MeanFieldState& s) {
    std::cout << name << ": " << state_line(s) << "\n";
    std::cout << "  residual consistent: "
              << format_double(steady_state_residual(s, *a.lambda0, f, *a.kappa0, EomVariant::Consistent)) << "\n";
    std::cout << "  residual literal: "
              << format_double(steady_state_residual(s, *a.lambda0, f, *a.kappa0, EomVariant::LiteralSigns))
              << "\n";
  };
  MeanFieldState start;
  if (*a.lambda0 < lc) {
    if (!a.normal) {
      throw UsageError("lambda0 = " + format_double(*a.lambda0) + " is below the critical coupling; pass --normal");
    }
    report("normal", MeanFieldState{});
    start = MeanFieldState{0.01, 0.0, 0.1, 0.0, -std::sqrt(1.0 - 0.01)};
  } else {
    const auto plus = steady_state_closed_form(*a.lambda0, f, *a.kappa0, 1);
    report("branch +1", plus);
    report("branch -1", steady_state_closed_form(*a.lambda0, f, *a.kappa0, -1));
    start = plus + 1e-3 * MeanFieldState{1.0, 0.0, -0.2, 0.1, 0.0};
  }
  if (*a.kappa0 > 0.0) {
    try {
      const auto relaxed = relax_to_steady_state(start, *a.lambda0, f, *a.kappa0);
      std::cout << "relaxed: " << state_line(relaxed) << "\n";
    } catch (const SimulationError& e) {
      std::cout << "relaxed: not converged (" << e.what() << ")\n";
    }
  } else {
    std::cout << "relaxed: skipped (kappa0 = 0 has no damping)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete time crystals in the driven open Dicke model (mean-field)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Integrate one trajectory and classify it");
  add_config_options(simulate_cmd, sim.src);
  simulate_cmd->add_option("--out-dir", sim.out_dir, "Output directory");
  simulate_cmd->add_option("--prefix", sim.prefix, "Output file prefix");
  simulate_cmd->add_option("--from-manifest", sim.from_manifest, "Re-run the configuration stored in a manifest");
  simulate_cmd->add_option("--seed", sim.seed, "Noise seed");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run or resume a two-parameter phase diagram");
  add_config_options(sweep_cmd, sw.src);
  sweep_cmd->add_option("--out", sw.out, "Sweep CSV path");
  sweep_cmd->add_option("--checkpoint", sw.checkpoint, "Checkpoint path (default: the output path with a .ckpt extension)");
  sweep_cmd->add_option("--resume", sw.resume, "Resume from a checkpoint");
  sweep_cmd->add_option("--workers", sw.workers, "Worker threads (default: hardware concurrency)");
  sweep_cmd->add_flag("--quiet", sw.quiet, "No progress output");

  KappaArgs ka;
  auto* kappa_cmd = app.add_subcommand("kappa", "Sample the dissipation rate kappa(t)");
  add_config_options(kappa_cmd, ka.src);
  kappa_cmd->add_option("--span", ka.span, "Time span (default: four drive periods)");
  kappa_cmd->add_option("--samples", ka.samples, "Number of samples");
  kappa_cmd->add_option("--out", ka.out, "CSV path (default: stdout)");
  kappa_cmd->add_option("--seed", ka.seed, "Noise seed");

  SteadyArgs ss;
  auto* steady_cmd = app.add_subcommand("steady-state", "Closed-form symmetry-broken steady states");
  steady_cmd->add_option("--lambda0", ss.lambda0, "Coupling");
  steady_cmd->add_option("--kappa0", ss.kappa0, "Dissipation rate");
  steady_cmd->add_option("--omega", ss.omega, "Cavity frequency");
  steady_cmd->add_option("--omega0", ss.omega0, "Atomic frequency");
  steady_cmd->add_flag("--normal", ss.normal, "Allow couplings below critical (normal phase)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(sim);
    if (*sweep_cmd) return cmd_sweep(sw);
    if (*kappa_cmd) return cmd_kappa(ka);
    if (*steady_cmd) return cmd_steady_state(ss);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
