#include "dtc/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dtc/io.hpp"

namespace dtc {

double SweepAxis::value(int i) const {
  if (count == 1) return min;
  return min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
}

void SweepSpec::validate() const {
  static const std::set<std::string> names = {"epsilon", "m", "kappa0", "kappa_max", "lambda0", "a0"};
  for (const auto* axis : {&axis1, &axis2}) {
    if (!names.count(axis->name)) throw std::invalid_argument("unsupported sweep parameter: " + axis->name);
    if (axis->count < 1) throw std::invalid_argument("sweep axis " + axis->name + " needs at least one point");
    if (!std::isfinite(axis->min) || !std::isfinite(axis->max)) {
      throw std::invalid_argument("sweep axis " + axis->name + " has a non-finite bound");
    }
  }
  if (axis1.name == axis2.name) throw std::invalid_argument("sweep axes must differ");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  base.validate();
}

std::uint64_t cell_seed(std::uint64_t base_seed, int cell_index) {
  // Two rounds of the SplitMix64 finaliser over (base, index).
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(base_seed ^ mix(static_cast<std::uint64_t>(cell_index)));
}

CellParameters cell_parameters(const SweepSpec& spec, int cell_index) {
  if (cell_index < 0 || cell_index >= spec.cell_count()) throw std::out_of_range("cell index out of range");
  CellParameters p;
  p.epsilon = spec.base.drive.epsilon();
  p.m = spec.base.schedule.m();
  p.kappa0 = spec.base.schedule.kappa0();
  p.kappa_max = spec.base.schedule.kappa_max();
  p.lambda0 = spec.base.drive.lambda0();
  p.a0 = spec.base.noise ? spec.base.noise->a0 : 0.0;
  auto assign = [&](const std::string& name, double v) {
    if (name == "epsilon") p.epsilon = v;
    else if (name == "m") p.m = v;
    else if (name == "kappa0") p.kappa0 = v;
    else if (name == "kappa_max") p.kappa_max = v;
    else if (name == "lambda0") p.lambda0 = v;
    else if (name == "a0") p.a0 = v;
  };
  assign(spec.axis1.name, spec.axis1.value(cell_index / spec.axis2.count));
  assign(spec.axis2.name, spec.axis2.value(cell_index % spec.axis2.count));
  return p;
}

SimulationConfig cell_config(const SweepSpec& spec, int cell_index) {
  const CellParameters p = cell_parameters(spec, cell_index);
  SimulationConfig cfg = spec.base;
  if (std::isfinite(p.m)) {
    cfg.schedule = DissipationSchedule::jaynes_cummings(p.kappa0, p.m, p.kappa_max, spec.base.schedule.clip_mode());
  } else {
    cfg.schedule = DissipationSchedule::constant(p.kappa0);
  }
  if (cfg.schedule.regime() == Regime::NonMarkovian) {
    cfg.drive = DriveProtocol::from_period(p.lambda0, nm_period(cfg.schedule), p.epsilon);
  } else {
    cfg.drive = DriveProtocol::from_frequency(p.lambda0, spec.base.drive.omega_T(), p.epsilon);
  }
  if (p.a0 > 0.0) {
    const double resample = spec.base.noise ? spec.base.noise->resample_interval : 0.0;
    cfg.noise = NoiseSettings{p.a0, cell_seed(spec.base_seed, cell_index), resample};
  } else {
    cfg.noise.reset();
  }
  // Keep the step no longer than the base step when the cell period is longer. An explicit
  // noise resample interval pins the step instead.
  const bool pinned_step = cfg.noise && cfg.noise->resample_interval > 0.0;
  const double base_step = spec.base.step_size();
  if (!pinned_step && cfg.drive.period() > base_step * cfg.steps_per_period) {
    const double needed = std::ceil(cfg.drive.period() / base_step * (1.0 - 1e-12));
    cfg.steps_per_period = 2 * static_cast<int>(std::ceil(needed / 2.0));
  }
  cfg.record_dense = true;
  cfg.dense_periods = std::min(cfg.periods_total, std::max(1, spec.thresholds.variance_periods));
  return cfg;
}

namespace {

std::string sanitize_note(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = c == ',' ? ';' : ' ';
  }
  return s;
}

}  // namespace

SweepRow run_cell(const SweepSpec& spec, int cell_index) {
  const auto start = std::chrono::steady_clock::now();
  SweepRow row;
  row.params = cell_parameters(spec, cell_index);
  try {
    const SimulationConfig cfg = cell_config(spec, cell_index);
    row.regime = cfg.schedule.regime();
    row.period = cfg.drive.period();
    const SimulationResult sim = simulate(cfg);
    row.label = classify(sim.trajectory, sim.strobe, spec.thresholds);
  } catch (const std::exception& e) {
    row.label = PhaseLabel{};
    row.error_note = sanitize_note(e.what());
  }
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string format_sweep_row(const SweepRow& row) {
  const auto& p = row.params;
  const auto& d = row.label.diagnostics;
  std::string s;
  for (double v : {p.epsilon, p.m, p.kappa0, p.kappa_max, p.lambda0, p.a0}) {
    s += format_double(v);
    s += ',';
  }
  s += to_string(row.regime);
  s += ',';
  s += format_double(row.period);
  s += ',';
  s += to_string(row.label.kind);
  s += ',';
  if (d.period) s += std::to_string(*d.period);
  s += ',';
  s += format_double(d.variance);
  s += ',';
  s += format_double(d.dimension);
  s += ',';
  s += format_double(d.nn_spread);
  s += ',';
  s += d.parity_flag ? '1' : '0';
  s += ',';
  s += sanitize_note(row.error_note);
  return s;
}

SweepRow parse_sweep_row(std::string_view line) {
  const auto f = split(line, ',');
  if (f.size() != 15) throw std::invalid_argument("sweep row: expected 15 columns");
  SweepRow row;
  row.params = {parse_double(f[0]), parse_double(f[1]), parse_double(f[2]),
                parse_double(f[3]), parse_double(f[4]), parse_double(f[5])};
  static const std::map<std::string, Regime> regimes = {{"Markovian", Regime::Markovian},
                                                         {"NonMarkovian", Regime::NonMarkovian},
                                                         {"Critical", Regime::Critical},
                                                         {"ConstantMarkovian", Regime::ConstantMarkovian}};
  const auto it = regimes.find(f[6]);
  if (it == regimes.end()) throw std::invalid_argument("sweep row: bad regime");
  row.regime = it->second;
  row.period = parse_double(f[7]);
  row.label.kind = phase_kind_from_string(f[8]);
  auto& d = row.label.diagnostics;
  if (!f[9].empty()) {
    d.period = static_cast<int>(parse_double(f[9]));
    if (row.label.kind == PhaseKind::PeriodN || row.label.kind == PhaseKind::DTC) row.label.n = *d.period;
  }
  d.variance = parse_double(f[10]);
  d.dimension = parse_double(f[11]);
  d.nn_spread = parse_double(f[12]);
  if (f[13] != "0" && f[13] != "1") throw std::invalid_argument("sweep row: bad parity flag");
  d.parity_flag = f[13] == "1";
  d.driven_period1 = row.label.kind == PhaseKind::PeriodN && row.label.n == 1;
  row.error_note = f[14];
  return row;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << kSweepHeader << '\n';
  for (const auto& row : result.rows) out << format_sweep_row(row) << '\n';
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v)); }

double num_from(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

nlohmann::json config_to_json(const SimulationConfig& c) {
  nlohmann::json j;
  j["lambda0"] = num(c.drive.lambda0());
  j["omega_T"] = num(c.drive.omega_T());
  j["drive_period"] = num(c.drive.period());
  j["epsilon"] = num(c.drive.epsilon());
  j["schedule"] = c.schedule.regime() == Regime::ConstantMarkovian ? "constant" : "jaynes_cummings";
  j["kappa0"] = num(c.schedule.kappa0());
  j["m"] = num(c.schedule.m());
  j["kappa_max"] = num(c.schedule.kappa_max());
  j["clip"] = std::string(to_string(c.schedule.clip_mode()));
  if (c.noise) {
    j["noise"] = {{"a0", num(c.noise->a0)},
                  {"seed", c.noise->seed},
                  {"resample_interval", num(c.noise->resample_interval)}};
  }
  j["variant"] = std::string(to_string(c.variant));
  if (const auto* b = std::get_if<SteadyStateBranch>(&c.initial)) {
    j["initial_branch"] = b->branch;
  } else {
    const auto a = std::get<MeanFieldState>(c.initial).to_array();
    j["initial_state"] = {num(a[0]), num(a[1]), num(a[2]), num(a[3]), num(a[4])};
  }
  j["periods_total"] = c.periods_total;
  j["periods_recorded"] = c.periods_recorded;
  j["steps_per_period"] = c.steps_per_period;
  j["record_dense"] = c.record_dense;
  j["dense_periods"] = c.dense_periods;
  j["norm_tolerance"] = num(c.norm_tolerance);
  return j;
}

SimulationConfig config_from_json(const nlohmann::json& j) {
  SimulationConfig c;
  const double lambda0 = num_from(j.at("lambda0"));
  const double epsilon = num_from(j.at("epsilon"));
  c.drive = DriveProtocol::from_period(lambda0, num_from(j.at("drive_period")), epsilon);
  const double kappa0 = num_from(j.at("kappa0"));
  if (j.at("schedule").get<std::string>() == "constant") {
    c.schedule = DissipationSchedule::constant(kappa0);
  } else {
    c.schedule = DissipationSchedule::jaynes_cummings(kappa0, num_from(j.at("m")), num_from(j.at("kappa_max")),
                                                      clip_mode_from_string(j.at("clip").get<std::string>()));
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    c.noise = NoiseSettings{num_from(n.at("a0")), n.at("seed").get<std::uint64_t>(),
                            num_from(n.at("resample_interval"))};
  }
  c.variant = eom_variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("initial_branch")) {
    c.initial = SteadyStateBranch{j["initial_branch"].get<int>()};
  } else {
    const auto& a = j.at("initial_state");
    c.initial = MeanFieldState{num_from(a[0]), num_from(a[1]), num_from(a[2]), num_from(a[3]), num_from(a[4])};
  }
  c.periods_total = j.at("periods_total").get<int>();
  c.periods_recorded = j.at("periods_recorded").get<int>();
  c.steps_per_period = j.at("steps_per_period").get<int>();
  c.record_dense = j.at("record_dense").get<bool>();
  c.dense_periods = j.at("dense_periods").get<int>();
  c.norm_tolerance = num_from(j.at("norm_tolerance"));
  return c;
}

ClassifierThresholds thresholds_from_json(const nlohmann::json& j) {
  ClassifierThresholds th;
  th.period_tol = j.at("period_tol").get<double>();
  th.p_max = j.at("p_max").get<int>();
  th.tiss_variance = j.at("tiss_variance").get<double>();
  th.variance_periods = j.at("variance_periods").get<int>();
  th.lc_dimension_min = j.at("lc_dimension_min").get<double>();
  th.lc_dimension_max = j.at("lc_dimension_max").get<double>();
  th.lc_nn_spread_max = j.at("lc_nn_spread_max").get<double>();
  th.parity_tol = j.at("parity_tol").get<double>();
  th.corr_quantile_lo = j.at("corr_quantile_lo").get<double>();
  th.corr_quantile_hi = j.at("corr_quantile_hi").get<double>();
  th.min_geometry_points = j.at("min_geometry_points").get<int>();
  th.cluster_ratio = j.at("cluster_ratio").get<double>();
  return th;
}

nlohmann::json axis_to_json(const SweepAxis& a) {
  return {{"name", a.name}, {"min", a.min}, {"max", a.max}, {"count", a.count}};
}

SweepAxis axis_from_json(const nlohmann::json& j) {
  return {j.at("name").get<std::string>(), j.at("min").get<double>(), j.at("max").get<double>(),
          j.at("count").get<int>()};
}

std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

constexpr std::string_view kCheckpointFormat = "dtc-sweep-checkpoint";

struct Checkpoint {
  nlohmann::json header;
  std::vector<std::string> rows;  // complete, newline-terminated lines only
};

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SweepError("cannot open checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  auto lines = split(text, '\n');
  // The piece after the last newline is either empty or a torn write.
  lines.pop_back();
  if (lines.size() < 2) throw SweepError("checkpoint " + path + " has no header");
  Checkpoint cp;
  try {
    cp.header = nlohmann::json::parse(lines[0]);
  } catch (const nlohmann::json::exception&) {
    throw SweepError("checkpoint " + path + " has a corrupted header");
  }
  if (!cp.header.is_object() || cp.header.value("format", "") != kCheckpointFormat) {
    throw SweepError("not a sweep checkpoint: " + path);
  }
  if (lines[1] != kSweepHeader) throw SweepError("checkpoint " + path + " has an unexpected CSV header");
  cp.rows.assign(lines.begin() + 2, lines.end());
  return cp;
}

std::string checkpoint_header_line(const SweepSpec& spec) {
  nlohmann::json h = {{"format", kCheckpointFormat},
                      {"version", std::string(kVersion)},
                      {"csv_schema_version", kCsvSchemaVersion},
                      {"spec_hash", spec_hash(spec)},
                      {"spec", to_json(spec)}};
  return h.dump() + "\n" + std::string(kSweepHeader) + "\n";
}

}  // namespace

nlohmann::json to_json(const SweepSpec& spec) {
  return {{"axis1", axis_to_json(spec.axis1)},
          {"axis2", axis_to_json(spec.axis2)},
          {"base", config_to_json(spec.base)},
          {"thresholds", to_json(spec.thresholds)},
          {"base_seed", spec.base_seed}};
}

SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
  SweepSpec spec;
  try {
    spec.axis1 = axis_from_json(j.at("axis1"));
    spec.axis2 = axis_from_json(j.at("axis2"));
    spec.base = config_from_json(j.at("base"));
    spec.thresholds = thresholds_from_json(j.at("thresholds"));
    spec.base_seed = j.at("base_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SweepError(std::string("malformed sweep spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SweepError(std::string("malformed sweep spec: ") + e.what());
  }
  return spec;
}

std::string spec_hash(const SweepSpec& spec) {
  return fnv1a_hex(std::string(kVersion) + "|" + to_json(spec).dump());
}

SweepResult run_sweep(const SweepSpec& spec, const SweepProgress& progress) {
  spec.validate();
  const int total = spec.cell_count();
  const std::string hash = spec_hash(spec);

  std::map<std::pair<double, double>, int> index_of;
  for (int i = 0; i < total; ++i) {
    index_of.emplace(std::pair{spec.axis1.value(i / spec.axis2.count), spec.axis2.value(i % spec.axis2.count)}, i);
  }
  auto axis_value = [](const CellParameters& p, const std::string& name) {
    if (name == "epsilon") return p.epsilon;
    if (name == "m") return p.m;
    if (name == "kappa0") return p.kappa0;
    if (name == "kappa_max") return p.kappa_max;
    if (name == "lambda0") return p.lambda0;
    return p.a0;
  };

  std::vector<std::optional<SweepRow>> rows(total);
  std::ofstream out;
  const bool checkpointing = !spec.checkpoint_path.empty();
  if (checkpointing) {
    namespace fs = std::filesystem;
    std::string contents = checkpoint_header_line(spec);
    if (fs::exists(spec.checkpoint_path) && fs::file_size(spec.checkpoint_path) > 0) {
      const Checkpoint cp = read_checkpoint(spec.checkpoint_path);
      if (cp.header.value("spec_hash", "") != hash) {
        throw SweepError("checkpoint " + spec.checkpoint_path + " was written for a different sweep spec");
      }
      for (const auto& line : cp.rows) {
        try {
          SweepRow row = parse_sweep_row(line);
          const auto it = index_of.find({axis_value(row.params, spec.axis1.name), axis_value(row.params, spec.axis2.name)});
          if (it == index_of.end() || rows[it->second]) continue;
          rows[it->second] = std::move(row);
          contents += line + "\n";
        } catch (const std::exception&) {
          // Corrupted rows are dropped and recomputed.
        }
      }
    }
    try {
      write_file_atomically(spec.checkpoint_path, contents);
    } catch (const std::exception& e) {
      throw SweepError(std::string("cannot write checkpoint: ") + e.what());
    }
    out.open(spec.checkpoint_path, std::ios::binary | std::ios::app);
    if (!out) throw SweepError("cannot append to checkpoint: " + spec.checkpoint_path);
  }

  std::vector<int> pending;
  for (int i = 0; i < total; ++i) {
    if (!rows[i]) pending.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> io_failed{false};
  std::mutex mu;
  int done = total - static_cast<int>(pending.size());
  auto worker = [&] {
    for (;;) {
      if (io_failed) return;
      const std::size_t k = next++;
      if (k >= pending.size()) return;
      const int idx = pending[k];
      SweepRow row = run_cell(spec, idx);
      std::lock_guard lock(mu);
      if (checkpointing) {
        out << format_sweep_row(row) << '\n';
        out.flush();
        if (!out) io_failed = true;
      }
      rows[idx] = std::move(row);
      ++done;
      if (progress) progress(done, total);
    }
  };
  const int nthreads = std::max(1, std::min<int>(spec.workers, static_cast<int>(pending.size())));
  if (!pending.empty()) {
    std::vector<std::thread> threads;
    for (int t = 1; t < nthreads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
  }
  if (io_failed) throw SweepError("checkpoint write failed: " + spec.checkpoint_path);

  SweepResult result;
  result.cells_computed = static_cast<int>(pending.size());
  result.rows.reserve(total);
  for (auto& r : rows) result.rows.push_back(std::move(*r));
  result.manifest = {{"version", std::string(kVersion)},
                     {"csv_schema_version", kCsvSchemaVersion},
                     {"spec_hash", hash},
                     {"spec", to_json(spec)},
                     {"thresholds", to_json(spec.thresholds)},
                     {"base_seed", spec.base_seed}};
  return result;
}

SweepResult resume_sweep(const std::string& checkpoint_path, int workers, const SweepProgress& progress) {
  const Checkpoint cp = read_checkpoint(checkpoint_path);
  if (cp.header.value("version", "") != kVersion) {
    throw SweepError("checkpoint " + checkpoint_path + " was written by version " + cp.header.value("version", "?"));
  }
  SweepSpec spec = sweep_spec_from_json(cp.header.at("spec"));
  if (spec_hash(spec) != cp.header.value("spec_hash", "")) {
    throw SweepError("checkpoint " + checkpoint_path + ": spec hash mismatch");
  }
  spec.checkpoint_path = checkpoint_path;
  spec.workers = workers;
  return run_sweep(spec, progress);
}

}  // namespace dtc
