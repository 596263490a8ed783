#include "dtc/io.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace dtc {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

namespace {

long parse_integer(std::string_view s) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

void write_state(std::string& line, const MeanFieldState& s) {
  for (double v : s.to_array()) {
    line += ',';
    line += format_double(v);
  }
}

}  // namespace

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << kTrajectoryHeader << '\n';
  std::string line;
  for (const auto& s : trajectory.samples) {
    line = format_double(s.t);
    write_state(line, s.state);
    line += ',';
    line += format_double(s.kappa);
    line += ',';
    line += format_double(s.lambda);
    line += '\n';
    out << line;
  }
}

void write_stroboscopic_csv(std::ostream& out, const StroboscopicSequence& strobe) {
  out << kStroboscopicHeader << '\n';
  std::string line;
  for (const auto& p : strobe.points) {
    line = std::to_string(p.n);
    write_state(line, p.state);
    line += '\n';
    out << line;
  }
}

StroboscopicSequence read_stroboscopic_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kStroboscopicHeader) {
    throw std::invalid_argument("stroboscopic CSV: unexpected header");
  }
  StroboscopicSequence seq;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 6) throw std::invalid_argument("stroboscopic CSV: expected 6 columns");
    StroboscopicPoint p;
    p.n = static_cast<int>(parse_integer(f[0]));
    p.state = {parse_double(f[1]), parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), parse_double(f[5])};
    seq.points.push_back(p);
  }
  return seq;
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(v.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[std::string(key)] = std::string(trim(v.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_key_values(in);
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

KeyValues merge(const KeyValues& base, const KeyValues& overrides) {
  KeyValues out = base;
  for (const auto& [k, v] : overrides) out[k] = v;
  return out;
}

namespace {

const std::set<std::string>& threshold_keys() {
  static const std::set<std::string> keys = {"period_tol",       "p_max",           "tiss_variance",
                                             "variance_periods", "lc_dimension_min", "lc_dimension_max",
                                             "lc_nn_spread_max", "parity_tol",       "cluster_ratio"};
  return keys;
}

const std::set<std::string>& simulation_keys() {
  static const std::set<std::string> keys = {
      "lambda0",       "kappa0",      "schedule",          "m",                "kappa_max",
      "clip",          "omega_T",     "epsilon",           "drive_period",     "a0",
      "seed",          "resample_interval", "variant",     "initial",          "periods_total",
      "periods_recorded", "steps_per_period", "record_dense", "dense_periods", "norm_tolerance"};
  return keys;
}

// Typed access with error messages that name the offending key.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const auto it = kv_.find(key);
    double v = 0.0;
    if (it == kv_.end()) {
      if (!fallback) throw ConfigError("missing required key: " + key);
      v = *fallback;
    } else {
      try {
        v = parse_double(it->second);
      } catch (const std::invalid_argument&) {
        throw ConfigError("key " + key + ": not a number: '" + it->second + "'");
      }
    }
    out[key] = format_double(v);
    return v;
  }

  long integer(const std::string& key, long fallback) {
    const auto it = kv_.find(key);
    long v = fallback;
    if (it != kv_.end()) {
      try {
        v = parse_integer(trim(it->second));
      } catch (const std::invalid_argument&) {
        throw ConfigError("key " + key + ": not an integer: '" + it->second + "'");
      }
    }
    out[key] = std::to_string(v);
    return v;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto it = kv_.find(key);
    std::string v = it == kv_.end() ? fallback : it->second;
    out[key] = v;
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    const std::string v = text(key, fallback ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes") return out[key] = "true", true;
    if (v == "false" || v == "0" || v == "no") return out[key] = "false", false;
    throw ConfigError("key " + key + ": expected true or false");
  }

  KeyValues out;

 private:
  const KeyValues& kv_;
};

InitialCondition parse_initial(const std::string& v) {
  if (v == "branch+1" || v == "branch1" || v == "+1") return SteadyStateBranch{1};
  if (v == "branch-1" || v == "-1") return SteadyStateBranch{-1};
  if (v.rfind("state:", 0) == 0) {
    const auto f = split(std::string_view(v).substr(6), ',');
    if (f.size() != 5) throw ConfigError("initial state needs five comma-separated values");
    try {
      return MeanFieldState{parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3]),
                            parse_double(f[4])};
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("initial state: ") + e.what());
    }
  }
  throw ConfigError("initial must be branch+1, branch-1, or state:x,p,jx,jy,jz");
}

std::string canonical_initial(const InitialCondition& ic) {
  if (const auto* b = std::get_if<SteadyStateBranch>(&ic)) return b->branch > 0 ? "branch+1" : "branch-1";
  const auto& s = std::get<MeanFieldState>(ic);
  std::string out = "state:";
  const auto a = s.to_array();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) out += ',';
    out += format_double(a[i]);
  }
  return out;
}

}  // namespace

ClassifierThresholds thresholds_from_key_values(const KeyValues& kv) {
  Reader r(kv);
  ClassifierThresholds th;
  th.period_tol = r.number("period_tol", th.period_tol);
  th.p_max = static_cast<int>(r.integer("p_max", th.p_max));
  th.tiss_variance = r.number("tiss_variance", th.tiss_variance);
  th.variance_periods = static_cast<int>(r.integer("variance_periods", th.variance_periods));
  th.lc_dimension_min = r.number("lc_dimension_min", th.lc_dimension_min);
  th.lc_dimension_max = r.number("lc_dimension_max", th.lc_dimension_max);
  th.lc_nn_spread_max = r.number("lc_nn_spread_max", th.lc_nn_spread_max);
  th.parity_tol = r.number("parity_tol", th.parity_tol);
  th.cluster_ratio = r.number("cluster_ratio", th.cluster_ratio);
  if (!(th.period_tol > 0.0) || th.p_max < 1 || th.variance_periods < 1 || !(th.cluster_ratio >= 0.0)) {
    throw ConfigError("classifier thresholds out of range");
  }
  return th;
}

KeyValues thresholds_to_key_values(const ClassifierThresholds& th) {
  return {{"period_tol", format_double(th.period_tol)},
          {"p_max", std::to_string(th.p_max)},
          {"tiss_variance", format_double(th.tiss_variance)},
          {"variance_periods", std::to_string(th.variance_periods)},
          {"lc_dimension_min", format_double(th.lc_dimension_min)},
          {"lc_dimension_max", format_double(th.lc_dimension_max)},
          {"lc_nn_spread_max", format_double(th.lc_nn_spread_max)},
          {"parity_tol", format_double(th.parity_tol)},
          {"cluster_ratio", format_double(th.cluster_ratio)}};
}

ResolvedSimulation resolve_simulation(const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (!simulation_keys().count(k) && !threshold_keys().count(k)) throw ConfigError("unknown key: " + k);
  }
  Reader r(kv);
  ResolvedSimulation res;
  auto& cfg = res.config;
  try {
    const double lambda0 = r.number("lambda0");
    const double kappa0 = r.number("kappa0");
    const std::string schedule = r.text("schedule", r.has("m") ? "jaynes_cummings" : "constant");
    const ClipMode clip = clip_mode_from_string(r.text("clip", "literal"));
    if (schedule == "constant") {
      cfg.schedule = DissipationSchedule::constant(kappa0);
    } else if (schedule == "jaynes_cummings") {
      cfg.schedule = DissipationSchedule::jaynes_cummings(kappa0, r.number("m"), r.number("kappa_max"), clip);
    } else {
      throw ConfigError("schedule must be constant or jaynes_cummings");
    }

    const double omega_T = r.number("omega_T", 1.0);
    const double epsilon = r.number("epsilon", 0.0);
    const std::string period_rule = r.text("drive_period", "auto");
    const bool nm = cfg.schedule.regime() == Regime::NonMarkovian;
    if (period_rule == "nm" || (period_rule == "auto" && nm)) {
      if (!nm) throw ConfigError("drive_period = nm requires a non-Markovian schedule");
      cfg.drive = DriveProtocol::from_period(lambda0, nm_period(cfg.schedule), epsilon);
    } else if (period_rule == "auto" || period_rule == "omega_T") {
      cfg.drive = DriveProtocol::from_frequency(lambda0, omega_T, epsilon);
    } else {
      throw ConfigError("drive_period must be auto, nm, or omega_T");
    }

    const double a0 = r.number("a0", 0.0);
    const long seed = r.integer("seed", 0);
    const double resample = r.number("resample_interval", 0.0);
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    if (a0 > 0.0) cfg.noise = NoiseSettings{a0, static_cast<std::uint64_t>(seed), resample};

    cfg.variant = eom_variant_from_string(r.text("variant", "consistent"));
    cfg.initial = parse_initial(r.text("initial", "branch+1"));
    r.out["initial"] = canonical_initial(cfg.initial);
    cfg.periods_total = static_cast<int>(r.integer("periods_total", 1000));
    cfg.periods_recorded = static_cast<int>(r.integer("periods_recorded", 200));
    cfg.steps_per_period = static_cast<int>(r.integer("steps_per_period", 4096));
    cfg.record_dense = r.flag("record_dense", true);
    cfg.dense_periods = static_cast<int>(r.integer("dense_periods", 0));
    cfg.norm_tolerance = r.number("norm_tolerance", 1e-6);
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  res.thresholds = thresholds_from_key_values(kv);
  res.resolved = merge(r.out, thresholds_to_key_values(res.thresholds));
  return res;
}

nlohmann::json to_json(const ClassifierThresholds& th) {
  return {{"period_tol", th.period_tol},
          {"p_max", th.p_max},
          {"tiss_variance", th.tiss_variance},
          {"variance_periods", th.variance_periods},
          {"lc_dimension_min", th.lc_dimension_min},
          {"lc_dimension_max", th.lc_dimension_max},
          {"lc_nn_spread_max", th.lc_nn_spread_max},
          {"parity_tol", th.parity_tol},
          {"corr_quantile_lo", th.corr_quantile_lo},
          {"corr_quantile_hi", th.corr_quantile_hi},
          {"min_geometry_points", th.min_geometry_points},
          {"cluster_ratio", th.cluster_ratio}};
}

nlohmann::json to_json(const PhaseLabel& label) {
  const auto& d = label.diagnostics;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"phase", label.name()},
          {"kind", std::string(to_string(label.kind))},
          {"period", d.period ? nlohmann::json(*d.period) : nlohmann::json(nullptr)},
          {"cluster_count", d.cluster_count},
          {"variance", num(d.variance)},
          {"dimension", num(d.dimension)},
          {"nn_spread", num(d.nn_spread)},
          {"parity_flag", d.parity_flag},
          {"driven_period1", d.driven_period1},
          {"near_periodic", d.near_periodic},
          {"period_spread", num(d.period_spread)}};
}

nlohmann::json to_json(const IntegratorStats& stats) {
  return {{"steps", stats.steps},
          {"step_size", stats.step_size},
          {"max_norm_drift", stats.max_norm_drift},
          {"initial_norm", stats.initial_norm}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file_atomically(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dtc
