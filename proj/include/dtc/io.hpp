#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dtc/analysis.hpp"
#include "dtc/integrator.hpp"

namespace dtc {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr std::string_view kVersion = DTC_VERSION;

inline constexpr std::string_view kTrajectoryHeader = "t,x,p,jx,jy,jz,kappa,lambda";
inline constexpr std::string_view kStroboscopicHeader = "n,x,p,jx,jy,jz";
inline constexpr std::string_view kSweepHeader =
    "epsilon,m,kappa0,kappa_max,lambda0,a0,regime,T,phase,period,variance,dimension,nn_spread,parity_flag,"
    "error_note";

// Shortest form is not used on purpose: every value carries 17 significant digits.
std::string format_double(double v);
double parse_double(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
void write_stroboscopic_csv(std::ostream& out, const StroboscopicSequence& strobe);
StroboscopicSequence read_stroboscopic_csv(std::istream& in);

// Flat key = value configuration. '#' starts a comment; blank lines are ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values_file(const std::string& path);
void write_key_values(std::ostream& out, const KeyValues& kv);
// Later maps override earlier ones.
KeyValues merge(const KeyValues& base, const KeyValues& overrides);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Builds a simulation config from key-values; returns the fully resolved map alongside it
// so a manifest can reproduce the run exactly.
struct ResolvedSimulation {
  SimulationConfig config;
  ClassifierThresholds thresholds;
  KeyValues resolved;
};
ResolvedSimulation resolve_simulation(const KeyValues& kv);

ClassifierThresholds thresholds_from_key_values(const KeyValues& kv);
KeyValues thresholds_to_key_values(const ClassifierThresholds& th);

nlohmann::json to_json(const ClassifierThresholds& th);
nlohmann::json to_json(const PhaseLabel& label);
nlohmann::json to_json(const IntegratorStats& stats);

std::string utc_timestamp();

// Write to `path` through a temporary file and rename.
void write_file_atomically(const std::string& path, const std::string& contents);

}  // namespace dtc
