#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dtc/analysis.hpp"
#include "dtc/integrator.hpp"
#include "json.hpp"

namespace dtc {

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepAxis {
  // One of epsilon, m, kappa0, kappa_max, lambda0, a0.
  std::string name;
  double min = 0.0;
  double max = 0.0;
  int count = 1;

  double value(int i) const;
};

struct SweepSpec {
  SweepAxis axis1;
  SweepAxis axis2;
  // Template for every cell; the swept parameters are overridden per cell.
  SimulationConfig base;
  ClassifierThresholds thresholds;
  std::uint64_t base_seed = 0;
  int workers = 1;
  // Empty disables checkpointing.
  std::string checkpoint_path;

  int cell_count() const { return axis1.count * axis2.count; }
  void validate() const;
};

struct CellParameters {
  double epsilon = 0.0;
  double m = INFINITY;
  double kappa0 = 0.0;
  double kappa_max = INFINITY;
  double lambda0 = 0.0;
  double a0 = 0.0;
};

struct SweepRow {
  CellParameters params;
  Regime regime = Regime::ConstantMarkovian;
  double period = 0.0;
  PhaseLabel label;
  std::string error_note;
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // row-major: axis1 outer, axis2 inner
  nlohmann::json manifest;
  int cells_computed = 0;
};

// Cell seed derived from the base seed and the row-major cell index only.
std::uint64_t cell_seed(std::uint64_t base_seed, int cell_index);

CellParameters cell_parameters(const SweepSpec& spec, int cell_index);

// Full simulation config of one cell. Non-Markovian cells are driven with period 4 pi / |d|,
// all others with the base drive frequency. Cells with a longer period than the base drive
// get more steps per period so the step size never exceeds the base one.
SimulationConfig cell_config(const SweepSpec& spec, int cell_index);

// simulate + classify for one cell; failures become Unresolved rows with a note.
SweepRow run_cell(const SweepSpec& spec, int cell_index);

nlohmann::json to_json(const SweepSpec& spec);
SweepSpec sweep_spec_from_json(const nlohmann::json& j);
std::string spec_hash(const SweepSpec& spec);

using SweepProgress = std::function<void(int done, int total)>;

// Runs every cell not already present in the checkpoint and returns the complete grid.
SweepResult run_sweep(const SweepSpec& spec, const SweepProgress& progress = {});

// Rebuilds the spec from a checkpoint header and completes the missing cells.
SweepResult resume_sweep(const std::string& checkpoint_path, int workers = 1, const SweepProgress& progress = {});

std::string format_sweep_row(const SweepRow& row);
SweepRow parse_sweep_row(std::string_view line);
void write_sweep_csv(std::ostream& out, const SweepResult& result);

}  // namespace dtc
