#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dtc/model.hpp"

namespace dtc {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SteadyStateBranch {
  int branch = 1;
};

using InitialCondition = std::variant<MeanFieldState, SteadyStateBranch>;

struct SimulationConfig {
  DriveProtocol drive;
  DissipationSchedule schedule;
  std::optional<NoiseSettings> noise;
  EomVariant variant = EomVariant::Consistent;
  InitialCondition initial = SteadyStateBranch{1};
  int periods_total = 1000;
  int periods_recorded = 200;
  int steps_per_period = 4096;
  bool record_dense = false;
  // Periods at the end of the run kept in the dense record; 0 means periods_recorded.
  int dense_periods = 0;
  // Abort when | |j(t)| - |j(0)| | exceeds this.
  double norm_tolerance = 1e-6;

  ModelFrequencies frequencies() const { return ModelFrequencies::from_drive(drive); }
  double step_size() const { return drive.period() / steps_per_period; }
  int effective_dense_periods() const { return dense_periods > 0 ? dense_periods : periods_recorded; }
  // Throws std::invalid_argument on a malformed configuration.
  void validate() const;
};

struct TrajectorySample {
  double t = 0.0;
  MeanFieldState state;
  double kappa = 0.0;
  double lambda = 0.0;
};

struct IntegratorStats {
  std::uint64_t steps = 0;
  double step_size = 0.0;
  double max_norm_drift = 0.0;
  double initial_norm = 1.0;
  MeanFieldState final_state;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  SimulationConfig config;
  IntegratorStats stats;
};

struct StroboscopicPoint {
  int n = 0;
  MeanFieldState state;
};

struct StroboscopicSequence {
  std::vector<StroboscopicPoint> points;
};

struct SimulationResult {
  Trajectory trajectory;
  StroboscopicSequence strobe;
};

// Classical fourth-order Runge-Kutta step; rhs(state, t) returns the time derivative.
template <class Rhs>
MeanFieldState rk4_step(const MeanFieldState& s, double t, double h, Rhs&& rhs) {
  if (!(h > 0.0)) throw std::invalid_argument("rk4_step: step must be positive");
  const double half = 0.5 * h;
  const MeanFieldState k1 = rhs(s, t);
  const MeanFieldState k2 = rhs(s + half * k1, t + half);
  const MeanFieldState k3 = rhs(s + half * k2, t + half);
  const MeanFieldState k4 = rhs(s + h * k3, t + h);
  MeanFieldState out = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.is_finite()) throw SimulationError("non-finite state at t = " + std::to_string(t + h));
  return out;
}

SimulationResult simulate(const SimulationConfig& config);

MeanFieldState initial_state(const SimulationConfig& config);

struct RelaxOptions {
  int steps_per_period = 512;
  long max_periods = 200000;
  double tolerance = 1e-12;
};

// Integrates constant-coupling, constant-rate dynamics until the state changes by less than
// the tolerance over one cavity period 2 pi / omega.
MeanFieldState relax_to_steady_state(const MeanFieldState& initial, double lambda0,
                                     const ModelFrequencies& f, double kappa0,
                                     const RelaxOptions& options = {});

}  // namespace dtc
