#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "dtc/integrator.hpp"

namespace dtc {

enum class PhaseKind { TISS, DTC, PeriodN, LimitCycle, Thermal, Unresolved };

std::string_view to_string(PhaseKind k);
PhaseKind phase_kind_from_string(std::string_view s);

struct ClassifierThresholds {
  double period_tol = 1e-3;
  int p_max = 12;
  double tiss_variance = 1e-3;
  int variance_periods = 10;
  double lc_dimension_min = 0.5;
  double lc_dimension_max = 1.5;
  double lc_nn_spread_max = 0.35;
  double parity_tol = 1e-2;
  // Pair-distance quantiles used for the two-scale correlation dimension.
  double corr_quantile_lo = 0.05;
  double corr_quantile_hi = 0.2;
  int min_geometry_points = 200;
  // Fallback for orbits that wobble or jitter around a cycle: accept period p when the spread
  // max |s(n+p) - s(n)| is below this fraction of the smallest distance between points at
  // offsets 1..p-1 (the unit Bloch radius for p = 1). 0 disables the fallback.
  double cluster_ratio = 0.1;
};

struct PhaseDiagnostics {
  std::optional<int> period;
  int cluster_count = 0;
  double variance = NAN;
  double dimension = NAN;
  double nn_spread = NAN;
  bool parity_flag = false;
  // A period-1 stroboscopic orbit that still moves within each drive period.
  bool driven_period1 = false;
  // The period came from the cluster-ratio fallback rather than the strict tolerance.
  bool near_periodic = false;
  double period_spread = NAN;
};

struct PhaseLabel {
  PhaseKind kind = PhaseKind::Unresolved;
  // Stroboscopic period for PeriodN (and 2 for DTC); 0 otherwise.
  int n = 0;
  PhaseDiagnostics diagnostics;

  std::string name() const;
};

std::optional<int> detect_period(std::span<const StroboscopicPoint> points, double tol = 1e-3, int p_max = 12);
inline std::optional<int> detect_period(const StroboscopicSequence& seq, double tol = 1e-3, int p_max = 12) {
  return detect_period(std::span<const StroboscopicPoint>(seq.points), tol, p_max);
}

// Smallest p <= p_max whose cluster spread is below ratio times the cluster separation.
// Returns the period and its spread.
struct NearPeriod {
  int period = 0;
  double spread = 0.0;
};
std::optional<NearPeriod> detect_near_period(std::span<const StroboscopicPoint> points, double ratio, int p_max = 12);

// Largest Euclidean distance of a dense sample from the window average over the last k periods.
double intra_period_variance(const Trajectory& trajectory, int last_k_periods);

bool parity_pairing_check(const MeanFieldState& a, const MeanFieldState& b, double tol);

struct GeometryEstimate {
  double dimension = 0.0;
  double nn_spread = 0.0;
};

GeometryEstimate geometry_estimate(std::span<const StroboscopicPoint> points,
                                   const ClassifierThresholds& thresholds = {});
inline GeometryEstimate geometry_estimate(const StroboscopicSequence& seq, const ClassifierThresholds& th = {}) {
  return geometry_estimate(std::span<const StroboscopicPoint>(seq.points), th);
}

// Greedy clustering of the stroboscopic states at the given max-norm radius.
int count_clusters(std::span<const StroboscopicPoint> points, double tol);

PhaseLabel classify(const Trajectory& trajectory, const StroboscopicSequence& strobe,
                    const ClassifierThresholds& thresholds = {});

}  // namespace dtc
