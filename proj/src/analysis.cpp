#include "dtc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dtc {

std::string_view to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::TISS: return "TISS";
    case PhaseKind::DTC: return "DTC";
    case PhaseKind::PeriodN: return "PeriodN";
    case PhaseKind::LimitCycle: return "LimitCycle";
    case PhaseKind::Thermal: return "Thermal";
    case PhaseKind::Unresolved: return "Unresolved";
  }
  return "Unresolved";
}

PhaseKind phase_kind_from_string(std::string_view s) {
  for (auto k : {PhaseKind::TISS, PhaseKind::DTC, PhaseKind::PeriodN, PhaseKind::LimitCycle, PhaseKind::Thermal,
                 PhaseKind::Unresolved}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown phase label: " + std::string(s));
}

std::string PhaseLabel::name() const {
  if (kind == PhaseKind::PeriodN) return "Period" + std::to_string(n);
  return std::string(to_string(kind));
}

std::optional<int> detect_period(std::span<const StroboscopicPoint> points, double tol, int p_max) {
  if (!(tol > 0.0)) throw std::invalid_argument("detect_period: tolerance must be positive");
  if (p_max < 1) throw std::invalid_argument("detect_period: p_max must be positive");
  if (points.size() < 4 * static_cast<std::size_t>(p_max)) {
    throw std::invalid_argument("detect_period: window shorter than 4 * p_max points");
  }
  for (int p = 1; p <= p_max; ++p) {
    bool ok = true;
    for (std::size_t i = 0; ok && i + p < points.size(); ++i) {
      ok = max_norm(points[i + p].state - points[i].state) < tol;
    }
    if (ok) return p;
  }
  return std::nullopt;
}

std::optional<NearPeriod> detect_near_period(std::span<const StroboscopicPoint> points, double ratio, int p_max) {
  if (!(ratio > 0.0) || p_max < 1) return std::nullopt;
  if (points.size() < 4 * static_cast<std::size_t>(p_max)) {
    throw std::invalid_argument("detect_near_period: window shorter than 4 * p_max points");
  }
  auto shift_range = [&](int q) {
    double lo = INFINITY, hi = 0.0;
    for (std::size_t i = 0; i + q < points.size(); ++i) {
      const double d = (points[i + q].state - points[i].state).norm();
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    return std::pair{lo, hi};
  };
  double separation = 1.0;
  for (int p = 1; p <= p_max; ++p) {
    const auto [lo, hi] = shift_range(p);
    if (hi < ratio * separation) return NearPeriod{p, hi};
    separation = p == 1 ? lo : std::min(separation, lo);
  }
  return std::nullopt;
}

double intra_period_variance(const Trajectory& trajectory, int last_k_periods) {
  const auto& samples = trajectory.samples;
  if (samples.empty()) throw std::invalid_argument("intra_period_variance: dense record absent");
  if (last_k_periods < 1) throw std::invalid_argument("intra_period_variance: need at least one period");
  const double t_end = samples.back().t;
  const double t_start = t_end - last_k_periods * trajectory.config.drive.period();
  auto first = std::lower_bound(samples.begin(), samples.end(), t_start,
                                [](const TrajectorySample& s, double t) { return s.t < t; });
  const std::span<const TrajectorySample> window(first, samples.end());

  MeanFieldState mean{0, 0, 0, 0, 0};
  for (const auto& s : window) mean += s.state;
  mean = (1.0 / static_cast<double>(window.size())) * mean;

  double worst = 0.0;
  for (const auto& s : window) {
    const auto d = (s.state - mean).to_array();
    double sq = 0.0;
    for (double v : d) sq += v * v;
    worst = std::max(worst, std::sqrt(sq));
  }
  return worst;
}

bool parity_pairing_check(const MeanFieldState& a, const MeanFieldState& b, double tol) {
  return std::abs(a.x + b.x) < tol && std::abs(a.p + b.p) < tol && std::abs(a.jx + b.jx) < tol &&
         std::abs(std::abs(a.jy) - std::abs(b.jy)) < tol && std::abs(a.jz - b.jz) < tol;
}

namespace {

struct Vec3 {
  double x, y, z;
};

double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  return v[std::min(idx, v.size() - 1)];
}

MeanFieldState centroid(std::span<const StroboscopicPoint> points, std::size_t offset, std::size_t stride) {
  MeanFieldState c{0, 0, 0, 0, 0};
  std::size_t count = 0;
  for (std::size_t i = offset; i < points.size(); i += stride, ++count) c += points[i].state;
  return (1.0 / static_cast<double>(count)) * c;
}

}  // namespace

GeometryEstimate geometry_estimate(std::span<const StroboscopicPoint> points, const ClassifierThresholds& th) {
  if (points.size() < static_cast<std::size_t>(std::max(th.min_geometry_points, 2))) {
    throw std::invalid_argument("geometry_estimate: too few points");
  }
  // Bloch-sphere coordinates, centred and scaled to unit RMS radius.
  std::vector<Vec3> cloud;
  cloud.reserve(points.size());
  Vec3 c{0, 0, 0};
  for (const auto& p : points) {
    cloud.push_back({p.state.jx, p.state.jy, p.state.jz});
    c.x += p.state.jx;
    c.y += p.state.jy;
    c.z += p.state.jz;
  }
  const double inv_n = 1.0 / static_cast<double>(cloud.size());
  c = {c.x * inv_n, c.y * inv_n, c.z * inv_n};
  double rms = 0.0;
  for (const auto& v : cloud) rms += dist(v, c) * dist(v, c);
  rms = std::sqrt(rms * inv_n);
  if (rms < 1e-12) return {0.0, 0.0};
  for (auto& v : cloud) v = {(v.x - c.x) / rms, (v.y - c.y) / rms, (v.z - c.z) / rms};

  std::vector<double> pair;
  pair.reserve(cloud.size() * (cloud.size() - 1) / 2);
  std::vector<double> nearest(cloud.size(), INFINITY);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t j = i + 1; j < cloud.size(); ++j) {
      const double d = dist(cloud[i], cloud[j]);
      pair.push_back(d);
      nearest[i] = std::min(nearest[i], d);
      nearest[j] = std::min(nearest[j], d);
    }
  }
  std::sort(pair.begin(), pair.end());
  const double r_lo = quantile_sorted(pair, th.corr_quantile_lo);
  const double r_hi = quantile_sorted(pair, th.corr_quantile_hi);

  GeometryEstimate g;
  g.nn_spread = *std::max_element(nearest.begin(), nearest.end());
  // Finitely many distinct points: zero dimension.
  if (r_lo <= 1e-9 || r_hi <= r_lo) {
    g.dimension = 0.0;
  } else {
    g.dimension = std::log(th.corr_quantile_hi / th.corr_quantile_lo) / std::log(r_hi / r_lo);
  }
  return g;
}

int count_clusters(std::span<const StroboscopicPoint> points, double tol) {
  std::vector<MeanFieldState> centres;
  for (const auto& p : points) {
    const bool known = std::any_of(centres.begin(), centres.end(),
                                   [&](const MeanFieldState& c) { return max_norm(p.state - c) < tol; });
    if (!known) centres.push_back(p.state);
  }
  return static_cast<int>(centres.size());
}

PhaseLabel classify(const Trajectory& trajectory, const StroboscopicSequence& strobe,
                    const ClassifierThresholds& th) {
  const std::span<const StroboscopicPoint> pts(strobe.points);
  PhaseLabel label;
  auto& diag = label.diagnostics;
  diag.period = detect_period(pts, th.period_tol, th.p_max);
  if (!diag.period) {
    if (const auto near = detect_near_period(pts, th.cluster_ratio, th.p_max)) {
      diag.period = near->period;
      diag.near_periodic = true;
      diag.period_spread = near->spread;
    }
  }
  diag.cluster_count = count_clusters(pts, th.period_tol);

  if (diag.period) {
    const int p = *diag.period;
    if (p == 1) {
      diag.variance = intra_period_variance(trajectory, th.variance_periods);
      if (diag.variance < th.tiss_variance) {
        label.kind = PhaseKind::TISS;
      } else {
        label.kind = PhaseKind::PeriodN;
        label.n = 1;
        diag.driven_period1 = true;
      }
    } else if (p == 2) {
      label.kind = PhaseKind::DTC;
      label.n = 2;
      diag.parity_flag = parity_pairing_check(centroid(pts, 0, 2), centroid(pts, 1, 2), th.parity_tol);
    } else {
      label.kind = PhaseKind::PeriodN;
      label.n = p;
    }
    return label;
  }

  const GeometryEstimate g = geometry_estimate(pts, th);
  diag.dimension = g.dimension;
  diag.nn_spread = g.nn_spread;
  if (g.dimension < th.lc_dimension_min) {
    label.kind = PhaseKind::Unresolved;
  } else if (g.dimension <= th.lc_dimension_max && g.nn_spread <= th.lc_nn_spread_max) {
    label.kind = PhaseKind::LimitCycle;
  } else {
    label.kind = PhaseKind::Thermal;
  }
  return label;
}

}  // namespace dtc
