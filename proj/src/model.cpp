#include "dtc/model.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtc {

double max_norm(const MeanFieldState& s) {
  return std::max({std::abs(s.x), std::abs(s.p), std::abs(s.jx), std::abs(s.jy), std::abs(s.jz)});
}

MeanFieldState parity_partner(const MeanFieldState& s) { return {-s.x, -s.p, -s.jx, -s.jy, s.jz}; }

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Markovian: return "Markovian";
    case Regime::NonMarkovian: return "NonMarkovian";
    case Regime::Critical: return "Critical";
    case Regime::ConstantMarkovian: return "ConstantMarkovian";
  }
  return "?";
}

std::string_view to_string(ClipMode c) {
  return c == ClipMode::Literal ? "literal" : "sign_preserving";
}

std::string_view to_string(EomVariant v) {
  return v == EomVariant::Consistent ? "consistent" : "literal";
}

ClipMode clip_mode_from_string(std::string_view s) {
  if (s == "literal") return ClipMode::Literal;
  if (s == "sign_preserving" || s == "signed") return ClipMode::SignPreserving;
  throw std::invalid_argument("unknown clip mode: " + std::string(s));
}

EomVariant eom_variant_from_string(std::string_view s) {
  if (s == "consistent") return EomVariant::Consistent;
  if (s == "literal") return EomVariant::LiteralSigns;
  throw std::invalid_argument("unknown EOM variant: " + std::string(s));
}

DriveProtocol DriveProtocol::from_frequency(double lambda0, double omega_T, double epsilon) {
  if (!(omega_T > 0.0) || !std::isfinite(omega_T)) throw std::invalid_argument("omega_T must be positive");
  if (!(lambda0 >= 0.0)) throw std::invalid_argument("lambda0 must be nonnegative");
  if (!std::isfinite(epsilon) || std::abs(epsilon) >= 1.0) throw std::invalid_argument("|epsilon| must be < 1");
  return {lambda0, omega_T, kTwoPi / omega_T, epsilon};
}

DriveProtocol DriveProtocol::from_period(double lambda0, double period, double epsilon) {
  if (!(period > 0.0) || !std::isfinite(period)) throw std::invalid_argument("drive period must be positive");
  auto d = from_frequency(lambda0, kTwoPi / period, epsilon);
  d.period_ = period;
  return d;
}

ModelFrequencies ModelFrequencies::from_drive(const DriveProtocol& drive) {
  return {(1.0 - drive.epsilon()) * drive.omega_T(), (1.0 + drive.epsilon()) * drive.omega_T()};
}

DissipationSchedule DissipationSchedule::constant(double kappa0) {
  if (!(kappa0 >= 0.0) || !std::isfinite(kappa0)) throw std::invalid_argument("kappa0 must be nonnegative");
  DissipationSchedule s;
  s.kappa0_ = kappa0;
  return s;
}

DissipationSchedule DissipationSchedule::jaynes_cummings(double kappa0, double m, double kappa_max,
                                                         ClipMode clip) {
  if (!(kappa0 > 0.0) || !std::isfinite(kappa0)) throw std::invalid_argument("kappa0 must be positive");
  if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("m must be positive");
  if (!(kappa_max > kappa0)) throw std::invalid_argument("kappa_max must exceed kappa0");
  DissipationSchedule s;
  s.kappa0_ = kappa0;
  s.m_ = m;
  s.kappa_max_ = kappa_max;
  s.clip_ = clip;
  const double disc = m * m - 2.0 * m * kappa0;
  if (m > 2.0 * kappa0) {
    s.regime_ = Regime::Markovian;
  } else if (m < 2.0 * kappa0) {
    s.regime_ = Regime::NonMarkovian;
  } else {
    s.regime_ = Regime::Critical;
  }
  s.abs_d_ = s.regime_ == Regime::Critical ? 0.0 : std::sqrt(std::abs(disc));
  return s;
}

Regime regime_of(const DissipationSchedule& schedule) { return schedule.regime(); }

namespace {

double clip(double raw, const DissipationSchedule& s) {
  if (std::abs(raw) < s.kappa_max()) return raw;
  if (s.clip_mode() == ClipMode::SignPreserving && raw < 0.0) return -s.kappa_max();
  return s.kappa_max();
}

}  // namespace

double kappa_at(double t, const DissipationSchedule& s) {
  if (t < 0.0) throw std::domain_error("kappa_at: negative time");
  const double m = s.m();
  const double k0 = s.kappa0();
  switch (s.regime()) {
    case Regime::ConstantMarkovian:
      return clip(k0, s);
    case Regime::Critical:
      return clip(2.0 * m * k0 * t / (2.0 + m * t), s);
    case Regime::Markovian: {
      // tanh form of the sinh/cosh ratio stays finite at large t.
      const double d = s.abs_d();
      const double th = std::tanh(0.5 * t * d);
      return clip(2.0 * m * k0 * th / (d + m * th), s);
    }
    case Regime::NonMarkovian: {
      const double d = s.abs_d();
      const double phase = 0.5 * t * d;
      const double num = 2.0 * m * k0 * std::sin(phase);
      const double den = d * std::cos(phase) + m * std::sin(phase);
      if (den == 0.0) return s.kappa_max();
      return clip(num / den, s);
    }
  }
  return 0.0;
}

double noise_draw(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

double noisy_kappa_at(double t, const DissipationSchedule& schedule, const NoiseSettings& noise) {
  const double base = kappa_at(t, schedule);
  if (noise.a0 == 0.0) return base;
  if (!(noise.resample_interval > 0.0)) throw std::invalid_argument("noise resample interval must be positive");
  const auto index = static_cast<std::uint64_t>(std::floor(t / noise.resample_interval));
  return base + noise.a0 * noise_draw(noise.seed, index);
}

std::vector<double> kappa_breakpoints(const DissipationSchedule& schedule) {
  if (schedule.regime() != Regime::NonMarkovian) return {};
  const double d = schedule.abs_d(), m = schedule.m(), a = 2.0 * m * schedule.kappa0(), k = schedule.kappa_max();
  auto wrap = [](double theta) { return theta - kPi * std::floor(theta / kPi); };
  // Pole of the unclipped rate, then the points where it crosses +kappa_max and -kappa_max.
  std::vector<double> cuts{2.0 * wrap(kPi - std::atan(d / m)) / d};
  for (double sign : {1.0, -1.0}) cuts.push_back(2.0 * wrap(std::atan2(sign * k * d, a - sign * k * m)) / d);
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

double cumulative_kappa(double t, const DissipationSchedule& schedule) {
  if (t < 0.0) throw std::domain_error("cumulative_kappa: negative time");
  if (t == 0.0) return 0.0;
  if (schedule.regime() == Regime::ConstantMarkovian) return kappa_at(0.0, schedule) * t;

  auto f = [&](double u) { return kappa_at(u, schedule); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  if (schedule.regime() != Regime::NonMarkovian) return Quad::integrate(f, 0.0, t, 20, 1e-12);

  // Integrate each smooth piece of every repetition separately.
  const double rep = kTwoPi / schedule.abs_d();
  std::vector<double> cuts = kappa_breakpoints(schedule);
  cuts.insert(cuts.begin(), 0.0);
  double total = 0.0;
  for (double base = 0.0; base < t; base += rep) {
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      const double lo = base + cuts[i];
      const double hi = std::min(t, i + 1 < cuts.size() ? base + cuts[i + 1] : base + rep);
      if (hi > lo) total += Quad::integrate(f, lo, hi, 20, 1e-12);
    }
  }
  return total;
}

double drive_lambda_at(double t, const DriveProtocol& drive) {
  const double cycles = t / drive.period();
  double frac = cycles - std::floor(cycles);
  // Snap switching instants lost to rounding onto the grid.
  if (std::abs(frac - 0.5) < 1e-12) frac = 0.5;
  if (frac > 1.0 - 1e-12) frac = 0.0;
  return frac < 0.5 ? drive.lambda0() : 0.0;
}

double critical_coupling(double omega, double omega0, double kappa0) {
  if (!(omega > 0.0) || !(omega0 > 0.0)) throw std::invalid_argument("frequencies must be positive");
  return 0.5 * std::sqrt((omega0 / omega) * (omega * omega + 0.25 * kappa0 * kappa0));
}

MeanFieldState eom_rhs_with_coupling(const MeanFieldState& s, double lambda, const ModelFrequencies& f,
                                     double kappa, EomVariant variant) {
  const double g = 2.0 * lambda * std::sqrt(2.0 * f.omega);
  MeanFieldState ds;
  ds.x = s.p - 0.5 * kappa * s.x;
  // dj/dt = Omega x j with Omega = (+-g x, 0, -omega0).
  if (variant == EomVariant::Consistent) {
    ds.jx = f.omega0 * s.jy;
    ds.jy = -f.omega0 * s.jx + g * s.x * s.jz;
    ds.jz = -g * s.x * s.jy;
    ds.p = -f.omega * f.omega * s.x - 0.5 * kappa * s.p - 0.5 * g * s.jx;
  } else {
    ds.jx = f.omega0 * s.jy;
    ds.jy = -f.omega0 * s.jx - g * s.x * s.jz;
    ds.jz = g * s.x * s.jy;
    ds.p = -f.omega * f.omega * s.x - 0.5 * kappa * s.p - g * s.x * s.jx;
  }
  return ds;
}

MeanFieldState eom_rhs(const MeanFieldState& s, double t, const DriveProtocol& drive,
                       const ModelFrequencies& f, double kappa, EomVariant variant) {
  return eom_rhs_with_coupling(s, drive_lambda_at(t, drive), f, kappa, variant);
}

MeanFieldState steady_state_closed_form(double lambda0, const ModelFrequencies& f, double kappa0,
                                        int branch) {
  if (branch != 1 && branch != -1) throw std::invalid_argument("branch must be +1 or -1");
  const double lc = critical_coupling(f.omega, f.omega0, kappa0);
  if (lambda0 < lc) {
    throw std::domain_error("lambda0 = " + std::to_string(lambda0) +
                            " is below the critical coupling " + std::to_string(lc));
  }
  const double ratio2 = (lc * lc) / (lambda0 * lambda0);
  const double order = std::max(0.0, 1.0 - ratio2 * ratio2);
  const double b = branch;
  MeanFieldState s;
  s.jx = b * std::sqrt(order);
  s.jy = 0.0;
  s.jz = -ratio2;
  s.x = -b * lambda0 * std::sqrt(2.0 * f.omega * order) / (f.omega * f.omega + 0.25 * kappa0 * kappa0);
  s.p = 0.5 * kappa0 * s.x;
  return s;
}

double steady_state_residual(const MeanFieldState& s, double lambda0, const ModelFrequencies& f,
                             double kappa0, EomVariant variant) {
  return max_norm(eom_rhs_with_coupling(s, lambda0, f, kappa0, variant));
}

double nm_period(const DissipationSchedule& schedule) {
  if (schedule.regime() != Regime::NonMarkovian) {
    throw std::domain_error("nm_period is defined only in the non-Markovian regime");
  }
  return 2.0 * kTwoPi / schedule.abs_d();
}

}  // namespace dtc
