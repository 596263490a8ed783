#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>
#include <string_view>

namespace dtc {

inline constexpr double kPi = 3.141592653589793238462643383279;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Mean-field variables of the open Dicke model: scaled cavity quadratures
// (x, p) and the collective spin per atom (jx, jy, jz).
struct MeanFieldState {
  double x = 0.0;
  double p = 0.0;
  double jx = 0.0;
  double jy = 0.0;
  double jz = -1.0;

  static MeanFieldState from_array(const std::array<double, 5>& a) {
    return {a[0], a[1], a[2], a[3], a[4]};
  }
  std::array<double, 5> to_array() const { return {x, p, jx, jy, jz}; }

  double spin_norm() const { return std::sqrt(jx * jx + jy * jy + jz * jz); }
  double norm() const { return std::sqrt(x * x + p * p + jx * jx + jy * jy + jz * jz); }
  bool is_finite() const {
    return std::isfinite(x) && std::isfinite(p) && std::isfinite(jx) && std::isfinite(jy) &&
           std::isfinite(jz);
  }

  MeanFieldState& operator+=(const MeanFieldState& o) {
    x += o.x;
    p += o.p;
    jx += o.jx;
    jy += o.jy;
    jz += o.jz;
    return *this;
  }
  friend MeanFieldState operator+(MeanFieldState a, const MeanFieldState& b) { return a += b; }
  friend MeanFieldState operator-(const MeanFieldState& a, const MeanFieldState& b) {
    return {a.x - b.x, a.p - b.p, a.jx - b.jx, a.jy - b.jy, a.jz - b.jz};
  }
  friend MeanFieldState operator*(double s, const MeanFieldState& a) {
    return {s * a.x, s * a.p, s * a.jx, s * a.jy, s * a.jz};
  }
  friend bool operator==(const MeanFieldState&, const MeanFieldState&) = default;
};

double max_norm(const MeanFieldState& s);

// Z2 partner: (x, p, jx, jy) change sign, jz is untouched.
MeanFieldState parity_partner(const MeanFieldState& s);

enum class Regime { Markovian, NonMarkovian, Critical, ConstantMarkovian };

// Literal: any |kappa| >= kappa_max maps to +kappa_max.
// SignPreserving: maps to sign(kappa) * kappa_max.
enum class ClipMode { Literal, SignPreserving };

// LiteralSigns flips the sign of the coupling terms; the closed-form steady state is not stationary under it.
enum class EomVariant { Consistent, LiteralSigns };

std::string_view to_string(Regime r);
std::string_view to_string(ClipMode c);
std::string_view to_string(EomVariant v);
ClipMode clip_mode_from_string(std::string_view s);
EomVariant eom_variant_from_string(std::string_view s);

// Square-wave coupling: lambda0 on the first half of each period, zero on the second.
class DriveProtocol {
 public:
  DriveProtocol() = default;
  static DriveProtocol from_frequency(double lambda0, double omega_T, double epsilon);
  static DriveProtocol from_period(double lambda0, double period, double epsilon);

  double lambda0() const { return lambda0_; }
  double omega_T() const { return omega_T_; }
  double period() const { return period_; }
  double epsilon() const { return epsilon_; }

 private:
  DriveProtocol(double lambda0, double omega_T, double period, double epsilon)
      : lambda0_(lambda0), omega_T_(omega_T), period_(period), epsilon_(epsilon) {}

  double lambda0_ = 1.0;
  double omega_T_ = 1.0;
  double period_ = kTwoPi;
  double epsilon_ = 0.0;
};

// Cavity and atomic frequencies detuned symmetrically around the drive frequency.
struct ModelFrequencies {
  double omega = 1.0;
  double omega0 = 1.0;

  static ModelFrequencies from_drive(const DriveProtocol& drive);
};

class DissipationSchedule {
 public:
  DissipationSchedule() = default;

  // kappa(t) = kappa0 at all times (the m -> infinity limit).
  static DissipationSchedule constant(double kappa0);
  // Jaynes-Cummings-like time-dependent rate with spectral width m, clipped at kappa_max.
  static DissipationSchedule jaynes_cummings(double kappa0, double m, double kappa_max,
                                             ClipMode clip = ClipMode::Literal);

  double kappa0() const { return kappa0_; }
  // Infinite for the constant schedule.
  double m() const { return m_; }
  double kappa_max() const { return kappa_max_; }
  ClipMode clip_mode() const { return clip_; }
  Regime regime() const { return regime_; }
  // sqrt(|m^2 - 2 m kappa0|); zero at the critical point and for the constant schedule.
  double abs_d() const { return abs_d_; }

 private:
  double kappa0_ = 0.0;
  double m_ = INFINITY;
  double kappa_max_ = INFINITY;
  ClipMode clip_ = ClipMode::Literal;
  Regime regime_ = Regime::ConstantMarkovian;
  double abs_d_ = 0.0;
};

struct NoiseSettings {
  double a0 = 0.0;
  std::uint64_t seed = 0;
  // Time between fresh draws of f(t); zero means one draw per integrator step.
  double resample_interval = 0.0;
};

Regime regime_of(const DissipationSchedule& schedule);

double kappa_at(double t, const DissipationSchedule& schedule);

// k-th draw of the SplitMix64 stream seeded with `seed`, mapped to [-1, 1).
double noise_draw(std::uint64_t seed, std::uint64_t index);

// kappa(t) + a0 f(t) with f piecewise constant on [k dt, (k+1) dt).
double noisy_kappa_at(double t, const DissipationSchedule& schedule, const NoiseSettings& noise);

// Integral of the clipped kappa over [0, t].
double cumulative_kappa(double t, const DissipationSchedule& schedule);

// Times in [0, 2 pi / |d|) where the clipped non-Markovian rate has a jump or a kink; they
// repeat with period 2 pi / |d|. Empty for the other regimes.
std::vector<double> kappa_breakpoints(const DissipationSchedule& schedule);

double drive_lambda_at(double t, const DriveProtocol& drive);

double critical_coupling(double omega, double omega0, double kappa0);

MeanFieldState eom_rhs_with_coupling(const MeanFieldState& s, double lambda, const ModelFrequencies& f,
                                     double kappa, EomVariant variant);

MeanFieldState eom_rhs(const MeanFieldState& s, double t, const DriveProtocol& drive,
                       const ModelFrequencies& f, double kappa, EomVariant variant);

// Symmetry-broken fixed point for constant lambda0 and kappa0; branch is +1 or -1.
// Throws std::domain_error below the critical coupling.
MeanFieldState steady_state_closed_form(double lambda0, const ModelFrequencies& f, double kappa0,
                                        int branch);

double steady_state_residual(const MeanFieldState& s, double lambda0, const ModelFrequencies& f,
                             double kappa0, EomVariant variant);

// 4 pi / |d|; throws std::domain_error outside the non-Markovian regime.
double nm_period(const DissipationSchedule& schedule);

}  // namespace dtc
