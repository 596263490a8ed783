#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "dtc/model.hpp"

using namespace dtc;

namespace {

// Unclipped sinh/cosh form, valid while the hyperbolic functions stay finite.
double markov_kappa_direct(double t, double kappa0, double m) {
  const double d = std::sqrt(m * m - 2 * m * kappa0);
  return 2 * m * kappa0 * std::sinh(t * d / 2) / (d * std::cosh(t * d / 2) + m * std::sinh(t * d / 2));
}

double nm_kappa_direct(double t, double kappa0, double m) {
  const double d = std::sqrt(2 * m * kappa0 - m * m);
  return 2 * m * kappa0 * std::sin(t * d / 2) / (d * std::cos(t * d / 2) + m * std::sin(t * d / 2));
}

}  // namespace

TEST_CASE("regime follows m against 2 kappa0") {
  CHECK(regime_of(DissipationSchedule::jaynes_cummings(0.05, 10, 5)) == Regime::Markovian);
  CHECK(regime_of(DissipationSchedule::jaynes_cummings(2.7, 2.7 / 4, 5)) == Regime::NonMarkovian);
  CHECK(regime_of(DissipationSchedule::jaynes_cummings(2.7, 5.4, 6)) == Regime::Critical);
  CHECK(regime_of(DissipationSchedule::constant(0.05)) == Regime::ConstantMarkovian);
}

TEST_CASE("schedule construction rejects invalid parameters") {
  CHECK_THROWS_AS(DissipationSchedule::jaynes_cummings(0.0, 1, 5), std::invalid_argument);
  CHECK_THROWS_AS(DissipationSchedule::jaynes_cummings(1, -1, 5), std::invalid_argument);
  CHECK_THROWS_AS(DissipationSchedule::jaynes_cummings(1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(DissipationSchedule::constant(-0.1), std::invalid_argument);
}

TEST_CASE("kappa vanishes at t = 0 and rejects negative times") {
  for (const auto& s : {DissipationSchedule::jaynes_cummings(0.05, 10, 5), DissipationSchedule::jaynes_cummings(2.7, 0.675, 5),
                        DissipationSchedule::jaynes_cummings(2.7, 5.4, 6)}) {
    CHECK(kappa_at(0.0, s) == 0.0);
    CHECK_THROWS_AS(kappa_at(-1.0, s), std::domain_error);
  }
  CHECK(kappa_at(0.0, DissipationSchedule::constant(0.05)) == 0.05);
}

TEST_CASE("Markovian kappa approaches 2 m kappa0 / (d + m)") {
  const auto s = DissipationSchedule::jaynes_cummings(0.05, 10, 5);
  const double limit = 2 * 10 * 0.05 / (std::sqrt(99.0) + 10);
  CHECK(limit == doctest::Approx(0.050125628).epsilon(1e-8));
  CHECK(std::abs(kappa_at(1e3, s) - limit) < 1e-6);
  // tanh route against the sinh/cosh form where the latter is finite.
  for (double t : {0.01, 0.1, 0.5, 1.0, 3.0, 10.0}) {
    CHECK(kappa_at(t, s) == doctest::Approx(markov_kappa_direct(t, 0.05, 10)).epsilon(1e-13));
  }
}

TEST_CASE("Markovian kappa is nondecreasing and nonnegative") {
  for (double m : {0.2, 1.0, 5.5, 10.0}) {
    const auto s = DissipationSchedule::jaynes_cummings(0.05, m, 5);
    double prev = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double k = kappa_at(0.01 * i, s);
      CHECK(k >= 0.0);
      CHECK(k >= prev - 1e-15);
      prev = k;
    }
  }
}

TEST_CASE("non-Markovian pole returns the clipped value") {
  const auto s = DissipationSchedule::jaynes_cummings(2.7, 0.675, 5);
  const double d = s.abs_d();
  const double t_pole = 2.0 * (M_PI - std::atan(d / 0.675)) / d;
  CHECK(kappa_at(t_pole, s) == 5.0);
  // Just past the pole the unclipped rate diverges to -infinity.
  const double t_after = t_pole + 1e-9;
  CHECK(nm_kappa_direct(t_after, 2.7, 0.675) < -5.0);
  CHECK(kappa_at(t_after, s) == 5.0);
  const auto signed_s = DissipationSchedule::jaynes_cummings(2.7, 0.675, 5, ClipMode::SignPreserving);
  CHECK(kappa_at(t_after, signed_s) == -5.0);
}

TEST_CASE("kappa never exceeds kappa_max in magnitude") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> k0d(0.05, 4.0), rd(0.05, 4.0), td(0.0, 200.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double k0 = k0d(rng);
    const double kmax = k0 * (1.0 + rd(rng));
    for (auto clip : {ClipMode::Literal, ClipMode::SignPreserving}) {
      const auto s = DissipationSchedule::jaynes_cummings(k0, k0 * rd(rng), kmax, clip);
      for (int i = 0; i < 50; ++i) {
        const double k = kappa_at(td(rng), s);
        CHECK(std::isfinite(k));
        CHECK(std::abs(k) <= kmax);
      }
    }
  }
}

TEST_CASE("non-Markovian kappa repeats with 4 pi / |d| and goes negative") {
  const auto s = DissipationSchedule::jaynes_cummings(2.7, 0.675, 5);
  const double period = nm_period(s);
  double minimum = INFINITY;
  for (int i = 0; i < 1000; ++i) {
    const double t = period * i / 1000.0;
    const double k = kappa_at(t, s);
    minimum = std::min(minimum, k);
    // Skip samples sitting on the clip edge where rounding can flip the branch.
    if (std::abs(std::abs(k) - 5.0) > 1e-3) CHECK(std::abs(kappa_at(t + period, s) - k) < 1e-9);
    if (std::abs(std::abs(k) - 5.0) > 1e-3) CHECK(std::abs(kappa_at(t + 7 * period, s) - k) < 1e-9);
  }
  CHECK(minimum < 0.0);
}

TEST_CASE("critical schedule matches the d -> 0 limit from both sides") {
  const double k0 = 2.7;
  for (double sign : {-1.0, 1.0}) {
    const double m = 2 * k0 * (1 + sign * 1e-6);
    const auto s = DissipationSchedule::jaynes_cummings(k0, m, 1e6);
    CHECK(s.regime() != Regime::Critical);
    for (int i = 1; i <= 500; ++i) {
      const double t = (10.0 / k0) * i / 500.0;
      const double limit = 2 * m * k0 * t / (2 + m * t);
      CHECK(std::abs(kappa_at(t, s) - limit) / limit < 1e-4);
    }
  }
  const auto crit = DissipationSchedule::jaynes_cummings(k0, 2 * k0, 1e6);
  CHECK(kappa_at(1.0, crit) == doctest::Approx(2 * 5.4 * 2.7 / (2 + 5.4)));
}

TEST_CASE("noisy kappa") {
  const auto s = DissipationSchedule::jaynes_cummings(2.7, 0.675, 5);
  SUBCASE("zero amplitude reduces to kappa") {
    const NoiseSettings quiet{0.0, 3, 0.01};
    for (int i = 0; i < 100; ++i) CHECK(noisy_kappa_at(0.137 * i, s, quiet) == kappa_at(0.137 * i, s));
  }
  SUBCASE("bounded by a0") {
    const NoiseSettings noise{0.5, 9, 0.01};
    for (int i = 0; i < 1000; ++i) {
      const double t = 0.0173 * i;
      const double k = kappa_at(t, s);
      const double nk = noisy_kappa_at(t, s, noise);
      CHECK(nk >= k - 0.5);
      CHECK(nk <= k + 0.5);
    }
  }
  SUBCASE("frozen fixture") {
    // Values from a separate scalar implementation of the rate plus a SplitMix64 stream.
    const NoiseSettings noise{0.5, 42, 0.01};
    const std::pair<double, double> fixture[] = {
        {0.0, 0.2415648787718233},  {0.37, 0.3857104076001392},   {0.74, 1.5241799473884776},
        {1.1099999999999999, 1.6067631216355966}, {1.48, 3.409358769815379}, {1.85, 5.3988177607630226},
        {2.2199999999999998, 5.38618976322845}, {2.59, -3.994037559444479}, {2.96, -1.5039090127995434},
        {3.33, -0.4358544050250312}};
    for (const auto& [t, expected] : fixture) CHECK(noisy_kappa_at(t, s, noise) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(noise_draw(42, 0) == doctest::Approx(0.4831297575436466).epsilon(1e-15));
    CHECK(noise_draw(7, 3) == doctest::Approx(0.16586058605615617).epsilon(1e-15));
  }
  SUBCASE("same seed reproduces the sequence") {
    const NoiseSettings a{0.5, 123, 0.05};
    for (int i = 0; i < 100; ++i) CHECK(noisy_kappa_at(0.05 * i, s, a) == noisy_kappa_at(0.05 * i, s, a));
    int differ = 0;
    for (int i = 0; i < 100; ++i) differ += noisy_kappa_at(0.05 * i, s, a) != noisy_kappa_at(0.05 * i, s, {0.5, 124, 0.05});
    CHECK(differ > 90);
  }
}

TEST_CASE("cumulative kappa") {
  CHECK(cumulative_kappa(0.0, DissipationSchedule::jaynes_cummings(2.7, 0.675, 5)) == 0.0);
  CHECK(cumulative_kappa(10.0, DissipationSchedule::constant(0.05)) == doctest::Approx(0.5).epsilon(1e-14));

  // Oracle: 30-digit adaptive quadrature split at the clip edges and the pole.
  const auto nm = DissipationSchedule::jaynes_cummings(2.7, 0.675, 5);
  const auto nm_signed = DissipationSchedule::jaynes_cummings(2.7, 0.675, 5, ClipMode::SignPreserving);
  CHECK(cumulative_kappa(nm_period(nm), nm) == doctest::Approx(10.535847092709550).epsilon(1e-12));
  CHECK(cumulative_kappa(nm_period(nm_signed), nm_signed) == doctest::Approx(3.7071453820568510).epsilon(1e-12));
  CHECK(cumulative_kappa(3.3, nm) == doctest::Approx(5.3139009309930133).epsilon(1e-12));

  auto midpoint = [](const DissipationSchedule& s, double t, int n) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += kappa_at((i + 0.5) * t / n, s);
    return sum * t / n;
  };
  const auto markov = DissipationSchedule::jaynes_cummings(0.05, 10, 5);
  CHECK(cumulative_kappa(20.0, markov) == doctest::Approx(midpoint(markov, 20.0, 200000)).epsilon(1e-8));
}

TEST_CASE("square-wave drive") {
  const auto drive = DriveProtocol::from_frequency(1.0, 1.0, 0.0);
  const double T = drive.period();
  CHECK(T * drive.omega_T() == doctest::Approx(kTwoPi).epsilon(1e-15));
  CHECK(drive_lambda_at(0.25 * T, drive) == 1.0);
  CHECK(drive_lambda_at(0.75 * T, drive) == 0.0);
  CHECK(drive_lambda_at(7.5 * T, drive) == 0.0);
  CHECK(drive_lambda_at(0.0, drive) == 1.0);
  CHECK(drive_lambda_at(0.5 * T, drive) == 0.0);
  for (int i = 0; i < 100; ++i) {
    const double t = 0.0731 * i;
    CHECK(drive_lambda_at(t + T, drive) == drive_lambda_at(t, drive));
  }
}

TEST_CASE("detuned frequencies") {
  const auto f = ModelFrequencies::from_drive(DriveProtocol::from_frequency(1.0, 1.3, 0.02));
  CHECK(f.omega + f.omega0 == doctest::Approx(2.6).epsilon(1e-15));
  CHECK(f.omega == doctest::Approx(0.98 * 1.3));
  const auto g = ModelFrequencies::from_drive(DriveProtocol::from_frequency(1.0, 1.0, 0.0));
  CHECK(g.omega == 1.0);
  CHECK(g.omega0 == 1.0);
}

TEST_CASE("critical coupling") {
  CHECK(critical_coupling(1, 1, 0) == 0.5);
  CHECK(critical_coupling(1, 1, 0.05) == doctest::Approx(0.5 * std::sqrt(1.000625)).epsilon(1e-15));
  CHECK(critical_coupling(1, 1, 0.05) == doctest::Approx(0.500156).epsilon(1e-6));
  CHECK(critical_coupling(1, 1, 2.7) == doctest::Approx(0.840015).epsilon(1e-6));
  CHECK_THROWS_AS(critical_coupling(0, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(critical_coupling(1, -1, 0), std::invalid_argument);
}

TEST_CASE("equations of motion") {
  const ModelFrequencies f{1, 1};
  SUBCASE("normal phase is a fixed point") {
    for (auto v : {EomVariant::Consistent, EomVariant::LiteralSigns}) {
      CHECK(max_norm(eom_rhs_with_coupling(MeanFieldState{}, 1.0, f, 0.05, v)) == 0.0);
    }
  }
  SUBCASE("spin length is a constant of motion") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 200; ++i) {
      MeanFieldState s{nd(rng), nd(rng), nd(rng), nd(rng), nd(rng)};
      for (auto v : {EomVariant::Consistent, EomVariant::LiteralSigns}) {
        const auto ds = eom_rhs_with_coupling(s, 1.3, {0.9, 1.1}, 0.7, v);
        CHECK(std::abs(s.jx * ds.jx + s.jy * ds.jy + s.jz * ds.jz) < 1e-12);
      }
    }
  }
  SUBCASE("time-dependent coupling follows the drive") {
    const auto drive = DriveProtocol::from_frequency(1.0, 1.0, 0.0);
    const auto s = steady_state_closed_form(1.0, f, 0.05, 1);
    CHECK(max_norm(eom_rhs(s, 0.1, drive, f, 0.05, EomVariant::Consistent)) < 1e-12);
    CHECK(max_norm(eom_rhs(s, 4.0, drive, f, 0.05, EomVariant::Consistent)) > 0.1);
  }
}

TEST_CASE("closed-form steady state") {
  const ModelFrequencies f{1, 1};
  const auto s = steady_state_closed_form(1.0, f, 0.05, 1);
  CHECK(s.jx == doctest::Approx(0.968206).epsilon(1e-6));
  CHECK(s.jy == 0.0);
  CHECK(s.jz == doctest::Approx(-0.250156).epsilon(1e-6));
  CHECK(s.x == doctest::Approx(-1.368395).epsilon(1e-6));
  CHECK(s.p == doctest::Approx(-0.034210).epsilon(1e-5));
  CHECK(s.spin_norm() == doctest::Approx(1.0).epsilon(1e-15));

  const double lc = critical_coupling(1, 1, 0.05);
  const auto boundary = steady_state_closed_form(lc, f, 0.05, 1);
  CHECK(std::abs(boundary.jx) < 1e-7);
  CHECK(boundary.jz == doctest::Approx(-1.0));
  CHECK(std::abs(boundary.x) < 1e-7);
  CHECK_THROWS_AS(steady_state_closed_form(0.4, f, 0.05, 1), std::domain_error);
  CHECK_THROWS_AS(steady_state_closed_form(1.0, f, 0.05, 0), std::invalid_argument);

  const auto strong = steady_state_closed_form(1e4, f, 0.05, -1);
  CHECK(std::abs(strong.jz) < 1e-8);
  CHECK(strong.jx == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("closed-form branches are exact fixed points of the consistent equations") {
  for (double k0 : {0.0, 0.05, 1.0, 2.7}) {
    for (double eps : {0.0, 0.02, 0.1}) {
      for (double wT : {0.5, 1.0, 1.35}) {
        const auto f = ModelFrequencies::from_drive(DriveProtocol::from_frequency(1.0, wT, eps));
        const double lc = critical_coupling(f.omega, f.omega0, k0);
        for (double l0 : {1.01 * lc, 1.5 * lc, 4.0 * lc}) {
          const auto a = steady_state_closed_form(l0, f, k0, 1);
          const auto b = steady_state_closed_form(l0, f, k0, -1);
          CHECK(steady_state_residual(a, l0, f, k0, EomVariant::Consistent) < 1e-12);
          CHECK(steady_state_residual(b, l0, f, k0, EomVariant::Consistent) < 1e-12);
          // Parity partners: (x, p, jx) flip, jy and jz unchanged.
          CHECK(b.x == -a.x);
          CHECK(b.p == -a.p);
          CHECK(b.jx == -a.jx);
          CHECK(b.jy == a.jy);
          CHECK(b.jz == a.jz);
        }
      }
    }
  }
}

TEST_CASE("literal printed equations do not hold the closed-form state") {
  const ModelFrequencies f{1, 1};
  const auto s = steady_state_closed_form(1.0, f, 0.05, 1);
  CHECK(steady_state_residual(s, 1.0, f, 0.05, EomVariant::LiteralSigns) > 1e-3);
  CHECK(steady_state_residual(MeanFieldState{}, 1.0, f, 0.05, EomVariant::LiteralSigns) == 0.0);
}

TEST_CASE("non-Markovian period") {
  const auto a = DissipationSchedule::jaynes_cummings(2.7, 0.675, 5);
  CHECK(a.abs_d() == doctest::Approx(1.785883).epsilon(1e-6));
  CHECK(nm_period(a) == doctest::Approx(7.036506143548005).epsilon(1e-12));
  const auto b = DissipationSchedule::jaynes_cummings(2.7, 2.7, 5);
  CHECK(b.abs_d() == doctest::Approx(2.7).epsilon(1e-14));
  CHECK(nm_period(b) == doctest::Approx(4 * M_PI / 2.7).epsilon(1e-14));
  CHECK(nm_period(DissipationSchedule::jaynes_cummings(2.7, 5.4 * (1 - 1e-10), 5)) > 1e4);
  CHECK_THROWS_AS(nm_period(DissipationSchedule::jaynes_cummings(0.05, 10, 5)), std::domain_error);
  CHECK_THROWS_AS(nm_period(DissipationSchedule::jaynes_cummings(2.7, 5.4, 6)), std::domain_error);
  CHECK_THROWS_AS(nm_period(DissipationSchedule::constant(1.0)), std::domain_error);
}
