#include "dtc/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dtc {

void SimulationConfig::validate() const {
  if (steps_per_period < 2 || steps_per_period % 2 != 0) {
    throw std::invalid_argument("steps_per_period must be even and at least 2");
  }
  if (periods_total < 1) throw std::invalid_argument("periods_total must be positive");
  if (periods_recorded < 0 || periods_recorded > periods_total) {
    throw std::invalid_argument("periods_recorded must lie in [0, periods_total]");
  }
  if (dense_periods < 0 || dense_periods > periods_total) {
    throw std::invalid_argument("dense_periods must lie in [0, periods_total]");
  }
  if (!(norm_tolerance > 0.0)) throw std::invalid_argument("norm_tolerance must be positive");
  if (noise) {
    if (!(noise->a0 >= 0.0) || !std::isfinite(noise->a0)) throw std::invalid_argument("noise a0 must be nonnegative");
    if (!(noise->resample_interval >= 0.0)) throw std::invalid_argument("noise resample interval must be nonnegative");
    if (noise->resample_interval > 0.0) {
      const double ratio = noise->resample_interval / step_size();
      if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
        throw std::invalid_argument("noise resample interval must be a whole number of integrator steps");
      }
    }
  }
  if (const auto* s = std::get_if<MeanFieldState>(&initial); s && !s->is_finite()) {
    throw std::invalid_argument("initial state must be finite");
  }
  if (const auto* b = std::get_if<SteadyStateBranch>(&initial); b && b->branch != 1 && b->branch != -1) {
    throw std::invalid_argument("steady-state branch must be +1 or -1");
  }
}

MeanFieldState initial_state(const SimulationConfig& config) {
  if (const auto* s = std::get_if<MeanFieldState>(&config.initial)) return *s;
  const int branch = std::get<SteadyStateBranch>(config.initial).branch;
  return steady_state_closed_form(config.drive.lambda0(), config.frequencies(), config.schedule.kappa0(), branch);
}

SimulationResult simulate(const SimulationConfig& config) {
  config.validate();

  const int steps = config.steps_per_period;
  const int half_steps = steps / 2;
  const double period = config.drive.period();
  const double h = config.step_size();
  const ModelFrequencies freqs = config.frequencies();
  const DissipationSchedule& schedule = config.schedule;
  const bool constant_rate = schedule.regime() == Regime::ConstantMarkovian;

  const bool noisy = config.noise && config.noise->a0 > 0.0;
  const double a0 = noisy ? config.noise->a0 : 0.0;
  const std::uint64_t seed = noisy ? config.noise->seed : 0;
  std::uint64_t steps_per_draw = 1;
  if (noisy && config.noise->resample_interval > 0.0) {
    steps_per_draw = static_cast<std::uint64_t>(std::llround(config.noise->resample_interval / h));
  }

  const int first_strobe = config.periods_total - config.periods_recorded;
  const int first_dense = config.periods_total - config.effective_dense_periods();

  SimulationResult result;
  result.trajectory.config = config;
  auto& samples = result.trajectory.samples;
  if (config.record_dense) {
    samples.reserve(static_cast<std::size_t>(config.effective_dense_periods()) * steps + 1);
  }
  result.strobe.points.reserve(static_cast<std::size_t>(config.periods_recorded) + 1);

  MeanFieldState state = initial_state(config);
  const double norm0 = state.spin_norm();
  double max_drift = 0.0;

  // When the rate repeats with the drive period, tabulate it once on the half-step grid of a
  // single period; later periods reuse the table instead of re-evaluating the trig ratio.
  std::vector<double> rate_table;
  if (schedule.regime() == Regime::NonMarkovian) {
    const double repeats = period * schedule.abs_d() / kTwoPi;
    if (std::abs(repeats - std::round(repeats)) < 1e-12 * std::max(1.0, repeats) && std::round(repeats) >= 1.0) {
      rate_table.resize(2 * static_cast<std::size_t>(steps) + 1);
      for (std::size_t k = 0; k < rate_table.size(); ++k) rate_table[k] = kappa_at(0.5 * h * k, schedule);
    }
  }
  auto base_kappa = [&](double t) { return constant_rate ? schedule.kappa0() : kappa_at(t, schedule); };
  // Rate at half-step k of the current period.
  auto grid_kappa = [&](int n, int k) {
    if (!rate_table.empty()) return rate_table[k];
    if (k == 2 * steps) return base_kappa((n + 1) * period);
    return base_kappa(n * period + 0.5 * h * k);
  };

  const std::vector<double> breaks = kappa_breakpoints(schedule);
  const double break_period = breaks.empty() ? 0.0 : kTwoPi / schedule.abs_d();
  // Break times within this distance of a grid point are treated as lying on it.
  const double break_margin = 1e-9 * h;
  std::vector<double> inner_breaks;

  double kappa_begin = base_kappa(0.0);
  std::uint64_t global_step = 0;

  for (int n = 0; n < config.periods_total; ++n) {
    if (n >= first_strobe) result.strobe.points.push_back({n, state});
    const double period_start = n * period;
    const bool dense = config.record_dense && n >= first_dense;

    for (int i = 0; i < steps; ++i, ++global_step) {
      const double t0 = period_start + i * h;
      const double t1 = (i + 1 == steps) ? (n + 1) * period : period_start + (i + 1) * h;
      const double lambda = i < half_steps ? config.drive.lambda0() : 0.0;
      const double noise_term = noisy ? a0 * noise_draw(seed, global_step / steps_per_draw) : 0.0;
      const double kappa_mid = grid_kappa(n, 2 * i + 1);
      const double kappa_end = grid_kappa(n, 2 * i + 2);
      const double stage_kappa[4] = {kappa_begin + noise_term, kappa_mid + noise_term, kappa_mid + noise_term,
                                     kappa_end + noise_term};

      if (dense) samples.push_back({t0, state, stage_kappa[0], lambda});

      const double phase = breaks.empty() ? 0.0 : t0 - break_period * std::floor(t0 / break_period);
      inner_breaks.clear();
      for (double c : breaks) {
        for (double shift : {-break_period, 0.0, break_period}) {
          const double offset = c + shift - phase;
          if (offset > break_margin && offset < h - break_margin) inner_breaks.push_back(t0 + offset);
        }
      }

      if (inner_breaks.empty()) {
        int stage = 0;
        auto rhs = [&](const MeanFieldState& s, double) {
          return eom_rhs_with_coupling(s, lambda, freqs, stage_kappa[stage++], config.variant);
        };
        state = rk4_step(state, t0, h, rhs);
      } else {
        // The clipped rate jumps inside this step; integrate each smooth piece on its own,
        // taking one-sided rate values at the piece ends.
        std::sort(inner_breaks.begin(), inner_breaks.end());
        inner_breaks.push_back(t1);
        double a = t0;
        for (double b : inner_breaks) {
          const double width = b - a;
          const double nudge = 1e-9 * width;
          const double piece_kappa[4] = {kappa_at(a + nudge, schedule) + noise_term,
                                         kappa_at(a + 0.5 * width, schedule) + noise_term,
                                         kappa_at(a + 0.5 * width, schedule) + noise_term,
                                         kappa_at(b - nudge, schedule) + noise_term};
          int stage = 0;
          auto rhs = [&](const MeanFieldState& s, double) {
            return eom_rhs_with_coupling(s, lambda, freqs, piece_kappa[stage++], config.variant);
          };
          state = rk4_step(state, a, width, rhs);
          a = b;
        }
      }

      const double drift = std::abs(state.spin_norm() - norm0);
      if (drift > max_drift) max_drift = drift;
      if (drift > config.norm_tolerance) {
        throw SimulationError("spin-norm drift " + std::to_string(drift) + " exceeds tolerance at t = " +
                              std::to_string(t1));
      }
      kappa_begin = kappa_end;
    }
  }

  const double t_final = config.periods_total * period;
  result.strobe.points.push_back({config.periods_total, state});
  if (config.record_dense) {
    const double noise_term = noisy ? a0 * noise_draw(seed, global_step / steps_per_draw) : 0.0;
    samples.push_back({t_final, state, kappa_begin + noise_term, config.drive.lambda0()});
  }

  result.trajectory.stats = {global_step, h, max_drift, norm0, state};
  return result;
}

MeanFieldState relax_to_steady_state(const MeanFieldState& initial, double lambda0, const ModelFrequencies& f,
                                     double kappa0, const RelaxOptions& options) {
  if (options.steps_per_period < 1) throw std::invalid_argument("relax: steps_per_period must be positive");
  const double h = kTwoPi / f.omega / options.steps_per_period;
  auto rhs = [&](const MeanFieldState& s, double) {
    return eom_rhs_with_coupling(s, lambda0, f, kappa0, EomVariant::Consistent);
  };
  MeanFieldState state = initial;
  double t = 0.0;
  for (long period = 0; period < options.max_periods; ++period) {
    const MeanFieldState start = state;
    for (int i = 0; i < options.steps_per_period; ++i) {
      state = rk4_step(state, t, h, rhs);
      t += h;
    }
    if (max_norm(state - start) < options.tolerance) return state;
  }
  throw SimulationError("relax_to_steady_state: no convergence after " + std::to_string(options.max_periods) +
                        " periods");
}

}  // namespace dtc
