#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/optimizer.hpp"
#include "mvn/optimizer_kind.hpp"
#include "mvn/oracles.hpp"

namespace mvn {

/// Forgetting time: the smallest t >= 1 with (1 - beta2) beta2^t M^2 <= 1.
/// Computed by repeated multiplication rather than logarithms so boundary
/// cases are classified exactly as the inequality is evaluated. The cap of
/// 1e8 iterations covers M <= 1e9 with beta2 <= 0.999999.
inline std::size_t t_star(double M, double beta2) {
  if (!std::isfinite(M) || M < 1.0) throw ConfigError("t_star: M must be >= 1");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("t_star: beta2 must lie in (0, 1)");
  constexpr std::size_t kCap = 100'000'000;
  const double scale = (1.0 - beta2) * M * M;
  double power = 1.0;
  for (std::size_t t = 1; t <= kCap; ++t) {
    power *= beta2;
    if (scale * power <= 1.0) return t;
  }
  throw ConfigError("t_star: exceeded iteration cap of 1e8");
}

struct SpikeMoments {
  double m = 0.0;
  double v = 0.0;
};

/// Closed-form raw moments of the second-moment recursions under the spike
/// model, with m_{-1} = 0 and v_{-1} = d_bar:
///   m_t = (1-b1) b1^t M u + (1 - b1^t) u
///   v_t = b2^{t+1} d_bar + (1-b2) b2^t M^2 u^2 + (1 - b2^t) u^2
inline SpikeMoments spike_closed_form_moments(const SpikeModel& model, const HyperParams& hp,
                                              std::size_t t) {
  if (t > model.T) throw ConfigError("spike_closed_form_moments: t exceeds horizon");
  const double td = static_cast<double>(t);
  const double b1t = std::pow(hp.beta1, td);
  const double b2t = std::pow(hp.beta2, td);
  const double mu = model.M * model.u;
  const double u2 = model.u * model.u;
  SpikeMoments out;
  out.m = (1.0 - hp.beta1) * b1t * mu + (1.0 - b1t) * model.u;
  out.v = b2t * hp.beta2 * model.d_bar + (1.0 - hp.beta2) * b2t * mu * mu + (1.0 - b2t) * u2;
  return out;
}

struct SpikeTracePoint {
  std::size_t t = 0;
  double delta = 0.0;
  double m = 0.0;
  double r = 0.0;
};

struct SpikeOptions {
  bool bias_correction = false;
  bool record_trajectory = false;
};

struct SpikeRunResult {
  OptimizerKind kind;
  double M = 0.0;
  double peak_update = 0.0;
  std::size_t peak_time = 0;
  std::optional<std::size_t> t_star;
  std::optional<double> analytic_bound;
  bool bias_correction = false;
  std::vector<SpikeTracePoint> trajectory;

  /// Adam only: largest relative deviation of simulated (m_t, v_t) from the
  /// closed forms. Only meaningful for raw recursions with eps_s = 0.
  std::optional<double> closed_form_max_rel_err;
  /// Adam only, when t* <= T: |delta_{t*}| and the lower bound
  /// |u| / (2 sqrt(d_bar + 2 u^2) + 2 eps) * (1-b1) b1^{t*} M.
  std::optional<double> delta_at_t_star;
  std::optional<double> lower_bound_at_t_star;

  /// Whether the run satisfies every assertion that applies to its kind.
  [[nodiscard]] bool bound_ok() const {
    return !analytic_bound || peak_update <= *analytic_bound;
  }
  [[nodiscard]] bool closed_form_ok(double rel_tol = 1e-10) const {
    return !closed_form_max_rel_err || *closed_form_max_rel_err <= rel_tol;
  }
};

inline double relative_error(double actual, double expected) {
  const double scale = std::max(std::abs(expected), std::numeric_limits<double>::min());
  return std::abs(actual - expected) / scale;
}

/// Feeds the spike sequence g_0 .. g_T through one optimizer started from
/// m = u = 0, r = d_bar and records the peak |delta| (first attainment on
/// ties). Analytic bounds come from `update_bound`.
inline SpikeRunResult run_spike(const SpikeModel& model, const HyperParams& hp, OptimizerKind kind,
                                SpikeOptions opts = {}) {
  model.validate();
  hp.validate();

  SpikeRunResult res;
  res.kind = kind;
  res.M = model.M;
  res.bias_correction = opts.bias_correction;
  if (kind == OptimizerKind::adam()) {
    if (hp.beta2 > 0.0) res.t_star = t_star(model.M, hp.beta2);
  }
  if (!opts.bias_correction && hp.eps > 0.0) {
    res.analytic_bound = update_bound(kind, hp, std::abs(model.u), model.d_bar);
  }
  const bool check_closed_form =
      kind == OptimizerKind::adam() && !opts.bias_correction && hp.eps_s == 0.0 &&
      hp.decay_mode == DecayMode::None;
  if (check_closed_form) res.closed_form_max_rel_err = 0.0;

  OptimizerState state = init_state(1, model.d_bar);
  std::vector<double> params{0.0};
  std::vector<double> grad{0.0};
  std::vector<double> delta{0.0};
  const StepOptions step_opts{opts.bias_correction, false};
  if (opts.record_trajectory) res.trajectory.reserve(model.T + 1);

  for (std::size_t t = 0; t <= model.T; ++t) {
    grad[0] = spike_gradient(model, t);
    apply_step(state, params, grad, delta, hp, kind, step_opts);
    const double mag = std::abs(delta[0]);
    if (t == 0 || mag > res.peak_update) {
      res.peak_update = mag;
      res.peak_time = t;
    }
    if (opts.record_trajectory) res.trajectory.push_back({t, delta[0], state.m[0], state.r[0]});
    if (check_closed_form) {
      const SpikeMoments cf = spike_closed_form_moments(model, hp, t);
      const double err = std::max(relative_error(state.m[0], cf.m), relative_error(state.r[0], cf.v));
      *res.closed_form_max_rel_err = std::max(*res.closed_form_max_rel_err, err);
    }
    if (res.t_star && *res.t_star == t) res.delta_at_t_star = mag;
  }

  if (res.delta_at_t_star) {
    const double ts = static_cast<double>(*res.t_star);
    const double c = std::abs(model.u) /
                     (2.0 * std::sqrt(model.d_bar + 2.0 * model.u * model.u) + 2.0 * hp.eps);
    res.lower_bound_at_t_star = c * (1.0 - hp.beta1) * std::pow(hp.beta1, ts) * model.M;
  }
  return res;
}

}  // namespace mvn
