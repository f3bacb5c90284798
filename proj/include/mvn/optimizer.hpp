#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/optimizer_kind.hpp"

namespace mvn {

/// Per-coordinate EMA buffers of an Adam-family optimizer.
///
/// `m` is the gradient EMA, `r` the normalizer EMA (v for second-moment
/// kinds, s for variance kinds) and `u` the post-normalization momentum
/// buffer, which stays zero for momentum-then-normalize kinds.
struct OptimizerState {
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> r;
  std::vector<double> u;

  [[nodiscard]] std::size_t dim() const { return m.size(); }
};

struct StepOutput {
  std::vector<double> delta;       // bias-corrected direction, before eta
  std::vector<double> new_params;  // after -eta*delta and any decoupled decay
};

struct StepResult {
  OptimizerState state;
  StepOutput output;
};

/// Behavioral switches that are not hyperparameters.
struct StepOptions {
  /// When false, c_m = c_v = 1 (the raw recursions used in the spike analysis).
  bool bias_correction = true;
  /// When true the normalizer is left untouched (r' = r). Used to pin the
  /// variance estimate in the stabilized low-noise regime.
  bool freeze_normalizer = false;
};

/// `r_init` seeds the normalizer EMA; zero for ordinary training, a positive
/// baseline for spike experiments.
inline OptimizerState init_state(std::size_t d, double r_init = 0.0) {
  if (d == 0) throw ConfigError("init_state: dimension must be >= 1");
  if (!std::isfinite(r_init) || r_init < 0.0) {
    throw ConfigError("init_state: r_init must be finite and >= 0");
  }
  OptimizerState state;
  state.m.assign(d, 0.0);
  state.r.assign(d, r_init);
  state.u.assign(d, 0.0);
  return state;
}

namespace detail {

inline void check_step_inputs(const OptimizerState& state, std::span<const double> params,
                              std::span<const double> grad, std::span<const double> delta_out) {
  const std::size_t d = state.dim();
  if (d == 0 || state.r.size() != d || state.u.size() != d) {
    throw ConfigError("step: optimizer state buffers are inconsistent");
  }
  if (params.size() != d || grad.size() != d || delta_out.size() != d) {
    throw ConfigError("step: dimension mismatch (state " + std::to_string(d) + ", params " +
                      std::to_string(params.size()) + ", grad " + std::to_string(grad.size()) +
                      ")");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(params[i]) || !std::isfinite(grad[i])) {
      throw NumericError("step: non-finite input at coordinate " + std::to_string(i));
    }
  }
}

}  // namespace detail

/// In-place form of `step`: advances `state`, overwrites `params` with the new
/// parameters and writes the update direction into `delta_out`.
///
/// Inputs are validated before anything is written, so on error `state` and
/// `params` are unchanged.
inline void apply_step(OptimizerState& state, std::span<double> params,
                       std::span<const double> grad, std::span<double> delta_out,
                       const HyperParams& hp, OptimizerKind kind, StepOptions opts = {}) {
  hp.validate();
  detail::check_step_inputs(state, params, grad, delta_out);
  const std::size_t d = state.dim();
  const bool coupled = hp.decay_mode == DecayMode::Coupled;
  const std::uint64_t t_next = state.t + 1;

  double c_m = 1.0;
  double c_v = 1.0;
  if (opts.bias_correction) {
    c_m = 1.0 - std::pow(hp.beta1, static_cast<double>(t_next));
    c_v = 1.0 - std::pow(hp.beta2, static_cast<double>(t_next));
  }

  auto effective_grad = [&](std::size_t i) {
    return coupled ? grad[i] + hp.lambda * params[i] : grad[i];
  };
  auto next_m = [&](std::size_t i, double g) {
    return hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
  };
  auto next_r = [&](std::size_t i, double g, double m_new) {
    if (opts.freeze_normalizer) return state.r[i];
    const double dev = kind.variance_normalized() ? g - m_new : g;
    return hp.beta2 * state.r[i] + (1.0 - hp.beta2) * dev * dev + hp.eps_s;
  };

  // A zero denominator needs eps == 0 and r' == 0; find it before mutating.
  if (hp.eps == 0.0) {
    for (std::size_t i = 0; i < d; ++i) {
      const double g = effective_grad(i);
      if (next_r(i, g, next_m(i, g)) == 0.0) {
        throw NumericError("step: zero denominator at coordinate " + std::to_string(i) +
                           " (eps = 0 and normalizer = 0)");
      }
    }
  }

  for (std::size_t i = 0; i < d; ++i) {
    const double g = effective_grad(i);
    const double m_new = next_m(i, g);
    const double r_new = next_r(i, g, m_new);
    const double denom = std::sqrt(r_new / c_v) + hp.eps;

    double delta = 0.0;
    if (kind.normalize_first()) {
      const double z = g / denom;
      state.u[i] = hp.beta1 * state.u[i] + (1.0 - hp.beta1) * z;
      delta = state.u[i] / c_m;
    } else {
      delta = (m_new / c_m) / denom;
    }
    state.m[i] = m_new;
    state.r[i] = r_new;
    delta_out[i] = delta;

    const double x = params[i];
    double x_new = x - hp.eta * delta;
    if (hp.decay_mode == DecayMode::Decoupled) x_new -= hp.eta * hp.lambda * x;
    params[i] = x_new;
  }
  state.t = t_next;
}

/// Pure state transition: returns the advanced state together with the update
/// direction and the new parameters. Identical inputs give bit-identical
/// outputs.
inline StepResult step(OptimizerState state, std::span<const double> params,
                       std::span<const double> grad, const HyperParams& hp, OptimizerKind kind,
                       StepOptions opts = {}) {
  StepOutput out;
  out.new_params.assign(params.begin(), params.end());
  out.delta.assign(params.size(), 0.0);
  apply_step(state, out.new_params, grad, out.delta, hp, kind, opts);
  return {std::move(state), std::move(out)};
}

/// M-independent bound on |delta| under the single-spike model (g_0 = M u,
/// g_t = u afterwards, r initialized to d_bar > 0), evaluated without bias
/// correction.
///
/// LaProp: max{1/sqrt(1-beta2), |u|/eps}. MVN-Grad: max{1/(beta1 sqrt(1-beta2)),
/// |u|/eps}. Adam: the gradient-independent bound
/// (1-beta1)/sqrt(1-beta2) / sqrt(1-beta1^2/beta2), available only when
/// beta2 > beta1^2. AdaBelief has no such bound and yields nullopt, as does
/// MVN-Grad with beta1 = 0.
inline std::optional<double> update_bound(OptimizerKind kind, const HyperParams& hp, double u_mag,
                                          double r_init) {
  hp.validate();
  if (!std::isfinite(u_mag) || u_mag < 0.0) throw ConfigError("update_bound: u_mag must be >= 0");
  if (!std::isfinite(r_init) || r_init < 0.0) {
    throw ConfigError("update_bound: r_init must be >= 0");
  }
  if (kind == OptimizerKind::adabelief()) return std::nullopt;
  if (kind == OptimizerKind::adam()) {
    const double rho = hp.beta1 * hp.beta1;
    if (!(hp.beta2 > rho)) return std::nullopt;
    return (1.0 - hp.beta1) / std::sqrt(1.0 - hp.beta2) / std::sqrt(1.0 - rho / hp.beta2);
  }
  double spike_term = 1.0 / std::sqrt(1.0 - hp.beta2);
  if (kind == OptimizerKind::mvn_grad()) {
    // With beta1 = 0 the centered spike g_0 - m_0 vanishes and the first step
    // grows linearly in M.
    if (hp.beta1 == 0.0) return std::nullopt;
    spike_term /= hp.beta1;
  }
  if (u_mag == 0.0) return spike_term;
  if (hp.eps == 0.0) throw ConfigError("update_bound: bound requires eps>0");
  return std::max(spike_term, u_mag / hp.eps);
}

}  // namespace mvn
