#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/optimizer.hpp"
#include "mvn/optimizer_kind.hpp"
#include "mvn/oracles.hpp"
#include "mvn/rng.hpp"
#include "mvn/stats.hpp"

namespace mvn {

/// Frozen scalar optimizer state shared by the AdaBelief and MVN-Grad arms.
struct FrozenScalarState {
  double m_prev = 0.0;
  double s_prev = 0.0;
  double u_prev = 0.0;
};

/// One-step raw (uncorrected) updates from a frozen state for one gradient
/// draw: first = AdaBelief, second = MVN-Grad.
inline std::pair<double, double> one_step_updates(const FrozenScalarState& frozen,
                                                  const HyperParams& hp, double g) {
  const StepOptions raw{false, false};
  double x = 0.0;
  double delta_ab = 0.0;
  double delta_mv = 0.0;
  const double grad[1] = {g};

  OptimizerState ab{0, {frozen.m_prev}, {frozen.s_prev}, {0.0}};
  apply_step(ab, std::span<double>(&x, 1), grad, std::span<double>(&delta_ab, 1), hp,
             OptimizerKind::adabelief(), raw);
  x = 0.0;
  OptimizerState mv{0, {frozen.m_prev}, {frozen.s_prev}, {frozen.u_prev}};
  apply_step(mv, std::span<double>(&x, 1), grad, std::span<double>(&delta_mv, 1), hp,
             OptimizerKind::mvn_grad(), raw);
  return {delta_ab, delta_mv};
}

/// Analytic conditional variance gap under mean tracking (m_prev = mu) and
/// symmetric noise: (2 b1 - b1^2) m_prev^2 Var(1 / (sqrt(s_t) + eps)), where
/// s_t = b2 s_prev + (1-b2) b1^2 (g - m_prev)^2 + eps_s. The variance of the
/// reciprocal root is estimated from `n_inner` draws.
inline double vgap_closed_form(double m_prev, double s_prev, const SymmetricNoiseModel& noise,
                               const HyperParams& hp, Rng& rng, std::size_t n_inner) {
  hp.validate();
  noise.validate();
  if (noise.mu.size() != 1) throw ConfigError("vgap_closed_form: noise model must be scalar");
  if (n_inner < 2) throw ConfigError("vgap_closed_form: n_inner must be >= 2");
  const double factor = 2.0 * hp.beta1 - hp.beta1 * hp.beta1;
  if (factor == 0.0 || m_prev == 0.0) return 0.0;

  std::vector<double> y(n_inner);
  for (auto& yi : y) {
    const double z = noise.mu[0] + noise.draw_noise(0, rng) - m_prev;
    const double s_t =
        hp.beta2 * s_prev + (1.0 - hp.beta2) * hp.beta1 * hp.beta1 * z * z + hp.eps_s;
    yi = 1.0 / (std::sqrt(s_t) + hp.eps);
  }
  return factor * m_prev * m_prev * sample_variance(y);
}

/// Population gap Var(delta_AB) - Var(delta_MV) for a discrete gradient law,
/// computed by enumerating its outcomes. Requires no symmetry.
inline double exact_variance_gap(const FrozenScalarState& frozen, const HyperParams& hp,
                                 std::span<const double> outcomes,
                                 std::span<const double> probs) {
  if (outcomes.size() != probs.size() || outcomes.empty()) {
    throw ConfigError("exact_variance_gap: outcomes and probabilities must match");
  }
  double ea = 0.0, ea2 = 0.0, eb = 0.0, eb2 = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto [a, b] = one_step_updates(frozen, hp, outcomes[i]);
    ea += probs[i] * a;
    ea2 += probs[i] * a * a;
    eb += probs[i] * b;
    eb2 += probs[i] * b * b;
  }
  return (ea2 - ea * ea) - (eb2 - eb * eb);
}

/// Monte Carlo estimate of the one-step conditional variance gap from K
/// gradient draws produced by `draw()`.
template <class Sampler>
GapEstimate sample_variance_gap(const FrozenScalarState& frozen, const HyperParams& hp,
                                Sampler&& draw, std::size_t K) {
  if (K < 2) throw ConfigError("K: need at least 2 draws");
  std::vector<double> ab(K);
  std::vector<double> mv(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::tie(ab[k], mv[k]) = one_step_updates(frozen, hp, draw());
  }
  return variance_gap(ab, mv);
}

struct VGapResult {
  double m_prev = 0.0;
  double mc_gap = 0.0;
  double mc_stderr = 0.0;
  double closed_form_gap = 0.0;
  std::size_t K = 0;
  double var_ab = 0.0;
  double var_mv = 0.0;

  /// |mc_gap - closed_form_gap| <= z * mc_stderr, plus a rounding allowance of
  /// 1e-12 (var_ab + var_mv) for samples whose true gap is exactly zero.
  [[nodiscard]] bool agrees(double z = 4.0) const {
    return std::abs(mc_gap - closed_form_gap) <= z * mc_stderr + 1e-12 * (var_ab + var_mv);
  }
};

/// Draws K gradients from `noise`, forms the AdaBelief and MVN-Grad one-step
/// updates from the same frozen state and compares the difference of their
/// sample variances with `vgap_closed_form` (evaluated on an independent
/// substream with `n_inner` draws).
inline VGapResult vgap_monte_carlo(double m_prev, double s_prev, double u_prev,
                                   const SymmetricNoiseModel& noise, const HyperParams& hp,
                                   Rng& rng, std::size_t K, std::size_t n_inner = 1'000'000) {
  noise.validate();
  if (noise.mu.size() != 1) throw ConfigError("vgap_monte_carlo: noise model must be scalar");
  const FrozenScalarState frozen{m_prev, s_prev, u_prev};
  Rng inner = rng.substream(0x7a11);
  const GapEstimate est = sample_variance_gap(
      frozen, hp, [&] { return noise.mu[0] + noise.draw_noise(0, rng); }, K);
  VGapResult res;
  res.m_prev = m_prev;
  res.K = K;
  res.mc_gap = est.gap;
  res.mc_stderr = est.std_error;
  res.var_ab = est.var_a;
  res.var_mv = est.var_b;
  res.closed_form_gap = vgap_closed_form(m_prev, s_prev, noise, hp, inner, n_inner);
  return res;
}

}  // namespace mvn
