#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/optimizer.hpp"
#include "mvn/oracles.hpp"
#include "mvn/rng.hpp"

namespace mvn {

/// eta_t = c / (L sqrt(t + 1)).
inline double decaying_stepsize(std::size_t t, double c, double L) {
  return c / (L * std::sqrt(static_cast<double>(t) + 1.0));
}

/// Starting point a * 1 of the sign-collapse lower-bound construction, with
/// a = sum_{t<T} eta_t (1 - beta^{t+1}) + (eta_{T-1} / 2)(1 - beta^T).
/// Chosen so the momentum-smoothed sign recursion stays in the positive
/// orthant and ends at x_T = (eta_{T-1}/2)(1 - beta^T) * 1.
inline std::vector<double> adversarial_init(std::size_t T, double beta, double c, double L,
                                            std::size_t d) {
  if (T == 0) throw ConfigError("T: horizon must be >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta1: must lie in [0, 1)");
  if (!(c > 0.0)) throw ConfigError("c: must be > 0");
  if (!(L > 0.0)) throw ConfigError("L: must be > 0");
  if (d == 0) throw ConfigError("d: dimension must be >= 1");
  double a = 0.0;
  double beta_pow = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    beta_pow *= beta;
    a += decaying_stepsize(t, c, L) * (1.0 - beta_pow);
  }
  a += 0.5 * decaying_stepsize(T - 1, c, L) * (1.0 - beta_pow);
  return std::vector<double>(d, a);
}

struct SeparationResult {
  std::size_t d = 0;
  std::size_t T = 0;
  double min_grad_norm = 0.0;
  std::size_t argmin_t = 0;
  double analytic_value = 0.0;
  double trajectory_match_err = 0.0;
  std::vector<double> grad_norms;  // ||grad F(x_t)||, t = 0..T

  // Sign-collapse arm.
  bool positive_orthant = true;
  bool strictly_decreasing = true;

  // Variance-normalized arm.
  std::vector<double> potentials;     // Phi_t, t = 0..T
  double max_potential_increase = 0.0;  // max_t (Phi_t - Phi_{t-1})
  double max_telescoped_excess = 0.0;   // max_t (Phi_t + (a/2)(1-d^2) sum - Phi_0)
  double alpha = 0.0;
};

/// Momentum-smoothed sign recursion, the low-variance limit of LaProp, on the
/// quadratic F(x) = (L/2)||x||^2 from the adversarial start.
///
/// Runs the deterministic recursion x_t = x_{t-1} - eta_{t-1} u_{t-1} with all
/// signs +1 and the stochastic one driven by sign(g) from `oracle`, and
/// reports their largest coordinate-wise difference. The deterministic
/// momentum is accumulated by the same recursion, so under sign preservation
/// the two trajectories agree bit for bit.
inline SeparationResult run_separation_laprop(std::size_t d, std::size_t T, double beta, double c,
                                              double L, const HighSnrOracle& oracle, Rng& rng) {
  oracle.validate();
  if (oracle.objective.L != L) throw ConfigError("L: oracle objective does not match L");
  std::vector<double> x_det = adversarial_init(T, beta, c, L, d);
  std::vector<double> x_sto = x_det;
  std::vector<double> u_det(d, 0.0);
  std::vector<double> u_sto(d, 0.0);

  SeparationResult res;
  res.d = d;
  res.T = T;
  res.grad_norms.reserve(T + 1);
  res.grad_norms.push_back(oracle.objective.grad_norm(x_sto));

  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  for (std::size_t t = 1; t <= T; ++t) {
    const double eta = decaying_stepsize(t - 1, c, L);
    const std::vector<double> g = sample_high_snr(oracle, x_sto, rng);
    for (std::size_t i = 0; i < d; ++i) {
      u_det[i] = beta * u_det[i] + (1.0 - beta) * 1.0;
      x_det[i] -= eta * u_det[i];
      u_sto[i] = beta * u_sto[i] + (1.0 - beta) * sign(g[i]);
      x_sto[i] -= eta * u_sto[i];
      res.trajectory_match_err = std::max(res.trajectory_match_err, std::abs(x_det[i] - x_sto[i]));
      if (!(x_sto[i] > 0.0)) res.positive_orthant = false;
    }
    const double norm = oracle.objective.grad_norm(x_sto);
    if (!(norm < res.grad_norms.back())) res.strictly_decreasing = false;
    res.grad_norms.push_back(norm);
  }

  const auto it = std::min_element(res.grad_norms.begin(), res.grad_norms.end());
  res.min_grad_norm = *it;
  res.argmin_t = static_cast<std::size_t>(it - res.grad_norms.begin());
  res.analytic_value = 0.5 * L * (1.0 - std::pow(beta, static_cast<double>(T))) *
                       decaying_stepsize(T - 1, c, L) * std::sqrt(static_cast<double>(d));
  return res;
}

/// alpha = eta (1 - beta1) / sigma must satisfy alpha <= (1 - beta1^2) / L.
inline double checked_heavy_ball_alpha(double beta1, double eta, double sigma, double L) {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1: must lie in [0, 1)");
  if (!(eta > 0.0)) throw ConfigError("eta: must be > 0");
  if (!(sigma > 0.0)) throw ConfigError("sigma: must be > 0");
  if (!(L > 0.0)) throw ConfigError("L: must be > 0");
  const double alpha = eta * (1.0 - beta1) / sigma;
  const double limit = (1.0 - beta1 * beta1) / L;
  if (alpha > limit) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "alpha: stepsize condition alpha <= (1-beta1^2)/L violated (alpha = eta*(1-beta1)/sigma = "
        << alpha << " > " << limit << ")";
    throw ConfigError(msg.str());
  }
  return alpha;
}

/// MVN-Grad in the stabilized low-variance regime: the variance normalizer is
/// pinned at sigma^2 and the update reduces to the heavy-ball recursion
/// x_t = x_{t-1} + beta1 (x_{t-1} - x_{t-2}) - alpha g_t with x_{-1} = x_0.
///
/// Both forms are run side by side on the same noise draws: the heavy-ball
/// recursion, and the literal optimizer step with a frozen normalizer.
/// `trajectory_match_err` is their largest coordinate-wise difference. The
/// potential Phi_t = F(x_t) + (beta1^2 / 2 alpha)||x_t - x_{t-1}||^2 is
/// tracked on the heavy-ball trajectory. x_0 = x0_scale * 1.
inline SeparationResult run_separation_mvn(std::size_t d, std::size_t T, double beta1, double eta,
                                           double sigma, double L, const HighSnrOracle& oracle,
                                           Rng& rng, double x0_scale = 1.0) {
  oracle.validate();
  if (oracle.objective.L != L) throw ConfigError("L: oracle objective does not match L");
  if (d == 0) throw ConfigError("d: dimension must be >= 1");
  if (T == 0) throw ConfigError("T: horizon must be >= 1");
  const double alpha = checked_heavy_ball_alpha(beta1, eta, sigma, L);
  const QuadraticObjective& F = oracle.objective;

  std::vector<double> x_hb(d, x0_scale);
  std::vector<double> x_hb_prev = x_hb;
  std::vector<double> x_lit = x_hb;
  std::vector<double> x_next(d);
  std::vector<double> g_lit(d);
  std::vector<double> delta(d);

  HyperParams hp;
  hp.eta = eta;
  hp.beta1 = beta1;
  hp.beta2 = 0.0;
  hp.eps = 0.0;
  hp.eps_s = 0.0;
  OptimizerState state = init_state(d, sigma * sigma);
  const StepOptions pinned{false, true};

  SeparationResult res;
  res.d = d;
  res.T = T;
  res.alpha = alpha;
  res.max_potential_increase = -std::numeric_limits<double>::infinity();
  res.max_telescoped_excess = -std::numeric_limits<double>::infinity();
  res.grad_norms.push_back(F.grad_norm(x_hb));
  res.potentials.push_back(F.value(x_hb));
  const double phi0 = res.potentials.front();
  const double descent_weight = 0.5 * alpha * (1.0 - oracle.delta * oracle.delta);
  double grad_sq_sum = 0.0;

  for (std::size_t t = 1; t <= T; ++t) {
    const std::vector<double> g_hb = sample_high_snr(oracle, x_hb, rng);
    double step_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = g_hb[i] - L * x_hb[i];
      g_lit[i] = L * x_lit[i] + xi;
      x_next[i] = x_hb[i] + beta1 * (x_hb[i] - x_hb_prev[i]) - alpha * g_hb[i];
      step_sq += (x_next[i] - x_hb[i]) * (x_next[i] - x_hb[i]);
    }
    const double g_prev_norm = res.grad_norms.back();
    grad_sq_sum += g_prev_norm * g_prev_norm;

    apply_step(state, x_lit, g_lit, delta, hp, OptimizerKind::mvn_grad(), pinned);
    x_hb_prev.swap(x_hb);
    x_hb = x_next;
    for (std::size_t i = 0; i < d; ++i) {
      res.trajectory_match_err = std::max(res.trajectory_match_err, std::abs(x_hb[i] - x_lit[i]));
    }

    const double phi = F.value(x_hb) + beta1 * beta1 / (2.0 * alpha) * step_sq;
    res.max_potential_increase = std::max(res.max_potential_increase, phi - res.potentials.back());
    res.max_telescoped_excess =
        std::max(res.max_telescoped_excess, phi + descent_weight * grad_sq_sum - phi0);
    res.potentials.push_back(phi);
    res.grad_norms.push_back(F.grad_norm(x_hb));
  }

  const auto it = std::min_element(res.grad_norms.begin(), res.grad_norms.end());
  res.min_grad_norm = *it;
  res.argmin_t = static_cast<std::size_t>(it - res.grad_norms.begin());
  res.analytic_value = std::sqrt(2.0 * phi0 / (alpha * (1.0 - oracle.delta * oracle.delta) *
                                               static_cast<double>(T)));
  return res;
}

}  // namespace mvn
