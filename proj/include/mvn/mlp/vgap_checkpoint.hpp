#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/mlp/dataset.hpp"
#include "mvn/mlp/model.hpp"
#include "mvn/mlp/train.hpp"
#include "mvn/optimizer.hpp"
#include "mvn/optimizer_kind.hpp"
#include "mvn/rng.hpp"
#include "mvn/stats.hpp"
#include "mvn/vgap.hpp"

namespace mvn::mlp {

struct CheckpointVGap {
  std::size_t step = 0;
  /// m_prev holds the mean |m| over parameters; closed_form_gap is the
  /// coordinate-averaged (2 b1 - b1^2) m^2 Var(1/(sqrt(s_t)+eps)) evaluated on
  /// the same K draws.
  VGapResult result;
};

/// Uniform draw of `size` distinct indices from 0..n-1.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t size,
                                                           Rng& rng) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(size);
  return pool;
}

/// Trains with AdaBelief and, at each checkpoint step, freezes
/// (x, m, s) and draws K independent minibatches. For each draw the raw
/// one-step AdaBelief and MVN-Grad updates are formed from the frozen state;
/// the coordinate-wise variance difference is averaged over parameters.
///
/// The MVN-Grad momentum u at the checkpoint comes from a shadow MVN-Grad
/// state fed the same gradients as the trajectory. Its (m, s) coincide with
/// AdaBelief's since those recursions do not depend on the ordering. The
/// conditional variance of the MVN-Grad update does not depend on u.
inline std::vector<CheckpointVGap> vgap_mlp_checkpoint(const Dataset& data, Mlp model,
                                                       const HyperParams& hp, const Rng& rng,
                                                       std::size_t K,
                                                       std::vector<std::size_t> checkpoints,
                                                       std::size_t batch_size) {
  hp.validate();
  data.validate();
  if (K < 2) throw ConfigError("K: need at least 2 minibatch draws");
  if (checkpoints.empty()) throw ConfigError("checkpoints: need at least one checkpoint");
  if (batch_size == 0 || batch_size > data.n()) throw ConfigError("batch_size: must lie in [1, n]");
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  if (checkpoints.front() == 0) throw ConfigError("checkpoints: steps must be >= 1");

  const std::size_t P = model.shape().param_count();
  const std::size_t per_epoch = data.n() / batch_size;
  OptimizerState ab = init_state(P);
  OptimizerState shadow = init_state(P);
  std::vector<double> delta(P);
  std::vector<double> shadow_params(P, 0.0);
  const StepOptions raw{false, false};

  std::vector<CheckpointVGap> out;
  std::vector<std::size_t> perm;
  std::vector<std::size_t> batch(batch_size);
  std::vector<double> draws_ab(K * P);
  std::vector<double> draws_mv(K * P);
  std::vector<double> y(K * P);
  std::vector<double> x(P);

  std::size_t next = 0;
  for (std::size_t s = 0; next < checkpoints.size(); ++s) {
    if (s == checkpoints[next]) {
      // Frozen-state evaluation after s training steps.
      Rng draw_rng = rng.substream(0xc4ec0000ULL + s);
      for (std::size_t k = 0; k < K; ++k) {
        const auto idx = sample_without_replacement(data.n(), batch_size, draw_rng);
        const LossAndGrad lg = forward_backward(model, data.gather_inputs(idx), data.gather_labels(idx));
        OptimizerState a = ab;
        std::copy(model.params().begin(), model.params().end(), x.begin());
        apply_step(a, x, lg.grads, delta, hp, OptimizerKind::adabelief(), raw);
        std::copy(delta.begin(), delta.end(), draws_ab.begin() + static_cast<std::ptrdiff_t>(k * P));
        for (std::size_t j = 0; j < P; ++j) y[k * P + j] = 1.0 / (std::sqrt(a.r[j]) + hp.eps);

        OptimizerState b = shadow;
        b.m = ab.m;
        b.r = ab.r;
        std::copy(model.params().begin(), model.params().end(), x.begin());
        apply_step(b, x, lg.grads, delta, hp, OptimizerKind::mvn_grad(), raw);
        std::copy(delta.begin(), delta.end(), draws_mv.begin() + static_cast<std::ptrdiff_t>(k * P));
      }
      const GapEstimate est = averaged_variance_gap(draws_ab, draws_mv, K, P);
      CheckpointVGap cp;
      cp.step = s;
      cp.result.K = K;
      cp.result.mc_gap = est.gap;
      cp.result.mc_stderr = est.std_error;
      cp.result.var_ab = est.var_a;
      cp.result.var_mv = est.var_b;
      const double factor = 2.0 * hp.beta1 - hp.beta1 * hp.beta1;
      std::vector<double> col(K);
      double cf = 0.0;
      double abs_m = 0.0;
      for (std::size_t j = 0; j < P; ++j) {
        for (std::size_t k = 0; k < K; ++k) col[k] = y[k * P + j];
        cf += factor * ab.m[j] * ab.m[j] * sample_variance(col);
        abs_m += std::abs(ab.m[j]);
      }
      cp.result.closed_form_gap = cf / static_cast<double>(P);
      cp.result.m_prev = abs_m / static_cast<double>(P);
      out.push_back(cp);
      ++next;
      if (next == checkpoints.size()) break;
    }

    // One AdaBelief training step; the shadow state sees the same gradient.
    const std::size_t slot = s % per_epoch;
    if (slot == 0) perm = epoch_permutation(data.n(), rng, s / per_epoch);
    std::copy_n(perm.begin() + static_cast<std::ptrdiff_t>(slot * batch_size), batch_size,
                batch.begin());
    const LossAndGrad lg = forward_backward(model, data.gather_inputs(batch), data.gather_labels(batch));
    apply_step(ab, model.params(), lg.grads, delta, hp, OptimizerKind::adabelief());
    apply_step(shadow, shadow_params, lg.grads, delta, hp, OptimizerKind::mvn_grad());
  }
  return out;
}

}  // namespace mvn::mlp
