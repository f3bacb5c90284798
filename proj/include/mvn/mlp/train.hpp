#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/mlp/dataset.hpp"
#include "mvn/mlp/model.hpp"
#include "mvn/optimizer.hpp"
#include "mvn/optimizer_kind.hpp"
#include "mvn/rng.hpp"

namespace mvn::mlp {

inline constexpr std::size_t kMaxEvalExamples = 10'000;

/// Fisher-Yates permutation of 0..n-1, a pure function of (rng seed and
/// stream, epoch).
inline std::vector<std::size_t> epoch_permutation(std::size_t n, const Rng& rng,
                                                  std::uint64_t epoch) {
  Rng r = rng.substream(0x5e000000ULL + epoch);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(r.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

/// Examples used for loss evaluation: all of them when n <= 1e4, otherwise a
/// fixed seeded subsample of 1e4.
inline std::vector<std::size_t> eval_indices(std::size_t n, const Rng& rng) {
  if (n <= kMaxEvalExamples) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  std::vector<std::size_t> idx = epoch_permutation(n, rng.substream(0xe7a1), 0);
  idx.resize(kMaxEvalExamples);
  return idx;
}

struct TrainConfig {
  std::size_t batch_size = 1024;
  std::size_t epochs = 1;
  /// Stop after this many optimizer steps; 0 means run all epochs.
  std::size_t max_steps = 0;
  /// Evaluate every this many steps (and always after the last); 0 means only
  /// after the last step.
  std::size_t eval_every = 0;
  StepOptions step_options{};
};

struct TrainRecord {
  std::size_t step = 0;  // 1-based
  std::size_t epoch = 0;
  double batch_loss = 0.0;
  std::optional<double> eval_loss;
  double grad_norm = 0.0;
};

struct TrainRun {
  std::vector<TrainRecord> records;
  Mlp model;
  OptimizerState state;
  double final_loss = 0.0;  // evaluation loss after the last step
};

inline double evaluate(const Mlp& model, const Dataset& data, const std::vector<std::size_t>& idx) {
  return loss_only(model, data.gather_inputs(idx), data.gather_labels(idx));
}

/// Minibatch training with one optimizer step per batch. Each epoch visits a
/// fresh permutation; a trailing partial batch is dropped.
inline TrainRun train(const Dataset& data, Mlp model, const HyperParams& hp, OptimizerKind kind,
                      const TrainConfig& cfg, const Rng& rng) {
  hp.validate();
  data.validate();
  if (cfg.batch_size == 0 || cfg.batch_size > data.n()) {
    throw ConfigError("batch_size: must lie in [1, n]");
  }
  if (cfg.epochs == 0 && cfg.max_steps == 0) throw ConfigError("epochs: must be >= 1");
  if (model.shape().inputs != data.p() ||
      model.shape().classes != static_cast<std::size_t>(data.classes)) {
    throw ConfigError("train: model shape does not match dataset");
  }

  const std::vector<std::size_t> eval_idx = eval_indices(data.n(), rng);
  const std::size_t per_epoch = data.n() / cfg.batch_size;
  std::size_t total = per_epoch * cfg.epochs;
  if (cfg.max_steps > 0) total = cfg.epochs > 0 ? std::min(total, cfg.max_steps) : cfg.max_steps;

  OptimizerState state = init_state(model.shape().param_count());
  std::vector<double> delta(state.dim());
  std::vector<TrainRecord> records;
  records.reserve(total);

  std::vector<std::size_t> perm;
  std::vector<std::size_t> batch(cfg.batch_size);
  for (std::size_t s = 0; s < total; ++s) {
    const std::size_t epoch = s / per_epoch;
    const std::size_t slot = s % per_epoch;
    if (slot == 0) perm = epoch_permutation(data.n(), rng, epoch);
    std::copy_n(perm.begin() + static_cast<std::ptrdiff_t>(slot * cfg.batch_size), cfg.batch_size,
                batch.begin());

    const LossAndGrad lg =
        forward_backward(model, data.gather_inputs(batch), data.gather_labels(batch));
    double gsq = 0.0;
    for (double g : lg.grads) gsq += g * g;
    apply_step(state, model.params(), lg.grads, delta, hp, kind, cfg.step_options);

    TrainRecord rec;
    rec.step = s + 1;
    rec.epoch = epoch;
    rec.batch_loss = lg.loss;
    rec.grad_norm = std::sqrt(gsq);
    const bool last = s + 1 == total;
    if (last || (cfg.eval_every > 0 && (s + 1) % cfg.eval_every == 0)) {
      rec.eval_loss = evaluate(model, data, eval_idx);
    }
    records.push_back(rec);
  }

  TrainRun run{std::move(records), std::move(model), std::move(state), 0.0};
  run.final_loss = run.records.empty() ? evaluate(run.model, data, eval_idx)
                                       : *run.records.back().eval_loss;
  return run;
}

}  // namespace mvn::mlp
