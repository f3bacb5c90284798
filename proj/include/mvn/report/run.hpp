#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/mlp/dataset.hpp"
#include "mvn/mlp/idx.hpp"
#include "mvn/mlp/model.hpp"
#include "mvn/mlp/train.hpp"
#include "mvn/mlp/vgap_checkpoint.hpp"
#include "mvn/optimizer.hpp"
#include "mvn/oracles.hpp"
#include "mvn/report/config.hpp"
#include "mvn/report/records.hpp"
#include "mvn/rng.hpp"
#include "mvn/separation.hpp"
#include "mvn/spike.hpp"
#include "mvn/vgap.hpp"

namespace mvn::report {

inline constexpr double kZ = 4.0;
inline constexpr double kMIndependenceTol = 1e-6;

namespace detail {

inline std::vector<Column> columns(std::initializer_list<std::pair<const char*, Role>> list) {
  std::vector<Column> out;
  for (const auto& [name, role] : list) out.push_back({name, role});
  return out;
}

inline RecordTable run_spike_table(const RunConfig& cfg) {
  RecordTable t;
  t.columns = columns({{"kind", Role::Key},
                       {"M", Role::Key},
                       {"seed", Role::Seed},
                       {"peak_update", Role::Metric},
                       {"peak_time", Role::Metric},
                       {"t_star", Role::Metric},
                       {"analytic_bound", Role::Metric},
                       {"delta_at_t_star", Role::Metric},
                       {"lower_bound_at_t_star", Role::Metric},
                       {"closed_form_max_rel_err", Role::Metric},
                       {"bound_ok", Role::Flag},
                       {"lower_bound_ok", Role::Flag},
                       {"closed_form_ok", Role::Flag},
                       {"m_independent", Role::Flag}});
  const SpikeOptions opts{cfg.bias_correction, false};
  for (OptimizerKind kind : cfg.kinds) {
    std::vector<SpikeRunResult> runs;
    for (double M : cfg.M) runs.push_back(run_spike({M, cfg.u, cfg.dbar, cfg.T}, cfg.hp, kind, opts));

    // Peak updates of kinds with an M-independent bound must agree across M.
    std::optional<bool> m_indep;
    if (runs.front().analytic_bound) {
      double lo = runs.front().peak_update;
      double hi = lo;
      for (const auto& r : runs) {
        lo = std::min(lo, r.peak_update);
        hi = std::max(hi, r.peak_update);
      }
      m_indep = hi - lo <= kMIndependenceTol * hi;
    }
    for (std::uint64_t seed : cfg.seeds) {
      for (const auto& r : runs) {
        ExperimentRecord rec;
        rec.set("kind", to_string(kind))
            .set("M", r.M)
            .set("seed", seed)
            .set("peak_update", r.peak_update)
            .set("peak_time", r.peak_time)
            .set("t_star", r.t_star)
            .set("analytic_bound", r.analytic_bound)
            .set("delta_at_t_star", r.delta_at_t_star)
            .set("lower_bound_at_t_star", r.lower_bound_at_t_star)
            .set("closed_form_max_rel_err", r.closed_form_max_rel_err);
        if (r.analytic_bound) rec.set("bound_ok", r.bound_ok());
        if (r.lower_bound_at_t_star) {
          rec.set("lower_bound_ok", *r.delta_at_t_star >= *r.lower_bound_at_t_star);
        }
        if (r.closed_form_max_rel_err) rec.set("closed_form_ok", r.closed_form_ok());
        if (m_indep) rec.set("m_independent", *m_indep);
        t.rows.push_back(std::move(rec));
      }
    }
  }
  return t;
}

inline RecordTable run_bounds_table(const RunConfig& cfg) {
  RecordTable t;
  t.columns = columns({{"kind", Role::Key},
                       {"M", Role::Key},
                       {"seed", Role::Seed},
                       {"update_bound", Role::Metric},
                       {"t_star", Role::Metric}});
  for (OptimizerKind kind : cfg.kinds) {
    for (double M : cfg.M) {
      for (std::uint64_t seed : cfg.seeds) {
        ExperimentRecord rec;
        rec.set("kind", to_string(kind)).set("M", M).set("seed", seed);
        if (cfg.hp.eps > 0.0) rec.set("update_bound", update_bound(kind, cfg.hp, std::abs(cfg.u), cfg.dbar));
        if (kind == OptimizerKind::adam() && cfg.hp.beta2 > 0.0) {
          rec.set("t_star", t_star(M, cfg.hp.beta2));
        }
        t.rows.push_back(std::move(rec));
      }
    }
  }
  return t;
}

inline RecordTable run_vgap_table(const RunConfig& cfg) {
  RecordTable t;
  t.columns = columns({{"law", Role::Key},
                       {"seed", Role::Seed},
                       {"m_prev", Role::Metric},
                       {"K", Role::Metric},
                       {"mc_gap", Role::Metric},
                       {"mc_stderr", Role::Metric},
                       {"closed_form_gap", Role::Metric},
                       {"agrees", Role::Flag},
                       {"closed_form_positive", Role::Flag}});
  const SymmetricNoiseModel noise = SymmetricNoiseModel::scalar(cfg.mu, cfg.scale, cfg.law);
  const bool expect_positive = cfg.hp.beta1 > 0.0 && cfg.m_prev != 0.0 && cfg.scale > 0.0 &&
                               !(cfg.law == NoiseLaw::Rademacher && cfg.mu == cfg.m_prev);
  for (std::uint64_t seed : cfg.seeds) {
    Rng rng(seed);
    const VGapResult r =
        vgap_monte_carlo(cfg.m_prev, cfg.s_prev, cfg.u_prev, noise, cfg.hp, rng, cfg.K, cfg.n_inner);
    ExperimentRecord rec;
    rec.set("law", to_string(cfg.law))
        .set("seed", seed)
        .set("m_prev", r.m_prev)
        .set("K", r.K)
        .set("mc_gap", r.mc_gap)
        .set("mc_stderr", r.mc_stderr)
        .set("closed_form_gap", r.closed_form_gap)
        .set("agrees", r.agrees(kZ));
    if (expect_positive) rec.set("closed_form_positive", r.closed_form_gap > 0.0);
    t.rows.push_back(std::move(rec));
  }
  return t;
}

inline mlp::Dataset load_dataset(const RunConfig& cfg) {
  if (!cfg.data.mnist_images.empty()) {
    mlp::Dataset ds = mlp::load_mnist_idx(cfg.data.mnist_images, cfg.data.mnist_labels);
    if (cfg.batch > ds.n()) throw ConfigError("batch: exceeds dataset size n");
    return ds;
  }
  Rng rng(cfg.data.data_seed);
  return mlp::make_blobs(cfg.data.n, cfg.data.p, cfg.data.k, cfg.data.spread, rng);
}

inline mlp::Mlp init_model(const RunConfig& cfg, const mlp::Dataset& ds, std::uint64_t seed) {
  Rng init = Rng(seed).substream(0x1417);
  return mlp::Mlp({ds.p(), cfg.data.hidden1, cfg.data.hidden2, static_cast<std::size_t>(ds.classes)},
                  init);
}

inline RecordTable run_vgap_mlp_table(const RunConfig& cfg) {
  RecordTable t;
  t.columns = columns({{"checkpoint", Role::Key},
                       {"seed", Role::Seed},
                       {"K", Role::Metric},
                       {"mc_gap", Role::Metric},
                       {"mc_stderr", Role::Metric},
                       {"closed_form_ref", Role::Metric},
                       {"mean_abs_m", Role::Metric},
                       {"seed_avg_gap", Role::Metric},
                       {"gap_ok", Role::Flag}});
  const mlp::Dataset ds = load_dataset(cfg);
  std::vector<std::vector<mlp::CheckpointVGap>> per_seed;
  for (std::uint64_t seed : cfg.seeds) {
    per_seed.push_back(mlp::vgap_mlp_checkpoint(ds, init_model(cfg, ds, seed), cfg.hp, Rng(seed),
                                                cfg.K, cfg.checkpoints, cfg.batch));
  }
  const double ns = static_cast<double>(cfg.seeds.size());
  for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c) {
    double avg = 0.0;
    double var = 0.0;
    for (const auto& s : per_seed) {
      avg += s[c].result.mc_gap / ns;
      var += s[c].result.mc_stderr * s[c].result.mc_stderr / (ns * ns);
    }
    // With beta1 = 0 the gap vanishes; otherwise it must be positive on average.
    const bool ok = cfg.hp.beta1 == 0.0 ? std::abs(avg) <= kZ * std::sqrt(var) : avg > 0.0;
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
      const auto& cp = per_seed[i][c];
      ExperimentRecord rec;
      rec.set("checkpoint", cp.step)
          .set("seed", cfg.seeds[i])
          .set("K", cp.result.K)
          .set("mc_gap", cp.result.mc_gap)
          .set("mc_stderr", cp.result.mc_stderr)
          .set("closed_form_ref", cp.result.closed_form_gap)
          .set("mean_abs_m", cp.result.m_prev)
          .set("seed_avg_gap", avg)
          .set("gap_ok", ok);
      t.rows.push_back(std::move(rec));
    }
  }
  return t;
}

inline RecordTable run_train_table(const RunConfig& cfg) {
  RecordTable t;
  t.columns = columns({{"kind", Role::Key},
                       {"step", Role::Key},
                       {"seed", Role::Seed},
                       {"epoch", Role::Metric},
                       {"batch_loss", Role::Metric},
                       {"eval_loss", Role::Metric},
                       {"grad_norm", Role::Metric},
                       {"loss_ok", Role::Flag}});
  const mlp::Dataset ds = load_dataset(cfg);
  mlp::TrainConfig tc;
  tc.batch_size = cfg.batch;
  tc.epochs = cfg.epochs;
  tc.max_steps = cfg.steps;
  tc.eval_every = cfg.eval_every;
  for (OptimizerKind kind : cfg.kinds) {
    for (std::uint64_t seed : cfg.seeds) {
      const mlp::TrainRun run = mlp::train(ds, init_model(cfg, ds, seed), cfg.hp, kind, tc, Rng(seed));
      for (const auto& r : run.records) {
        ExperimentRecord rec;
        rec.set("kind", to_string(kind))
            .set("step", r.step)
            .set("seed", seed)
            .set("epoch", r.epoch)
            .set("batch_loss", r.batch_loss)
            .set("eval_loss", r.eval_loss)
            .set("grad_norm", r.grad_norm)
            .set("loss_ok", std::isfinite(r.batch_loss) && r.batch_loss >= 0.0);
        t.rows.push_back(std::move(rec));
      }
    }
  }
  return t;
}

inline RecordTable run_separation_table(const RunConfig& cfg) {
  RecordTable t;
  t.columns = columns({{"arm", Role::Key},
                       {"d", Role::Key},
                       {"seed", Role::Seed},
                       {"T", Role::Metric},
                       {"min_grad_norm", Role::Metric},
                       {"argmin_t", Role::Metric},
                       {"analytic_value", Role::Metric},
                       {"trajectory_match_err", Role::Metric},
                       {"alpha", Role::Metric},
                       {"max_potential_increase", Role::Metric},
                       {"max_telescoped_excess", Role::Metric},
                       {"dim_ratio", Role::Metric},
                       {"exact_match", Role::Flag},
                       {"positive_orthant", Role::Flag},
                       {"analytic_match", Role::Flag},
                       {"dim_law_ok", Role::Flag},
                       {"literal_match", Role::Flag},
                       {"potential_nonincreasing", Role::Flag},
                       {"rate_bound_ok", Role::Flag},
                       {"dim_free", Role::Flag}});
  const bool do_laprop = cfg.arm != SeparationArm::Mvn;
  const bool do_mvn = cfg.arm != SeparationArm::LaProp;
  // Checked before any work so a violated stepsize condition is a config error.
  if (do_mvn) checked_heavy_ball_alpha(cfg.hp.beta1, cfg.hp.eta, cfg.sigma, cfg.L);

  for (std::uint64_t seed : cfg.seeds) {
    if (do_laprop) {
      const HighSnrOracle oracle{{cfg.L}, cfg.delta, cfg.noise_sigma, cfg.laprop_law};
      std::vector<SeparationResult> res;
      for (std::size_t d : cfg.dims) {
        Rng rng = Rng(seed).substream(d);
        res.push_back(run_separation_laprop(d, cfg.T, cfg.hp.beta1, cfg.c, cfg.L, oracle, rng));
      }
      for (const auto& r : res) {
        const double expected = std::sqrt(static_cast<double>(r.d) / static_cast<double>(res.front().d));
        const double ratio = r.min_grad_norm / res.front().min_grad_norm;
        ExperimentRecord rec;
        rec.set("arm", "laprop")
            .set("d", r.d)
            .set("seed", seed)
            .set("T", r.T)
            .set("min_grad_norm", r.min_grad_norm)
            .set("argmin_t", r.argmin_t)
            .set("analytic_value", r.analytic_value)
            .set("trajectory_match_err", r.trajectory_match_err)
            .set("dim_ratio", ratio)
            .set("exact_match", r.trajectory_match_err == 0.0)
            .set("positive_orthant", r.positive_orthant)
            .set("analytic_match", std::abs(r.min_grad_norm - r.analytic_value) <= 1e-4)
            .set("dim_law_ok", std::abs(ratio - expected) <= 1e-3 * expected);
        t.rows.push_back(std::move(rec));
      }
    }
    if (do_mvn) {
      const HighSnrOracle oracle{{cfg.L}, cfg.delta, cfg.noise_sigma, cfg.mvn_law};
      const bool deterministic = cfg.mvn_law == HighSnrLaw::Zero;
      std::vector<SeparationResult> res;
      for (std::size_t d : cfg.dims) {
        Rng rng = Rng(seed).substream(0x10000 + d);
        const double x0 = cfg.x0_norm / std::sqrt(static_cast<double>(d));
        res.push_back(run_separation_mvn(d, cfg.T, cfg.hp.beta1, cfg.hp.eta, cfg.sigma, cfg.L,
                                         oracle, rng, x0));
      }
      double lo = res.front().min_grad_norm;
      double hi = lo;
      for (const auto& r : res) {
        lo = std::min(lo, r.min_grad_norm);
        hi = std::max(hi, r.min_grad_norm);
      }
      for (const auto& r : res) {
        ExperimentRecord rec;
        rec.set("arm", "mvn")
            .set("d", r.d)
            .set("seed", seed)
            .set("T", r.T)
            .set("min_grad_norm", r.min_grad_norm)
            .set("argmin_t", r.argmin_t)
            .set("analytic_value", r.analytic_value)
            .set("trajectory_match_err", r.trajectory_match_err)
            .set("alpha", r.alpha)
            .set("max_potential_increase", r.max_potential_increase)
            .set("max_telescoped_excess", r.max_telescoped_excess)
            .set("dim_ratio", r.min_grad_norm / res.front().min_grad_norm)
            .set("literal_match", r.trajectory_match_err <= 1e-10)
            .set("dim_free", hi <= 2.0 * lo);
        if (deterministic) {
          rec.set("potential_nonincreasing", r.max_potential_increase <= 1e-12)
              .set("rate_bound_ok", r.min_grad_norm <= r.analytic_value);
        }
        t.rows.push_back(std::move(rec));
      }
    }
  }
  return t;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Computes the record table of the configured subcommand without writing
/// anything.
inline RecordTable execute(const RunConfig& cfg) {
  cfg.validate();
  switch (cfg.subcommand) {
    case Subcommand::Spike:
      return detail::run_spike_table(cfg);
    case Subcommand::Vgap:
      return detail::run_vgap_table(cfg);
    case Subcommand::VgapMlp:
      return detail::run_vgap_mlp_table(cfg);
    case Subcommand::Separation:
      return detail::run_separation_table(cfg);
    case Subcommand::Train:
      return detail::run_train_table(cfg);
    case Subcommand::Bounds:
      return detail::run_bounds_table(cfg);
  }
  throw ConfigError("subcommand: unknown");
}

/// Sidecar document: config echo, rng algorithm, artifact version, time.
inline nlohmann::json metadata(const RunConfig& cfg, const RecordTable& table) {
  nlohmann::json meta;
  meta["config"] = cfg.echo();
  meta["rng_algorithm"] = Rng::algorithm;
  meta["version"] = kVersion;
  meta["timestamp"] = detail::utc_timestamp();
  meta["rows"] = table.rows.size();
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : table.columns) cols.push_back(c.name);
  meta["columns"] = cols;
  return meta;
}

/// `<stem>.agg<ext>` next to `path`.
inline std::filesystem::path aggregate_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  const std::string ext = p.extension().string();
  p.replace_extension(".agg" + ext);
  return p;
}

struct RunIo {
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
  WriteHooks hooks;
};

/// Runs, writes and maps the outcome to an exit code: 0 when every built-in
/// assertion passes, 1 when one fails, 2 on configuration or I/O errors.
inline int run(const RunConfig& cfg, const RunIo& io = {}) {
  try {
    const RecordTable table = execute(cfg);
    if (cfg.output == "-") {
      *io.out << render(table, cfg.format);
      if (cfg.aggregate) *io.out << render(aggregate(table), cfg.format);
    } else {
      emit(table, cfg.output, cfg.format, metadata(cfg, table), io.hooks);
      if (cfg.aggregate) {
        const RecordTable agg = aggregate(table);
        emit(agg, aggregate_path(cfg.output), cfg.format, metadata(cfg, agg));
      }
    }
    if (!table.all_flags_pass()) {
      *io.err << "assertion failure: at least one pass/fail flag is false\n";
      return 1;
    }
    return 0;
  } catch (const ConfigError& e) {
    *io.err << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    *io.err << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    *io.err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    *io.err << "numeric failure: " << e.what() << '\n';
    return 1;
  }
}

/// parse_config + run.
inline int main_entry(const std::vector<std::string>& args, const RunIo& io = {}) {
  RunConfig cfg;
  try {
    cfg = parse_config(args);
  } catch (const HelpRequested& h) {
    *io.out << h.what();
    return 0;
  } catch (const Error& e) {
    *io.err << "error: " << e.what() << '\n';
    return 2;
  }
  return run(cfg, io);
}

}  // namespace mvn::report
