#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/optimizer_kind.hpp"
#include "mvn/oracles.hpp"
#include "mvn/report/records.hpp"

namespace mvn::report {

#ifndef MVN_VERSION
#define MVN_VERSION "0.1.0"
#endif
inline constexpr const char* kVersion = MVN_VERSION;

enum class Subcommand { Spike, Vgap, VgapMlp, Separation, Train, Bounds };

inline constexpr Subcommand kSubcommands[] = {Subcommand::Spike,      Subcommand::Vgap,
                                              Subcommand::VgapMlp,    Subcommand::Separation,
                                              Subcommand::Train,      Subcommand::Bounds};

inline std::string_view to_string(Subcommand s) {
  switch (s) {
    case Subcommand::Spike:
      return "spike";
    case Subcommand::Vgap:
      return "vgap";
    case Subcommand::VgapMlp:
      return "vgap-mlp";
    case Subcommand::Separation:
      return "separation";
    case Subcommand::Train:
      return "train";
    case Subcommand::Bounds:
      return "bounds";
  }
  return "spike";
}

enum class SeparationArm { LaProp, Mvn, Both };

inline std::string_view to_string(SeparationArm a) {
  return a == SeparationArm::LaProp ? "laprop" : (a == SeparationArm::Mvn ? "mvn" : "both");
}

inline SeparationArm parse_arm(std::string_view text) {
  if (text == "laprop") return SeparationArm::LaProp;
  if (text == "mvn" || text == "mvn-grad") return SeparationArm::Mvn;
  if (text == "both") return SeparationArm::Both;
  throw ConfigError("arm: expected laprop, mvn or both, got '" + std::string(text) + "'");
}

/// Dataset and network used by the vgap-mlp and train subcommands. MNIST is
/// read only when both paths are set.
struct DataConfig {
  std::size_t n = 2048;
  std::size_t p = 20;
  std::size_t k = 4;
  double spread = 2.0;
  std::uint64_t data_seed = 0;
  std::string mnist_images;
  std::string mnist_labels;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
};

struct RunConfig {
  Subcommand subcommand = Subcommand::Spike;
  HyperParams hp;
  std::vector<OptimizerKind> kinds;
  std::vector<std::uint64_t> seeds{1};
  std::string output = "-";
  OutputFormat format = OutputFormat::Csv;
  bool aggregate = false;
  std::string config_file;

  // spike / bounds
  std::vector<double> M{1e2, 1e4, 1e6};
  double u = 1e-3;
  double dbar = 1.0;
  std::size_t T = 1000;
  bool bias_correction = false;

  // vgap
  double mu = 0.5;
  double m_prev = 0.5;
  double scale = 0.2;
  double s_prev = 0.04;
  double u_prev = 0.0;
  NoiseLaw law = NoiseLaw::Gaussian;
  std::size_t K = 100'000;
  std::size_t n_inner = 1'000'000;

  // vgap-mlp / train
  std::vector<std::size_t> checkpoints{50, 100, 200, 400, 800};
  std::size_t batch = 16;
  DataConfig data;
  std::size_t steps = 200;
  std::size_t epochs = 0;
  std::size_t eval_every = 0;

  // separation
  SeparationArm arm = SeparationArm::Both;
  std::vector<std::size_t> dims{16, 64};
  double c = 1.0;
  double L = 1.0;
  double delta = 0.3;
  double noise_sigma = 0.1;
  HighSnrLaw laprop_law = HighSnrLaw::TruncatedGaussian;
  HighSnrLaw mvn_law = HighSnrLaw::Zero;
  double sigma = 1.0;
  double x0_norm = 4.0;

  /// Every parameter the selected subcommand reads, keyed by its option name.
  [[nodiscard]] nlohmann::json echo() const;
  /// Cross-field checks; throws ConfigError naming the key.
  void validate() const;
};

inline RunConfig default_config(Subcommand s) {
  RunConfig cfg;
  cfg.subcommand = s;
  switch (s) {
    case Subcommand::Spike:
    case Subcommand::Bounds:
      cfg.hp.beta1 = 0.9;
      cfg.hp.beta2 = 0.6;
      cfg.hp.eps = 1e-8;
    {
      const auto kinds = all_kinds();
      cfg.kinds.assign(kinds.begin(), kinds.end());
    }
      break;
    case Subcommand::Vgap:
      cfg.hp.beta1 = 0.9;
      cfg.hp.beta2 = 0.95;
      cfg.hp.eps = 1e-8;
      break;
    case Subcommand::VgapMlp:
      cfg.hp.eta = 1e-3;
      cfg.hp.beta1 = 0.9;
      cfg.hp.beta2 = 0.95;
      cfg.hp.eps = 1e-8;
      cfg.K = 128;
      cfg.batch = 16;
      cfg.seeds = {1, 2, 3};
      break;
    case Subcommand::Separation:
      cfg.hp.beta1 = 0.9;
      cfg.hp.eta = 1.0;
      cfg.T = 100;
      break;
    case Subcommand::Train:
      cfg.hp.eta = 1e-4;
      cfg.hp.beta1 = 0.95;
      cfg.hp.beta2 = 0.999;
      cfg.hp.eps = 1e-8;
      cfg.kinds = {OptimizerKind::adam(), OptimizerKind::laprop(), OptimizerKind::mvn_grad()};
      cfg.batch = 1024;
      cfg.seeds = {1, 2, 3};
      break;
  }
  return cfg;
}

namespace detail {

inline nlohmann::json kinds_json(const std::vector<OptimizerKind>& kinds) {
  nlohmann::json out = nlohmann::json::array();
  for (auto k : kinds) out.push_back(std::string(to_string(k)));
  return out;
}

inline nlohmann::json hp_json(const HyperParams& hp, bool full) {
  nlohmann::json j;
  j["eta"] = hp.eta;
  j["beta1"] = hp.beta1;
  j["beta2"] = hp.beta2;
  j["eps"] = hp.eps;
  j["eps-s"] = hp.eps_s;
  j["unprotected"] = hp.unprotected();
  if (full) {
    j["lambda"] = hp.lambda;
    j["decay"] = std::string(to_string(hp.decay_mode));
  }
  return j;
}

inline void data_json(nlohmann::json& j, const RunConfig& c) {
  j["n"] = c.data.n;
  j["p"] = c.data.p;
  j["k"] = c.data.k;
  j["spread"] = c.data.spread;
  j["data-seed"] = c.data.data_seed;
  j["mnist-images"] = c.data.mnist_images;
  j["mnist-labels"] = c.data.mnist_labels;
  j["hidden1"] = c.data.hidden1;
  j["hidden2"] = c.data.hidden2;
  j["activation"] = "relu";
  j["batch"] = c.batch;
}

}  // namespace detail

inline nlohmann::json RunConfig::echo() const {
  nlohmann::json j;
  j["subcommand"] = std::string(to_string(subcommand));
  j["seeds"] = seeds;
  j["output"] = output;
  j["format"] = std::string(to_string(format));
  j["aggregate"] = aggregate;
  j["config"] = config_file;
  switch (subcommand) {
    case Subcommand::Spike:
      j.update(detail::hp_json(hp, true));
      j["kinds"] = detail::kinds_json(kinds);
      j["M"] = M;
      j["u"] = u;
      j["dbar"] = dbar;
      j["T"] = T;
      j["bias-correction"] = bias_correction;
      break;
    case Subcommand::Bounds:
      j.update(detail::hp_json(hp, false));
      j["kinds"] = detail::kinds_json(kinds);
      j["M"] = M;
      j["u"] = u;
      j["dbar"] = dbar;
      break;
    case Subcommand::Vgap:
      j.update(detail::hp_json(hp, false));
      j.erase("eta");
      j["mu"] = mu;
      j["m-prev"] = m_prev;
      j["scale"] = scale;
      j["s-prev"] = s_prev;
      j["u-prev"] = u_prev;
      j["law"] = std::string(to_string(law));
      j["K"] = K;
      j["n-inner"] = n_inner;
      break;
    case Subcommand::VgapMlp:
      j.update(detail::hp_json(hp, true));
      j["K"] = K;
      j["checkpoints"] = checkpoints;
      detail::data_json(j, *this);
      break;
    case Subcommand::Train:
      j.update(detail::hp_json(hp, true));
      j["kinds"] = detail::kinds_json(kinds);
      j["steps"] = steps;
      j["epochs"] = epochs;
      j["eval-every"] = eval_every;
      detail::data_json(j, *this);
      break;
    case Subcommand::Separation:
      j["beta1"] = hp.beta1;
      j["eta"] = hp.eta;
      j["arm"] = std::string(to_string(arm));
      j["d"] = dims;
      j["T"] = T;
      j["c"] = c;
      j["L"] = L;
      j["delta"] = delta;
      j["noise-sigma"] = noise_sigma;
      j["laprop-law"] = std::string(to_string(laprop_law));
      j["mvn-law"] = std::string(to_string(mvn_law));
      j["sigma"] = sigma;
      j["x0-norm"] = x0_norm;
      break;
  }
  return j;
}

inline void RunConfig::validate() const {
  hp.validate();
  if (seeds.empty()) throw ConfigError("seeds: need at least one seed");
  auto positive = [](const char* key, double v) {
    if (!std::isfinite(v) || v <= 0.0) throw ConfigError(std::string(key) + ": must be > 0");
  };
  switch (subcommand) {
    case Subcommand::Spike:
    case Subcommand::Bounds:
      if (kinds.empty()) throw ConfigError("kinds: need at least one optimizer kind");
      if (M.empty()) throw ConfigError("M: need at least one spike magnitude");
      for (double m : M) {
        if (!std::isfinite(m) || m < 1.0) throw ConfigError("M: spike magnitudes must be >= 1");
      }
      if (!std::isfinite(u) || u == 0.0) throw ConfigError("u: must be nonzero");
      positive("dbar", dbar);
      if (subcommand == Subcommand::Spike && T == 0) throw ConfigError("T: must be >= 1");
      break;
    case Subcommand::Vgap:
      if (!std::isfinite(mu)) throw ConfigError("mu: must be finite");
      if (!std::isfinite(m_prev)) throw ConfigError("m-prev: must be finite");
      if (!std::isfinite(scale) || scale < 0.0) throw ConfigError("scale: must be >= 0");
      if (!std::isfinite(s_prev) || s_prev < 0.0) throw ConfigError("s-prev: must be >= 0");
      if (!std::isfinite(u_prev)) throw ConfigError("u-prev: must be finite");
      if (K < 2) throw ConfigError("K: need at least 2 draws");
      if (n_inner < 2) throw ConfigError("n-inner: need at least 2 draws");
      break;
    case Subcommand::VgapMlp:
    case Subcommand::Train:
      if (subcommand == Subcommand::VgapMlp) {
        if (K < 2) throw ConfigError("K: need at least 2 minibatch draws");
        if (checkpoints.empty()) throw ConfigError("checkpoints: need at least one checkpoint");
        for (auto cp : checkpoints) {
          if (cp == 0) throw ConfigError("checkpoints: steps must be >= 1");
        }
      } else {
        if (kinds.empty()) throw ConfigError("kinds: need at least one optimizer kind");
        if (steps == 0 && epochs == 0) throw ConfigError("steps: steps or epochs must be >= 1");
      }
      if (batch == 0) throw ConfigError("batch: must be >= 1");
      if (data.mnist_images.empty() != data.mnist_labels.empty()) {
        throw ConfigError("mnist-images: both mnist-images and mnist-labels are required");
      }
      if (data.mnist_images.empty()) {
        if (data.k < 2) throw ConfigError("k: need at least 2 classes");
        if (data.n < data.k) throw ConfigError("n: need at least k examples");
        if (data.p < 1) throw ConfigError("p: must be >= 1");
        positive("spread", data.spread);
        if (batch > data.n) throw ConfigError("batch: exceeds dataset size n");
      }
      if (data.hidden1 == 0) throw ConfigError("hidden1: must be >= 1");
      if (data.hidden2 == 0) throw ConfigError("hidden2: must be >= 1");
      break;
    case Subcommand::Separation:
      if (dims.empty()) throw ConfigError("d: need at least one dimension");
      for (auto d : dims) {
        if (d == 0) throw ConfigError("d: dimensions must be >= 1");
      }
      if (T == 0) throw ConfigError("T: must be >= 1");
      positive("c", c);
      positive("L", L);
      if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("delta: must lie in [0, 1)");
      if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
        throw ConfigError("noise-sigma: must be >= 0");
      }
      positive("sigma", sigma);
      positive("x0-norm", x0_norm);
      break;
  }
}

/// Thrown by parse_config for --help; carries the help text.
class HelpRequested : public std::exception {
 public:
  explicit HelpRequested(std::string text) : text_(std::move(text)) {}
  [[nodiscard]] const char* what() const noexcept override { return text_.c_str(); }

 private:
  std::string text_;
};

namespace detail {

/// Non-negative integer; accepts scientific notation such as 1e5.
inline std::size_t parse_count(std::string_view key, const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty() || !(v >= 0.0) || v != std::floor(v) || v > 1e15) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

inline std::vector<std::size_t> parse_counts(std::string_view key,
                                             const std::vector<std::string>& items) {
  std::vector<std::size_t> out;
  for (const auto& s : items) out.push_back(parse_count(key, s));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Flat key=value or JSON object file. Keys are returned with '_' mapped to
/// '-'; list values are comma-joined.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::pair<std::string, std::string>> out;

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("config: invalid JSON in " + path + ": " + e.what());
    }
    auto scalar = [&](const std::string& key, const nlohmann::json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number()) return v.dump();
      throw ConfigError(key + ": config value must be a scalar or a list of scalars");
    };
    for (const auto& [key, v] : j.items()) {
      std::string value;
      if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) value += (i ? "," : "") + scalar(key, v[i]);
      } else {
        value = scalar(key, v);
      }
      out.emplace_back(normalize_key(key), value);
    }
    return out;
  }

  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') continue;  // section headers are ignored
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config: line " + std::to_string(lineno) + " of " + path +
                        " is not key=value");
    }
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out.emplace_back(normalize_key(trim(line.substr(0, eq))), value);
  }
  return out;
}

/// Registers the options of one subcommand, bound to `cfg`.
inline void add_options(CLI::App& sub, RunConfig& cfg) {
  const Subcommand s = cfg.subcommand;
  auto count = [&](const std::string& name, std::size_t& target, const std::string& desc) {
    sub.add_option_function<std::string>(
           "--" + name, [&target, name](const std::string& v) { target = parse_count(name, v); },
           desc)
        ->default_str(std::to_string(target));
  };
  auto counts = [&](const std::string& name, std::vector<std::size_t>& target,
                    const std::string& desc) {
    sub.add_option_function<std::vector<std::string>>(
           "--" + name,
           [&target, name](const std::vector<std::string>& v) { target = parse_counts(name, v); },
           desc)
        ->delimiter(',');
  };

  sub.add_option("--seeds", cfg.seeds, "Comma-separated seeds, one record set per seed")
      ->delimiter(',')
      ->capture_default_str();
  sub.add_option("--output", cfg.output, "Output data file ('-' for stdout)")->capture_default_str();
  sub.add_option_function<std::string>(
      "--format", [&cfg](const std::string& v) { cfg.format = parse_format(v); }, "csv or json");
  sub.add_flag("--aggregate", cfg.aggregate, "Also write <output>.agg.<ext> with mean/std over seeds");
  sub.add_option("--config", cfg.config_file, "key=value or JSON config file; flags override");

  const bool full_hp = s == Subcommand::Spike || s == Subcommand::VgapMlp || s == Subcommand::Train;
  if (s != Subcommand::Vgap) {
    sub.add_option("--eta", cfg.hp.eta, "Step size")->capture_default_str();
  }
  sub.add_option("--beta1", cfg.hp.beta1, "First-moment EMA coefficient")->capture_default_str();
  if (s != Subcommand::Separation) {
    sub.add_option("--beta2", cfg.hp.beta2, "Normalizer EMA coefficient")->capture_default_str();
    sub.add_option("--eps", cfg.hp.eps, "Denominator guard")->capture_default_str();
    sub.add_option("--eps-s", cfg.hp.eps_s, "Normalizer floor added each step")
        ->capture_default_str();
  }
  if (full_hp) {
    sub.add_option("--lambda", cfg.hp.lambda, "Weight decay coefficient")->capture_default_str();
    sub.add_option_function<std::string>(
        "--decay", [&cfg](const std::string& v) { cfg.hp.decay_mode = parse_decay_mode(v); },
        "none, coupled or decoupled");
  }
  if (s == Subcommand::Spike || s == Subcommand::Train || s == Subcommand::Bounds) {
    sub.add_option_function<std::vector<std::string>>(
           "--kinds",
           [&cfg](const std::vector<std::string>& v) {
             cfg.kinds.clear();
             for (const auto& k : v) cfg.kinds.push_back(parse_kind(k));
             std::sort(cfg.kinds.begin(), cfg.kinds.end(),
                       [](auto a, auto b) { return kind_index(a) < kind_index(b); });
             cfg.kinds.erase(std::unique(cfg.kinds.begin(), cfg.kinds.end()), cfg.kinds.end());
           },
           "Optimizer kinds: adam, adabelief, laprop, mvn-grad")
        ->delimiter(',');
  }

  switch (s) {
    case Subcommand::Spike:
    case Subcommand::Bounds:
      sub.add_option_function<std::vector<double>>(
             "--M",
             [&cfg](const std::vector<double>& v) {
               cfg.M = v;
               std::sort(cfg.M.begin(), cfg.M.end());
               cfg.M.erase(std::unique(cfg.M.begin(), cfg.M.end()), cfg.M.end());
             },
             "Spike magnitudes")
          ->delimiter(',');
      sub.add_option("--u", cfg.u, "Baseline gradient")->capture_default_str();
      sub.add_option("--dbar", cfg.dbar, "Initial normalizer value")->capture_default_str();
      if (s == Subcommand::Spike) {
        count("T", cfg.T, "Horizon");
        sub.add_flag("--bias-correction", cfg.bias_correction,
                     "Run with bias correction instead of the raw recursions");
      }
      break;
    case Subcommand::Vgap:
      sub.add_option("--mu", cfg.mu, "Conditional gradient mean")->capture_default_str();
      sub.add_option("--m-prev", cfg.m_prev, "Frozen first moment")->capture_default_str();
      sub.add_option("--scale", cfg.scale, "Noise scale (sd, half-width or jump)")
          ->capture_default_str();
      sub.add_option("--s-prev", cfg.s_prev, "Frozen variance normalizer")->capture_default_str();
      sub.add_option("--u-prev", cfg.u_prev, "Frozen normalized momentum")->capture_default_str();
      sub.add_option_function<std::string>(
          "--law", [&cfg](const std::string& v) { cfg.law = parse_noise_law(v); },
          "gaussian, uniform or rademacher");
      count("K", cfg.K, "Gradient draws");
      count("n-inner", cfg.n_inner, "Draws for the closed-form variance");
      break;
    case Subcommand::VgapMlp:
    case Subcommand::Train:
      if (s == Subcommand::VgapMlp) {
        count("K", cfg.K, "Minibatch draws per checkpoint");
        counts("checkpoints", cfg.checkpoints, "Checkpoint steps");
      } else {
        count("steps", cfg.steps, "Optimizer step budget (0 = all epochs)");
        count("epochs", cfg.epochs, "Epochs (0 = step budget only)");
        count("eval-every", cfg.eval_every, "Evaluation period in steps (0 = final only)");
      }
      count("batch", cfg.batch, "Minibatch size");
      count("n", cfg.data.n, "Blob examples");
      count("p", cfg.data.p, "Blob input dimension");
      count("k", cfg.data.k, "Blob classes");
      sub.add_option("--spread", cfg.data.spread, "Blob cluster spread")->capture_default_str();
      sub.add_option("--data-seed", cfg.data.data_seed, "Seed of the blob dataset")
          ->capture_default_str();
      sub.add_option("--mnist-images", cfg.data.mnist_images, "IDX image file");
      sub.add_option("--mnist-labels", cfg.data.mnist_labels, "IDX label file");
      count("hidden1", cfg.data.hidden1, "First hidden width");
      count("hidden2", cfg.data.hidden2, "Second hidden width");
      break;
    case Subcommand::Separation:
      sub.add_option_function<std::string>(
          "--arm", [&cfg](const std::string& v) { cfg.arm = parse_arm(v); }, "laprop, mvn or both");
      counts("d", cfg.dims, "Dimensions");
      count("T", cfg.T, "Horizon");
      sub.add_option("--c", cfg.c, "Step-size constant of the sign-collapse arm")
          ->capture_default_str();
      sub.add_option("--L", cfg.L, "Curvature of F(x) = (L/2)|x|^2")->capture_default_str();
      sub.add_option("--delta", cfg.delta, "Relative noise bound")->capture_default_str();
      sub.add_option("--noise-sigma", cfg.noise_sigma, "Noise standard deviation bound")
          ->capture_default_str();
      sub.add_option_function<std::string>(
          "--laprop-law",
          [&cfg](const std::string& v) { cfg.laprop_law = parse_high_snr_law(v); },
          "Noise law for the sign-collapse arm");
      sub.add_option_function<std::string>(
          "--mvn-law", [&cfg](const std::string& v) { cfg.mvn_law = parse_high_snr_law(v); },
          "Noise law for the variance-normalized arm");
      sub.add_option("--sigma", cfg.sigma, "Pinned normalizer sqrt")->capture_default_str();
      sub.add_option("--x0-norm", cfg.x0_norm, "|x0| (fixes F(x0) across d)")
          ->capture_default_str();
      break;
  }
}

inline std::string describe(Subcommand s) {
  switch (s) {
    case Subcommand::Spike:
      return "Single-spike response of each optimizer kind";
    case Subcommand::Vgap:
      return "Scalar one-step variance gap: Monte Carlo vs closed form";
    case Subcommand::VgapMlp:
      return "Variance gap at MLP training checkpoints";
    case Subcommand::Separation:
      return "Sign collapse vs heavy-ball descent on a quadratic";
    case Subcommand::Train:
      return "MLP training loss curves per optimizer kind";
    case Subcommand::Bounds:
      return "Analytic peak-update bounds and forgetting times";
  }
  return "";
}

struct Parser {
  CLI::App app{"Adam-family optimizer experiments", "mvngrad"};
  std::map<Subcommand, RunConfig> configs;
  std::map<Subcommand, CLI::App*> subs;

  Parser() {
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    for (Subcommand s : kSubcommands) {
      configs.emplace(s, default_config(s));
      CLI::App* sub = app.add_subcommand(std::string(to_string(s)), describe(s));
      add_options(*sub, configs.at(s));
      subs.emplace(s, sub);
    }
  }

  void parse(std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      throw HelpRequested(help_text());
    } catch (const CLI::CallForAllHelp&) {
      throw HelpRequested(app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::CallForVersion&) {
      throw HelpRequested(std::string(kVersion) + "\n");
    } catch (const CLI::Error& e) {
      throw ConfigError(e.what());
    }
  }

  [[nodiscard]] std::string help_text() const {
    for (const auto& [s, sub] : subs) {
      if (sub->parsed()) return sub->help();
    }
    return app.help();
  }

  [[nodiscard]] Subcommand selected() const {
    for (const auto& [s, sub] : subs) {
      if (sub->parsed()) return s;
    }
    throw ConfigError("subcommand: none given");
  }
};

}  // namespace detail

/// Parses command-line arguments (without the program name). Keys from
/// --config apply only where the same option is not given on the command
/// line. Throws ConfigError naming the offending key, or HelpRequested.
inline RunConfig parse_config(const std::vector<std::string>& args) {
  detail::Parser first;
  first.parse(args);
  const Subcommand s = first.selected();
  RunConfig cfg = first.configs.at(s);

  if (!cfg.config_file.empty()) {
    CLI::App* sub = first.subs.at(s);
    std::set<std::string> given;
    std::set<std::string> known;
    std::set<std::string> lists;
    for (const CLI::Option* opt : sub->get_options()) {
      const std::string name = opt->get_single_name();
      known.insert(name);
      if (opt->count() > 0) given.insert(name);
      if (opt->get_items_expected_max() > 1) lists.insert(name);
    }
    std::vector<std::string> merged{std::string(to_string(s))};
    for (const auto& [key, value] : detail::read_config_file(cfg.config_file)) {
      if (key == "subcommand") {
        if (value != to_string(s)) {
          throw ConfigError("subcommand: config file is for '" + value + "', not '" +
                            std::string(to_string(s)) + "'");
        }
        continue;
      }
      if (key == "config" || key == "help" || !known.count(key)) {
        throw ConfigError(key + ": unknown key in config file " + cfg.config_file);
      }
      if (given.count(key)) continue;
      if (lists.count(key)) {
        // List values are separated by whitespace or commas.
        merged.push_back("--" + key);
        std::string item;
        for (char ch : value + ' ') {
          if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
            if (!item.empty()) merged.push_back(item);
            item.clear();
          } else {
            item += ch;
          }
        }
      } else {
        merged.push_back("--" + key + "=" + value);
      }
    }
    const auto at = std::find(args.begin(), args.end(), std::string(to_string(s)));
    merged.insert(merged.end(), at + 1, args.end());
    detail::Parser second;
    second.parse(merged);
    cfg = second.configs.at(s);
  }
  cfg.validate();
  return cfg;
}

}  // namespace mvn::report
