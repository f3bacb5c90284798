#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/rng.hpp"

namespace mvn {

// ---------------------------------------------------------------------------
// Single-spike model: g(0) = M u, g(t) = u for 1 <= t <= T.

struct SpikeModel {
  double M = 1.0;
  double u = 1e-3;
  double d_bar = 1.0;
  std::size_t T = 1000;

  void validate() const {
    if (!std::isfinite(M) || M < 1.0) throw ConfigError("M: spike magnitude must be >= 1");
    if (!std::isfinite(u) || u == 0.0) throw ConfigError("u: baseline gradient must be nonzero");
    if (!std::isfinite(d_bar) || d_bar <= 0.0) throw ConfigError("dbar: must be > 0");
    if (T == 0) throw ConfigError("T: horizon must be >= 1");
  }
};

inline double spike_gradient(const SpikeModel& model, std::size_t t) {
  if (t > model.T) {
    throw ConfigError("spike_gradient: t = " + std::to_string(t) + " exceeds horizon T = " +
                      std::to_string(model.T));
  }
  return t == 0 ? model.M * model.u : model.u;
}

// ---------------------------------------------------------------------------
// Symmetric conditional noise: g = mu + zeta, zeta symmetric about zero.

enum class NoiseLaw { Gaussian, Uniform, Rademacher };

inline std::string_view to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::Gaussian:
      return "gaussian";
    case NoiseLaw::Uniform:
      return "uniform";
    case NoiseLaw::Rademacher:
      return "rademacher";
  }
  return "gaussian";
}

inline NoiseLaw parse_noise_law(std::string_view text) {
  if (text == "gaussian") return NoiseLaw::Gaussian;
  if (text == "uniform") return NoiseLaw::Uniform;
  if (text == "rademacher") return NoiseLaw::Rademacher;
  throw ConfigError("law: unknown noise law '" + std::string(text) +
                    "' (expected gaussian, uniform or rademacher)");
}

/// `scale` is the standard deviation for Gaussian noise, the half-width for
/// Uniform noise and the jump size for Rademacher noise (draws mu +/- scale).
struct SymmetricNoiseModel {
  std::vector<double> mu;
  std::vector<double> scale;
  NoiseLaw law = NoiseLaw::Gaussian;

  static SymmetricNoiseModel scalar(double mu, double scale, NoiseLaw law = NoiseLaw::Gaussian) {
    return {{mu}, {scale}, law};
  }

  void validate() const {
    if (mu.size() != scale.size() || mu.empty()) {
      throw ConfigError("noise: mu and scale must be nonempty with equal length");
    }
    for (double s : scale) {
      if (!std::isfinite(s) || s < 0.0) throw ConfigError("noise: scale must be >= 0");
    }
  }

  /// Draw of the centered noise for coordinate i.
  double draw_noise(std::size_t i, Rng& rng) const {
    const double s = scale[i];
    if (s == 0.0) return 0.0;
    switch (law) {
      case NoiseLaw::Gaussian:
        return s * rng.normal();
      case NoiseLaw::Uniform:
        return rng.uniform(-s, s);
      case NoiseLaw::Rademacher:
        return s * rng.rademacher();
    }
    return 0.0;
  }
};

inline std::vector<double> sample_symmetric(const SymmetricNoiseModel& model, Rng& rng) {
  model.validate();
  std::vector<double> g(model.mu.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = model.mu[i] + model.draw_noise(i, rng);
  return g;
}

// ---------------------------------------------------------------------------
// High-SNR oracle on F(x) = (L/2)||x||^2: g = L x + xi with
// |xi_i| <= delta |L x_i| and E[xi_i^2] <= sigma^2.

enum class HighSnrLaw { TruncatedGaussian, ScaledUniform, Zero };

inline std::string_view to_string(HighSnrLaw law) {
  switch (law) {
    case HighSnrLaw::TruncatedGaussian:
      return "truncated-gaussian";
    case HighSnrLaw::ScaledUniform:
      return "scaled-uniform";
    case HighSnrLaw::Zero:
      return "zero";
  }
  return "zero";
}

inline HighSnrLaw parse_high_snr_law(std::string_view text) {
  if (text == "truncated-gaussian") return HighSnrLaw::TruncatedGaussian;
  if (text == "scaled-uniform") return HighSnrLaw::ScaledUniform;
  if (text == "zero") return HighSnrLaw::Zero;
  throw ConfigError("law: unknown high-SNR law '" + std::string(text) +
                    "' (expected truncated-gaussian, scaled-uniform or zero)");
}

struct QuadraticObjective {
  double L = 1.0;

  [[nodiscard]] double value(std::span<const double> x) const {
    double s = 0.0;
    for (double v : x) s += v * v;
    return 0.5 * L * s;
  }
  [[nodiscard]] double grad_norm(std::span<const double> x) const {
    double s = 0.0;
    for (double v : x) s += v * v;
    return L * std::sqrt(s);
  }
};

struct HighSnrOracle {
  QuadraticObjective objective;
  double delta = 0.3;
  double sigma = 0.1;
  HighSnrLaw law = HighSnrLaw::TruncatedGaussian;

  /// delta = 0 is accepted only together with the Zero law.
  void validate() const {
    if (!std::isfinite(objective.L) || objective.L <= 0.0) throw ConfigError("L: must be > 0");
    if (!(delta >= 0.0 && delta < 1.0)) {
      throw ConfigError("delta: relative noise bound must lie in [0, 1)");
    }
    if (!std::isfinite(sigma) || sigma < 0.0) throw ConfigError("sigma: must be >= 0");
  }
};

inline std::vector<double> sample_high_snr(const HighSnrOracle& oracle, std::span<const double> x,
                                           Rng& rng) {
  oracle.validate();
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw NumericError("sample_high_snr: non-finite x");
    const double grad = oracle.objective.L * x[i];
    const double bound = oracle.delta * std::abs(grad);
    double xi = 0.0;
    switch (oracle.law) {
      case HighSnrLaw::Zero:
        break;
      case HighSnrLaw::TruncatedGaussian: {
        const double sd = std::min(oracle.sigma, bound / 3.0);
        if (sd > 0.0) {
          do {
            xi = sd * rng.normal();
          } while (std::abs(xi) > bound);
        }
        break;
      }
      case HighSnrLaw::ScaledUniform: {
        // Half-width capped so both |xi| <= bound and E[xi^2] = w^2/3 <= sigma^2.
        const double width = std::min(bound, std::sqrt(3.0) * oracle.sigma);
        if (width > 0.0) xi = rng.uniform(-width, width);
        break;
      }
    }
    g[i] = grad + xi;
  }
  return g;
}

}  // namespace mvn
