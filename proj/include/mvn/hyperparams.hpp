#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "mvn/error.hpp"

namespace mvn {

enum class DecayMode { None, Coupled, Decoupled };

inline std::string_view to_string(DecayMode mode) {
  switch (mode) {
    case DecayMode::None:
      return "none";
    case DecayMode::Coupled:
      return "coupled";
    case DecayMode::Decoupled:
      return "decoupled";
  }
  return "none";
}

inline DecayMode parse_decay_mode(std::string_view text) {
  if (text == "none") return DecayMode::None;
  if (text == "coupled") return DecayMode::Coupled;
  if (text == "decoupled") return DecayMode::Decoupled;
  throw ConfigError("decay_mode: unknown value '" + std::string(text) +
                    "' (expected none, coupled or decoupled)");
}

/// Optimizer hyperparameters shared by all four update rules.
///
/// `eps` is added outside the square root of the bias-corrected normalizer;
/// `eps_s` is a floor added inside the normalizer accumulator at every step.
/// With coupled decay `lambda * x` is added to the raw gradient before any
/// moment update; with decoupled decay `eta * lambda * x` is subtracted from
/// the parameters directly.
struct HyperParams {
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double eps_s = 0.0;
  double lambda = 0.0;
  DecayMode decay_mode = DecayMode::None;

  /// Throws ConfigError naming the first offending field.
  void validate() const {
    auto fail = [](const char* field, double value, const char* rule) {
      throw ConfigError(std::string(field) + ": value " + std::to_string(value) +
                        " out of range (" + rule + ")");
    };
    if (!std::isfinite(eta) || eta <= 0.0) fail("eta", eta, "must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", beta1, "must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", beta2, "must be in [0, 1)");
    if (!std::isfinite(eps) || eps < 0.0) fail("eps", eps, "must be >= 0");
    if (!std::isfinite(eps_s) || eps_s < 0.0) fail("eps_s", eps_s, "must be >= 0");
    if (!std::isfinite(lambda) || lambda < 0.0) fail("lambda", lambda, "must be >= 0");
  }

  /// Both denominator guards are zero; a zero normalizer then divides by zero.
  [[nodiscard]] bool unprotected() const { return eps == 0.0 && eps_s == 0.0; }
};

}  // namespace mvn
