#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>

#include "mvn/error.hpp"

namespace mvn {

/// Whether momentum is applied to the raw gradient before dividing by the
/// normalizer, or to the already-normalized gradient.
enum class Ordering { MomentumThenNormalize, NormalizeThenMomentum };

/// Which EMA sits in the denominator: the uncentered second moment v, or the
/// variance proxy s (EMA of squared deviations from the gradient mean).
enum class Normalizer { SecondMoment, Variance };

/// A point in the ordering x normalizer design space.
struct OptimizerKind {
  Ordering ordering = Ordering::MomentumThenNormalize;
  Normalizer normalizer = Normalizer::SecondMoment;

  static constexpr OptimizerKind adam() {
    return {Ordering::MomentumThenNormalize, Normalizer::SecondMoment};
  }
  static constexpr OptimizerKind adabelief() {
    return {Ordering::MomentumThenNormalize, Normalizer::Variance};
  }
  static constexpr OptimizerKind laprop() {
    return {Ordering::NormalizeThenMomentum, Normalizer::SecondMoment};
  }
  static constexpr OptimizerKind mvn_grad() {
    return {Ordering::NormalizeThenMomentum, Normalizer::Variance};
  }

  [[nodiscard]] constexpr bool normalize_first() const {
    return ordering == Ordering::NormalizeThenMomentum;
  }
  [[nodiscard]] constexpr bool variance_normalized() const {
    return normalizer == Normalizer::Variance;
  }

  friend constexpr bool operator==(OptimizerKind, OptimizerKind) = default;
};

/// Canonical ordering used when sorting sweep arms.
constexpr std::array<OptimizerKind, 4> all_kinds() {
  return {OptimizerKind::adam(), OptimizerKind::adabelief(), OptimizerKind::laprop(),
          OptimizerKind::mvn_grad()};
}

constexpr int kind_index(OptimizerKind kind) {
  return (kind.normalize_first() ? 2 : 0) + (kind.variance_normalized() ? 1 : 0);
}

inline std::string_view to_string(OptimizerKind kind) {
  switch (kind_index(kind)) {
    case 0:
      return "adam";
    case 1:
      return "adabelief";
    case 2:
      return "laprop";
    default:
      return "mvn-grad";
  }
}

/// Accepts the names produced by to_string, case-insensitively, plus the
/// spellings "mvngrad" and "mvn_grad".
inline OptimizerKind parse_kind(std::string_view text) {
  std::string key(text);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "adam") return OptimizerKind::adam();
  if (key == "adabelief") return OptimizerKind::adabelief();
  if (key == "laprop") return OptimizerKind::laprop();
  if (key == "mvn-grad" || key == "mvngrad" || key == "mvn_grad") return OptimizerKind::mvn_grad();
  throw ConfigError("kind: unknown optimizer '" + std::string(text) +
                    "' (expected adam, adabelief, laprop or mvn-grad)");
}

}  // namespace mvn
