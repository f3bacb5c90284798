#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mvn/error.hpp"

namespace mvn {

/// Unbiased sample variance. Values are shifted by the first element before
/// accumulation, so a constant sample yields exactly zero.
inline double sample_variance(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double shift = x[0];
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : x) {
    const double d = v - shift;
    s1 += d;
    s2 += d * d;
  }
  const double nn = static_cast<double>(n);
  return (s2 - s1 * s1 / nn) / (nn - 1.0);
}

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

struct GapEstimate {
  double gap = 0.0;  // var(a) - var(b)
  double std_error = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
};

/// Running sums of a shifted sample, enough to evaluate the unbiased
/// variance of the full sample and of every leave-one-out subsample.
struct ShiftedSums {
  double shift = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;

  void reset(double shift_value) {
    shift = shift_value;
    s1 = 0.0;
    s2 = 0.0;
  }
  void add(double v) {
    const double d = v - shift;
    s1 += d;
    s2 += d * d;
  }
  [[nodiscard]] double variance(double n) const { return (s2 - s1 * s1 / n) / (n - 1.0); }
  [[nodiscard]] double variance_without(double v, double n) const {
    const double d = v - shift;
    const double a = s1 - d;
    const double b = s2 - d * d;
    return (b - a * a / (n - 1.0)) / (n - 2.0);
  }
};

/// Difference of sample variances of two paired samples with a standard
/// error. Uses the delete-one jackknife for n >= 3; for n = 2, where the
/// jackknife is undefined, the plug-in influence-function estimate is used.
inline GapEstimate variance_gap(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("variance_gap: sample sizes differ");
  const std::size_t n = a.size();
  if (n < 2) throw ConfigError("variance_gap: need at least 2 paired draws");
  ShiftedSums sa;
  ShiftedSums sb;
  sa.reset(a[0]);
  sb.reset(b[0]);
  for (std::size_t i = 0; i < n; ++i) {
    sa.add(a[i]);
    sb.add(b[i]);
  }
  const double nn = static_cast<double>(n);
  GapEstimate est;
  est.var_a = sa.variance(nn);
  est.var_b = sb.variance(nn);
  est.gap = est.var_a - est.var_b;

  if (n == 2) {
    // Influence terms (a_i - abar)^2 - (b_i - bbar)^2.
    const double ma = sa.s1 / nn;
    const double mb = sb.s1 / nn;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double da = a[i] - sa.shift - ma;
      const double db = b[i] - sb.shift - mb;
      w[i] = da * da - db * db;
    }
    est.std_error = std::sqrt(sample_variance(w) / nn) * nn / (nn - 1.0);
    return est;
  }

  double loo_sum = 0.0;
  double loo_sq = 0.0;
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = sa.variance_without(a[i], nn) - sb.variance_without(b[i], nn);
  }
  const double shift = loo[0];
  for (double v : loo) {
    loo_sum += v - shift;
    loo_sq += (v - shift) * (v - shift);
  }
  const double spread = loo_sq - loo_sum * loo_sum / nn;
  est.std_error = std::sqrt(std::max(0.0, spread) * (nn - 1.0) / nn);
  return est;
}

/// Coordinate-wise variance gap averaged over P coordinates. `a` and `b` hold
/// K paired draws of P coordinates each, row-major (draw k, coordinate j at
/// k * P + j). The standard error treats draws as the sampling unit: delete-one
/// jackknife of the averaged gap for K >= 3, influence estimate for K = 2.
inline GapEstimate averaged_variance_gap(std::span<const double> a, std::span<const double> b,
                                         std::size_t K, std::size_t P) {
  if (K < 2) throw ConfigError("averaged_variance_gap: need at least 2 draws");
  if (P == 0) throw ConfigError("averaged_variance_gap: need at least 1 coordinate");
  if (a.size() != K * P || b.size() != K * P) {
    throw ConfigError("averaged_variance_gap: sample shape mismatch");
  }
  std::vector<ShiftedSums> sa(P);
  std::vector<ShiftedSums> sb(P);
  for (std::size_t j = 0; j < P; ++j) {
    sa[j].reset(a[j]);
    sb[j].reset(b[j]);
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < P; ++j) {
      sa[j].add(a[k * P + j]);
      sb[j].add(b[k * P + j]);
    }
  }
  const double nn = static_cast<double>(K);
  const double pp = static_cast<double>(P);
  GapEstimate est;
  for (std::size_t j = 0; j < P; ++j) {
    est.var_a += sa[j].variance(nn);
    est.var_b += sb[j].variance(nn);
  }
  est.var_a /= pp;
  est.var_b /= pp;
  est.gap = est.var_a - est.var_b;

  std::vector<double> w(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < P; ++j) {
      const double va = a[k * P + j];
      const double vb = b[k * P + j];
      if (K == 2) {
        const double da = va - sa[j].shift - sa[j].s1 / nn;
        const double db = vb - sb[j].shift - sb[j].s1 / nn;
        w[k] += da * da - db * db;
      } else {
        w[k] += sa[j].variance_without(va, nn) - sb[j].variance_without(vb, nn);
      }
    }
    w[k] /= pp;
  }
  if (K == 2) {
    est.std_error = std::sqrt(sample_variance(w) / nn) * nn / (nn - 1.0);
  } else {
    est.std_error = std::sqrt(sample_variance(w) * (nn - 1.0) * (nn - 1.0) / nn);
  }
  return est;
}

}  // namespace mvn
