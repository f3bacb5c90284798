#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mvn/stats.hpp"
#include "mvn/vgap.hpp"

using namespace mvn;

namespace {

HyperParams gap_hp(double b1 = 0.9) {
  HyperParams hp;
  hp.beta1 = b1;
  hp.beta2 = 0.95;
  hp.eps = 1e-8;
  return hp;
}

}  // namespace

TEST(Stats, SampleVarianceOfConstantIsZero) {
  const std::vector<double> x(10, 1e8 + 0.1);
  EXPECT_EQ(sample_variance(x), 0.0);
  EXPECT_DOUBLE_EQ(sample_variance(std::vector<double>{1.0, 2.0, 3.0, 4.0}), 5.0 / 3.0);
}

TEST(Stats, JackknifeOfVarianceGapMatchesBruteForce) {
  Rng r(3);
  std::vector<double> a(20), b(20);
  for (auto& v : a) v = r.normal();
  for (auto& v : b) v = 2.0 * r.normal();
  const GapEstimate est = variance_gap(a, b);
  EXPECT_NEAR(est.gap, sample_variance(a) - sample_variance(b), 1e-12);
  std::vector<double> loo;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::vector<double> aa, bb;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j == i) continue;
      aa.push_back(a[j]);
      bb.push_back(b[j]);
    }
    loo.push_back(sample_variance(aa) - sample_variance(bb));
  }
  const double n = static_cast<double>(a.size());
  const double se = std::sqrt(sample_variance(loo) * (n - 1.0) * (n - 1.0) / n);
  EXPECT_NEAR(est.std_error, se, 1e-10 * se);
}

TEST(Stats, AveragedGapWithOneCoordinateEqualsScalarGap) {
  Rng r(4);
  std::vector<double> a(30), b(30);
  for (auto& v : a) v = r.normal();
  for (auto& v : b) v = 0.5 * r.normal();
  const GapEstimate s = variance_gap(a, b);
  const GapEstimate m = averaged_variance_gap(a, b, 30, 1);
  EXPECT_NEAR(s.gap, m.gap, 1e-14);
  EXPECT_NEAR(s.std_error, m.std_error, 1e-12);
  EXPECT_THROW(averaged_variance_gap(a, b, 29, 1), ConfigError);
}

TEST(Stats, TwoDrawStderrIsFinite) {
  const std::vector<double> a{1.0, 2.0}, b{0.5, 0.0};
  const GapEstimate est = variance_gap(a, b);
  EXPECT_TRUE(std::isfinite(est.std_error));
  EXPECT_THROW(variance_gap(std::vector<double>{1.0}, std::vector<double>{1.0}), ConfigError);
}

TEST(OneStep, MatchesDefiningRecursions) {
  const HyperParams hp = gap_hp();
  const FrozenScalarState f{0.5, 0.04, 0.3};
  const double g = 0.8;
  const auto [ab, mv] = one_step_updates(f, hp, g);
  const double m_t = hp.beta1 * f.m_prev + (1.0 - hp.beta1) * g;
  const double s_t = hp.beta2 * f.s_prev + (1.0 - hp.beta2) * (g - m_t) * (g - m_t);
  const double y = 1.0 / (std::sqrt(s_t) + hp.eps);
  EXPECT_NEAR(ab, m_t * y, 1e-14);
  EXPECT_NEAR(mv, hp.beta1 * f.u_prev + (1.0 - hp.beta1) * g * y, 1e-14);
  // g - m_t = b1 (g - m_prev).
  EXPECT_NEAR(g - m_t, hp.beta1 * (g - f.m_prev), 1e-15);
}

TEST(ClosedForm, DegenerateCasesAreExactlyZero) {
  Rng r(1);
  const auto noise = SymmetricNoiseModel::scalar(0.5, 0.2);
  EXPECT_EQ(vgap_closed_form(0.5, 0.04, noise, gap_hp(0.0), r, 1000), 0.0);
  EXPECT_EQ(vgap_closed_form(0.0, 0.04, SymmetricNoiseModel::scalar(0.0, 0.2), gap_hp(), r, 1000), 0.0);
  EXPECT_EQ(vgap_closed_form(0.5, 0.04, SymmetricNoiseModel::scalar(0.5, 0.0), gap_hp(), r, 1000), 0.0);
}

TEST(ClosedForm, NeverNegative) {
  Rng r(2);
  for (int i = 0; i < 50; ++i) {
    HyperParams hp = gap_hp(r.uniform(0.0, 0.999));
    hp.beta2 = r.uniform(0.0, 0.999);
    const double mu = r.uniform(-2.0, 2.0);
    const auto noise = SymmetricNoiseModel::scalar(mu, r.uniform(0.0, 1.0),
                                                   static_cast<NoiseLaw>(r.below(3)));
    EXPECT_GE(vgap_closed_form(mu, r.uniform(0.0, 0.1), noise, hp, r, 1000), 0.0);
  }
}

TEST(MonteCarlo, GaussianAgreesWithClosedForm) {
  Rng r(2024);
  const VGapResult res = vgap_monte_carlo(0.5, 0.04, 0.0, SymmetricNoiseModel::scalar(0.5, 0.2),
                                          gap_hp(), r, 100000, 1000000);
  EXPECT_GT(res.closed_form_gap, 0.0);
  EXPECT_GT(res.mc_stderr, 0.0);
  EXPECT_LE(std::abs(res.mc_gap - res.closed_form_gap), 4.0 * res.mc_stderr);
}

TEST(MonteCarlo, UniformAgreesWithClosedForm) {
  Rng r(77);
  const VGapResult res =
      vgap_monte_carlo(-0.3, 0.01, 1.0, SymmetricNoiseModel::scalar(-0.3, 0.25, NoiseLaw::Uniform),
                       gap_hp(), r, 100000, 1000000);
  EXPECT_GT(res.closed_form_gap, 0.0);
  EXPECT_TRUE(res.agrees(4.0));
}

TEST(MonteCarlo, Beta1ZeroGivesZeroGap) {
  Rng r(5);
  const VGapResult res = vgap_monte_carlo(0.5, 0.04, 0.0, SymmetricNoiseModel::scalar(0.5, 0.2),
                                          gap_hp(0.0), r, 10000, 1000);
  EXPECT_LE(std::abs(res.mc_gap), 4.0 * res.mc_stderr + 1e-15);
  EXPECT_EQ(res.closed_form_gap, 0.0);
}

TEST(MonteCarlo, RejectsTooFewDraws) {
  Rng r(5);
  EXPECT_THROW(vgap_monte_carlo(0.5, 0.04, 0.0, SymmetricNoiseModel::scalar(0.5, 0.2), gap_hp(),
                                r, 1, 1000),
               ConfigError);
}

TEST(MonteCarlo, RademacherCenteredOnMeanIsDegenerate) {
  // (g - m_prev)^2 is constant, so 1/(sqrt(s_t)+eps) is constant and the gap
  // vanishes. The enumeration of both outcomes gives zero up to rounding.
  const HyperParams hp = gap_hp();
  const FrozenScalarState f{0.5, 0.04, 0.0};
  const std::vector<double> outcomes{0.3, 0.7}, probs{0.5, 0.5};
  const double exact = exact_variance_gap(f, hp, outcomes, probs);
  Rng r(8);
  const auto noise = SymmetricNoiseModel::scalar(0.5, 0.2, NoiseLaw::Rademacher);
  const VGapResult res = vgap_monte_carlo(0.5, 0.04, 0.0, noise, hp, r, 1000, 1000);
  EXPECT_EQ(res.closed_form_gap, 0.0);
  EXPECT_NEAR(exact, 0.0, 1e-12);
  EXPECT_TRUE(res.agrees(4.0));
}

// Enumeration oracle: with a two-point law and K draws, all 2^K outcome
// sequences are enumerated. The estimator's exact expectation must equal the
// population gap (unbiasedness), and the mean of independent MC replicates
// must sit within 4 standard errors of it.
TEST(MonteCarlo, TwoPointEnumerationOracle) {
  const HyperParams hp = gap_hp();
  const FrozenScalarState f{0.2, 0.05, 0.1};
  // Mean-zero asymmetric two-point noise around mu = m_prev. Without symmetry
  // the population gap may take either sign; only unbiasedness is checked.
  const double p_hi = 0.25;
  const std::vector<double> outcomes{0.2 - 0.1, 0.2 + 0.3};
  const std::vector<double> probs{1.0 - p_hi, p_hi};
  const double exact = exact_variance_gap(f, hp, outcomes, probs);
  ASSERT_NE(exact, 0.0);

  for (std::size_t K : {2u, 5u, 12u}) {
    double expectation = 0.0;
    for (std::uint64_t mask = 0; mask < (1ULL << K); ++mask) {
      std::vector<double> a(K), b(K);
      double prob = 1.0;
      for (std::size_t k = 0; k < K; ++k) {
        const int hi = (mask >> k) & 1;
        prob *= probs[hi];
        std::tie(a[k], b[k]) = one_step_updates(f, hp, outcomes[hi]);
      }
      expectation += prob * variance_gap(a, b).gap;
    }
    EXPECT_NEAR(expectation, exact, 1e-12 * std::abs(exact) + 1e-15) << "K=" << K;

    Rng r(1000 + K);
    const int reps = 4000;
    std::vector<double> est(reps);
    for (auto& e : est) {
      e = sample_variance_gap(
              f, hp, [&] { return r.uniform() < p_hi ? outcomes[1] : outcomes[0]; }, K)
              .gap;
    }
    const double se = std::sqrt(sample_variance(est) / reps);
    EXPECT_LE(std::abs(mean(est) - exact), 4.0 * se) << "K=" << K;
  }
}
