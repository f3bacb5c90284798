#include <gtest/gtest.h>

#include <cmath>

#include "mvn/spike.hpp"

using namespace mvn;

namespace {

HyperParams fig3a() {
  HyperParams hp;
  hp.beta1 = 0.9;
  hp.beta2 = 0.6;
  hp.eps = 1e-8;
  return hp;
}

HyperParams fig3b() {
  HyperParams hp;
  hp.beta1 = 0.99999;
  hp.beta2 = 0.1;
  hp.eps = 1e-8;
  return hp;
}

}  // namespace

TEST(TStar, Examples) {
  EXPECT_EQ(t_star(100.0, 0.6), 17u);
  EXPECT_EQ(t_star(1.0, 0.5), 1u);
}

TEST(TStar, MinimalityRecheck) {
  for (double M : {1e2, 1e3, 1e6, 1e9}) {
    for (double b2 : {0.1, 0.6, 0.9, 0.999}) {
      const std::size_t t = t_star(M, b2);
      const double scale = (1.0 - b2) * M * M;
      double pw = 1.0;
      for (std::size_t i = 0; i + 1 < t; ++i) pw *= b2;
      if (t > 1) {
        EXPECT_GT(scale * pw, 1.0) << M << " " << b2;
      }
      EXPECT_LE(scale * pw * b2, 1.0) << M << " " << b2;
    }
  }
}

TEST(TStar, ExtremeRangeWithinCap) {
  EXPECT_GT(t_star(1e9, 0.999999), 1'000'000u);
  EXPECT_THROW(t_star(0.5, 0.6), ConfigError);
  EXPECT_THROW(t_star(10.0, 1.0), ConfigError);
}

TEST(ClosedForm, Examples) {
  const SpikeModel m{1e3, 1e-3, 1.0, 20000};
  const SpikeMoments m0 = spike_closed_form_moments(m, fig3a(), 0);
  EXPECT_NEAR(m0.m, 0.1, 1e-15);
  EXPECT_NEAR(m0.v, 1.0, 1e-15);

  const SpikeModel other{7.0, -2.5, 3.0, 5};
  const HyperParams hp = fig3b();
  EXPECT_DOUBLE_EQ(spike_closed_form_moments(other, hp, 0).m, (1.0 - hp.beta1) * 7.0 * -2.5);

  const SpikeMoments late = spike_closed_form_moments(m, fig3a(), 10000);
  EXPECT_NEAR(late.m, 1e-3, 1e-8 * 1e-3);
  EXPECT_NEAR(late.v, 1e-6, 1e-8 * 1e-6);
  EXPECT_THROW(spike_closed_form_moments(m, fig3a(), 20001), ConfigError);
}

TEST(RunSpike, AdamMatchesClosedForm) {
  for (double M : {1e2, 1e4, 1e6}) {
    const SpikeRunResult r = run_spike({M, 1e-3, 1.0, 1000}, fig3a(), OptimizerKind::adam());
    ASSERT_TRUE(r.closed_form_max_rel_err);
    EXPECT_LE(*r.closed_form_max_rel_err, 1e-10);
    EXPECT_TRUE(r.t_star);
  }
}

TEST(RunSpike, LaPropAndMvnAreBoundedAndMIndependent) {
  for (OptimizerKind k : {OptimizerKind::laprop(), OptimizerKind::mvn_grad()}) {
    double first = 0.0;
    for (double M : {1e2, 1e4, 1e6}) {
      const SpikeRunResult r = run_spike({M, 1e-3, 1.0, 1000}, fig3a(), k);
      ASSERT_TRUE(r.analytic_bound);
      EXPECT_LE(r.peak_update, *r.analytic_bound);
      if (first == 0.0) first = r.peak_update;
      EXPECT_NEAR(r.peak_update, first, 1e-6 * first);
    }
  }
}

TEST(RunSpike, AdamGrowsWithSpike) {
  const SpikeRunResult lo = run_spike({1e3, 10.0, 10.0, 50}, fig3b(), OptimizerKind::adam());
  const SpikeRunResult hi = run_spike({1e6, 10.0, 10.0, 50}, fig3b(), OptimizerKind::adam());
  EXPECT_GE(hi.peak_update, 100.0 * lo.peak_update);
  EXPECT_FALSE(hi.analytic_bound);
}

TEST(RunSpike, AdamLowerBoundAtForgettingTime) {
  for (double M : {1e4, 1e5, 1e6}) {
    const SpikeRunResult r = run_spike({M, 10.0, 10.0, 50}, fig3b(), OptimizerKind::adam());
    ASSERT_TRUE(r.delta_at_t_star);
    EXPECT_GE(*r.delta_at_t_star, *r.lower_bound_at_t_star) << M;
  }
}

TEST(RunSpike, PeakIsFirstAttainmentOfTrajectoryMax) {
  const SpikeRunResult r =
      run_spike({1e4, 1e-3, 1.0, 300}, fig3a(), OptimizerKind::laprop(), {false, true});
  ASSERT_EQ(r.trajectory.size(), 301u);
  double best = -1.0;
  std::size_t at = 0;
  for (const auto& p : r.trajectory) {
    if (std::abs(p.delta) > best) {
      best = std::abs(p.delta);
      at = p.t;
    }
  }
  EXPECT_EQ(r.peak_update, best);
  EXPECT_EQ(r.peak_time, at);
}

TEST(RunSpike, MEqualsOneMatchesConstantStream) {
  const HyperParams hp = fig3a();
  const SpikeRunResult r =
      run_spike({1.0, 1e-3, 1.0, 200}, hp, OptimizerKind::mvn_grad(), {false, true});
  EXPECT_LE(r.peak_update, *r.analytic_bound);
  OptimizerState s = init_state(1, 1.0);
  std::vector<double> x{0.0}, g{1e-3}, d{0.0};
  for (std::size_t t = 0; t <= 200; ++t) {
    apply_step(s, x, g, d, hp, OptimizerKind::mvn_grad(), {false, false});
    EXPECT_EQ(d[0], r.trajectory[t].delta);
  }
}

TEST(RunSpike, AdaBeliefHasNoBound) {
  const SpikeRunResult r = run_spike({1e4, 1e-3, 1.0, 100}, fig3a(), OptimizerKind::adabelief());
  EXPECT_FALSE(r.analytic_bound);
  EXPECT_TRUE(r.bound_ok());
}

TEST(RunSpike, BiasCorrectedRunSkipsRawAssertions) {
  const SpikeRunResult r =
      run_spike({1e4, 1e-3, 1.0, 100}, fig3a(), OptimizerKind::adam(), {true, false});
  EXPECT_TRUE(r.bias_correction);
  EXPECT_FALSE(r.closed_form_max_rel_err);
  EXPECT_FALSE(r.analytic_bound);
}
