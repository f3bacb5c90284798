// Minimizes a noisy quadratic with each optimizer kind and prints the final
// objective, then feeds one gradient spike through LaProp and Adam.

#include <cstdio>
#include <string>
#include <vector>

#include "mvn/mvn.hpp"

int main() {
  using namespace mvn;

  const std::size_t d = 8;
  HyperParams hp;
  hp.eta = 0.05;
  hp.beta1 = 0.9;
  hp.beta2 = 0.99;

  for (OptimizerKind kind : all_kinds()) {
    Rng rng(42);
    OptimizerState state = init_state(d);
    std::vector<double> x(d, 3.0);
    std::vector<double> g(d);
    std::vector<double> delta(d);
    for (int t = 0; t < 500; ++t) {
      for (std::size_t i = 0; i < d; ++i) g[i] = x[i] + 0.1 * rng.normal();
      apply_step(state, x, g, delta, hp, kind);
    }
    const double f = QuadraticObjective{1.0}.value(x);
    std::printf("%-10s F(x_500) = %.3e\n", std::string(to_string(kind)).c_str(), f);
  }

  HyperParams spike_hp;
  spike_hp.beta1 = 0.9;
  spike_hp.beta2 = 0.6;
  for (double M : {1e2, 1e6}) {
    const SpikeModel model{M, 1e-3, 1.0, 1000};
    const auto lp = run_spike(model, spike_hp, OptimizerKind::laprop());
    const auto adam = run_spike(model, spike_hp, OptimizerKind::adam());
    std::printf("M = %.0e  peak |delta|: laprop %.6f  adam %.3f\n", M, lp.peak_update,
                adam.peak_update);
  }
  return 0;
}
