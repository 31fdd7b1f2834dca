// Renormalizes a random O_eps surface and estimates the top Lyapunov exponent.

#include <cstdio>
#include <random>

#include "windtree/renorm.hpp"
#include "windtree/sampling.hpp"

using namespace windtree;

int main() {
  std::mt19937_64 rng(7);
  const SampledSurface s = sample_o_epsilon(rng, 0.05);

  RenormOptions ro;
  ro.keep_levels = false;
  const RenormRun run = run_renorm(s.torus, ro);
  const LyapunovEstimate est = lyapunov_estimate(run.acc);
  const HalvesEstimate h = two_half_estimate(run.acc);
  const StripPrediction pred = predict_strip(to_params_coords(s.torus, est.contracted_dir), s.params);

  std::printf("steps           %zu\n", run.log.size());
  std::printf("time            %.2f\n", run.acc.time());
  std::printf("theta_top       %.4f\n", est.theta_top);
  std::printf("halves          %.4f / %.4f (stderr %.4f)\n", h.theta_first, h.theta_second, h.stderr_diff);
  std::printf("strip Theta     %.4f rad\n", pred.Theta);
  return 0;
}
