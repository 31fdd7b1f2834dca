// Traces one wind-tree trajectory and reports the strip it stays in.

#include <cstdio>

#include "windtree/runs.hpp"

using namespace windtree;

int main() {
  SystemParams p;
  p.a = 0.37;
  p.b = 0.64;
  p.theta = 1.3465;
  p.e1 = {4.0275, 1.5938};
  p.e2 = {-2.9894, 4.6724};

  AnalyzeOptions opt;
  opt.events = 200000;
  opt.audit = false;
  const AnalysisResult r = analyze(p, {0.0, 2.5}, true, opt);

  std::printf("events          %lld\n", static_cast<long long>(r.events));
  std::printf("fitted Theta    %.4f rad\n", r.Theta_fit);
  std::printf("strip width     %.4f\n", r.width);
  std::printf("trapping check  %s (width ratio %.3f, along growth %.2f)\n", r.trapping.pass ? "pass" : "fail",
              r.trapping.width_ratio, r.trapping.along_ratio);
  if (r.Theta_predicted) std::printf("predicted Theta %.4f rad, gap %.3f deg\n", *r.Theta_predicted, *r.strip_gap_deg);
  if (r.theta_top) std::printf("theta_top       %.4f\n", *r.theta_top);
  if (r.diffusion_slope) std::printf("diffusion slope %.3f\n", *r.diffusion_slope);
  for (const auto& [stage, msg] : r.errors) std::printf("%s: %s\n", stage.c_str(), msg.c_str());
  return 0;
}
