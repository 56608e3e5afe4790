#include "gawm/reward_shaping.hpp"

#include <algorithm>
#include <cmath>

#include "gawm/error.hpp"

namespace gawm {

std::vector<double> smoothing_kernel(int H, double sigma) {
  if (H < 0) throw InputError("smoothing_kernel: H must be >= 0");
  if (sigma <= 0.0) throw InputError("smoothing_kernel: sigma must be positive");
  std::vector<double> w(2 * H + 1);
  double total = 0.0;
  for (int i = -H; i <= H; ++i) {
    double x = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    w[i + H] = x;
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<double> smooth_rewards(const std::vector<double>& rewards,
                                   const SmoothingConfig& config) {
  if (rewards.empty()) throw InputError("smooth_rewards: empty reward vector");
  if (!config.enabled || config.H == 0) return rewards;
  std::vector<double> w = smoothing_kernel(config.H, config.sigma);
  int last = static_cast<int>(rewards.size()) - 1;
  std::vector<double> out(rewards.size(), 0.0);
  for (int t = 0; t <= last; ++t) {
    double acc = 0.0;
    for (int i = -config.H; i <= config.H; ++i) {
      int src = std::clamp(t + i, 0, last);
      acc += w[i + config.H] * rewards[src];
    }
    out[t] = acc;
  }
  return out;
}

}  // namespace gawm
