#pragma once

#include <vector>

namespace gawm {

struct SmoothingConfig {
  int H = 2;           // half-window
  double sigma = 1.0;  // Gaussian width
  bool enabled = true;
};

// Normalized Gaussian weights w_i ~ exp(-i^2 / (2 sigma^2)) for i in [-H, H],
// sum(w) == 1, symmetric. Length 2H+1.
std::vector<double> smoothing_kernel(int H, double sigma);

// smoothed[t] = sum_i w_i * rewards[clip(t+i, 0, last)]. The identity map when
// disabled or H == 0. Total reward is conserved exactly whenever the first H
// and last H entries are zero; boundary clipping re-weights edge rewards
// otherwise.
std::vector<double> smooth_rewards(const std::vector<double>& rewards,
                                   const SmoothingConfig& config);

}  // namespace gawm
