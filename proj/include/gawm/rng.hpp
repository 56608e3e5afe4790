#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gawm {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mixes a base seed with a stream tag so that independent consumers
// (environments, samplers, workers) get decorrelated streams that are still
// a pure function of the run seed.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x51ed270b6c4b2f2dULL));
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(splitmix64(seed)) {}

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double normal() {
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(std::uniform_int_distribution<int64_t>(0, n - 1)(engine_));
  }

  int64_t uniform_int64(int64_t n) {
    return std::uniform_int_distribution<int64_t>(0, n - 1)(engine_);
  }

  // Inverse-CDF draw from an unnormalized weight vector.
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  Rng split(uint64_t stream) {
    return Rng(derive_seed(engine_(), stream));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gawm
