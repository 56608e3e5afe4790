#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "gawm/env.hpp"

namespace gawm {

enum class Provenance { kReal, kPseudo };

struct EpisodeTrajectory {
  std::vector<Mat> observations;        // L+1 entries, n_agents x obs_dim
  std::vector<std::vector<int>> actions;  // L joint actions
  std::vector<double> rewards_raw;      // L
  std::vector<double> rewards_smoothed; // L
  std::vector<double> continuations;    // L, values in {0,1}
  int64_t episode_id = 0;
  uint64_t seed = 0;
  std::string env_name;
  bool success = false;

  int length() const { return static_cast<int>(actions.size()); }
  // Throws InputError when the length/continuation invariants do not hold.
  void validate() const;
};

// A contiguous slice of a stored episode: window_len transitions plus the
// closing observation.
struct TrajectoryWindow {
  std::vector<Mat> observations;   // window_len + 1
  std::vector<std::vector<int>> actions;
  std::vector<double> rewards_smoothed;
  std::vector<double> rewards_raw;
  std::vector<double> continuations;
  int64_t episode_id = 0;
  int offset = 0;
};

// Imagined rollout seeded from a real observation.
struct PseudoSegment {
  std::vector<Mat> observations;   // k+1 entries, first one is the real seed
  std::vector<std::vector<int>> actions;
  std::vector<double> rewards;
  std::vector<double> continuations;
  std::vector<Eigen::VectorXd> log_probs;  // behaviour log-probs per step/agent
  int64_t origin_episode = 0;
  int origin_t = 0;
  Provenance source = Provenance::kPseudo;

  int length() const { return static_cast<int>(actions.size()); }
};

class RealBuffer {
 public:
  explicit RealBuffer(int capacity) : capacity_(capacity) {}

  void push(EpisodeTrajectory episode);  // FIFO eviction past capacity
  std::vector<TrajectoryWindow> sample_windows(int batch_size, int window_len,
                                               uint64_t seed) const;
  // Uniform draw of one (episode, timestep) observation, reproducible.
  std::pair<const EpisodeTrajectory*, int> sample_seed_state(Rng& rng) const;

  int size() const { return static_cast<int>(episodes_.size()); }
  bool empty() const { return episodes_.empty(); }
  const std::deque<EpisodeTrajectory>& episodes() const { return episodes_; }

 private:
  int capacity_;
  std::deque<EpisodeTrajectory> episodes_;
};

class PseudoBuffer {
 public:
  explicit PseudoBuffer(int capacity) : capacity_(capacity) {}

  void push(PseudoSegment segment);
  std::vector<PseudoSegment> sample(int batch_size, uint64_t seed) const;
  void clear() { segments_.clear(); }

  int size() const { return static_cast<int>(segments_.size()); }
  bool empty() const { return segments_.empty(); }
  const std::deque<PseudoSegment>& segments() const { return segments_; }

 private:
  int capacity_;
  std::deque<PseudoSegment> segments_;
};

}  // namespace gawm
