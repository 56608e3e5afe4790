#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gawm/rng.hpp"

namespace gawm {

using Mat = Eigen::MatrixXd;

struct EnvSpec {
  int n_agents = 0;
  int obs_dim = 0;
  int n_actions = 0;
  int max_episode_steps = 0;
  std::string name;
};

struct StepResult {
  Mat observations;       // n_agents x obs_dim, entries in [0, 1]
  double reward = 0.0;    // single team scalar
  double continuation = 1.0;  // 0 exactly on terminal transitions
  std::map<std::string, double> info;
};

// Cooperative Dec-POMDP with deterministic dynamics: (seed, action history)
// fully determines every trajectory. Handles are single-threaded.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Mat reset() = 0;
  virtual StepResult step(const std::vector<int>& joint_action) = 0;
  virtual bool done() const = 0;
  // Observation indices that describe global entities (shared across agents);
  // the metric module projects reconstructed observations onto this slice.
  virtual std::vector<int> global_feature_indices() const = 0;
  virtual std::unique_ptr<Env> clone() const = 0;
};

// Two agents on a G x G grid must stand on a stationary target cell and both
// play "tag" in the same step. Team reward +1.0 on the simultaneous tag,
// -0.01 per step otherwise; reward range [-0.01, 1.0]. Sight radius 1
// (Chebyshev): another agent's or the target's absolute position block is
// zeroed whenever it is out of range.
class CoopCaptureEnv : public Env {
 public:
  CoopCaptureEnv(uint64_t seed, int n_agents = 2, int grid = 5,
                 int max_steps = 40, int spawn_radius = 2);
  const EnvSpec& spec() const override { return spec_; }
  Mat reset() override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool done() const override { return done_; }
  std::vector<int> global_feature_indices() const override;
  std::unique_ptr<Env> clone() const override;

  enum Action { kUp = 0, kDown, kLeft, kRight, kStay, kTag };

  // Testing hook: pin an exact global state.
  void set_state(const std::vector<std::pair<int, int>>& agent_cells,
                 std::pair<int, int> target_cell, int step_count);
  std::pair<int, int> target() const { return target_; }
  const std::vector<std::pair<int, int>>& agents() const { return agents_; }

 private:
  Mat observe() const;
  EnvSpec spec_;
  int grid_, spawn_radius_;
  Rng rng_;
  std::vector<std::pair<int, int>> agents_;
  std::pair<int, int> target_;
  int step_count_ = 0;
  bool done_ = true;
};

// Two agents on a 1-D corridor with doors at both ends. A per-episode switch
// bit selects which door pays +1.0 when the runner (agent 1) steps on it; the
// wrong door pays -0.5 and also ends the episode. Only the scout (agent 0)
// observes the bit. Reward range [-0.5, 1.0], -0.01 per non-terminal step.
class SwitchCorridorEnv : public Env {
 public:
  SwitchCorridorEnv(uint64_t seed, int length = 5, int max_steps = 12);
  const EnvSpec& spec() const override { return spec_; }
  Mat reset() override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool done() const override { return done_; }
  std::vector<int> global_feature_indices() const override;
  std::unique_ptr<Env> clone() const override;

  enum Action { kLeft = 0, kRight, kStay };

  void set_state(int scout, int runner, int bit, int step_count);
  int open_door() const { return bit_ ? length_ - 1 : 0; }
  int bit() const { return bit_; }

 private:
  Mat observe() const;
  EnvSpec spec_;
  int length_;
  Rng rng_;
  int scout_ = 0, runner_ = 0, bit_ = 0;
  int step_count_ = 0;
  bool done_ = true;
};

std::unique_ptr<Env> make_env(const std::string& spec_name, uint64_t seed);
std::vector<std::string> registered_envs();

}  // namespace gawm
