#include "gawm/env.hpp"

#include <algorithm>
#include <cmath>

#include "gawm/error.hpp"

namespace gawm {

namespace {

int chebyshev(std::pair<int, int> a, std::pair<int, int> b) {
  return std::max(std::abs(a.first - b.first), std::abs(a.second - b.second));
}

}  // namespace

CoopCaptureEnv::CoopCaptureEnv(uint64_t seed, int n_agents, int grid,
                               int max_steps, int spawn_radius)
    : grid_(grid), spawn_radius_(spawn_radius), rng_(seed) {
  if (n_agents < 1 || grid < 2 || max_steps < 1) {
    throw ConfigError("coop_capture: invalid dimensions");
  }
  spec_.n_agents = n_agents;
  spec_.obs_dim = (n_agents + 1) * grid * grid + 1;
  spec_.n_actions = 6;
  spec_.max_episode_steps = max_steps;
  spec_.name = "coop_capture";
  agents_.assign(n_agents, {0, 0});
}

Mat CoopCaptureEnv::reset() {
  target_ = {rng_.uniform_int(grid_), rng_.uniform_int(grid_)};
  for (auto& a : agents_) {
    while (true) {
      std::pair<int, int> cell = {rng_.uniform_int(grid_), rng_.uniform_int(grid_)};
      if (cell == target_) continue;
      if (spawn_radius_ > 0 && chebyshev(cell, target_) > spawn_radius_) continue;
      a = cell;
      break;
    }
  }
  step_count_ = 0;
  done_ = false;
  return observe();
}

Mat CoopCaptureEnv::observe() const {
  int n = spec_.n_agents, cells = grid_ * grid_;
  Mat obs = Mat::Zero(n, spec_.obs_dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i || chebyshev(agents_[i], agents_[j]) <= 1) {
        obs(i, j * cells + agents_[j].first * grid_ + agents_[j].second) = 1.0;
      }
    }
    if (chebyshev(agents_[i], target_) <= 1) {
      obs(i, n * cells + target_.first * grid_ + target_.second) = 1.0;
    }
    obs(i, spec_.obs_dim - 1) =
        static_cast<double>(step_count_) / spec_.max_episode_steps;
  }
  return obs;
}

StepResult CoopCaptureEnv::step(const std::vector<int>& joint_action) {
  if (done_) throw StateError("coop_capture: step after terminal state");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents) {
    throw InputError("coop_capture: joint action length mismatch");
  }
  for (int a : joint_action) {
    if (a < 0 || a >= spec_.n_actions) {
      throw InputError("coop_capture: action out of range");
    }
  }
  bool all_tag = true;
  for (int i = 0; i < spec_.n_agents; ++i) {
    auto& p = agents_[i];
    switch (joint_action[i]) {
      case kUp: p.first = std::max(0, p.first - 1); break;
      case kDown: p.first = std::min(grid_ - 1, p.first + 1); break;
      case kLeft: p.second = std::max(0, p.second - 1); break;
      case kRight: p.second = std::min(grid_ - 1, p.second + 1); break;
      default: break;
    }
    if (joint_action[i] != kTag) all_tag = false;
  }
  ++step_count_;
  bool success = all_tag;
  if (success) {
    for (const auto& p : agents_) success = success && (p == target_);
  }
  StepResult r;
  r.reward = success ? 1.0 : -0.01;
  done_ = success || step_count_ >= spec_.max_episode_steps;
  r.continuation = done_ ? 0.0 : 1.0;
  r.observations = observe();
  r.info["success"] = success ? 1.0 : 0.0;
  return r;
}

std::vector<int> CoopCaptureEnv::global_feature_indices() const {
  // every feature is an absolute-position block or the step fraction
  std::vector<int> idx(spec_.obs_dim);
  for (int i = 0; i < spec_.obs_dim; ++i) idx[i] = i;
  return idx;
}

std::unique_ptr<Env> CoopCaptureEnv::clone() const {
  return std::make_unique<CoopCaptureEnv>(*this);
}

void CoopCaptureEnv::set_state(const std::vector<std::pair<int, int>>& agent_cells,
                               std::pair<int, int> target_cell, int step_count) {
  if (static_cast<int>(agent_cells.size()) != spec_.n_agents) {
    throw InputError("set_state: agent count mismatch");
  }
  agents_ = agent_cells;
  target_ = target_cell;
  step_count_ = step_count;
  done_ = false;
}

SwitchCorridorEnv::SwitchCorridorEnv(uint64_t seed, int length, int max_steps)
    : length_(length), rng_(seed) {
  if (length < 3 || max_steps < 1) throw ConfigError("switch_corridor: invalid dimensions");
  spec_.n_agents = 2;
  spec_.obs_dim = 2 * length + 3;  // two position blocks, bit, door flag, step fraction
  spec_.n_actions = 3;
  spec_.max_episode_steps = max_steps;
  spec_.name = "switch_corridor";
}

Mat SwitchCorridorEnv::reset() {
  bit_ = rng_.uniform_int(2);
  scout_ = rng_.uniform_int(length_);
  runner_ = 1 + rng_.uniform_int(length_ - 2);  // never spawns on a door
  step_count_ = 0;
  done_ = false;
  return observe();
}

Mat SwitchCorridorEnv::observe() const {
  Mat obs = Mat::Zero(2, spec_.obs_dim);
  int pos[2] = {scout_, runner_};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (j == i || std::abs(pos[i] - pos[j]) <= 1) {
        obs(i, j * length_ + pos[j]) = 1.0;
      }
    }
    obs(i, 2 * length_) = (i == 0) ? static_cast<double>(bit_) : 0.5;
    obs(i, 2 * length_ + 1) = (pos[i] == open_door()) ? 1.0 : 0.0;
    obs(i, 2 * length_ + 2) =
        static_cast<double>(step_count_) / spec_.max_episode_steps;
  }
  return obs;
}

StepResult SwitchCorridorEnv::step(const std::vector<int>& joint_action) {
  if (done_) throw StateError("switch_corridor: step after terminal state");
  if (joint_action.size() != 2) throw InputError("switch_corridor: joint action length mismatch");
  for (int a : joint_action) {
    if (a < 0 || a >= spec_.n_actions) throw InputError("switch_corridor: action out of range");
  }
  int* pos[2] = {&scout_, &runner_};
  for (int i = 0; i < 2; ++i) {
    if (joint_action[i] == kLeft) *pos[i] = std::max(0, *pos[i] - 1);
    if (joint_action[i] == kRight) *pos[i] = std::min(length_ - 1, *pos[i] + 1);
  }
  ++step_count_;
  bool at_door = (runner_ == 0 || runner_ == length_ - 1);
  bool success = at_door && runner_ == open_door();
  bool failure = at_door && !success;
  StepResult r;
  r.reward = success ? 1.0 : (failure ? -0.5 : -0.01);
  done_ = success || failure || step_count_ >= spec_.max_episode_steps;
  r.continuation = done_ ? 0.0 : 1.0;
  r.observations = observe();
  r.info["success"] = success ? 1.0 : 0.0;
  return r;
}

std::vector<int> SwitchCorridorEnv::global_feature_indices() const {
  // position blocks and the step fraction; the switch slot and the door flag
  // are observer-local (the runner's switch slot is a constant blindfold)
  std::vector<int> idx;
  for (int i = 0; i < 2 * length_; ++i) idx.push_back(i);
  idx.push_back(2 * length_ + 2);
  return idx;
}

std::unique_ptr<Env> SwitchCorridorEnv::clone() const {
  return std::make_unique<SwitchCorridorEnv>(*this);
}

void SwitchCorridorEnv::set_state(int scout, int runner, int bit, int step_count) {
  scout_ = scout;
  runner_ = runner;
  bit_ = bit;
  step_count_ = step_count;
  done_ = false;
}

std::unique_ptr<Env> make_env(const std::string& spec_name, uint64_t seed) {
  if (spec_name == "coop_capture") return std::make_unique<CoopCaptureEnv>(seed);
  if (spec_name == "switch_corridor") return std::make_unique<SwitchCorridorEnv>(seed);
  throw ConfigError("unknown environment: " + spec_name);
}

std::vector<std::string> registered_envs() {
  return {"coop_capture", "switch_corridor"};
}

}  // namespace gawm
