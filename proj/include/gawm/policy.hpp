#pragma once

#include <utility>
#include <vector>

#include "gawm/nn.hpp"
#include "gawm/replay.hpp"

namespace gawm {

struct PolicyConfig {
  double clip_epsilon = 0.2;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  int actor_hidden = 64;
  int critic_hidden = 64;
  int gru_dim = 64;
  double entropy_coef = 0.01;
  double value_coef = 1.0;
  double target_update_tau = 1.0;  // 1.0 == hard update
  void validate() const;
};

struct ActorState {
  Mat memory;  // n_agents x gru_dim
};

enum class ActMode { kSample, kGreedy };

struct ActResult {
  std::vector<int> actions;
  Eigen::VectorXd log_probs;  // of the chosen actions, one per agent
  ActorState next_state;
};

struct AdvantageBatch {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * c_t * V_{t+1} - V_t with V_L = bootstrap;
// A_t = delta_t + gamma * lambda * c_t * A_{t+1}; R_t = A_t + V_t.
AdvantageBatch compute_gae(const std::vector<double>& rewards,
                           const std::vector<double>& values, double bootstrap,
                           const std::vector<double>& continuations,
                           double gamma, double lambda);

// In-place zero-mean / unit-std (population std, epsilon-guarded).
void normalize_advantages(std::vector<double>& advantages);

// Negated mean of the clipped PPO surrogate (entropy handled by the caller).
double ppo_actor_loss(const std::vector<double>& new_log_probs,
                      const std::vector<double>& old_log_probs,
                      const std::vector<double>& advantages,
                      double clip_epsilon);

double value_loss(const std::vector<double>& values,
                  const std::vector<double>& returns);

// CTDE MAPPO: shared-weight recurrent actors over local observations (with an
// agent-ID one-hot appended) and a centralized critic over the concatenated
// joint observation. A Polyak-averaged target copy acts during collection.
class Policy {
 public:
  Policy(const PolicyConfig& cfg, int n_agents, int obs_dim, int n_actions,
         uint64_t param_seed);

  const PolicyConfig& config() const { return cfg_; }
  int n_agents() const { return n_agents_; }
  int n_actions() const { return n_actions_; }
  ad::ParamStore& params() { return online_; }
  const ad::ParamStore& params() const { return online_; }
  ad::ParamStore& target_params() { return target_; }
  const ad::ParamStore& target_params() const { return target_; }

  ActorState initial_state() const;
  // Decentralized execution on the target (behaviour) parameters: agent i's
  // action depends on (o_i, memory_i) only.
  ActResult act(const Mat& observations, const ActorState& state, ActMode mode,
                Rng* rng) const;
  // Centralized critic on the online parameters.
  double evaluate_value(const Mat& joint_observations) const;
  std::vector<double> critic_values(const std::vector<Mat>& observations) const;

  struct SegmentLoss {
    double actor_loss = 0.0;   // negated clipped surrogate
    double value_mse = 0.0;
    double entropy = 0.0;
    double total = 0.0;
  };
  // PPO + value + entropy loss over one imagined segment; accumulates
  // gradients for the online parameters. advantages/returns are aligned with
  // the segment's transitions and already normalized by the caller.
  SegmentLoss segment_loss_and_grad(const PseudoSegment& segment,
                                    const std::vector<double>& advantages,
                                    const std::vector<double>& returns,
                                    ad::GradBuffer& grads) const;
  // Same composition on a caller-owned tape (gradient checks).
  ad::Var build_segment_loss(ad::Tape& t, const PseudoSegment& segment,
                             const std::vector<double>& advantages,
                             const std::vector<double>& returns) const;

  void soft_update_target(double tau);

 private:
  struct ActorNet {
    nn::Linear in;
    nn::LayerNorm in_ln;
    nn::GruCell gru;
    nn::Mlp head;
  };
  ActorNet make_actor(ad::ParamStore& ps, Rng& rng) const;
  nn::Mlp make_critic(ad::ParamStore& ps, Rng& rng) const;

  // One recurrent actor step: returns (action logits, next memory).
  std::pair<ad::Var, ad::Var> actor_step(ad::Tape& t, const ActorNet& net,
                                         ad::Var obs, ad::Var memory) const;
  ad::Var critic_value_t(ad::Tape& t, ad::Var joint_obs) const;
  Mat with_agent_ids(const Mat& observations) const;

  PolicyConfig cfg_;
  int n_agents_, obs_dim_, n_actions_;
  ad::ParamStore online_, target_;
  ActorNet actor_, actor_target_;
  nn::Mlp critic_, critic_target_;
};

}  // namespace gawm
