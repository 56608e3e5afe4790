#pragma once

#include <utility>
#include <vector>

#include "gawm/nn.hpp"
#include "gawm/replay.hpp"

namespace gawm {

struct WorldModelConfig {
  int h_dim = 48;
  int e_dim = 48;
  int g_dim = 48;
  int n_categoricals = 8;
  int n_classes = 8;
  int n_heads = 2;
  int n_attention_layers = 1;
  int token_dim = 48;   // fusion transformer width
  int mlp_hidden = 64;  // head MLP width
  double beta = 0.1;
  double kl_balance = 0.8;
  double free_nats = 0.1;  // per categorical block
  bool obs_fusion_enabled = true;

  int z_dim() const { return n_categoricals * n_classes; }
  void validate() const;
};

// Per-agent deterministic embedding h and stochastic embedding z at one
// timestep. z_logits holds the n_categoricals x n_classes distribution
// parameters per agent in agent-major row blocks.
struct LatentState {
  Mat h;         // n_agents x h_dim
  Mat z;         // n_agents x z_dim (concatenated one-hot blocks)
  Mat z_logits;  // (n_agents * n_categoricals) x n_classes
};

struct Reconstruction {
  Mat obs_mean;                    // n_agents x obs_dim
  double reward_mean = 0.0;
  double continuation_prob = 0.0;  // sigmoid of cont_logit
  double cont_logit = 0.0;
};

struct SequenceRollout {
  std::vector<LatentState> latents;
  std::vector<Reconstruction> recon;
  std::vector<Mat> post_logits;   // (n_agents * n_categoricals) x n_classes
  std::vector<Mat> prior_logits;
};

// Sequence-loss components. NLL terms use unit-variance Gaussians with
// additive constants dropped (0.5 * squared error), averaged over timesteps
// and summed over agents/dimensions within a step; kl is the balanced,
// free-nats-clamped loss term while kl_nats_per_categorical reports the raw
// posterior->prior KL per block for diagnostics.
struct WorldModelLoss {
  double total = 0.0;
  double obs_nll = 0.0;
  double reward_nll = 0.0;
  double discount_nll = 0.0;
  double kl = 0.0;
  double kl_nats_per_categorical = 0.0;
};

// The global-aware RSSM: cross-agent act-fusion and obs-fusion attention
// blocks, a shared GRU core, categorical posterior/prior heads with
// straight-through sampling, a per-agent observation decoder, and pooled
// reward/discount heads over all agent tokens.
class WorldModel {
 public:
  WorldModel(const WorldModelConfig& cfg, int n_agents, int obs_dim,
             int n_actions, uint64_t param_seed);

  int n_agents() const { return n_agents_; }
  int obs_dim() const { return obs_dim_; }
  int n_actions() const { return n_actions_; }
  const WorldModelConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  // --- value-level API (no gradients) ---
  Mat act_fusion(const Mat& z, const std::vector<int>& joint_action) const;
  Mat obs_fusion(const Mat& h, const Mat& joint_obs) const;
  Mat recurrent_step(const Mat& h_prev, const Mat& e) const;
  std::pair<Mat, Mat> posterior(const Mat& g, Rng& rng) const;  // logits, z
  std::pair<Mat, Mat> prior(const Mat& h, Rng& rng) const;
  Reconstruction reconstruct(const Mat& h, const Mat& z) const;
  // Reward/discount heads evaluated on agent i's token alone (masked
  // pooling); returns one estimate pair per agent.
  struct PerAgentHeads {
    Eigen::VectorXd reward;
    Eigen::VectorXd continuation;
  };
  PerAgentHeads reconstruct_per_agent(const Mat& h, const Mat& z) const;

  LatentState initial_latent(Rng& rng) const;
  SequenceRollout observe_sequence(const TrajectoryWindow& window, Rng& rng) const;
  std::pair<LatentState, Reconstruction> imagine_step(
      const LatentState& latent, const std::vector<int>& joint_action,
      Rng& rng) const;

  // Loss of recorded rollout outputs against the window's targets.
  WorldModelLoss loss(const SequenceRollout& rollout,
                      const TrajectoryWindow& window) const;
  // Fused forward + loss + backward into grads for one window.
  WorldModelLoss loss_and_grad(const TrajectoryWindow& window, Rng& rng,
                               ad::GradBuffer& grads) const;
  // Builds the scalar total loss on a caller-owned tape (gradient checks).
  ad::Var build_sequence_loss(ad::Tape& t, const TrajectoryWindow& window,
                              Rng& rng) const;

 private:
  struct ReconVars {
    ad::Var obs_mean;
    ad::Var reward_mean;  // 1x1
    ad::Var cont_logit;   // 1x1
  };
  struct StepVars {
    ReconVars recon;
    ad::Var post_logits;
    ad::Var prior_logits;
  };

  ad::Var tokens_with_identity(ad::Tape& t, ad::Var proj, int id_param) const;
  ad::Var act_fusion_t(ad::Tape& t, ad::Var z, const std::vector<int>& a) const;
  ad::Var obs_fusion_t(ad::Tape& t, ad::Var h, ad::Var obs) const;
  ad::Var recurrent_t(ad::Tape& t, ad::Var h_prev, ad::Var e) const;
  ad::Var posterior_logits_t(ad::Tape& t, ad::Var g) const;
  ad::Var prior_logits_t(ad::Tape& t, ad::Var h) const;
  ad::Var flatten_blocks(ad::Tape& t, ad::Var blocks) const;
  ReconVars reconstruct_t(ad::Tape& t, ad::Var h, ad::Var z) const;
  ReconVars reconstruct_tokens_t(ad::Tape& t, ad::Var tokens) const;
  ad::Var pool_tokens_t(ad::Tape& t, ad::Var h, ad::Var z) const;
  Mat action_onehot(const std::vector<int>& joint_action) const;
  void check_agent_rows(const Mat& m, const char* what) const;

  // Shared sequence forward; per-step vars plus the loss composition.
  std::vector<StepVars> forward_sequence(ad::Tape& t,
                                         const TrajectoryWindow& window,
                                         Rng& rng,
                                         SequenceRollout* rollout) const;
  ad::Var compose_loss(ad::Tape& t, const std::vector<StepVars>& steps,
                       const TrajectoryWindow& window,
                       WorldModelLoss* out) const;

  WorldModelConfig cfg_;
  int n_agents_, obs_dim_, n_actions_;
  ad::ParamStore params_;

  nn::Linear af_in_, af_out_;
  std::vector<nn::TransformerBlock> af_blocks_;
  int af_id_ = -1;
  nn::Linear of_in_, of_out_;
  std::vector<nn::TransformerBlock> of_blocks_;
  int of_id_ = -1;
  nn::GruCell gru_;
  nn::Mlp post_head_, prior_head_, obs_decoder_;
  nn::Linear pool_in_;
  nn::TransformerBlock pool_block_;
  int pool_id_ = -1;
  nn::Mlp reward_head_, discount_head_;
};

}  // namespace gawm
