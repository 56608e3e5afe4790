#include "gawm/world_model.hpp"

#include <cmath>

#include "gawm/error.hpp"

namespace gawm {

using ad::Tape;
using ad::Var;

void WorldModelConfig::validate() const {
  if (h_dim < 1 || e_dim < 1 || g_dim < 1 || n_categoricals < 1 ||
      n_classes < 1 || n_heads < 1 || n_attention_layers < 1 ||
      token_dim < 1 || mlp_hidden < 1) {
    throw ConfigError("world model: all dimensions must be >= 1");
  }
  if (beta < 0.0) throw ConfigError("world model: beta must be >= 0");
  if (kl_balance <= 0.0 || kl_balance >= 1.0) {
    throw ConfigError("world model: kl_balance must be in (0,1)");
  }
  if (free_nats < 0.0) throw ConfigError("world model: free_nats must be >= 0");
  if (token_dim % n_heads != 0) {
    throw ConfigError("world model: token_dim must be divisible by n_heads");
  }
}

WorldModel::WorldModel(const WorldModelConfig& cfg, int n_agents, int obs_dim,
                       int n_actions, uint64_t param_seed)
    : cfg_(cfg), n_agents_(n_agents), obs_dim_(obs_dim), n_actions_(n_actions) {
  cfg_.validate();
  if (n_agents < 1 || obs_dim < 1 || n_actions < 1) {
    throw ConfigError("world model: invalid environment dimensions");
  }
  Rng rng(param_seed);
  const int td = cfg_.token_dim;

  af_in_ = nn::Linear(params_, rng, "wm.af.in", cfg_.z_dim() + n_actions, td);
  af_id_ = params_.add("wm.af.id", nn::xavier_uniform(n_agents, td, rng));
  for (int i = 0; i < cfg_.n_attention_layers; ++i) {
    af_blocks_.emplace_back(params_, rng, "wm.af.b" + std::to_string(i), td,
                            cfg_.n_heads);
  }
  af_out_ = nn::Linear(params_, rng, "wm.af.out", td, cfg_.e_dim);

  of_in_ = nn::Linear(params_, rng, "wm.of.in", cfg_.h_dim + obs_dim, td);
  of_id_ = params_.add("wm.of.id", nn::xavier_uniform(n_agents, td, rng));
  for (int i = 0; i < cfg_.n_attention_layers; ++i) {
    of_blocks_.emplace_back(params_, rng, "wm.of.b" + std::to_string(i), td,
                            cfg_.n_heads);
  }
  of_out_ = nn::Linear(params_, rng, "wm.of.out", td, cfg_.g_dim);

  gru_ = nn::GruCell(params_, rng, "wm.gru", cfg_.e_dim, cfg_.h_dim);

  post_head_ = nn::Mlp(params_, rng, "wm.post", cfg_.g_dim, {cfg_.mlp_hidden},
                       cfg_.z_dim());
  prior_head_ = nn::Mlp(params_, rng, "wm.prior", cfg_.h_dim, {cfg_.mlp_hidden},
                        cfg_.z_dim());
  obs_decoder_ = nn::Mlp(params_, rng, "wm.dec", cfg_.h_dim + cfg_.z_dim(),
                         {cfg_.mlp_hidden, cfg_.mlp_hidden}, obs_dim);

  pool_in_ = nn::Linear(params_, rng, "wm.pool.in", cfg_.h_dim + cfg_.z_dim(), td);
  pool_id_ = params_.add("wm.pool.id", nn::xavier_uniform(n_agents, td, rng));
  pool_block_ = nn::TransformerBlock(params_, rng, "wm.pool.b0", td, cfg_.n_heads);
  reward_head_ = nn::Mlp(params_, rng, "wm.rew", td, {cfg_.mlp_hidden}, 1);
  discount_head_ = nn::Mlp(params_, rng, "wm.dis", td, {cfg_.mlp_hidden}, 1);
}

void WorldModel::check_agent_rows(const Mat& m, const char* what) const {
  if (m.rows() != n_agents_) {
    throw ShapeError(std::string(what) + ": agent-count mismatch");
  }
}

Mat WorldModel::action_onehot(const std::vector<int>& joint_action) const {
  if (static_cast<int>(joint_action.size()) != n_agents_) {
    throw ShapeError("joint action: agent-count mismatch");
  }
  Mat a = Mat::Zero(n_agents_, n_actions_);
  for (int i = 0; i < n_agents_; ++i) {
    if (joint_action[i] < 0 || joint_action[i] >= n_actions_) {
      throw InputError("joint action: value out of range");
    }
    a(i, joint_action[i]) = 1.0;
  }
  return a;
}

Var WorldModel::tokens_with_identity(Tape& t, Var proj, int id_param) const {
  return t.add(proj, t.param(id_param));
}

Var WorldModel::act_fusion_t(Tape& t, Var z, const std::vector<int>& a) const {
  Var inputs = t.hcat(z, t.constant(action_onehot(a)));
  Var tok = tokens_with_identity(t, af_in_(t, inputs), af_id_);
  for (const auto& blk : af_blocks_) tok = blk(t, tok, /*self_only=*/false);
  return af_out_(t, tok);
}

Var WorldModel::obs_fusion_t(Tape& t, Var h, Var obs) const {
  Var inputs = t.hcat(h, obs);
  Var tok = tokens_with_identity(t, of_in_(t, inputs), of_id_);
  bool self_only = !cfg_.obs_fusion_enabled;
  for (const auto& blk : of_blocks_) tok = blk(t, tok, self_only);
  return of_out_(t, tok);
}

Var WorldModel::recurrent_t(Tape& t, Var h_prev, Var e) const {
  return gru_(t, e, h_prev);
}

Var WorldModel::posterior_logits_t(Tape& t, Var g) const {
  Var flat = post_head_(t, g);  // n_agents x (n_cat * n_classes)
  return t.reshape(flat, n_agents_ * cfg_.n_categoricals, cfg_.n_classes);
}

Var WorldModel::prior_logits_t(Tape& t, Var h) const {
  Var flat = prior_head_(t, h);
  return t.reshape(flat, n_agents_ * cfg_.n_categoricals, cfg_.n_classes);
}

Var WorldModel::flatten_blocks(Tape& t, Var blocks) const {
  return t.reshape(blocks, n_agents_, cfg_.z_dim());
}

Var WorldModel::pool_tokens_t(Tape& t, Var h, Var z) const {
  return tokens_with_identity(t, pool_in_(t, t.hcat(h, z)), pool_id_);
}

WorldModel::ReconVars WorldModel::reconstruct_tokens_t(Tape& t, Var tokens) const {
  Var mixed = pool_block_(t, tokens, /*self_only=*/false);
  Var pooled = t.colwise_mean(mixed);
  ReconVars out;
  out.reward_mean = reward_head_(t, pooled);
  out.cont_logit = discount_head_(t, pooled);
  return out;
}

WorldModel::ReconVars WorldModel::reconstruct_t(Tape& t, Var h, Var z) const {
  ReconVars out = reconstruct_tokens_t(t, pool_tokens_t(t, h, z));
  out.obs_mean = obs_decoder_(t, t.hcat(h, z));  // per-agent rows only
  return out;
}

// --- value-level API ---

Mat WorldModel::act_fusion(const Mat& z, const std::vector<int>& joint_action) const {
  check_agent_rows(z, "act_fusion");
  Tape t(params_);
  return t.val(act_fusion_t(t, t.constant(z), joint_action));
}

Mat WorldModel::obs_fusion(const Mat& h, const Mat& joint_obs) const {
  check_agent_rows(h, "obs_fusion");
  check_agent_rows(joint_obs, "obs_fusion");
  if (joint_obs.cols() != obs_dim_) throw ShapeError("obs_fusion: obs_dim mismatch");
  Tape t(params_);
  return t.val(obs_fusion_t(t, t.constant(h), t.constant(joint_obs)));
}

Mat WorldModel::recurrent_step(const Mat& h_prev, const Mat& e) const {
  check_agent_rows(h_prev, "recurrent_step");
  check_agent_rows(e, "recurrent_step");
  Tape t(params_);
  return t.val(recurrent_t(t, t.constant(h_prev), t.constant(e)));
}

std::pair<Mat, Mat> WorldModel::posterior(const Mat& g, Rng& rng) const {
  check_agent_rows(g, "posterior");
  if (!g.allFinite()) throw NumericError("posterior: non-finite fusion output");
  Tape t(params_);
  Var logits = posterior_logits_t(t, t.constant(g));
  Var z = flatten_blocks(t, t.onehot_st_sample(logits, rng));
  return {t.val(logits), t.val(z)};
}

std::pair<Mat, Mat> WorldModel::prior(const Mat& h, Rng& rng) const {
  check_agent_rows(h, "prior");
  if (!h.allFinite()) throw NumericError("prior: non-finite recurrent state");
  Tape t(params_);
  Var logits = prior_logits_t(t, t.constant(h));
  Var z = flatten_blocks(t, t.onehot_st_sample(logits, rng));
  return {t.val(logits), t.val(z)};
}

Reconstruction WorldModel::reconstruct(const Mat& h, const Mat& z) const {
  check_agent_rows(h, "reconstruct");
  check_agent_rows(z, "reconstruct");
  Tape t(params_);
  ReconVars rv = reconstruct_t(t, t.constant(h), t.constant(z));
  Reconstruction r;
  r.obs_mean = t.val(rv.obs_mean);
  r.reward_mean = t.scalar(rv.reward_mean);
  r.cont_logit = t.scalar(rv.cont_logit);
  r.continuation_prob = 1.0 / (1.0 + std::exp(-r.cont_logit));
  return r;
}

WorldModel::PerAgentHeads WorldModel::reconstruct_per_agent(const Mat& h,
                                                            const Mat& z) const {
  check_agent_rows(h, "reconstruct_per_agent");
  check_agent_rows(z, "reconstruct_per_agent");
  PerAgentHeads out;
  out.reward.resize(n_agents_);
  out.continuation.resize(n_agents_);
  Tape t(params_);
  Var tokens = pool_tokens_t(t, t.constant(h), t.constant(z));
  for (int i = 0; i < n_agents_; ++i) {
    // attention restricted to agent i's token
    Var own = t.slice_rows(tokens, i, 1);
    Var mixed = pool_block_(t, own, /*self_only=*/true);
    Var pooled = t.colwise_mean(mixed);
    out.reward(i) = t.scalar(reward_head_(t, pooled));
    double logit = t.scalar(discount_head_(t, pooled));
    out.continuation(i) = 1.0 / (1.0 + std::exp(-logit));
  }
  return out;
}

LatentState WorldModel::initial_latent(Rng& rng) const {
  LatentState s;
  s.h = Mat::Zero(n_agents_, cfg_.h_dim);
  auto [logits, z] = prior(s.h, rng);
  s.z_logits = logits;
  s.z = z;
  return s;
}

std::vector<WorldModel::StepVars> WorldModel::forward_sequence(
    Tape& t, const TrajectoryWindow& window, Rng& rng,
    SequenceRollout* rollout) const {
  const size_t L = window.observations.size();
  if (L < 1) throw InputError("observe_sequence: empty segment");
  if (window.actions.size() + 1 != L) {
    throw InputError("observe_sequence: actions misaligned with observations");
  }
  for (const Mat& o : window.observations) {
    check_agent_rows(o, "observe_sequence");
    if (o.cols() != obs_dim_) throw ShapeError("observe_sequence: obs_dim mismatch");
  }

  std::vector<StepVars> steps;
  steps.reserve(L);
  Var h = t.constant(Mat::Zero(n_agents_, cfg_.h_dim));
  Var z;
  for (size_t i = 0; i < L; ++i) {
    if (i > 0) {
      Var e = act_fusion_t(t, z, window.actions[i - 1]);
      h = recurrent_t(t, h, e);
    }
    Var obs = t.constant(window.observations[i]);
    Var g = obs_fusion_t(t, h, obs);
    Var post_logits = posterior_logits_t(t, g);
    z = flatten_blocks(t, t.onehot_st_sample(post_logits, rng));
    Var prior_logits = prior_logits_t(t, h);
    StepVars sv;
    sv.recon = reconstruct_t(t, h, z);
    sv.post_logits = post_logits;
    sv.prior_logits = prior_logits;
    steps.push_back(sv);
    if (rollout) {
      LatentState ls;
      ls.h = t.val(h);
      ls.z = t.val(z);
      ls.z_logits = t.val(post_logits);
      rollout->latents.push_back(std::move(ls));
      Reconstruction r;
      r.obs_mean = t.val(sv.recon.obs_mean);
      r.reward_mean = t.scalar(sv.recon.reward_mean);
      r.cont_logit = t.scalar(sv.recon.cont_logit);
      r.continuation_prob = 1.0 / (1.0 + std::exp(-r.cont_logit));
      rollout->recon.push_back(std::move(r));
      rollout->post_logits.push_back(t.val(post_logits));
      rollout->prior_logits.push_back(t.val(prior_logits));
    }
  }
  return steps;
}

Var WorldModel::compose_loss(Tape& t, const std::vector<StepVars>& steps,
                             const TrajectoryWindow& window,
                             WorldModelLoss* out) const {
  const size_t L = steps.size();
  if (window.rewards_smoothed.size() + 1 != L ||
      window.continuations.size() + 1 != L) {
    throw InputError("world_model_loss: target lengths misaligned");
  }
  const double inv_L = 1.0 / static_cast<double>(L);

  Var obs_nll, reward_nll, discount_nll, kl_loss;
  double true_kl_sum = 0.0;
  for (size_t i = 0; i < L; ++i) {
    Var err = t.sub(steps[i].recon.obs_mean, t.constant(window.observations[i]));
    Var o = t.sum_all(t.scale(t.cmul(err, err), 0.5));
    obs_nll = obs_nll.valid() ? t.add(obs_nll, o) : o;

    if (i > 0) {
      Var rerr = t.add_scalar(steps[i].recon.reward_mean,
                              -window.rewards_smoothed[i - 1]);
      Var r = t.scale(t.cmul(rerr, rerr), 0.5);
      reward_nll = reward_nll.valid() ? t.add(reward_nll, r) : r;

      Var target = t.constant(Mat::Constant(1, 1, window.continuations[i - 1]));
      Var d = t.bernoulli_nll_logits(steps[i].recon.cont_logit, target);
      discount_nll = discount_nll.valid() ? t.add(discount_nll, d) : d;
    }

    // KL balancing: posterior-side and prior-side stop gradients
    Var post = steps[i].post_logits;
    Var prior = steps[i].prior_logits;
    Var post_sg = t.detach(post);
    Var prior_sg = t.detach(prior);
    Var lhs = t.rowwise_sum(t.cmul(
        t.softmax_rows(post_sg),
        t.sub(t.log_softmax_rows(post_sg), t.log_softmax_rows(prior))));
    Var rhs = t.rowwise_sum(t.cmul(
        t.softmax_rows(post),
        t.sub(t.log_softmax_rows(post), t.log_softmax_rows(prior_sg))));
    Var balanced = t.add(t.scale(lhs, cfg_.kl_balance),
                         t.scale(rhs, 1.0 - cfg_.kl_balance));
    Var clamped = t.clamp_min(balanced, cfg_.free_nats);
    Var k = t.sum_all(clamped);
    kl_loss = kl_loss.valid() ? t.add(kl_loss, k) : k;
    true_kl_sum += t.val(lhs).sum();  // lhs value == raw KL(post || prior)
  }

  obs_nll = t.scale(obs_nll, inv_L);
  double inv_T = L > 1 ? 1.0 / static_cast<double>(L - 1) : 0.0;
  reward_nll = reward_nll.valid() ? t.scale(reward_nll, inv_T)
                                  : t.constant(Mat::Zero(1, 1));
  discount_nll = discount_nll.valid() ? t.scale(discount_nll, inv_T)
                                      : t.constant(Mat::Zero(1, 1));
  kl_loss = t.scale(kl_loss, inv_L);

  Var total = t.add(t.add(obs_nll, reward_nll),
                    t.add(discount_nll, t.scale(kl_loss, cfg_.beta)));
  if (out) {
    out->obs_nll = t.scalar(obs_nll);
    out->reward_nll = t.scalar(reward_nll);
    out->discount_nll = t.scalar(discount_nll);
    out->kl = t.scalar(kl_loss);
    out->total = t.scalar(total);
    out->kl_nats_per_categorical =
        true_kl_sum / (static_cast<double>(L) * n_agents_ * cfg_.n_categoricals);
  }
  return total;
}

SequenceRollout WorldModel::observe_sequence(const TrajectoryWindow& window,
                                             Rng& rng) const {
  SequenceRollout rollout;
  Tape t(params_);
  forward_sequence(t, window, rng, &rollout);
  return rollout;
}

WorldModelLoss WorldModel::loss(const SequenceRollout& rollout,
                                const TrajectoryWindow& window) const {
  if (rollout.latents.size() != window.observations.size()) {
    throw InputError("world_model_loss: rollout/window length mismatch");
  }
  Tape t(params_);
  std::vector<StepVars> steps;
  for (size_t i = 0; i < rollout.latents.size(); ++i) {
    StepVars sv;
    sv.recon.obs_mean = t.constant(rollout.recon[i].obs_mean);
    sv.recon.reward_mean = t.constant(Mat::Constant(1, 1, rollout.recon[i].reward_mean));
    sv.recon.cont_logit = t.constant(Mat::Constant(1, 1, rollout.recon[i].cont_logit));
    sv.post_logits = t.constant(rollout.post_logits[i]);
    sv.prior_logits = t.constant(rollout.prior_logits[i]);
    steps.push_back(sv);
  }
  WorldModelLoss out;
  compose_loss(t, steps, window, &out);
  return out;
}

WorldModelLoss WorldModel::loss_and_grad(const TrajectoryWindow& window,
                                         Rng& rng, ad::GradBuffer& grads) const {
  Tape t(params_, &grads);
  std::vector<StepVars> steps = forward_sequence(t, window, rng, nullptr);
  WorldModelLoss out;
  Var total = compose_loss(t, steps, window, &out);
  t.backward(total);
  return out;
}

Var WorldModel::build_sequence_loss(Tape& t, const TrajectoryWindow& window,
                                    Rng& rng) const {
  std::vector<StepVars> steps = forward_sequence(t, window, rng, nullptr);
  return compose_loss(t, steps, window, nullptr);
}

std::pair<LatentState, Reconstruction> WorldModel::imagine_step(
    const LatentState& latent, const std::vector<int>& joint_action,
    Rng& rng) const {
  check_agent_rows(latent.h, "imagine_step");
  check_agent_rows(latent.z, "imagine_step");
  Tape t(params_);
  Var z = t.constant(latent.z);
  Var e = act_fusion_t(t, z, joint_action);
  Var h_next = recurrent_t(t, t.constant(latent.h), e);
  Var prior_logits = prior_logits_t(t, h_next);
  Var z_next = flatten_blocks(t, t.onehot_st_sample(prior_logits, rng));
  ReconVars rv = reconstruct_t(t, h_next, z_next);

  LatentState next;
  next.h = t.val(h_next);
  next.z = t.val(z_next);
  next.z_logits = t.val(prior_logits);
  Reconstruction r;
  r.obs_mean = t.val(rv.obs_mean);
  r.reward_mean = t.scalar(rv.reward_mean);
  r.cont_logit = t.scalar(rv.cont_logit);
  r.continuation_prob = 1.0 / (1.0 + std::exp(-r.cont_logit));
  return {std::move(next), std::move(r)};
}

}  // namespace gawm
