#include "gawm/policy.hpp"

#include <cmath>

#include "gawm/error.hpp"

namespace gawm {

using ad::Tape;
using ad::Var;

void PolicyConfig::validate() const {
  if (clip_epsilon <= 0.0 || clip_epsilon >= 1.0) {
    throw ConfigError("policy: clip_epsilon must be in (0,1)");
  }
  if (gae_lambda < 0.0 || gae_lambda > 1.0) {
    throw ConfigError("policy: gae_lambda must be in [0,1]");
  }
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("policy: gamma must be in (0,1]");
  if (actor_hidden < 1 || critic_hidden < 1 || gru_dim < 1) {
    throw ConfigError("policy: hidden sizes must be >= 1");
  }
  if (entropy_coef < 0.0) throw ConfigError("policy: entropy_coef must be >= 0");
  if (value_coef <= 0.0) throw ConfigError("policy: value_coef must be > 0");
  if (target_update_tau <= 0.0 || target_update_tau > 1.0) {
    throw ConfigError("policy: target_update_tau must be in (0,1]");
  }
}

AdvantageBatch compute_gae(const std::vector<double>& rewards,
                           const std::vector<double>& values, double bootstrap,
                           const std::vector<double>& continuations,
                           double gamma, double lambda) {
  size_t L = rewards.size();
  if (L == 0) throw InputError("compute_gae: empty inputs");
  if (values.size() != L || continuations.size() != L) {
    throw InputError("compute_gae: misaligned inputs");
  }
  AdvantageBatch out;
  out.advantages.assign(L, 0.0);
  out.returns.assign(L, 0.0);
  double next_adv = 0.0;
  for (size_t i = L; i-- > 0;) {
    double next_v = (i + 1 < L) ? values[i + 1] : bootstrap;
    double delta = rewards[i] + gamma * continuations[i] * next_v - values[i];
    next_adv = delta + gamma * lambda * continuations[i] * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= n;
  double sd = std::sqrt(var);
  for (double& a : advantages) {
    a = sd > 1e-8 ? (a - mean) / sd : (a - mean);
  }
}

namespace {
const ad::ParamStore& empty_params() {
  static ad::ParamStore ps;
  return ps;
}

Mat column(const std::vector<double>& v) {
  Mat m(v.size(), 1);
  for (size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}
}  // namespace

double ppo_actor_loss(const std::vector<double>& new_log_probs,
                      const std::vector<double>& old_log_probs,
                      const std::vector<double>& advantages,
                      double clip_epsilon) {
  if (new_log_probs.size() != old_log_probs.size() ||
      new_log_probs.size() != advantages.size()) {
    throw InputError("ppo_actor_loss: misaligned inputs");
  }
  if (new_log_probs.empty()) throw InputError("ppo_actor_loss: empty inputs");
  Tape t(empty_params());
  Var ratio = t.exp(t.sub(t.constant(column(new_log_probs)),
                          t.constant(column(old_log_probs))));
  Var adv = t.constant(column(advantages));
  Var surr = t.cmin(t.cmul(ratio, adv),
                    t.cmul(t.clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon), adv));
  return -t.scalar(t.mean_all(surr));
}

double value_loss(const std::vector<double>& values,
                  const std::vector<double>& returns) {
  if (values.size() != returns.size()) throw InputError("value_loss: misaligned inputs");
  if (values.empty()) throw InputError("value_loss: empty inputs");
  double acc = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    acc += (values[i] - returns[i]) * (values[i] - returns[i]);
  }
  return acc / static_cast<double>(values.size());
}

Policy::Policy(const PolicyConfig& cfg, int n_agents, int obs_dim,
               int n_actions, uint64_t param_seed)
    : cfg_(cfg), n_agents_(n_agents), obs_dim_(obs_dim), n_actions_(n_actions) {
  cfg_.validate();
  if (n_agents < 1 || obs_dim < 1 || n_actions < 1) {
    throw ConfigError("policy: invalid environment dimensions");
  }
  Rng rng(param_seed);
  actor_ = make_actor(online_, rng);
  critic_ = make_critic(online_, rng);
  Rng rng2(param_seed);
  actor_target_ = make_actor(target_, rng2);
  critic_target_ = make_critic(target_, rng2);
  for (int i = 0; i < online_.size(); ++i) target_.value(i) = online_.value(i);
}

Policy::ActorNet Policy::make_actor(ad::ParamStore& ps, Rng& rng) const {
  ActorNet net;
  net.in = nn::Linear(ps, rng, "actor.enc", obs_dim_ + n_agents_, cfg_.actor_hidden);
  net.in_ln = nn::LayerNorm(ps, "actor.enc.ln", cfg_.actor_hidden);
  net.gru = nn::GruCell(ps, rng, "actor.gru", cfg_.actor_hidden, cfg_.gru_dim);
  net.head = nn::Mlp(ps, rng, "actor.pi", cfg_.gru_dim, {cfg_.actor_hidden},
                     n_actions_);
  return net;
}

nn::Mlp Policy::make_critic(ad::ParamStore& ps, Rng& rng) const {
  return nn::Mlp(ps, rng, "critic", n_agents_ * obs_dim_,
                 {cfg_.critic_hidden, cfg_.critic_hidden}, 1);
}

Mat Policy::with_agent_ids(const Mat& observations) const {
  Mat x(n_agents_, obs_dim_ + n_agents_);
  x << observations, Mat::Identity(n_agents_, n_agents_);
  return x;
}

std::pair<Var, Var> Policy::actor_step(Tape& t, const ActorNet& net, Var obs,
                                       Var memory) const {
  Var x = t.silu(net.in_ln(t, net.in(t, obs)));
  Var m = net.gru(t, x, memory);
  return {net.head(t, m), m};
}

ActorState Policy::initial_state() const {
  return ActorState{Mat::Zero(n_agents_, cfg_.gru_dim)};
}

ActResult Policy::act(const Mat& observations, const ActorState& state,
                      ActMode mode, Rng* rng) const {
  if (observations.rows() != n_agents_ || observations.cols() != obs_dim_) {
    throw ShapeError("act: observation shape mismatch");
  }
  if (state.memory.rows() != n_agents_ || state.memory.cols() != cfg_.gru_dim) {
    throw ShapeError("act: actor state shape mismatch");
  }
  if (mode == ActMode::kSample && rng == nullptr) {
    throw InputError("act: sampling requires an rng");
  }
  Tape t(target_);
  auto [logits_v, mem_v] = actor_step(t, actor_target_,
                                      t.constant(with_agent_ids(observations)),
                                      t.constant(state.memory));
  Mat logits = t.val(logits_v);
  ActResult out;
  out.next_state.memory = t.val(mem_v);
  out.actions.resize(n_agents_);
  out.log_probs.resize(n_agents_);
  for (int i = 0; i < n_agents_; ++i) {
    Eigen::ArrayXd row = logits.row(i).array();
    double m = row.maxCoeff();
    Eigen::ArrayXd p = (row - m).exp();
    double z = p.sum();
    int pick = 0;
    if (mode == ActMode::kGreedy) {
      for (int a = 1; a < n_actions_; ++a) {
        if (logits(i, a) > logits(i, pick)) pick = a;
      }
    } else {
      double u = rng->uniform() * z;
      double acc = 0.0;
      pick = n_actions_ - 1;
      for (int a = 0; a < n_actions_; ++a) {
        acc += p(a);
        if (u < acc) {
          pick = a;
          break;
        }
      }
    }
    out.actions[i] = pick;
    out.log_probs(i) = std::log(p(pick) / z);
  }
  return out;
}

double Policy::evaluate_value(const Mat& joint_observations) const {
  if (joint_observations.rows() != n_agents_ ||
      joint_observations.cols() != obs_dim_) {
    throw ShapeError("evaluate_value: observation shape mismatch");
  }
  Mat flat(1, n_agents_ * obs_dim_);
  for (int i = 0; i < n_agents_; ++i) {
    flat.block(0, i * obs_dim_, 1, obs_dim_) = joint_observations.row(i);
  }
  Tape t(online_);
  return t.scalar(critic_(t, t.constant(flat)));
}

std::vector<double> Policy::critic_values(const std::vector<Mat>& observations) const {
  std::vector<double> out;
  out.reserve(observations.size());
  for (const Mat& o : observations) out.push_back(evaluate_value(o));
  return out;
}

Var Policy::critic_value_t(Tape& t, Var joint_obs) const {
  return critic_(t, joint_obs);
}

Var Policy::build_segment_loss(Tape& t, const PseudoSegment& segment,
                               const std::vector<double>& advantages,
                               const std::vector<double>& returns) const {
  const int L = segment.length();
  if (L < 1) throw InputError("segment loss: empty segment");
  if (static_cast<int>(advantages.size()) != L ||
      static_cast<int>(returns.size()) != L ||
      static_cast<int>(segment.log_probs.size()) != L) {
    throw InputError("segment loss: misaligned inputs");
  }
  Var memory = t.constant(Mat::Zero(n_agents_, cfg_.gru_dim));
  Var surr_sum, ent_sum, vmse_sum;
  for (int j = 0; j < L; ++j) {
    Var obs = t.constant(with_agent_ids(segment.observations[j]));
    auto [logits, next_memory] = actor_step(t, actor_, obs, memory);
    memory = next_memory;

    Var logp = t.log_softmax_rows(logits);
    Mat mask = Mat::Zero(n_agents_, n_actions_);
    for (int i = 0; i < n_agents_; ++i) mask(i, segment.actions[j][i]) = 1.0;
    Var chosen = t.rowwise_sum(t.cmul(logp, t.constant(mask)));  // A x 1
    Var old = t.constant(segment.log_probs[j]);
    Var ratio = t.exp(t.sub(chosen, old));
    Var adv = t.constant(Mat::Constant(n_agents_, 1, advantages[j]));
    Var clipped = t.clamp(ratio, 1.0 - cfg_.clip_epsilon, 1.0 + cfg_.clip_epsilon);
    Var surr = t.sum_all(t.cmin(t.cmul(ratio, adv), t.cmul(clipped, adv)));
    surr_sum = surr_sum.valid() ? t.add(surr_sum, surr) : surr;

    Var ent = t.neg(t.sum_all(t.cmul(t.softmax_rows(logits), logp)));
    ent_sum = ent_sum.valid() ? t.add(ent_sum, ent) : ent;

    Mat flat(1, n_agents_ * obs_dim_);
    for (int i = 0; i < n_agents_; ++i) {
      flat.block(0, i * obs_dim_, 1, obs_dim_) = segment.observations[j].row(i);
    }
    Var v = critic_value_t(t, t.constant(flat));
    Var verr = t.add_scalar(v, -returns[j]);
    Var vmse = t.cmul(verr, verr);
    vmse_sum = vmse_sum.valid() ? t.add(vmse_sum, vmse) : vmse;
  }
  double inv_elems = 1.0 / static_cast<double>(L * n_agents_);
  Var actor_loss = t.neg(t.scale(surr_sum, inv_elems));
  Var entropy = t.scale(ent_sum, inv_elems);
  Var vmse = t.scale(vmse_sum, 1.0 / static_cast<double>(L));
  return t.add(actor_loss, t.sub(t.scale(vmse, cfg_.value_coef),
                                 t.scale(entropy, cfg_.entropy_coef)));
}

Policy::SegmentLoss Policy::segment_loss_and_grad(
    const PseudoSegment& segment, const std::vector<double>& advantages,
    const std::vector<double>& returns, ad::GradBuffer& grads) const {
  if (segment.source != Provenance::kPseudo) {
    throw InputError("policy training: segment does not originate from the pseudo buffer");
  }
  Tape t(online_, &grads);
  Var total = build_segment_loss(t, segment, advantages, returns);
  t.backward(total);

  // component bookkeeping for the report
  SegmentLoss out;
  out.total = t.scalar(total);
  std::vector<double> new_lp, old_lp;
  {
    const int L = segment.length();
    Tape tv(online_);
    Var memory = tv.constant(Mat::Zero(n_agents_, cfg_.gru_dim));
    double ent = 0.0;
    std::vector<double> values;
    for (int j = 0; j < L; ++j) {
      auto [logits, next_memory] =
          actor_step(tv, actor_, tv.constant(with_agent_ids(segment.observations[j])), memory);
      memory = next_memory;
      Mat lp = tv.val(tv.log_softmax_rows(logits));
      for (int i = 0; i < n_agents_; ++i) {
        new_lp.push_back(lp(i, segment.actions[j][i]));
        old_lp.push_back(segment.log_probs[j](i));
        ent -= 0.0;  // entropy reported from the probabilities below
      }
      Mat p = tv.val(tv.softmax_rows(logits));
      for (int i = 0; i < n_agents_; ++i) {
        for (int a = 0; a < n_actions_; ++a) {
          if (p(i, a) > 0.0) ent -= p(i, a) * std::log(p(i, a));
        }
      }
      values.push_back(evaluate_value(segment.observations[j]));
    }
    std::vector<double> adv_elems;
    for (int j = 0; j < L; ++j) {
      for (int i = 0; i < n_agents_; ++i) adv_elems.push_back(advantages[j]);
    }
    out.actor_loss = ppo_actor_loss(new_lp, old_lp, adv_elems, cfg_.clip_epsilon);
    out.value_mse = value_loss(values, returns);
    out.entropy = ent / static_cast<double>(L * n_agents_);
  }
  return out;
}

void Policy::soft_update_target(double tau) {
  for (int i = 0; i < online_.size(); ++i) {
    target_.value(i) = tau * online_.value(i) + (1.0 - tau) * target_.value(i);
  }
}

}  // namespace gawm
