#include "trustgrid/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "trustgrid/checkpoint.hpp"
#include "trustgrid/errors.hpp"

namespace trustgrid::ppo {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLog2PiE = 2.8378770664093454835606594728112;  // log(2*pi*e)
}  // namespace

void PpoConfig::validate() const {
  if (total_timesteps < 0) throw ConfigError("total_timesteps must be >= 0");
  if (rollout_length < 1) throw ConfigError("rollout_length must be >= 1");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
  if (rollout_length % minibatch_size != 0)
    throw ConfigError("rollout_length must be divisible by minibatch_size");
  if (update_epochs < 1) throw ConfigError("update_epochs must be >= 1");
  if (!(clip_eps > 0.0) || !(clip_eps < 1.0)) throw ConfigError("clip_eps must be in (0, 1)");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0, 1]");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) throw ConfigError("gae_lambda must be in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (entropy_coef < 0.0) throw ConfigError("entropy_coef must be >= 0");
  if (value_coef < 0.0) throw ConfigError("value_coef must be >= 0");
  if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be >= 0");
  if (hidden.empty()) throw ConfigError("policy needs at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
}

void Trajectory::clear() {
  observations.clear();
  probes.clear();
  messages_raw.clear();
  log_probs.clear();
  values.clear();
  rewards.clear();
  dones.clear();
  records.clear();
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value,
                      double gamma, double lambda) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw DimensionError("compute_gae: length mismatch");
  const int n = static_cast<int>(rewards.size());
  GaeResult res;
  res.advantages.assign(static_cast<size_t>(n), 0.0);
  res.returns.assign(static_cast<size_t>(n), 0.0);
  double next_adv = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double not_done = dones[static_cast<size_t>(t)] ? 0.0 : 1.0;
    const double v_next = (t + 1 < n) ? values[static_cast<size_t>(t + 1)] : bootstrap_value;
    const double delta =
        rewards[static_cast<size_t>(t)] + gamma * v_next * not_done - values[static_cast<size_t>(t)];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    res.advantages[static_cast<size_t>(t)] = next_adv;
    res.returns[static_cast<size_t>(t)] = next_adv + values[static_cast<size_t>(t)];
  }
  return res;
}

void normalize_advantages(std::span<double> advantages) {
  if (advantages.empty()) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(advantages.size());
  const double std = std::sqrt(var);
  if (std < 1e-8) return;
  for (double& a : advantages) a = (a - mean) / std;
}

PpoLossStats ppo_loss_and_grads(const PolicyParams& params, const Trajectory& traj,
                                std::span<const int> idx, std::span<const double> advantages,
                                std::span<const double> returns, const PpoConfig& cfg,
                                std::vector<double>& flat_grads) {
  if (idx.size() != advantages.size() || idx.size() != returns.size())
    throw DimensionError("ppo_loss_and_grads: batch size mismatch");
  const nn::Head& probe_head = params.net.head("probe");
  const nn::Head& msg_head = params.net.head("message");
  const nn::Head& value_head = params.net.head("value");
  const int L = probe_head.len;
  const int D = msg_head.len;
  const double n = static_cast<double>(idx.size());
  const double sigma = std::exp(params.message_log_std);
  const double inv_var = 1.0 / (sigma * sigma);

  nn::Grads grads = nn::zero_grads(params.net);
  double dlog_std = 0.0;
  PpoLossStats stats;

  for (size_t b = 0; b < idx.size(); ++b) {
    const int i = idx[b];
    const auto& obs = traj.observations[static_cast<size_t>(i)];
    const nn::ForwardCache cache = nn::forward_cached(params.net, obs);
    const std::vector<double>& out = cache.output;
    const std::span<const double> logits(out.data() + probe_head.offset, static_cast<size_t>(L));
    const double* means = out.data() + msg_head.offset;
    const double value = out[static_cast<size_t>(value_head.offset)];
    const std::vector<double>& msg = traj.messages_raw[static_cast<size_t>(i)];
    const int probe = traj.probes[static_cast<size_t>(i)];

    const std::vector<double> probs = nn::softmax(logits);
    double new_lp = nn::log_softmax_at(logits, probe);
    double dlp_ds = 0.0;  // d new_lp / d log_std
    for (int c = 0; c < D; ++c) {
      const double d = msg[static_cast<size_t>(c)] - means[c];
      new_lp += -params.message_log_std - 0.5 * kLog2Pi - 0.5 * d * d * inv_var;
      dlp_ds += -1.0 + d * d * inv_var;
    }

    const double adv = advantages[b];
    const double old_lp = traj.log_probs[static_cast<size_t>(i)];
    const double ratio = std::exp(new_lp - old_lp);
    const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const double unclipped = ratio * adv;
    const double clipped = clipped_ratio * adv;
    stats.policy_loss += -std::min(unclipped, clipped) / n;
    if (std::abs(ratio - 1.0) > cfg.clip_eps) stats.clip_fraction += 1.0 / n;
    stats.approx_kl += ((ratio - 1.0) - std::log(std::max(ratio, 1e-12))) / n;

    // d(policy loss)/d new_lp: gradient flows only through the active branch.
    const double coef = (unclipped <= clipped) ? adv : 0.0;
    const double dpol_dlp = -coef * ratio / n;

    double cat_entropy = 0.0;
    for (int k = 0; k < L; ++k) {
      const double p = probs[static_cast<size_t>(k)];
      if (p > 0.0) cat_entropy -= p * std::log(p);
    }
    const double gauss_entropy = D * (0.5 * kLog2PiE + params.message_log_std);
    stats.entropy += (cat_entropy + gauss_entropy) / n;

    const double verr = value - returns[b];
    stats.value_loss += verr * verr / n;

    // Output gradient: [probe logits | message means | value].
    std::vector<double> dout(out.size(), 0.0);
    for (int k = 0; k < L; ++k) {
      const double p = probs[static_cast<size_t>(k)];
      const double onehot = (k == probe) ? 1.0 : 0.0;
      double g = dpol_dlp * (onehot - p);
      if (p > 0.0) g += cfg.entropy_coef / n * p * (std::log(p) + cat_entropy);
      dout[static_cast<size_t>(probe_head.offset + k)] = g;
    }
    for (int c = 0; c < D; ++c) {
      const double d = msg[static_cast<size_t>(c)] - means[c];
      dout[static_cast<size_t>(msg_head.offset + c)] = dpol_dlp * d * inv_var;
    }
    dout[static_cast<size_t>(value_head.offset)] = cfg.value_coef * 2.0 * verr / n;
    nn::backward(params.net, cache, dout, grads);
    dlog_std += dpol_dlp * dlp_ds - cfg.entropy_coef * D / n;
  }

  stats.loss = stats.policy_loss + cfg.value_coef * stats.value_loss - cfg.entropy_coef * stats.entropy;
  if (!std::isfinite(stats.loss))
    throw NumericError("ppo loss is not finite (policy=" + std::to_string(stats.policy_loss) +
                       " value=" + std::to_string(stats.value_loss) +
                       " entropy=" + std::to_string(stats.entropy) + ")");
  flat_grads = nn::flatten(params.net, grads);
  flat_grads.push_back(dlog_std);
  return stats;
}

namespace {

// Shared rollout driver. Plays scripted opponents between learner turns,
// reseeds episodes from a dedicated stream, and keeps metric rows in step
// order.
class RolloutDriver {
 public:
  RolloutDriver(const PpoConfig& pcfg, const GameConfig& gcfg, MetricsSink* sink, RewardHook* hook)
      : pcfg_(pcfg),
        gcfg_(gcfg),
        sink_(sink),
        hook_(hook),
        layout_(gcfg),
        master_(pcfg.seed),
        policy_seed_(master_.split()),
        episode_rng_(master_.split()),
        sample_rng_(master_.split()),
        shuffle_rng_(master_.split()) {}

  std::uint64_t policy_seed() const { return policy_seed_; }
  Rng& sample_rng() { return sample_rng_; }
  Rng& shuffle_rng() { return shuffle_rng_; }
  std::int64_t episodes() const { return episode_count_; }

  // Ensures the environment sits at a live learner turn. Bob turns played on
  // the way are logged; an episode ending here marks the learner's last
  // stored transition as done.
  void advance_to_learner(Trajectory* traj) {
    for (;;) {
      if (!env_alive_) {
        const std::uint64_t seed = episode_rng_.split();
        env_ = new_game(gcfg_, seed);
        begin_round(env_);
        env_alive_ = true;
        if (sink_) sink_->on_episode_start(episode_count_, seed);
        episode_count_ += 1;
        if (hook_) hook_->on_episode_start();
      }
      const int actor = env_.current_actor();
      if (actor == 0) return;
      const std::vector<double> obs = observe(env_, actor);
      const Action action = truthful_act(obs, layout_);
      const TurnRecord rec = step_turn(env_, actor, action);
      after_turn(rec, nullptr);
      if (env_.terminated) {
        env_alive_ = false;
        if (traj && !traj->dones.empty()) traj->dones.back() = 1;
      }
    }
  }

  // One learner turn; appends to the trajectory.
  void learner_step(const PolicyParams& params, Trajectory& traj) {
    const std::vector<double> obs = observe(env_, 0);
    const NeuralActResult res = neural_act(params, obs, sample_rng_, ActMode::Sample);
    const TurnRecord rec = step_turn(env_, 0, res.action);
    double p_betray = 0.0;
    double reward = rec.reward_gained;
    if (hook_) {
      hook_->observe_turn(rec);
      reward = hook_->shape(rec, rec.reward_gained, &p_betray);
    }
    emit_row(rec, p_betray);
    if (sink_) sink_->on_turn(rec);
    global_step_ += 1;

    traj.observations.push_back(obs);
    traj.probes.push_back(res.probe);
    traj.messages_raw.push_back(res.message_raw);
    traj.log_probs.push_back(res.log_prob);
    traj.values.push_back(res.value);
    traj.rewards.push_back(reward);
    traj.dones.push_back(0);
    traj.records.push_back(rec);
    if (env_.terminated) {
      env_alive_ = false;
      traj.dones.back() = 1;
    }
  }

  // Scripted learner seat (control runs).
  void scripted_learner_step() {
    const std::vector<double> obs = observe(env_, 0);
    const Action action = truthful_act(obs, layout_);
    const TurnRecord rec = step_turn(env_, 0, action);
    after_turn(rec, nullptr);
    if (env_.terminated) env_alive_ = false;
  }

  const GameState& env() const { return env_; }

 private:
  void after_turn(const TurnRecord& rec, const double* p_betray) {
    if (hook_ && rec.agent != 0) hook_->observe_turn(rec);
    emit_row(rec, p_betray ? *p_betray : 0.0);
    if (sink_) sink_->on_turn(rec);
    global_step_ += 1;
  }

  void emit_row(const TurnRecord& rec, double p_betray) {
    if (!sink_) return;
    telemetry::MetricRow row;
    row.step = global_step_;
    row.agent = rec.agent;
    row.reward = rec.reward_gained;
    row.betrayal = std::any_of(rec.betrayal_flags.begin(), rec.betrayal_flags.end(),
                               [](bool f) { return f; })
                       ? 1
                       : 0;
    row.honesty = std::all_of(rec.honesty_flags.begin(), rec.honesty_flags.end(),
                              [](bool f) { return f; })
                      ? 1
                      : 0;
    row.honesty_intended =
        std::all_of(rec.honesty_intended_flags.begin(), rec.honesty_intended_flags.end(),
                    [](bool f) { return f; })
            ? 1
            : 0;
    row.hunger = rec.hunger_after;
    double dist = 0.0;
    for (size_t m = 0; m < rec.intended_msgs.size(); ++m)
      for (size_t c = 0; c < rec.intended_msgs[m].size(); ++c)
        dist = std::max(dist, std::abs(rec.transmitted_msgs[m][c] - rec.intended_msgs[m][c]));
    row.distortion = dist;
    if (hook_ && rec.agent == 0) {
      row.has_penalty = true;
      row.p_betray = p_betray;
      row.true_betrayal = row.betrayal;
    }
    sink_->on_row(row);
  }

  const PpoConfig& pcfg_;
  const GameConfig& gcfg_;
  MetricsSink* sink_;
  RewardHook* hook_;
  ObsLayout layout_;
  Rng master_;
  std::uint64_t policy_seed_;
  Rng episode_rng_;
  Rng sample_rng_;
  Rng shuffle_rng_;
  GameState env_;
  bool env_alive_ = false;
  std::int64_t global_step_ = 0;
  std::int64_t episode_count_ = 0;
};

}  // namespace

TrainResult train(const PpoConfig& pcfg, const GameConfig& gcfg, MetricsSink* sink,
                  RewardHook* hook, const std::string& abort_checkpoint_path) {
  pcfg.validate();
  gcfg.validate();
  RolloutDriver driver(pcfg, gcfg, sink, hook);
  PolicyParams params = init_policy(gcfg, pcfg.hidden, driver.policy_seed(), pcfg.init_log_std);
  const std::size_t n_params = params.net.param_count() + 1;
  nn::AdamState adam(n_params, pcfg.learning_rate);
  Trajectory traj;
  std::int64_t learner_steps = 0;

  try {
    while (learner_steps < pcfg.total_timesteps) {
      traj.clear();
      for (int t = 0; t < pcfg.rollout_length; ++t) {
        driver.advance_to_learner(&traj);
        driver.learner_step(params, traj);
        learner_steps += 1;
      }
      // Bootstrap at the learner's next turn; an episode ending on the way
      // flips the last done flag instead.
      driver.advance_to_learner(&traj);
      double bootstrap = 0.0;
      if (!traj.dones.back()) bootstrap = policy_value(params, observe(driver.env(), 0));
      const GaeResult gae = compute_gae(traj.rewards, traj.values, traj.dones, bootstrap,
                                        pcfg.gamma, pcfg.gae_lambda);

      std::vector<double> flat = nn::flatten(params.net);
      flat.push_back(params.message_log_std);
      std::vector<int> perm(traj.size());
      for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
      const int n_minibatches = pcfg.rollout_length / pcfg.minibatch_size;
      for (int epoch = 0; epoch < pcfg.update_epochs; ++epoch) {
        for (int i = static_cast<int>(perm.size()) - 1; i > 0; --i)
          std::swap(perm[static_cast<size_t>(i)],
                    perm[static_cast<size_t>(driver.shuffle_rng().uniform_int(i + 1))]);
        for (int mb = 0; mb < n_minibatches; ++mb) {
          const std::span<const int> idx(perm.data() + mb * pcfg.minibatch_size,
                                         static_cast<size_t>(pcfg.minibatch_size));
          std::vector<double> adv(idx.size()), ret(idx.size());
          for (size_t b = 0; b < idx.size(); ++b) {
            adv[b] = gae.advantages[static_cast<size_t>(idx[b])];
            ret[b] = gae.returns[static_cast<size_t>(idx[b])];
          }
          normalize_advantages(adv);
          std::vector<double> grads;
          ppo_loss_and_grads(params, traj, idx, adv, ret, pcfg, grads);
          nn::clip_grad_norm(grads, pcfg.max_grad_norm);
          nn::adam_step(flat, grads, adam);
          nn::load_flat(params.net, std::span<const double>(flat.data(), flat.size() - 1));
          params.message_log_std = flat.back();
        }
      }
    }
  } catch (const NumericError&) {
    if (!abort_checkpoint_path.empty()) save_policy(params, abort_checkpoint_path);
    throw;
  }

  TrainResult result;
  result.params = std::move(params);
  result.learner_steps = learner_steps;
  result.episodes = driver.episodes();
  return result;
}

void run_scripted_control(const PpoConfig& pcfg, const GameConfig& gcfg, MetricsSink* sink) {
  pcfg.validate();
  gcfg.validate();
  RolloutDriver driver(pcfg, gcfg, sink, nullptr);
  std::int64_t learner_steps = 0;
  while (learner_steps < pcfg.total_timesteps) {
    driver.advance_to_learner(nullptr);
    driver.scripted_learner_step();
    learner_steps += 1;
  }
}

}  // namespace trustgrid::ppo
