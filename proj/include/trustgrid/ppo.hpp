#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trustgrid/agents.hpp"
#include "trustgrid/config.hpp"
#include "trustgrid/env.hpp"
#include "trustgrid/telemetry.hpp"

namespace trustgrid::ppo {

struct PpoConfig {
  std::int64_t total_timesteps = 100000;
  int rollout_length = 2048;
  int minibatch_size = 256;
  int update_epochs = 10;
  double clip_eps = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  std::vector<int> hidden = {64, 64};
  double init_log_std = -0.6931471805599453;  // log 0.5
  std::uint64_t seed = 0;

  void validate() const;
};

// Rollout storage for the learner's turns.
struct Trajectory {
  std::vector<std::vector<double>> observations;
  std::vector<int> probes;
  std::vector<std::vector<double>> messages_raw;  // pre-clamp samples
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;  // 1 on the learner's last turn of an episode
  std::vector<TurnRecord> records;

  std::size_t size() const { return rewards.size(); }
  void clear();
};

struct GaeResult {
  std::vector<double> advantages;  // raw (unnormalized)
  std::vector<double> returns;
};

// Backward recursion: delta_t = r_t + gamma*v_{t+1}*(1-done_t) - v_t,
// A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1}; returns = A + v.
// v_{t+1} past the end is `bootstrap_value`.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double bootstrap_value,
                      double gamma, double lambda);

// Zero-mean unit-variance in place; skipped when the batch std < 1e-8.
void normalize_advantages(std::span<double> advantages);

struct PpoLossStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;  // mean squared value error, unscaled
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Clipped-surrogate loss over the index set `idx` of the trajectory, plus
// exact gradients. `flat_grads` receives [network grads..., d/d log_std]
// matching flatten() order.
PpoLossStats ppo_loss_and_grads(const PolicyParams& params, const Trajectory& traj,
                                std::span<const int> idx, std::span<const double> advantages,
                                std::span<const double> returns, const PpoConfig& cfg,
                                std::vector<double>& flat_grads);

// Per-turn reward shaping and instrumentation, used by penalized training.
// observe_turn is called for every turn record in play order; shape is called
// for each learner turn immediately after its observe_turn.
class RewardHook {
 public:
  virtual ~RewardHook() = default;
  virtual void observe_turn(const TurnRecord& rec) = 0;
  virtual double shape(const TurnRecord& rec, double raw_reward, double* p_betray) = 0;
  virtual void on_episode_start() = 0;
};

// Receives telemetry rows in step order plus episode/turn events for logging.
class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void on_row(const telemetry::MetricRow& row) = 0;
  virtual void on_episode_start(std::int64_t episode, std::uint64_t seed) { (void)episode, (void)seed; }
  virtual void on_turn(const TurnRecord& rec) { (void)rec; }
};

struct TrainResult {
  PolicyParams params;
  std::int64_t learner_steps = 0;
  std::int64_t episodes = 0;
};

// The training loop: the learner (agent 0) acts by sampled neural policy
// against scripted truthful opponents; rollouts of rollout_length learner
// turns alternate with update_epochs of minibatched clipped-surrogate
// updates. Deterministic per (configs, seed). On a numeric failure the last
// parameters are saved to abort_checkpoint_path (when given) before the
// error propagates.
TrainResult train(const PpoConfig& pcfg, const GameConfig& gcfg, MetricsSink* sink,
                  RewardHook* hook = nullptr, const std::string& abort_checkpoint_path = {});

// Control run: the learner seat is played by the scripted truthful policy,
// with the same episode seed stream as train() under the same seed.
void run_scripted_control(const PpoConfig& pcfg, const GameConfig& gcfg, MetricsSink* sink);

}  // namespace trustgrid::ppo
