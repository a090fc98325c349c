#pragma once

#include <cstdint>
#include <vector>

#include "trustgrid/config.hpp"
#include "trustgrid/env.hpp"
#include "trustgrid/nn.hpp"
#include "trustgrid/rng.hpp"

namespace trustgrid {

// Slices of the fixed observation layout (see observe in env.hpp).
struct ObsLayout {
  int n_agents = 2;
  int grid_size = 5;

  explicit ObsLayout(const GameConfig& cfg) : n_agents(cfg.n_agents), grid_size(cfg.grid_size) {}
  ObsLayout(int n, int l) : n_agents(n), grid_size(l) {}

  int n_opponents() const { return n_agents - 1; }
  int size() const { return n_opponents() * 2 * grid_size + 2; }
  // Opponent slot k (0-based over ascending opponent index).
  int world_offset(int k) const { return k * 2 * grid_size; }
  int message_offset(int k) const { return k * 2 * grid_size + grid_size; }
  int hunger_offset() const { return n_opponents() * 2 * grid_size; }
  int round_offset() const { return hunger_offset() + 1; }
};

// Policy network bundle: shared trunk with probe/message/value heads plus the
// global log standard deviation of the Gaussian message head.
struct PolicyParams {
  nn::Network net;
  double message_log_std = 0.0;
};

// Builds the policy network for a game configuration: trunk `hidden` with
// `hidden_act`, output heads [probe logits | message means | value].
PolicyParams init_policy(const GameConfig& cfg, const std::vector<int>& hidden,
                         std::uint64_t seed, double init_log_std);

// Scripted truthful policy: relays each observed opponent world as a
// reward-valued multi-hot vector and probes the argmax of the incoming
// transmitted messages (elementwise mean across opponents when N > 2),
// lowest-index tie-break. Deterministic.
Action truthful_act(const std::vector<double>& obs, const ObsLayout& layout);

// Control baseline: uniform probe, uniform [0,1] message components.
Action random_act(const ObsLayout& layout, Rng& rng);

enum class ActMode { Sample, Greedy };

struct NeuralActResult {
  Action action;                    // message components are the raw samples;
                                    // the environment clamps on delivery
  std::vector<double> message_raw;  // flattened (N-1)*L pre-clamp samples
  int probe = 0;
  double log_prob = 0.0;  // categorical log-prob + Gaussian log-density
  double value = 0.0;
};

NeuralActResult neural_act(const PolicyParams& params, const std::vector<double>& obs,
                           Rng& rng, ActMode mode);

// Log-density of (probe, message) under the policy at `obs`, plus the value
// estimate; used for ratio computation and density cross-checks.
double policy_log_prob(const PolicyParams& params, const std::vector<double>& obs,
                       int probe, std::span<const double> message_raw, double* value_out = nullptr);

// State-value estimate only.
double policy_value(const PolicyParams& params, const std::vector<double>& obs);

}  // namespace trustgrid
