#pragma once

#include <cstdint>
#include <string>

namespace trustgrid {

enum class NoiseKind { UniformAdditive };

// Rule parameters of the game. Defaults follow the reference experiment:
// two worlds of 5 cells, four food items, hunger delta 0.15.
struct GameConfig {
  int n_agents = 2;      // N worlds, one agent each
  int grid_size = 5;     // L cells per world; also the message dimension
  int n_food = 4;        // k items in the episode pool
  double hunger_delta = 0.15;   // hunger gained on a failed turn
  double hunger_max = 1.0;      // hunger ceiling (also caps noise amplitude)
  double reward_low = 0.0;      // item rewards sampled from (reward_low, reward_high)
  double reward_high = 1.0;
  bool nutrition_equals_reward = true;
  int max_rounds = 50;          // safety cap; episodes normally end much earlier
  NoiseKind noise_kind = NoiseKind::UniformAdditive;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the violated bound.
  void validate() const;

  int message_dim() const { return grid_size; }
  int observation_size() const { return (n_agents - 1) * 2 * grid_size + 2; }
};

}  // namespace trustgrid
