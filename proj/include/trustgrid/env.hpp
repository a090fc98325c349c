#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "trustgrid/config.hpp"
#include "trustgrid/rng.hpp"

namespace trustgrid {

enum class FoodStatus { Pooled, Placed, Consumed };

struct FoodItem {
  int id = -1;
  double reward = 0.0;     // in (0, 1]
  double nutrition = 0.0;  // in (0, 1]
  FoodStatus status = FoodStatus::Pooled;
  int world = -1;  // valid while Placed
  int cell = -1;   // valid while Placed
};

// One gridworld: a flat vector of cells, each empty (-1) or holding a food id.
struct WorldState {
  std::vector<int> cells;

  explicit WorldState(int grid_size = 0) : cells(static_cast<size_t>(grid_size), -1) {}
  bool occupied(int cell) const { return cells[static_cast<size_t>(cell)] >= 0; }
  bool empty() const;
  int food_count() const;
};

struct AgentState {
  double hunger = 0.0;
  double cumulative_reward = 0.0;
  double cumulative_hunger_gained = 0.0;
  int steps_taken = 0;                  // own turns acted so far
  std::optional<int> last_consume_step; // own 1-based turn count at last consumption
};

struct Message {
  int sender = -1;
  int receiver = -1;
  int round = -1;  // -1 for the zero-vector placeholder
  std::vector<double> intended;     // clamped to [0,1] before labeling/noise
  std::vector<double> transmitted;  // intended + hunger noise, not re-clamped
};

// One agent turn: a probe of the own world plus one message per opponent,
// listed in ascending opponent index (self skipped).
struct Action {
  int probe_cell = 0;
  std::vector<std::vector<double>> messages;
};

// Everything the environment records about one turn; the substrate for
// episode logs, telemetry and the behavioral feature extractor.
struct TurnRecord {
  int step_index = 0;   // 0-based turn counter within the episode
  int round_index = 0;  // 1-based
  int agent = 0;
  int probe_cell = 0;
  double reward_gained = 0.0;
  bool consumed = false;
  double hunger_before = 0.0;
  double hunger_after = 0.0;
  // Outgoing, ascending opponent index.
  std::vector<std::vector<double>> intended_msgs;
  std::vector<std::vector<double>> transmitted_msgs;
  std::vector<bool> betrayal_flags;       // from intended (pre-noise) vectors
  std::vector<bool> degenerate_out;       // all-equal intended or empty target world
  // Incoming snapshot consumed this turn, ascending opponent index.
  std::vector<std::vector<double>> inbox_transmitted;
  std::vector<std::vector<double>> inbox_intended;
  std::vector<bool> honesty_flags;           // transmitted vs own world (post-noise)
  std::vector<bool> honesty_intended_flags;  // intended vs own world (pre-noise)
  std::vector<bool> degenerate_in;           // all-equal incoming transmitted
  // World snapshots for label replay: per-cell reward values, 0 = empty.
  std::vector<double> own_world_view;               // before this turn's probe
  std::vector<std::vector<double>> opp_world_views; // ascending opponent index
  std::vector<int> opp_food_count;
  std::vector<double> opp_world_reward;
  int pool_remaining = 0;  // unconsumed items after this turn
};

struct GameState {
  GameConfig config;
  std::vector<WorldState> worlds;
  std::vector<AgentState> agents;
  std::vector<FoodItem> pool;
  int round_index = 0;          // 0 until the first begin_round
  std::vector<int> turn_order;  // permutation of agent indices, fresh per round
  int turn_cursor = 0;
  // inboxes[receiver][sender]: latest message; zero placeholder before first receipt.
  std::vector<std::vector<Message>> inboxes;
  Rng rng;
  bool terminated = false;
  int step_count = 0;

  GameState() : rng(0) {}

  int current_actor() const { return turn_order[static_cast<size_t>(turn_cursor)]; }
  int unconsumed_count() const;
  double initial_pool_reward() const;
  // Ascending opponent indices for `agent`.
  std::vector<int> opponents(int agent) const;
};

// Creates an episode: k pooled items with pairwise-distinct rewards, zero
// hungers, zero inboxes, round 0. Identical (config, seed) give bit-identical
// states. The first round starts with begin_round.
GameState new_game(const GameConfig& config, std::uint64_t seed);

// Re-places every unconsumed item (uniform world with a free cell, then
// uniform free cell), draws a fresh turn order and advances the round index.
void begin_round(GameState& state);

// Observation layout, fixed: for each opponent j ascending (self skipped):
// per-cell reward of placed items in world j (L values, 0 = empty), then the
// latest transmitted message from j (L values); then own hunger; then
// round_index / max_rounds. The own world never appears.
std::vector<double> observe(const GameState& state, int agent);

// Applies the full turn: clamp + label + noise + deliver messages, probe the
// own world, update hunger, advance the turn cursor, and run the end-of-round
// termination check / reallocation.
TurnRecord step_turn(GameState& state, int agent, const Action& action);

// intended + iid uniform noise on [-hunger, +hunger] per component; the
// result is not clamped. hunger == 0 returns the input bit-exactly.
std::vector<double> apply_hunger_noise(const std::vector<double>& intended,
                                       double hunger, Rng& rng);

// True iff the argmax cell of the intended message is empty (lowest-index
// tie-break). A world with no placed items yields false: with nothing to
// misreport, a message about it cannot betray, which keeps a truthful
// sender's betrayal rate at zero on every reachable state.
bool betrayal_label(const std::vector<double>& intended, const WorldState& world);

// True iff the argmax cell of the transmitted message is occupied in the
// world the message describes; same tie-break. Evaluated post-noise.
bool honesty_label(const std::vector<double>& transmitted, const WorldState& world);

// True iff no unconsumed items remain or the round cap is reached.
// Meaningful at round boundaries; step_turn applies it there.
bool is_terminal(const GameState& state);

// All components equal (degenerate argmax; flagged in logs).
bool all_equal(const std::vector<double>& v);

}  // namespace trustgrid
