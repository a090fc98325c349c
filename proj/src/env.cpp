#include "trustgrid/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trustgrid/errors.hpp"

namespace trustgrid {

void GameConfig::validate() const {
  if (n_agents < 2) throw ConfigError("n_agents must be >= 2, got " + std::to_string(n_agents));
  if (grid_size < 2) throw ConfigError("grid_size must be >= 2, got " + std::to_string(grid_size));
  if (n_food < n_agents)
    throw ConfigError("n_food must be >= n_agents, got n_food=" + std::to_string(n_food) +
                      " n_agents=" + std::to_string(n_agents));
  if (n_food > n_agents * grid_size)
    throw ConfigError("n_food must be <= n_agents*grid_size so the pool fits, got n_food=" +
                      std::to_string(n_food) + " capacity=" + std::to_string(n_agents * grid_size));
  if (!(hunger_delta > 0.0) || hunger_delta > hunger_max)
    throw ConfigError("hunger_delta must satisfy 0 < hunger_delta <= hunger_max");
  if (!(hunger_max > 0.0)) throw ConfigError("hunger_max must be > 0");
  if (reward_low < 0.0 || !(reward_low < reward_high) || reward_high > 1.0)
    throw ConfigError("reward bounds must satisfy 0 <= reward_low < reward_high <= 1");
  if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1, got " + std::to_string(max_rounds));
}

bool WorldState::empty() const {
  return std::all_of(cells.begin(), cells.end(), [](int c) { return c < 0; });
}

int WorldState::food_count() const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](int c) { return c >= 0; }));
}

int GameState::unconsumed_count() const {
  return static_cast<int>(std::count_if(pool.begin(), pool.end(), [](const FoodItem& f) {
    return f.status != FoodStatus::Consumed;
  }));
}

double GameState::initial_pool_reward() const {
  double total = 0.0;
  for (const FoodItem& f : pool) total += f.reward;
  return total;
}

std::vector<int> GameState::opponents(int agent) const {
  std::vector<int> opp;
  opp.reserve(static_cast<size_t>(config.n_agents - 1));
  for (int j = 0; j < config.n_agents; ++j)
    if (j != agent) opp.push_back(j);
  return opp;
}

namespace {

double clamp_unit(double x) { return std::max(0.0, std::min(1.0, x)); }

// Lowest-index maximal component.
int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  return best;
}

Message zero_message(int sender, int receiver, int dim) {
  Message m;
  m.sender = sender;
  m.receiver = receiver;
  m.round = -1;
  m.intended.assign(static_cast<size_t>(dim), 0.0);
  m.transmitted.assign(static_cast<size_t>(dim), 0.0);
  return m;
}

std::vector<double> world_reward_view(const GameState& state, int world) {
  const WorldState& w = state.worlds[static_cast<size_t>(world)];
  std::vector<double> view(w.cells.size(), 0.0);
  for (size_t c = 0; c < w.cells.size(); ++c)
    if (w.cells[c] >= 0) view[c] = state.pool[static_cast<size_t>(w.cells[c])].reward;
  return view;
}

}  // namespace

bool all_equal(const std::vector<double>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] != v[0]) return false;
  return true;
}

GameState new_game(const GameConfig& config, std::uint64_t seed) {
  config.validate();
  GameState state;
  state.config = config;
  state.config.seed = seed;
  state.rng = Rng(seed);
  state.worlds.assign(static_cast<size_t>(config.n_agents), WorldState(config.grid_size));
  state.agents.assign(static_cast<size_t>(config.n_agents), AgentState{});
  state.pool.reserve(static_cast<size_t>(config.n_food));
  for (int i = 0; i < config.n_food; ++i) {
    FoodItem item;
    item.id = i;
    for (;;) {
      const double u = state.rng.uniform01();
      if (u == 0.0) continue;  // open interval
      const double r = config.reward_low + u * (config.reward_high - config.reward_low);
      const bool dup = std::any_of(state.pool.begin(), state.pool.end(),
                                   [r](const FoodItem& f) { return f.reward == r; });
      if (!dup) {
        item.reward = r;
        break;
      }
    }
    item.nutrition = config.nutrition_equals_reward ? item.reward : item.reward;
    item.status = FoodStatus::Pooled;
    state.pool.push_back(item);
  }
  state.inboxes.assign(static_cast<size_t>(config.n_agents), {});
  for (int r = 0; r < config.n_agents; ++r) {
    auto& box = state.inboxes[static_cast<size_t>(r)];
    box.reserve(static_cast<size_t>(config.n_agents));
    for (int s = 0; s < config.n_agents; ++s) box.push_back(zero_message(s, r, config.grid_size));
  }
  return state;
}

void begin_round(GameState& state) {
  if (state.terminated) throw LifecycleError("begin_round called on a terminated game");
  if (!state.turn_order.empty() && state.turn_cursor != state.config.n_agents)
    throw LifecycleError("begin_round called mid-round");

  // Discard surviving placements, then re-place every unconsumed item:
  // uniform world among those with a free cell, then uniform free cell.
  for (WorldState& w : state.worlds) std::fill(w.cells.begin(), w.cells.end(), -1);
  for (FoodItem& item : state.pool) {
    if (item.status == FoodStatus::Consumed) continue;
    std::vector<int> open_worlds;
    for (int w = 0; w < state.config.n_agents; ++w)
      if (state.worlds[static_cast<size_t>(w)].food_count() < state.config.grid_size)
        open_worlds.push_back(w);
    const int world = open_worlds[static_cast<size_t>(state.rng.uniform_int(
        static_cast<int>(open_worlds.size())))];
    std::vector<int> free_cells;
    for (int c = 0; c < state.config.grid_size; ++c)
      if (!state.worlds[static_cast<size_t>(world)].occupied(c)) free_cells.push_back(c);
    const int cell = free_cells[static_cast<size_t>(state.rng.uniform_int(
        static_cast<int>(free_cells.size())))];
    state.worlds[static_cast<size_t>(world)].cells[static_cast<size_t>(cell)] = item.id;
    item.status = FoodStatus::Placed;
    item.world = world;
    item.cell = cell;
  }

  // Fresh uniform permutation (Fisher-Yates).
  state.turn_order.resize(static_cast<size_t>(state.config.n_agents));
  for (int i = 0; i < state.config.n_agents; ++i) state.turn_order[static_cast<size_t>(i)] = i;
  for (int i = state.config.n_agents - 1; i > 0; --i)
    std::swap(state.turn_order[static_cast<size_t>(i)],
              state.turn_order[static_cast<size_t>(state.rng.uniform_int(i + 1))]);

  state.round_index += 1;
  state.turn_cursor = 0;
}

std::vector<double> observe(const GameState& state, int agent) {
  const int L = state.config.grid_size;
  std::vector<double> obs;
  obs.reserve(static_cast<size_t>(state.config.observation_size()));
  for (int j : state.opponents(agent)) {
    const std::vector<double> view = world_reward_view(state, j);
    obs.insert(obs.end(), view.begin(), view.end());
    const Message& m = state.inboxes[static_cast<size_t>(agent)][static_cast<size_t>(j)];
    obs.insert(obs.end(), m.transmitted.begin(), m.transmitted.end());
  }
  obs.push_back(state.agents[static_cast<size_t>(agent)].hunger);
  obs.push_back(static_cast<double>(state.round_index) / state.config.max_rounds);
  (void)L;
  return obs;
}

std::vector<double> apply_hunger_noise(const std::vector<double>& intended,
                                       double hunger, Rng& rng) {
  if (hunger < 0.0) throw NumericError("apply_hunger_noise: negative hunger");
  if (hunger == 0.0) return intended;
  std::vector<double> out(intended.size());
  for (size_t c = 0; c < intended.size(); ++c)
    out[c] = intended[c] + hunger * (2.0 * rng.uniform01() - 1.0);
  return out;
}

bool betrayal_label(const std::vector<double>& intended, const WorldState& world) {
  if (intended.size() != world.cells.size())
    throw DimensionError("betrayal_label: message length " + std::to_string(intended.size()) +
                         " != world size " + std::to_string(world.cells.size()));
  if (world.empty()) return false;
  return !world.occupied(argmax_lowest(intended));
}

bool honesty_label(const std::vector<double>& transmitted, const WorldState& world) {
  if (transmitted.size() != world.cells.size())
    throw DimensionError("honesty_label: message length " + std::to_string(transmitted.size()) +
                         " != world size " + std::to_string(world.cells.size()));
  return world.occupied(argmax_lowest(transmitted));
}

bool is_terminal(const GameState& state) {
  return state.unconsumed_count() == 0 || state.round_index >= state.config.max_rounds;
}

TurnRecord step_turn(GameState& state, int agent, const Action& action) {
  const int L = state.config.grid_size;
  const int n = state.config.n_agents;
  if (state.terminated) throw LifecycleError("step_turn called on a terminated game");
  if (state.turn_order.empty() || state.turn_cursor >= n)
    throw LifecycleError("step_turn called outside an active round");
  if (agent != state.current_actor())
    throw LifecycleError("agent " + std::to_string(agent) + " acting out of turn (current actor " +
                         std::to_string(state.current_actor()) + ")");
  if (action.probe_cell < 0 || action.probe_cell >= L)
    throw ActionError("probe_cell " + std::to_string(action.probe_cell) + " out of range [0, " +
                      std::to_string(L) + ")");
  const std::vector<int> opp = state.opponents(agent);
  if (action.messages.size() != opp.size())
    throw ActionError("expected " + std::to_string(opp.size()) + " messages, got " +
                      std::to_string(action.messages.size()));
  for (const auto& m : action.messages) {
    if (static_cast<int>(m.size()) != L)
      throw ActionError("message length " + std::to_string(m.size()) + " != grid size " +
                        std::to_string(L));
    for (double v : m)
      if (!std::isfinite(v)) throw ActionError("non-finite message component");
  }

  AgentState& self = state.agents[static_cast<size_t>(agent)];
  TurnRecord rec;
  rec.step_index = state.step_count;
  rec.round_index = state.round_index;
  rec.agent = agent;
  rec.probe_cell = action.probe_cell;
  rec.hunger_before = self.hunger;
  rec.own_world_view = world_reward_view(state, agent);

  // Incoming snapshot: honesty is judged against the own world as it stands
  // at turn start, before this turn's probe can consume anything.
  const WorldState& own_world = state.worlds[static_cast<size_t>(agent)];
  for (int j : opp) {
    const Message& in = state.inboxes[static_cast<size_t>(agent)][static_cast<size_t>(j)];
    rec.inbox_transmitted.push_back(in.transmitted);
    rec.inbox_intended.push_back(in.intended);
    rec.honesty_flags.push_back(honesty_label(in.transmitted, own_world));
    rec.honesty_intended_flags.push_back(honesty_label(in.intended, own_world));
    rec.degenerate_in.push_back(all_equal(in.transmitted));
  }

  // Outgoing messages: clamp, label pre-noise, noise with pre-turn hunger.
  for (size_t oi = 0; oi < opp.size(); ++oi) {
    const int receiver = opp[oi];
    std::vector<double> intended(action.messages[oi].size());
    for (size_t c = 0; c < intended.size(); ++c) intended[c] = clamp_unit(action.messages[oi][c]);
    const WorldState& target = state.worlds[static_cast<size_t>(receiver)];
    rec.betrayal_flags.push_back(betrayal_label(intended, target));
    rec.degenerate_out.push_back(all_equal(intended) || target.empty());
    std::vector<double> transmitted = apply_hunger_noise(intended, self.hunger, state.rng);
    Message out;
    out.sender = agent;
    out.receiver = receiver;
    out.round = state.round_index;
    out.intended = intended;
    out.transmitted = transmitted;
    state.inboxes[static_cast<size_t>(receiver)][static_cast<size_t>(agent)] = std::move(out);
    rec.intended_msgs.push_back(std::move(intended));
    rec.transmitted_msgs.push_back(std::move(transmitted));
  }

  // Probe the own world.
  WorldState& mine = state.worlds[static_cast<size_t>(agent)];
  const int found = mine.cells[static_cast<size_t>(action.probe_cell)];
  if (found >= 0) {
    FoodItem& item = state.pool[static_cast<size_t>(found)];
    item.status = FoodStatus::Consumed;
    item.world = -1;
    item.cell = -1;
    mine.cells[static_cast<size_t>(action.probe_cell)] = -1;
    rec.reward_gained = item.reward;
    rec.consumed = true;
    self.cumulative_reward += item.reward;
    self.hunger = std::max(0.0, self.hunger - item.nutrition);
    self.last_consume_step = self.steps_taken + 1;
  } else {
    const double before = self.hunger;
    self.hunger = std::min(state.config.hunger_max, self.hunger + state.config.hunger_delta);
    self.cumulative_hunger_gained += self.hunger - before;
  }
  self.steps_taken += 1;
  rec.hunger_after = self.hunger;

  for (int j : opp) {
    rec.opp_world_views.push_back(world_reward_view(state, j));
    rec.opp_food_count.push_back(state.worlds[static_cast<size_t>(j)].food_count());
    double total = 0.0;
    for (double v : rec.opp_world_views.back()) total += v;
    rec.opp_world_reward.push_back(total);
  }
  rec.pool_remaining = state.unconsumed_count();

  state.step_count += 1;
  state.turn_cursor += 1;
  if (state.turn_cursor == n) {
    if (is_terminal(state))
      state.terminated = true;
    else
      begin_round(state);
  }
  return rec;
}

}  // namespace trustgrid
