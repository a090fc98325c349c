#include "trustgrid/agents.hpp"

#include <cmath>
#include <string>

#include "trustgrid/errors.hpp"

namespace trustgrid {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  return best;
}

}  // namespace

PolicyParams init_policy(const GameConfig& cfg, const std::vector<int>& hidden,
                         std::uint64_t seed, double init_log_std) {
  const ObsLayout layout(cfg);
  const int msg_dim = layout.n_opponents() * cfg.grid_size;
  std::vector<int> dims;
  dims.push_back(layout.size());
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(cfg.grid_size + msg_dim + 1);
  std::vector<nn::Head> heads{
      {"probe", 0, cfg.grid_size},
      {"message", cfg.grid_size, msg_dim},
      {"value", cfg.grid_size + msg_dim, 1},
  };
  PolicyParams params;
  params.net = nn::init_network(dims, nn::Activation::Tanh, seed, std::move(heads));
  params.message_log_std = init_log_std;
  return params;
}

Action truthful_act(const std::vector<double>& obs, const ObsLayout& layout) {
  if (static_cast<int>(obs.size()) != layout.size())
    throw DimensionError("truthful_act: observation size mismatch");
  const int L = layout.grid_size;
  Action action;
  std::vector<double> probe_basis(static_cast<size_t>(L), 0.0);
  for (int k = 0; k < layout.n_opponents(); ++k) {
    // Relay the observed world verbatim: reward value at occupied cells.
    const auto* world = obs.data() + layout.world_offset(k);
    action.messages.emplace_back(world, world + L);
    const auto* msg = obs.data() + layout.message_offset(k);
    for (int c = 0; c < L; ++c) probe_basis[static_cast<size_t>(c)] += msg[c];
  }
  for (double& v : probe_basis) v /= layout.n_opponents();
  action.probe_cell = argmax_lowest(probe_basis);
  return action;
}

Action random_act(const ObsLayout& layout, Rng& rng) {
  Action action;
  action.probe_cell = rng.uniform_int(layout.grid_size);
  for (int k = 0; k < layout.n_opponents(); ++k) {
    std::vector<double> msg(static_cast<size_t>(layout.grid_size));
    for (double& v : msg) v = rng.uniform01();
    action.messages.push_back(std::move(msg));
  }
  return action;
}

NeuralActResult neural_act(const PolicyParams& params, const std::vector<double>& obs,
                           Rng& rng, ActMode mode) {
  const std::vector<double> out = nn::forward(params.net, obs);
  for (double v : out)
    if (!std::isfinite(v)) throw NumericError("neural_act: non-finite network output");

  const nn::Head& probe_head = params.net.head("probe");
  const nn::Head& msg_head = params.net.head("message");
  const nn::Head& value_head = params.net.head("value");
  const std::span<const double> logits(out.data() + probe_head.offset,
                                       static_cast<size_t>(probe_head.len));
  const std::span<const double> means(out.data() + msg_head.offset,
                                      static_cast<size_t>(msg_head.len));
  const double sigma = std::exp(params.message_log_std);

  NeuralActResult res;
  res.value = out[static_cast<size_t>(value_head.offset)];

  if (mode == ActMode::Sample) {
    const std::vector<double> probs = nn::softmax(logits);
    const double u = rng.uniform01();
    double acc = 0.0;
    int probe = probe_head.len - 1;
    for (int i = 0; i < probe_head.len; ++i) {
      acc += probs[static_cast<size_t>(i)];
      if (u < acc) {
        probe = i;
        break;
      }
    }
    res.probe = probe;
    res.message_raw.resize(means.size());
    for (size_t c = 0; c < means.size(); ++c) res.message_raw[c] = rng.normal(means[c], sigma);
  } else {
    res.probe = argmax_lowest(logits);
    res.message_raw.assign(means.begin(), means.end());
  }

  double lp = nn::log_softmax_at(logits, res.probe);
  for (size_t c = 0; c < means.size(); ++c) {
    const double d = res.message_raw[c] - means[c];
    lp += -params.message_log_std - 0.5 * kLog2Pi - 0.5 * d * d / (sigma * sigma);
  }
  res.log_prob = lp;

  res.action.probe_cell = res.probe;
  const int L = probe_head.len;
  const int n_opp = msg_head.len / L;
  for (int k = 0; k < n_opp; ++k)
    res.action.messages.emplace_back(res.message_raw.begin() + static_cast<std::ptrdiff_t>(k) * L,
                                     res.message_raw.begin() + static_cast<std::ptrdiff_t>(k + 1) * L);
  return res;
}

double policy_log_prob(const PolicyParams& params, const std::vector<double>& obs,
                       int probe, std::span<const double> message_raw, double* value_out) {
  const std::vector<double> out = nn::forward(params.net, obs);
  const nn::Head& probe_head = params.net.head("probe");
  const nn::Head& msg_head = params.net.head("message");
  if (static_cast<int>(message_raw.size()) != msg_head.len)
    throw DimensionError("policy_log_prob: message size mismatch");
  const std::span<const double> logits(out.data() + probe_head.offset,
                                       static_cast<size_t>(probe_head.len));
  const double sigma = std::exp(params.message_log_std);
  double lp = nn::log_softmax_at(logits, probe);
  for (int c = 0; c < msg_head.len; ++c) {
    const double d = message_raw[static_cast<size_t>(c)] -
                     out[static_cast<size_t>(msg_head.offset + c)];
    lp += -params.message_log_std - 0.5 * kLog2Pi - 0.5 * d * d / (sigma * sigma);
  }
  if (value_out) *value_out = out[static_cast<size_t>(params.net.head("value").offset)];
  return lp;
}

double policy_value(const PolicyParams& params, const std::vector<double>& obs) {
  const std::vector<double> out = nn::forward(params.net, obs);
  return out[static_cast<size_t>(params.net.head("value").offset)];
}

}  // namespace trustgrid
