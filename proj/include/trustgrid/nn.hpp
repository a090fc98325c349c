#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trustgrid/rng.hpp"

namespace trustgrid::nn {

enum class Activation { Tanh, Relu, Identity };

Activation activation_from_string(const std::string& name);
std::string activation_name(Activation a);

struct Layer {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
  std::vector<double> w;  // row-major, out x in
  std::vector<double> b;  // out
};

// Named slice of the output vector (probe logits, message means, value,
// class logits).
struct Head {
  std::string name;
  int offset = 0;
  int len = 0;
};

struct Network {
  std::vector<Layer> layers;
  std::vector<Head> heads;

  int input_dim() const { return layers.front().in; }
  int output_dim() const { return layers.back().out; }
  const Head& head(const std::string& name) const;
  std::size_t param_count() const;
};

// Pre-activations and layer inputs retained by a cached forward pass.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;   // per layer
  std::vector<std::vector<double>> preacts;  // per layer
  std::vector<double> output;
};

// Per-parameter gradients, mirroring Network layout.
struct Grads {
  struct LayerGrads {
    std::vector<double> dw;
    std::vector<double> db;
  };
  std::vector<LayerGrads> layers;

  void scale(double s);
  void add(const Grads& other);
};

// Hidden layers use `hidden_act`; the output layer is Identity. Weights are
// uniform on +-sqrt(6/(in+out)), biases zero, deterministic per seed.
Network init_network(const std::vector<int>& layer_dims, Activation hidden_act,
                     std::uint64_t seed, std::vector<Head> heads = {});

std::vector<double> forward(const Network& net, std::span<const double> input);
ForwardCache forward_cached(const Network& net, std::span<const double> input);

Grads zero_grads(const Network& net);

// Accumulates exact reverse-mode gradients of the scalar loss whose
// output-gradient is `dout` into `grads`; returns the input gradient.
std::vector<double> backward(const Network& net, const ForwardCache& cache,
                             std::span<const double> dout, Grads& grads);

// Flat parameter vector, row-major W then b per layer, in layer order.
// The same order is used by checkpoints and the optimizer.
std::vector<double> flatten(const Network& net);
void load_flat(Network& net, std::span<const double> flat);
std::vector<double> flatten(const Network& net, const Grads& grads);

// First-order adaptive optimizer over a flat parameter vector.
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t n_params = 0, double lr_ = 3e-4)
      : lr(lr_), m(n_params, 0.0), v(n_params, 0.0) {}
};

// Bias-corrected update, in place.
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state);

std::vector<double> softmax(std::span<const double> logits);
double log_softmax_at(std::span<const double> logits, int index);

// Weighted cross-entropy; grad_out receives w[label] * (softmax - onehot).
// Empty weights mean uniform.
double softmax_xent(std::span<const double> logits, int label,
                    std::span<const double> class_weights, std::vector<double>& grad_out);

// Clips the flat gradient to a maximum L2 norm; returns the pre-clip norm.
double clip_grad_norm(std::vector<double>& flat_grads, double max_norm);

}  // namespace trustgrid::nn
