#include "trustgrid/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trustgrid/errors.hpp"

namespace trustgrid::nn {

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw SchemaError("unknown activation: " + name);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  throw SchemaError("unknown activation enum value");
}

const Head& Network::head(const std::string& name) const {
  for (const Head& h : heads)
    if (h.name == name) return h;
  throw DimensionError("network has no head named " + name);
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void Grads::scale(double s) {
  for (auto& l : layers) {
    for (double& g : l.dw) g *= s;
    for (double& g : l.db) g *= s;
  }
}

void Grads::add(const Grads& other) {
  for (size_t i = 0; i < layers.size(); ++i) {
    for (size_t j = 0; j < layers[i].dw.size(); ++j) layers[i].dw[j] += other.layers[i].dw[j];
    for (size_t j = 0; j < layers[i].db.size(); ++j) layers[i].db[j] += other.layers[i].db[j];
  }
}

Network init_network(const std::vector<int>& layer_dims, Activation hidden_act,
                     std::uint64_t seed, std::vector<Head> heads) {
  if (layer_dims.size() < 2) throw ConfigError("init_network needs at least input and output dims");
  for (int d : layer_dims)
    if (d < 1) throw ConfigError("layer dimensions must be >= 1");
  Network net;
  net.heads = std::move(heads);
  Rng rng(seed);
  for (size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    Layer layer;
    layer.in = layer_dims[l];
    layer.out = layer_dims[l + 1];
    layer.act = (l + 2 == layer_dims.size()) ? Activation::Identity : hidden_act;
    const double bound = std::sqrt(6.0 / (layer.in + layer.out));
    layer.w.resize(static_cast<size_t>(layer.in) * static_cast<size_t>(layer.out));
    for (double& w : layer.w) w = rng.uniform(-bound, bound);
    layer.b.assign(static_cast<size_t>(layer.out), 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Identity: return z;
  }
  return z;
}

inline double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

void affine(const Layer& layer, std::span<const double> x, std::vector<double>& z) {
  z.assign(static_cast<size_t>(layer.out), 0.0);
  for (int o = 0; o < layer.out; ++o) {
    const double* row = layer.w.data() + static_cast<size_t>(o) * static_cast<size_t>(layer.in);
    double acc = layer.b[static_cast<size_t>(o)];
    for (int i = 0; i < layer.in; ++i) acc += row[i] * x[static_cast<size_t>(i)];
    z[static_cast<size_t>(o)] = acc;
  }
}

void check_input(const Network& net, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.input_dim())
    throw DimensionError("forward: input size " + std::to_string(input.size()) +
                         " != network input dim " + std::to_string(net.input_dim()));
  for (double v : input)
    if (!std::isfinite(v)) throw NumericError("forward: non-finite input component");
}

}  // namespace

std::vector<double> forward(const Network& net, std::span<const double> input) {
  check_input(net, input);
  std::vector<double> a(input.begin(), input.end());
  std::vector<double> z;
  for (const Layer& layer : net.layers) {
    affine(layer, a, z);
    a.resize(z.size());
    for (size_t i = 0; i < z.size(); ++i) a[i] = activate(layer.act, z[i]);
  }
  return a;
}

ForwardCache forward_cached(const Network& net, std::span<const double> input) {
  check_input(net, input);
  ForwardCache cache;
  cache.inputs.reserve(net.layers.size());
  cache.preacts.reserve(net.layers.size());
  std::vector<double> a(input.begin(), input.end());
  for (const Layer& layer : net.layers) {
    cache.inputs.push_back(a);
    std::vector<double> z;
    affine(layer, a, z);
    a.resize(z.size());
    for (size_t i = 0; i < z.size(); ++i) a[i] = activate(layer.act, z[i]);
    cache.preacts.push_back(std::move(z));
  }
  cache.output = a;
  return cache;
}

Grads zero_grads(const Network& net) {
  Grads g;
  g.layers.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    g.layers[l].dw.assign(net.layers[l].w.size(), 0.0);
    g.layers[l].db.assign(net.layers[l].b.size(), 0.0);
  }
  return g;
}

std::vector<double> backward(const Network& net, const ForwardCache& cache,
                             std::span<const double> dout, Grads& grads) {
  if (static_cast<int>(dout.size()) != net.output_dim())
    throw DimensionError("backward: dout size mismatch");
  if (grads.layers.size() != net.layers.size())
    throw DimensionError("backward: grads layout mismatch");
  std::vector<double> da(dout.begin(), dout.end());
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const Layer& layer = net.layers[static_cast<size_t>(l)];
    const std::vector<double>& z = cache.preacts[static_cast<size_t>(l)];
    const std::vector<double>& x = cache.inputs[static_cast<size_t>(l)];
    std::vector<double> dz(static_cast<size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o)
      dz[static_cast<size_t>(o)] =
          da[static_cast<size_t>(o)] * activate_grad(layer.act, z[static_cast<size_t>(o)]);
    auto& lg = grads.layers[static_cast<size_t>(l)];
    for (int o = 0; o < layer.out; ++o) {
      const double d = dz[static_cast<size_t>(o)];
      double* wrow = lg.dw.data() + static_cast<size_t>(o) * static_cast<size_t>(layer.in);
      for (int i = 0; i < layer.in; ++i) wrow[i] += d * x[static_cast<size_t>(i)];
      lg.db[static_cast<size_t>(o)] += d;
    }
    std::vector<double> dx(static_cast<size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = dz[static_cast<size_t>(o)];
      const double* row = layer.w.data() + static_cast<size_t>(o) * static_cast<size_t>(layer.in);
      for (int i = 0; i < layer.in; ++i) dx[static_cast<size_t>(i)] += d * row[i];
    }
    da = std::move(dx);
  }
  return da;
}

std::vector<double> flatten(const Network& net) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (const Layer& l : net.layers) {
    flat.insert(flat.end(), l.w.begin(), l.w.end());
    flat.insert(flat.end(), l.b.begin(), l.b.end());
  }
  return flat;
}

void load_flat(Network& net, std::span<const double> flat) {
  if (flat.size() != net.param_count())
    throw DimensionError("load_flat: expected " + std::to_string(net.param_count()) +
                         " values, got " + std::to_string(flat.size()));
  size_t off = 0;
  for (Layer& l : net.layers) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + l.w.size()), l.w.begin());
    off += l.w.size();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + l.b.size()), l.b.begin());
    off += l.b.size();
  }
}

std::vector<double> flatten(const Network& net, const Grads& grads) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (const auto& l : grads.layers) {
    flat.insert(flat.end(), l.dw.begin(), l.dw.end());
    flat.insert(flat.end(), l.db.begin(), l.db.end());
  }
  return flat;
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionError("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - zmax);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double log_softmax_at(std::span<const double> logits, int index) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  return logits[static_cast<size_t>(index)] - zmax - std::log(sum);
}

double softmax_xent(std::span<const double> logits, int label,
                    std::span<const double> class_weights, std::vector<double>& grad_out) {
  if (logits.size() < 2) throw DimensionError("softmax_xent: need at least 2 logits");
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw DimensionError("softmax_xent: label out of range");
  if (!class_weights.empty() && class_weights.size() != logits.size())
    throw DimensionError("softmax_xent: class weights size mismatch");
  const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<size_t>(label)];
  grad_out = softmax(logits);
  const double loss = -w * std::log(std::max(grad_out[static_cast<size_t>(label)], 1e-300));
  for (size_t i = 0; i < grad_out.size(); ++i) grad_out[i] *= w;
  grad_out[static_cast<size_t>(label)] -= w;
  return loss;
}

double clip_grad_norm(std::vector<double>& flat_grads, double max_norm) {
  double sq = 0.0;
  for (double g : flat_grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : flat_grads) g *= scale;
  }
  return norm;
}

}  // namespace trustgrid::nn
