#include "trustgrid/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "trustgrid/csv.hpp"
#include "trustgrid/detect.hpp"
#include "trustgrid/errors.hpp"

namespace trustgrid {

namespace {

std::string hexfloat(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

double parse_hexfloat(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw SchemaError("checkpoint: cannot parse value '" + s + "'");
  return v;
}

void write_network(std::ostream& out, const nn::Network& net) {
  out << "layers " << net.layers.size() << "\n";
  for (const nn::Layer& l : net.layers)
    out << "layer " << l.in << " " << l.out << " " << nn::activation_name(l.act) << "\n";
  out << "heads " << net.heads.size() << "\n";
  for (const nn::Head& h : net.heads) out << "head " << h.name << " " << h.offset << " " << h.len << "\n";
}

void write_params(std::ostream& out, const nn::Network& net) {
  const std::vector<double> flat = nn::flatten(net);
  out << "params " << flat.size() << "\n";
  for (size_t i = 0; i < flat.size(); ++i) {
    out << hexfloat(flat[i]);
    out << (((i + 1) % 8 == 0 || i + 1 == flat.size()) ? "\n" : " ");
  }
  out << "end\n";
}

struct Parser {
  std::ifstream in;
  explicit Parser(const std::string& path) : in(path) {
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  }
  std::string token() {
    std::string t;
    if (!(in >> t)) throw SchemaError("checkpoint: truncated file");
    return t;
  }
  void expect(const std::string& want) {
    const std::string t = token();
    if (t != want) throw SchemaError("checkpoint: expected '" + want + "', found '" + t + "'");
  }
  int integer() {
    const std::string t = token();
    try {
      return std::stoi(t);
    } catch (...) {
      throw SchemaError("checkpoint: expected integer, found '" + t + "'");
    }
  }
};

void check_version(Parser& p) {
  p.expect("trustgrid-checkpoint");
  const std::string v = p.token();
  const std::string want = "v" + std::to_string(kCheckpointVersion);
  if (v != want)
    throw SchemaError("checkpoint: file version " + v + " not supported by reader version " + want);
}

nn::Network read_network(Parser& p) {
  nn::Network net;
  p.expect("layers");
  const int n_layers = p.integer();
  for (int l = 0; l < n_layers; ++l) {
    p.expect("layer");
    nn::Layer layer;
    layer.in = p.integer();
    layer.out = p.integer();
    layer.act = nn::activation_from_string(p.token());
    layer.w.assign(static_cast<size_t>(layer.in) * static_cast<size_t>(layer.out), 0.0);
    layer.b.assign(static_cast<size_t>(layer.out), 0.0);
    net.layers.push_back(std::move(layer));
  }
  p.expect("heads");
  const int n_heads = p.integer();
  for (int h = 0; h < n_heads; ++h) {
    p.expect("head");
    nn::Head head;
    head.name = p.token();
    head.offset = p.integer();
    head.len = p.integer();
    net.heads.push_back(std::move(head));
  }
  return net;
}

void read_params(Parser& p, nn::Network& net) {
  p.expect("params");
  const int count = p.integer();
  if (static_cast<size_t>(count) != net.param_count())
    throw SchemaError("checkpoint: parameter count mismatch");
  std::vector<double> flat(static_cast<size_t>(count));
  for (double& v : flat) v = parse_hexfloat(p.token());
  p.expect("end");
  nn::load_flat(net, flat);
}

}  // namespace

void save_policy(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << "trustgrid-checkpoint v" << kCheckpointVersion << "\n";
  out << "kind policy\n";
  write_network(out, params.net);
  out << "log_std " << hexfloat(params.message_log_std) << "\n";
  write_params(out, params.net);
}

PolicyParams load_policy(const std::string& path) {
  Parser p(path);
  check_version(p);
  p.expect("kind");
  const std::string kind = p.token();
  if (kind != "policy") throw SchemaError("checkpoint: expected kind policy, found " + kind);
  PolicyParams params;
  params.net = read_network(p);
  p.expect("log_std");
  params.message_log_std = parse_hexfloat(p.token());
  read_params(p, params.net);
  return params;
}

void save_detector(const detect::Detector& det, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_detector: cannot open " + path);
  out << "trustgrid-checkpoint v" << kCheckpointVersion << "\n";
  out << "kind classifier\n";
  write_network(out, det.net);
  out << "scaler " << det.mean.size() << "\n";
  for (size_t i = 0; i < det.mean.size(); ++i)
    out << hexfloat(det.mean[i]) << (i + 1 == det.mean.size() ? "\n" : " ");
  for (size_t i = 0; i < det.stddev.size(); ++i)
    out << hexfloat(det.stddev[i]) << (i + 1 == det.stddev.size() ? "\n" : " ");
  write_params(out, det.net);
}

detect::Detector load_detector(const std::string& path) {
  Parser p(path);
  check_version(p);
  p.expect("kind");
  const std::string kind = p.token();
  if (kind != "classifier") throw SchemaError("checkpoint: expected kind classifier, found " + kind);
  detect::Detector det;
  det.net = read_network(p);
  p.expect("scaler");
  const int dim = p.integer();
  det.mean.resize(static_cast<size_t>(dim));
  det.stddev.resize(static_cast<size_t>(dim));
  for (double& v : det.mean) v = parse_hexfloat(p.token());
  for (double& v : det.stddev) v = parse_hexfloat(p.token());
  read_params(p, det.net);
  return det;
}

std::string checkpoint_id(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint_id: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64_hex(data);
}

}  // namespace trustgrid
