#include "trustgrid/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "trustgrid/csv.hpp"
#include "trustgrid/errors.hpp"

namespace trustgrid::detect {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "round_frac",                 // 1
    "turn_pos_frac",              // 2
    "own_hunger",                 // 3
    "opp_hunger",                 // 4
    "own_cum_reward",             // 5
    "opp_cum_reward",             // 6
    "step_reward",                // 7
    "consumed",                   // 8
    "own_cum_hunger",             // 9
    "opp_cum_hunger",             // 10
    "sent_m0", "sent_m1", "sent_m2", "sent_m3", "sent_m4",  // 11-15
    "sent_max",                   // 16
    "sent_l1",                    // 17
    "sent_entropy",               // 18
    "sent_argmax_frac",           // 19
    "recv_m0", "recv_m1", "recv_m2", "recv_m3", "recv_m4",  // 20-24
    "recv_max",                   // 25
    "recv_l1",                    // 26
    "recv_argmax_frac",           // 27
    "pool_frac",                  // 28
    "opp_food_frac",              // 29
    "opp_world_reward",           // 30
    "probe_success_rate",         // 31
    "steps_since_consume_frac",   // 32
    "reward_per_step",            // 33
};

std::string dataset_header() {
  std::string h;
  for (const char* name : kFeatureNames) {
    h += name;
    h += ',';
  }
  h += "betrayal";
  return h;
}

std::string dataset_header_hash() { return fnv1a64_hex(dataset_header()); }

std::vector<int> Dataset::labels() const {
  std::vector<int> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].label;
  return out;
}

double Dataset::positive_rate() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const FeatureRow& r : rows) s += r.label;
  return s / static_cast<double>(rows.size());
}

void RunningStats::reset(int n_agents) { totals_.assign(static_cast<size_t>(n_agents), AgentTotals{}); }

void RunningStats::update(const TurnRecord& rec) {
  AgentTotals& t = totals_[static_cast<size_t>(rec.agent)];
  t.hunger = rec.hunger_after;
  t.cumulative_reward += rec.reward_gained;
  if (rec.hunger_after > rec.hunger_before) t.cumulative_hunger_gained += rec.hunger_after - rec.hunger_before;
  t.steps += 1;
  if (rec.consumed) {
    t.successes += 1;
    t.last_consume_step = t.steps;
  }
}

namespace {

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
  return best;
}

// Entropy of the L1-normalized vector, natural log; 0 for an all-zero vector.
double message_entropy(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += std::abs(x);
  if (sum == 0.0) return 0.0;
  double h = 0.0;
  for (double x : v) {
    const double p = std::abs(x) / sum;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

FeatureRow extract_features(const TurnRecord& rec, const RunningStats& stats,
                            const GameConfig& cfg) {
  if (cfg.n_agents != 2 || cfg.grid_size != 5)
    throw ConfigError("feature schema requires n_agents=2 and grid_size=5; got n_agents=" +
                      std::to_string(cfg.n_agents) + " grid_size=" + std::to_string(cfg.grid_size));
  const int L = cfg.grid_size;
  const int opp = rec.agent == 0 ? 1 : 0;
  (void)opp;
  const auto& own = stats.agent(rec.agent);
  const auto& other = stats.agent(rec.agent == 0 ? 1 : 0);
  const std::vector<double>& sent = rec.intended_msgs.at(0);
  const std::vector<double>& recv = rec.inbox_transmitted.at(0);

  FeatureRow row;
  auto& f = row.values;
  f[0] = static_cast<double>(rec.round_index) / cfg.max_rounds;
  f[1] = static_cast<double>(rec.step_index % cfg.n_agents) / (cfg.n_agents - 1);
  f[2] = rec.hunger_before;
  f[3] = other.hunger;
  f[4] = own.cumulative_reward;
  f[5] = other.cumulative_reward;
  f[6] = rec.reward_gained;
  f[7] = rec.consumed ? 1.0 : 0.0;
  f[8] = own.cumulative_hunger_gained;
  f[9] = other.cumulative_hunger_gained;
  for (int c = 0; c < L; ++c) f[static_cast<size_t>(10 + c)] = sent[static_cast<size_t>(c)];
  f[15] = *std::max_element(sent.begin(), sent.end());
  double sent_l1 = 0.0;
  for (double v : sent) sent_l1 += std::abs(v);
  f[16] = sent_l1;
  f[17] = message_entropy(sent);
  f[18] = static_cast<double>(argmax_lowest(sent)) / (L - 1);
  for (int c = 0; c < L; ++c) f[static_cast<size_t>(19 + c)] = recv[static_cast<size_t>(c)];
  f[24] = *std::max_element(recv.begin(), recv.end());
  double recv_l1 = 0.0;
  for (double v : recv) recv_l1 += std::abs(v);
  f[25] = recv_l1;
  f[26] = static_cast<double>(argmax_lowest(recv)) / (L - 1);
  f[27] = static_cast<double>(rec.pool_remaining) / cfg.n_food;
  f[28] = static_cast<double>(rec.opp_food_count.at(0)) / cfg.n_food;
  f[29] = rec.opp_world_reward.at(0);
  f[30] = own.steps > 0 ? static_cast<double>(own.successes) / own.steps : 0.0;
  f[31] = static_cast<double>(own.steps - own.last_consume_step) / cfg.max_rounds;
  f[32] = own.steps > 0 ? own.cumulative_reward / own.steps : 0.0;
  for (double v : f)
    if (!std::isfinite(v)) throw NumericError("extract_features: non-finite feature");
  row.label = rec.betrayal_flags.at(0) ? 1 : 0;
  row.step = rec.step_index;
  return row;
}

Dataset collect_dataset(const PolicyParams& policy, const GameConfig& cfg, int episodes,
                        std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("collect_dataset: episodes must be >= 1");
  if (static_cast<int>(policy.net.input_dim()) != ObsLayout(cfg).size())
    throw ConfigError("collect_dataset: policy input width does not match the game configuration");
  Dataset data;
  data.provenance.seed = seed;
  data.provenance.episodes = episodes;
  data.provenance.header_hash = dataset_header_hash();
  Rng master(seed);
  const std::uint64_t episode_stream = master.split();
  const std::uint64_t sample_stream = master.split();
  Rng episode_rng(episode_stream);
  Rng sample_rng(sample_stream);
  const ObsLayout layout(cfg);
  std::set<std::pair<std::int64_t, int>> keys;

  for (int ep = 0; ep < episodes; ++ep) {
    GameState env = new_game(cfg, episode_rng.split());
    begin_round(env);
    RunningStats stats(cfg.n_agents);
    while (!env.terminated) {
      const int actor = env.current_actor();
      const std::vector<double> obs = observe(env, actor);
      TurnRecord rec;
      if (actor == 0) {
        const NeuralActResult res = neural_act(policy, obs, sample_rng, ActMode::Sample);
        rec = step_turn(env, actor, res.action);
      } else {
        rec = step_turn(env, actor, truthful_act(obs, layout));
      }
      stats.update(rec);
      if (actor == 0) {
        FeatureRow row = extract_features(rec, stats, cfg);
        row.episode = ep;
        if (!keys.insert({ep, row.step}).second)
          throw std::logic_error("collect_dataset: duplicate (episode, step) key");
        data.rows.push_back(row);
      }
    }
  }
  return data;
}

namespace {

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
};

// Stratified split preserving class ratios.
SplitIndices stratified_split(std::span<const int> labels, double val_fraction, Rng& rng) {
  std::vector<int> pos, neg;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i)
    (labels[static_cast<size_t>(i)] ? pos : neg).push_back(i);
  auto shuffle = [&rng](std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(rng.uniform_int(i + 1))]);
  };
  shuffle(pos);
  shuffle(neg);
  SplitIndices split;
  for (const std::vector<int>* cls : {&pos, &neg}) {
    const size_t n_val = static_cast<size_t>(std::round(val_fraction * static_cast<double>(cls->size())));
    for (size_t i = 0; i < cls->size(); ++i)
      (i < n_val ? split.val : split.train).push_back((*cls)[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

Detector fit_scaler_and_net(const Dataset& data, std::span<const int> train_idx,
                            const DetectorHyper& hyper) {
  Detector det;
  det.mean.assign(kFeatureCount, 0.0);
  det.stddev.assign(kFeatureCount, 0.0);
  for (int i : train_idx)
    for (int c = 0; c < kFeatureCount; ++c)
      det.mean[static_cast<size_t>(c)] += data.rows[static_cast<size_t>(i)].values[static_cast<size_t>(c)];
  for (double& m : det.mean) m /= static_cast<double>(train_idx.size());
  for (int i : train_idx)
    for (int c = 0; c < kFeatureCount; ++c) {
      const double d = data.rows[static_cast<size_t>(i)].values[static_cast<size_t>(c)] -
                       det.mean[static_cast<size_t>(c)];
      det.stddev[static_cast<size_t>(c)] += d * d;
    }
  for (double& s : det.stddev) {
    s = std::sqrt(s / static_cast<double>(train_idx.size()));
    if (s < 1e-12) s = 1.0;
  }
  std::vector<int> dims;
  dims.push_back(kFeatureCount);
  dims.insert(dims.end(), hyper.hidden.begin(), hyper.hidden.end());
  dims.push_back(2);
  det.net = nn::init_network(dims, nn::Activation::Relu, hyper.seed ^ 0x5ca1ab1eULL,
                             {{"class", 0, 2}});
  return det;
}

std::vector<double> scale_row(const Detector& det, const FeatureRow& row) {
  std::vector<double> x(kFeatureCount);
  for (int c = 0; c < kFeatureCount; ++c)
    x[static_cast<size_t>(c)] = (row.values[static_cast<size_t>(c)] - det.mean[static_cast<size_t>(c)]) /
                                det.stddev[static_cast<size_t>(c)];
  return x;
}

int predict_class(const Detector& det, const FeatureRow& row) {
  const std::vector<double> out = nn::forward(det.net, scale_row(det, row));
  return out[1] > out[0] ? 1 : 0;
}

double eval_macro_f1(const Detector& det, const Dataset& data, std::span<const int> idx) {
  std::vector<int> preds, labels;
  preds.reserve(idx.size());
  labels.reserve(idx.size());
  for (int i : idx) {
    preds.push_back(predict_class(det, data.rows[static_cast<size_t>(i)]));
    labels.push_back(data.rows[static_cast<size_t>(i)].label);
  }
  return macro_f1(preds, labels);
}

}  // namespace

TrainDetectorResult train_detector(const Dataset& data, const DetectorHyper& hyper) {
  if (data.rows.size() < 4) throw ConfigError("train_detector: dataset too small");
  int n_pos = 0;
  for (const FeatureRow& r : data.rows) n_pos += r.label;
  const int n_neg = static_cast<int>(data.rows.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ConfigError("train_detector: dataset contains a single class; collect more data");

  Rng rng(hyper.seed);
  const std::vector<int> labels = data.labels();
  const SplitIndices split = stratified_split(labels, hyper.val_fraction, rng);
  if (split.val.empty() || split.train.empty())
    throw ConfigError("train_detector: validation split is empty");

  Detector det = fit_scaler_and_net(data, split.train, hyper);
  // Inverse-frequency class weights over the training split.
  double w[2] = {1.0, 1.0};
  if (hyper.class_weighted) {
    int tp = 0;
    for (int i : split.train) tp += data.rows[static_cast<size_t>(i)].label;
    const int tn = static_cast<int>(split.train.size()) - tp;
    if (tp == 0 || tn == 0)
      throw ConfigError("train_detector: training split contains a single class");
    w[0] = static_cast<double>(split.train.size()) / (2.0 * tn);
    w[1] = static_cast<double>(split.train.size()) / (2.0 * tp);
  }
  const std::vector<double> weights(w, w + 2);

  std::vector<double> flat = nn::flatten(det.net);
  nn::AdamState adam(flat.size(), hyper.learning_rate);
  std::vector<int> order(split.train.begin(), split.train.end());

  double best_f1 = -1.0;
  std::vector<double> best_flat = flat;
  int best_epoch = 0;
  int epochs_ran = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    epochs_ran = epoch + 1;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(i + 1))]);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(hyper.batch)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(hyper.batch));
      nn::Grads grads = nn::zero_grads(det.net);
      for (size_t bi = start; bi < end; ++bi) {
        const FeatureRow& row = data.rows[static_cast<size_t>(order[bi])];
        const nn::ForwardCache cache = nn::forward_cached(det.net, scale_row(det, row));
        std::vector<double> dlogits;
        nn::softmax_xent(cache.output, row.label, weights, dlogits);
        for (double& g : dlogits) g /= static_cast<double>(end - start);
        nn::backward(det.net, cache, dlogits, grads);
      }
      std::vector<double> flat_grads = nn::flatten(det.net, grads);
      nn::adam_step(flat, flat_grads, adam);
      nn::load_flat(det.net, flat);
    }
    const double val_f1 = eval_macro_f1(det, data, split.val);
    if (val_f1 > best_f1) {
      best_f1 = val_f1;
      best_flat = flat;
      best_epoch = epoch;
    } else if (epoch - best_epoch >= hyper.patience) {
      break;
    }
  }
  nn::load_flat(det.net, best_flat);
  TrainDetectorResult result;
  result.detector = std::move(det);
  result.val_macro_f1 = best_f1;
  result.epochs_ran = epochs_ran;
  return result;
}

MacroF1Result macro_f1_detail(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("macro_f1: length mismatch");
  if (predictions.empty()) throw DimensionError("macro_f1: empty input");
  // Confusion counts per class.
  std::int64_t tp[2] = {0, 0}, fp[2] = {0, 0}, fn[2] = {0, 0};
  std::int64_t present[2] = {0, 0};
  for (size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if (y != 0 && y != 1) throw DimensionError("macro_f1: labels must be 0/1");
    if (p != 0 && p != 1) throw DimensionError("macro_f1: predictions must be 0/1");
    present[y] += 1;
    if (p == y) {
      tp[y] += 1;
    } else {
      fp[p] += 1;
      fn[y] += 1;
    }
  }
  MacroF1Result res;
  for (int c = 0; c < 2; ++c) {
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    res.per_class[c] = denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    if (present[c] == 0 && tp[c] + fp[c] == 0) res.degenerate = true;
  }
  res.macro = 0.5 * (res.per_class[0] + res.per_class[1]);
  return res;
}

double macro_f1(std::span<const int> predictions, std::span<const int> labels) {
  return macro_f1_detail(predictions, labels).macro;
}

std::vector<DetectorHyper> default_hyper_grid(const DetectorHyper& base) {
  std::vector<DetectorHyper> grid;
  for (int width : {32, 64})
    for (double lr : {1e-3, 3e-4}) {
      DetectorHyper h = base;
      h.hidden = {width, width};
      h.learning_rate = lr;
      grid.push_back(h);
    }
  return grid;
}

KfoldResult kfold_eval(const Dataset& data, int k, const std::vector<DetectorHyper>& grid,
                       std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_eval: k must be >= 2");
  if (grid.empty()) throw ConfigError("kfold_eval: empty hyperparameter grid");
  std::vector<int> pos, neg;
  for (int i = 0; i < static_cast<int>(data.rows.size()); ++i)
    (data.rows[static_cast<size_t>(i)].label ? pos : neg).push_back(i);
  if (static_cast<int>(pos.size()) < k || static_cast<int>(neg.size()) < k)
    throw ConfigError("kfold_eval: a class is too small to stratify into " + std::to_string(k) +
                      " folds");
  Rng rng(seed);
  auto shuffle = [&rng](std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(rng.uniform_int(i + 1))]);
  };
  shuffle(pos);
  shuffle(neg);
  std::vector<std::vector<int>> folds(static_cast<size_t>(k));
  for (size_t i = 0; i < pos.size(); ++i) folds[i % static_cast<size_t>(k)].push_back(pos[i]);
  for (size_t i = 0; i < neg.size(); ++i) folds[i % static_cast<size_t>(k)].push_back(neg[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());

  KfoldResult result;
  for (int f = 0; f < k; ++f) {
    std::vector<int> train_idx;
    for (int g = 0; g < k; ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[static_cast<size_t>(g)].begin(),
                                   folds[static_cast<size_t>(g)].end());
    Dataset train_data;
    train_data.provenance = data.provenance;
    train_data.rows.reserve(train_idx.size());
    for (int i : train_idx) train_data.rows.push_back(data.rows[static_cast<size_t>(i)]);

    double best_val = -1.0;
    Detector best_det;
    DetectorHyper best_hyper = grid.front();
    for (size_t g = 0; g < grid.size(); ++g) {
      DetectorHyper h = grid[g];
      h.seed = seed ^ (static_cast<std::uint64_t>(f) << 32) ^ static_cast<std::uint64_t>(g);
      const TrainDetectorResult tr = train_detector(train_data, h);
      if (tr.val_macro_f1 > best_val) {
        best_val = tr.val_macro_f1;
        best_det = tr.detector;
        best_hyper = h;
      }
    }
    result.fold_scores.push_back(eval_macro_f1(best_det, data, folds[static_cast<size_t>(f)]));
    result.fold_hypers.push_back(best_hyper);
  }
  double mean = 0.0;
  for (double s : result.fold_scores) mean += s;
  mean /= static_cast<double>(result.fold_scores.size());
  double var = 0.0;
  for (double s : result.fold_scores) var += (s - mean) * (s - mean);
  result.mean = mean;
  result.stdev = result.fold_scores.size() > 1
                     ? std::sqrt(var / static_cast<double>(result.fold_scores.size() - 1))
                     : 0.0;
  return result;
}

double baseline_eval(const Dataset& data, std::uint64_t seed, int trials) {
  if (data.rows.empty()) throw DimensionError("baseline_eval: empty dataset");
  const double p1 = data.positive_rate();
  const std::vector<int> labels = data.labels();
  Rng rng(seed);
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<int> preds(labels.size());
    for (int& p : preds) p = rng.uniform01() < p1 ? 1 : 0;
    total += macro_f1(preds, labels);
  }
  return total / trials;
}

double predict_proba(const Detector& det, std::span<const double> features) {
  if (static_cast<int>(features.size()) != kFeatureCount)
    throw DimensionError("predict_proba: expected " + std::to_string(kFeatureCount) +
                         " features, got " + std::to_string(features.size()));
  std::vector<double> x(static_cast<size_t>(kFeatureCount));
  for (int c = 0; c < kFeatureCount; ++c)
    x[static_cast<size_t>(c)] =
        (features[static_cast<size_t>(c)] - det.mean[static_cast<size_t>(c)]) /
        det.stddev[static_cast<size_t>(c)];
  const std::vector<double> out = nn::forward(det.net, x);
  const std::vector<double> p = nn::softmax(out);
  return p[1];
}

void write_dataset_csv(const Dataset& data, const std::string& csv_path,
                       const std::string& sidecar_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + csv_path);
  out << dataset_header() << "\n";
  for (const FeatureRow& row : data.rows) {
    for (double v : row.values) out << format_double(v) << ',';
    out << format_int(row.label) << "\n";
  }
  out.close();

  std::ofstream side(sidecar_path);
  if (!side) throw std::runtime_error("write_dataset_csv: cannot open " + sidecar_path);
  side << "{\n"
       << "  \"checkpoint_id\": \"" << data.provenance.checkpoint_id << "\",\n"
       << "  \"seed\": " << format_int(static_cast<std::int64_t>(data.provenance.seed)) << ",\n"
       << "  \"episodes\": " << format_int(data.provenance.episodes) << ",\n"
       << "  \"rows\": " << format_int(static_cast<std::int64_t>(data.rows.size())) << ",\n"
       << "  \"schema_version\": " << data.provenance.schema_version << ",\n"
       << "  \"header_hash\": \"" << dataset_header_hash() << "\"\n"
       << "}\n";
}

Dataset read_dataset_csv(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("read_dataset_csv: empty file");
  if (line != dataset_header())
    throw SchemaError("read_dataset_csv: header does not match schema version " +
                      std::to_string(kSchemaVersion));
  Dataset data;
  data.provenance.header_hash = dataset_header_hash();
  std::int64_t row_idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != kFeatureCount + 1) throw SchemaError("read_dataset_csv: bad field count");
    FeatureRow row;
    for (int c = 0; c < kFeatureCount; ++c)
      row.values[static_cast<size_t>(c)] = parse_double(f[static_cast<size_t>(c)]);
    row.label = static_cast<int>(parse_double(f[kFeatureCount]));
    row.episode = row_idx++;
    data.rows.push_back(row);
  }
  if (!sidecar_path.empty()) {
    std::ifstream side(sidecar_path);
    if (side) {
      std::string text((std::istreambuf_iterator<char>(side)), std::istreambuf_iterator<char>());
      const std::string key = "\"header_hash\": \"";
      const auto pos = text.find(key);
      if (pos != std::string::npos) {
        const std::string hash = text.substr(pos + key.size(), 16);
        if (hash != dataset_header_hash())
          throw SchemaError("read_dataset_csv: sidecar header hash " + hash +
                            " does not match schema hash " + dataset_header_hash());
      }
    }
  }
  return data;
}

}  // namespace trustgrid::detect
