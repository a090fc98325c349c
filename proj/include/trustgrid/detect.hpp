#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trustgrid/agents.hpp"
#include "trustgrid/config.hpp"
#include "trustgrid/env.hpp"
#include "trustgrid/nn.hpp"

namespace trustgrid::detect {

inline constexpr int kFeatureCount = 33;
inline constexpr int kSchemaVersion = 1;

// Fixed behavioral feature schema for the N=2, L=5 configuration. Cell-level
// opponent-world occupancy is deliberately excluded: together with the sent
// message it would determine the label outright; only the aggregates (count,
// total reward) are kept.
extern const std::array<const char*, kFeatureCount> kFeatureNames;

std::string dataset_header();       // 33 names + "betrayal"
std::string dataset_header_hash();  // FNV-1a of the header line, hex

struct FeatureRow {
  std::array<double, kFeatureCount> values{};
  int label = 0;
  std::int64_t episode = 0;  // provenance only; not serialized to CSV
  int step = 0;
};

struct Provenance {
  std::string checkpoint_id;
  std::uint64_t seed = 0;
  std::int64_t episodes = 0;
  int schema_version = kSchemaVersion;
  std::string header_hash;
};

struct Dataset {
  std::vector<FeatureRow> rows;
  Provenance provenance;

  std::vector<int> labels() const;
  double positive_rate() const;
};

// Per-agent aggregates over the episode so far; updated with every turn
// record (both agents) in play order.
class RunningStats {
 public:
  explicit RunningStats(int n_agents = 2) { reset(n_agents); }
  void reset(int n_agents);
  void update(const TurnRecord& rec);

  struct AgentTotals {
    double hunger = 0.0;  // after the agent's latest turn
    double cumulative_reward = 0.0;
    double cumulative_hunger_gained = 0.0;
    int steps = 0;
    int successes = 0;
    int last_consume_step = 0;  // 1-based own-turn count; 0 = never
  };
  const AgentTotals& agent(int i) const { return totals_[static_cast<size_t>(i)]; }

 private:
  std::vector<AgentTotals> totals_;
};

// Builds the 33-feature row for a learner turn. `stats` must already include
// this turn's record. Requires the N=2, L=5 configuration.
FeatureRow extract_features(const TurnRecord& rec, const RunningStats& stats,
                            const GameConfig& cfg);

// Plays the sampled policy against the scripted truthful opponent for
// `episodes` episodes; one row per learner turn. Deterministic per seed.
Dataset collect_dataset(const PolicyParams& policy, const GameConfig& cfg, int episodes,
                        std::uint64_t seed);

struct DetectorHyper {
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch = 128;
  bool class_weighted = true;
  double val_fraction = 0.15;
  int patience = 10;
  std::uint64_t seed = 0;
};

// Trained classifier: feature standardizer (fit on its training data only)
// plus the class-logit network.
struct Detector {
  nn::Network net;
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct TrainDetectorResult {
  Detector detector;
  double val_macro_f1 = 0.0;
  int epochs_ran = 0;
};

// Class-weighted cross-entropy training with early stopping on held-out
// macro F1 (best-validation parameters returned). Throws when only one class
// is present.
TrainDetectorResult train_detector(const Dataset& data, const DetectorHyper& hyper);

struct MacroF1Result {
  double macro = 0.0;
  double per_class[2] = {0.0, 0.0};
  bool degenerate = false;  // some class absent from both predictions and labels
};

MacroF1Result macro_f1_detail(std::span<const int> predictions, std::span<const int> labels);
double macro_f1(std::span<const int> predictions, std::span<const int> labels);

struct KfoldResult {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation over folds
  std::vector<double> fold_scores;
  std::vector<DetectorHyper> fold_hypers;
};

std::vector<DetectorHyper> default_hyper_grid(const DetectorHyper& base);

// Stratified k-fold cross-validation with a per-fold grid search selected on
// an inner validation split of the training folds.
KfoldResult kfold_eval(const Dataset& data, int k, const std::vector<DetectorHyper>& grid,
                       std::uint64_t seed);

// Mean macro F1 of a predictor that samples labels from the empirical class
// prior, over `trials` resamples.
double baseline_eval(const Dataset& data, std::uint64_t seed, int trials = 100);

// Softmax probability of the betrayal class.
double predict_proba(const Detector& det, std::span<const double> features);

void write_dataset_csv(const Dataset& data, const std::string& csv_path,
                       const std::string& sidecar_path);
Dataset read_dataset_csv(const std::string& csv_path, const std::string& sidecar_path);

}  // namespace trustgrid::detect
