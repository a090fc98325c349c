#pragma once

#include <string>

#include "trustgrid/detect.hpp"
#include "trustgrid/ppo.hpp"

namespace trustgrid::penalty {

struct PenaltyConfig {
  double beta = 0.5;
  std::string detector_path;
  std::string apply_mode = "reward_level";

  void validate() const;
};

// raw - beta * p. Requires p in [0, 1] and beta >= 0.
double shaped_reward(double raw_reward, double p_betray, double beta);

// RewardHook backed by a frozen detector: maintains running stats over the
// episode, scores each learner turn's feature row, and subtracts
// beta * p_betray from the raw reward.
class DetectorPenaltyHook : public ppo::RewardHook {
 public:
  DetectorPenaltyHook(const detect::Detector& detector, double beta, const GameConfig& cfg);

  void on_episode_start() override;
  void observe_turn(const TurnRecord& rec) override;
  double shape(const TurnRecord& rec, double raw_reward, double* p_betray) override;

 private:
  const detect::Detector& detector_;
  double beta_;
  GameConfig cfg_;
  detect::RunningStats stats_;
};

// Identical to ppo::train except each learner step's reward is shaped by the
// frozen detector's betrayal probability; metric rows carry the paired
// (p_betray, true_betrayal) columns. beta = 0 reproduces the unpenalized
// trainer bit-exactly under identical seeds.
ppo::TrainResult penalized_train(const ppo::PpoConfig& pcfg, const GameConfig& gcfg,
                                 const PenaltyConfig& penalty, const detect::Detector& detector,
                                 ppo::MetricsSink* sink,
                                 const std::string& abort_checkpoint_path = {});

}  // namespace trustgrid::penalty
