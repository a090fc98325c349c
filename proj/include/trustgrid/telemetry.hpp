#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace trustgrid::telemetry {

// One per-turn metrics record. p_betray / true_betrayal are populated only
// by penalized training runs (has_penalty).
struct MetricRow {
  std::int64_t step = 0;  // global turn counter, strictly increasing per agent
  int agent = 0;
  double reward = 0.0;
  int betrayal = 0;            // any outgoing message betrayed
  int honesty = 0;             // incoming transmitted messages all honest
  int honesty_intended = 0;    // incoming intended messages all honest
  double hunger = 0.0;         // after the turn
  double distortion = 0.0;     // max-abs noise applied to outgoing messages
  bool has_penalty = false;
  double p_betray = 0.0;
  int true_betrayal = 0;
};

// y0 = x0; y_t = alpha*x_t + (1-alpha)*y_{t-1}. Requires 0 < alpha <= 1 and a
// nonempty series.
std::vector<double> ema(std::span<const double> series, double alpha);

struct WindowRow {
  int agent = 0;
  std::int64_t window_index = 0;
  std::int64_t start_step = 0;
  int rows = 0;
  double mean_reward = 0.0;
  double betrayal_rate = 0.0;
  double honesty_rate = 0.0;
  double honesty_intended_rate = 0.0;
  double mean_hunger = 0.0;
  double mean_distortion = 0.0;
};

// Per agent, consecutive non-overlapping windows of `window` rows (final
// partial window included, so the partition covers every row exactly once).
std::vector<WindowRow> windowed_rates(std::span<const MetricRow> rows, int window);

// curves.csv: one row per window with the raw series and their EMA-smoothed
// companions. Byte-deterministic for identical input.
void write_curves(std::span<const WindowRow> series, const std::string& path, double ema_alpha);
std::vector<WindowRow> read_curves(const std::string& path);

extern const char* const kCurvesHeader;

// Serializes metric rows in step order to metrics_raw.csv. The penalty
// columns are present only when constructed with with_penalty.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, bool with_penalty);
  void write(const MetricRow& row);
  void flush() { out_.flush(); }
  static std::string header(bool with_penalty);

 private:
  std::ofstream out_;
  bool with_penalty_;
  std::int64_t last_step_per_agent_[64];
};

std::vector<MetricRow> read_metrics(const std::string& path);

}  // namespace trustgrid::telemetry
