#include "trustgrid/telemetry.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "trustgrid/csv.hpp"
#include "trustgrid/errors.hpp"

namespace trustgrid::telemetry {

std::vector<double> ema(std::span<const double> series, double alpha) {
  if (series.empty()) throw DimensionError("ema: empty series");
  if (!(alpha > 0.0) || alpha > 1.0) throw ConfigError("ema: alpha must be in (0, 1]");
  std::vector<double> out(series.size());
  out[0] = series[0];
  for (size_t t = 1; t < series.size(); ++t)
    out[t] = alpha * series[t] + (1.0 - alpha) * out[t - 1];
  return out;
}

std::vector<WindowRow> windowed_rates(std::span<const MetricRow> rows, int window) {
  if (window < 1) throw ConfigError("windowed_rates: window must be >= 1");
  std::map<int, std::vector<const MetricRow*>> per_agent;
  for (const MetricRow& r : rows) per_agent[r.agent].push_back(&r);
  std::vector<WindowRow> out;
  for (auto& [agent, list] : per_agent) {
    std::int64_t widx = 0;
    for (size_t start = 0; start < list.size(); start += static_cast<size_t>(window), ++widx) {
      const size_t end = std::min(list.size(), start + static_cast<size_t>(window));
      WindowRow w;
      w.agent = agent;
      w.window_index = widx;
      w.start_step = list[start]->step;
      w.rows = static_cast<int>(end - start);
      for (size_t i = start; i < end; ++i) {
        w.mean_reward += list[i]->reward;
        w.betrayal_rate += list[i]->betrayal;
        w.honesty_rate += list[i]->honesty;
        w.honesty_intended_rate += list[i]->honesty_intended;
        w.mean_hunger += list[i]->hunger;
        w.mean_distortion += list[i]->distortion;
      }
      const double n = static_cast<double>(w.rows);
      w.mean_reward /= n;
      w.betrayal_rate /= n;
      w.honesty_rate /= n;
      w.honesty_intended_rate /= n;
      w.mean_hunger /= n;
      w.mean_distortion /= n;
      out.push_back(w);
    }
  }
  return out;
}

const char* const kCurvesHeader =
    "agent,window,start_step,rows,"
    "reward_mean,reward_mean_ema,"
    "betrayal_rate,betrayal_rate_ema,"
    "honesty_transmitted_rate,honesty_transmitted_rate_ema,"
    "honesty_intended_rate,honesty_intended_rate_ema,"
    "hunger_mean,hunger_mean_ema,"
    "distortion_mean,distortion_mean_ema";

void write_curves(std::span<const WindowRow> series, const std::string& path, double ema_alpha) {
  if (series.empty()) throw DimensionError("write_curves: empty series");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_curves: cannot open " + path);
  out << kCurvesHeader << "\n";

  std::map<int, std::vector<const WindowRow*>> per_agent;
  for (const WindowRow& w : series) per_agent[w.agent].push_back(&w);
  for (auto& [agent, list] : per_agent) {
    auto series_of = [&](auto member) {
      std::vector<double> v(list.size());
      for (size_t i = 0; i < list.size(); ++i) v[i] = list[i]->*member;
      return v;
    };
    const std::vector<double> raw[6] = {
        series_of(&WindowRow::mean_reward),     series_of(&WindowRow::betrayal_rate),
        series_of(&WindowRow::honesty_rate),    series_of(&WindowRow::honesty_intended_rate),
        series_of(&WindowRow::mean_hunger),     series_of(&WindowRow::mean_distortion)};
    std::vector<double> smooth[6];
    for (int m = 0; m < 6; ++m) smooth[m] = ema(raw[m], ema_alpha);
    for (size_t i = 0; i < list.size(); ++i) {
      out << format_int(agent) << ',' << format_int(list[i]->window_index) << ','
          << format_int(list[i]->start_step) << ',' << format_int(list[i]->rows);
      for (int m = 0; m < 6; ++m)
        out << ',' << format_double(raw[m][i]) << ',' << format_double(smooth[m][i]);
      out << "\n";
    }
  }
}

std::vector<WindowRow> read_curves(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_curves: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCurvesHeader)
    throw SchemaError("read_curves: unexpected header");
  std::vector<WindowRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 16) throw SchemaError("read_curves: bad field count");
    WindowRow w;
    w.agent = static_cast<int>(parse_double(f[0]));
    w.window_index = static_cast<std::int64_t>(parse_double(f[1]));
    w.start_step = static_cast<std::int64_t>(parse_double(f[2]));
    w.rows = static_cast<int>(parse_double(f[3]));
    w.mean_reward = parse_double(f[4]);
    w.betrayal_rate = parse_double(f[6]);
    w.honesty_rate = parse_double(f[8]);
    w.honesty_intended_rate = parse_double(f[10]);
    w.mean_hunger = parse_double(f[12]);
    w.mean_distortion = parse_double(f[14]);
    out.push_back(w);
  }
  return out;
}

std::string MetricsWriter::header(bool with_penalty) {
  std::string h =
      "step,agent,reward,betrayal,honesty_transmitted,honesty_intended,hunger,distortion";
  if (with_penalty) h += ",p_betray,true_betrayal";
  return h;
}

MetricsWriter::MetricsWriter(const std::string& path, bool with_penalty)
    : out_(path), with_penalty_(with_penalty) {
  if (!out_) throw std::runtime_error("MetricsWriter: cannot open " + path);
  for (auto& s : last_step_per_agent_) s = -1;
  out_ << header(with_penalty) << "\n";
}

void MetricsWriter::write(const MetricRow& row) {
  if (row.agent >= 0 && row.agent < 64) {
    if (row.step <= last_step_per_agent_[row.agent])
      throw std::logic_error("MetricsWriter: steps must strictly increase per agent");
    last_step_per_agent_[row.agent] = row.step;
  }
  out_ << format_int(row.step) << ',' << format_int(row.agent) << ',' << format_double(row.reward)
       << ',' << format_int(row.betrayal) << ',' << format_int(row.honesty) << ','
       << format_int(row.honesty_intended) << ',' << format_double(row.hunger) << ','
       << format_double(row.distortion);
  if (with_penalty_)
    out_ << ',' << format_double(row.p_betray) << ',' << format_int(row.true_betrayal);
  out_ << "\n";
}

std::vector<MetricRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_metrics: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("read_metrics: empty file");
  const bool with_penalty = line == MetricsWriter::header(true);
  if (!with_penalty && line != MetricsWriter::header(false))
    throw SchemaError("read_metrics: unexpected header");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != (with_penalty ? 10u : 8u)) throw SchemaError("read_metrics: bad field count");
    MetricRow r;
    r.step = static_cast<std::int64_t>(parse_double(f[0]));
    r.agent = static_cast<int>(parse_double(f[1]));
    r.reward = parse_double(f[2]);
    r.betrayal = static_cast<int>(parse_double(f[3]));
    r.honesty = static_cast<int>(parse_double(f[4]));
    r.honesty_intended = static_cast<int>(parse_double(f[5]));
    r.hunger = parse_double(f[6]);
    r.distortion = parse_double(f[7]);
    if (with_penalty) {
      r.has_penalty = true;
      r.p_betray = parse_double(f[8]);
      r.true_betrayal = static_cast<int>(parse_double(f[9]));
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace trustgrid::telemetry
