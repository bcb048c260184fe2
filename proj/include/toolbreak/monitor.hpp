#ifndef TOOLBREAK_MONITOR_HPP
#define TOOLBREAK_MONITOR_HPP

// Streaming breakage monitor: raw current rows in, one verdict per completed
// machining minute out. Per-second mean_abs values are accumulated exactly as
// extract_features computes them, so a replayed trace scores the same as the
// offline samples built from it.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolbreak/checkpoint.hpp"
#include "toolbreak/error.hpp"
#include "toolbreak/signal_io.hpp"
#include "toolbreak/train_eval.hpp"

namespace toolbreak {

struct MonitorEvent {
  std::size_t window_index = 0;
  int verdict = 0;
  double score = 0.0;
};

inline std::string_view verdict_name(int v) { return v ? "breakage" : "normal"; }

inline std::string event_json(const MonitorEvent& e) {
  nlohmann::ordered_json j;
  j["window_index"] = e.window_index;
  j["verdict"] = verdict_name(e.verdict);
  j["score"] = e.score;
  return j.dump();
}

inline std::string alarm_line(const std::string& tool_id, const MonitorEvent& e) {
  std::ostringstream s;
  s << "ALARM tool=" << tool_id << " window=" << e.window_index << " score=" << std::fixed << std::setprecision(4)
    << e.score;
  return s.str();
}

class BreakageMonitor {
 public:
  explicit BreakageMonitor(const Checkpoint& c)
      : scorer_(c), expected_rate_(c.metadata.sample_rate_hz), mode_(parse_sample_mode(c.metadata.sample_mode)) {
    if (c.spec.input_channels != 1) throw ConfigError("monitor needs a single-channel model");
  }

  /// Must be called once, before the first sample.
  void begin(std::uint32_t sample_rate_hz, std::vector<Segment> segments) {
    if (sample_rate_hz != expected_rate_)
      throw ConfigError("stream cadence " + std::to_string(sample_rate_hz) + " Hz does not match the checkpoint's " +
                        std::to_string(expected_rate_) + " Hz");
    rate_ = sample_rate_hz;
    segments_ = std::move(segments);
    started_ = true;
  }

  /// Feeds raw sample number `index`. Returns an event when it closes a minute.
  std::optional<MonitorEvent> push(std::uint64_t index, float value) {
    if (!started_) throw ConfigError("monitor received samples before the stream header");
    while (segment_ < segments_.size() && segments_[segment_].end <= index) ++segment_;
    if (segment_ < segments_.size() && segments_[segment_].start <= index &&
        segments_[segment_].kind != SegmentKind::machining)
      return std::nullopt;
    second_acc_ += std::abs(static_cast<double>(value));
    if (++second_fill_ < rate_) return std::nullopt;
    seconds_.push_back(second_acc_ / static_cast<double>(rate_));
    second_acc_ = 0.0;
    second_fill_ = 0;
    if (seconds_.size() % 60 != 0) return std::nullopt;
    return close_minute();
  }

  std::size_t seconds_seen() const noexcept { return seconds_.size(); }

 private:
  MonitorEvent close_minute() {
    const std::size_t m = seconds_.size() / 60 - 1;
    const std::size_t length = scorer_.spec().input_length;
    const std::size_t end = seconds_.size();
    if (mode_ == SampleMode::prefix && end > length)
      throw ConfigError("minute " + std::to_string(m) + " exceeds the model's input_length " + std::to_string(length) +
                        " in prefix mode");
    const std::size_t begin = end > length ? end - length : 0;
    LabeledSample s;
    s.features.assign(length, 0.0);
    s.valid_length = end - begin;
    for (std::size_t i = begin; i < end; ++i) s.features[i - begin] = seconds_[i];
    s.window_time = m;
    const double p = scorer_.score(s);
    return {m, verdict(p), p};
  }

  Scorer scorer_;
  std::uint32_t expected_rate_;
  SampleMode mode_;
  std::uint32_t rate_ = 0;
  std::vector<Segment> segments_;
  std::size_t segment_ = 0;
  bool started_ = false;
  double second_acc_ = 0.0;
  std::uint32_t second_fill_ = 0;
  std::vector<double> seconds_;
};

struct MonitorSummary {
  std::vector<MonitorEvent> events;
  std::size_t alarms = 0;
  /// Seconds from reading the row that closed a window to emitting its event.
  std::vector<double> latencies;
};

struct MonitorSinks {
  std::ostream* events = nullptr;
  std::ostream* alarms = nullptr;
  /// Receives {"window_index", "latency_s"} records; wall-clock, so kept apart
  /// from the deterministic event stream.
  std::ostream* timing = nullptr;
};

/// Single consumer: each row is read only after the previous one is fully
/// processed, so nothing is dropped and a slow model stalls the reader.
inline MonitorSummary run_monitor(const Checkpoint& checkpoint, std::istream& in, const MonitorSinks& sinks,
                                  std::string tool_id = {}) {
  BreakageMonitor monitor(checkpoint);
  CsvTraceParser parser;
  MonitorSummary summary;
  std::string line;
  float value = 0.0F;
  bool begun = false;
  int previous = 0;
  while (std::getline(in, line)) {
    if (parser.feed(line, value) != CsvTraceParser::LineKind::sample) continue;
    const auto read_at = std::chrono::steady_clock::now();
    if (!begun) {
      monitor.begin(*parser.sample_rate_hz(), parser.segments());
      if (tool_id.empty()) tool_id = parser.tool_id().empty() ? "unknown" : parser.tool_id();
      begun = true;
    }
    auto event = monitor.push(parser.samples_seen() - 1, value);
    if (!event) continue;
    if (sinks.events) *sinks.events << event_json(*event) << "\n" << std::flush;
    if (event->verdict == 1 && previous == 0) {
      ++summary.alarms;
      if (sinks.alarms) *sinks.alarms << alarm_line(tool_id, *event) << "\n" << std::flush;
    }
    previous = event->verdict;
    const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - read_at).count();
    summary.latencies.push_back(latency);
    if (sinks.timing) {
      nlohmann::ordered_json j;
      j["window_index"] = event->window_index;
      j["latency_s"] = latency;
      *sinks.timing << j.dump() << "\n";
    }
    summary.events.push_back(*event);
  }
  if (!parser.sample_rate_hz()) throw FormatError("missing sample_rate_hz header", parser.line(), FormatError::Unit::line);
  return summary;
}

}  // namespace toolbreak

#endif
