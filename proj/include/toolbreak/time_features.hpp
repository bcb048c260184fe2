#ifndef TOOLBREAK_TIME_FEATURES_HPP
#define TOOLBREAK_TIME_FEATURES_HPP

// Time-domain window statistics and zero-mean normalization.
//
// All statistics are population (1/N) statistics. `variance` is taken about
// the plain arithmetic mean, not about the mean of |x|.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolbreak/error.hpp"
#include "toolbreak/signal_io.hpp"

namespace toolbreak {

template <typename R>
concept RealRange = std::ranges::contiguous_range<R> && std::floating_point<std::ranges::range_value_t<R>>;

namespace detail {
template <RealRange R>
void require_non_empty(const R& xs, const char* op) {
  if (std::ranges::empty(xs)) throw DomainError(std::string(op) + ": empty input");
}
}  // namespace detail

/// (1/N) sum |x_i|
template <RealRange R>
double mean_abs(const R& xs) {
  detail::require_non_empty(xs, "mean_abs");
  double acc = 0.0;
  for (auto x : xs) acc += std::abs(static_cast<double>(x));
  return acc / static_cast<double>(std::ranges::size(xs));
}

/// (1/N) sum x_i^2. No square root; see rms().
template <RealRange R>
double mean_square(const R& xs) {
  detail::require_non_empty(xs, "mean_square");
  double acc = 0.0;
  for (auto x : xs) acc += static_cast<double>(x) * static_cast<double>(x);
  return acc / static_cast<double>(std::ranges::size(xs));
}

template <RealRange R>
double rms(const R& xs) {
  return std::sqrt(mean_square(xs));
}

template <RealRange R>
double arithmetic_mean(const R& xs) {
  detail::require_non_empty(xs, "mean");
  double acc = 0.0;
  for (auto x : xs) acc += static_cast<double>(x);
  return acc / static_cast<double>(std::ranges::size(xs));
}

/// Two-pass population variance.
template <RealRange R>
double variance(const R& xs) {
  const double mu = arithmetic_mean(xs);
  double acc = 0.0;
  for (auto x : xs) {
    const double d = static_cast<double>(x) - mu;
    acc += d * d;
  }
  return acc / static_cast<double>(std::ranges::size(xs));
}

template <RealRange R>
double peak_to_peak(const R& xs) {
  detail::require_non_empty(xs, "peak_to_peak");
  auto [lo, hi] = std::ranges::minmax_element(xs);
  return static_cast<double>(*hi) - static_cast<double>(*lo);
}

struct FeatureVector {
  double mean_abs = 0.0;
  double mean_square = 0.0;
  double variance = 0.0;
  double peak_to_peak = 0.0;

  bool operator==(const FeatureVector&) const = default;
};

template <RealRange R>
FeatureVector window_features(const R& xs) {
  return FeatureVector{mean_abs(xs), mean_square(xs), variance(xs), peak_to_peak(xs)};
}

/// One FeatureVector per window of `windows(trace, span)`, in time order.
struct FeatureSeries {
  Span span = Span::one_second;
  std::vector<FeatureVector> values;
  std::string tool_id;

  std::vector<double> mean_abs_values() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(v.mean_abs);
    return out;
  }

  bool operator==(const FeatureSeries&) const = default;
};

inline FeatureSeries extract_features(const SignalTrace& trace, Span span) {
  FeatureSeries series;
  series.span = span;
  series.tool_id = trace.tool_id;
  for (const auto& w : windows(trace, span)) series.values.push_back(window_features(window_samples(trace, w)));
  return series;
}

// ---------------------------------------------------------------------------
// Normalization

enum class NormalizeDivisor { std_dev, variance };

inline std::string_view to_string(NormalizeDivisor d) { return d == NormalizeDivisor::std_dev ? "std" : "var"; }

inline NormalizeDivisor parse_normalize_divisor(std::string_view text) {
  if (text == "std") return NormalizeDivisor::std_dev;
  if (text == "var") return NormalizeDivisor::variance;
  throw ConfigError("normalize_divisor must be 'std' or 'var', got '" + std::string(text) + "'");
}

struct NormalizationStats {
  double mu = 0.0;
  double sigma = 1.0;

  bool operator==(const NormalizationStats&) const = default;
};

inline constexpr double kDegenerateSigma = 1e-12;

/// Mean and population standard deviation of `values`.
template <RealRange R>
NormalizationStats fit_normalization(const R& values) {
  if (std::ranges::size(values) < 2) throw DomainError("fit_normalization: need at least 2 values");
  NormalizationStats stats{arithmetic_mean(values), std::sqrt(variance(values))};
  if (!(stats.sigma >= kDegenerateSigma)) throw DomainError("fit_normalization: degenerate sigma (constant input)");
  return stats;
}

inline double normalize_value(double x, const NormalizationStats& stats,
                              NormalizeDivisor divisor = NormalizeDivisor::std_dev) {
  const double d = divisor == NormalizeDivisor::std_dev ? stats.sigma : stats.sigma * stats.sigma;
  return (x - stats.mu) / d;
}

template <RealRange R>
std::vector<double> normalize(const R& values, const NormalizationStats& stats,
                              NormalizeDivisor divisor = NormalizeDivisor::std_dev) {
  if (!(stats.sigma >= kDegenerateSigma)) throw DomainError("normalize: degenerate sigma");
  std::vector<double> out;
  out.reserve(std::ranges::size(values));
  for (auto x : values) out.push_back(normalize_value(static_cast<double>(x), stats, divisor));
  return out;
}

// ---------------------------------------------------------------------------
// Newline-delimited JSON export:
// {"t_index":N,"span":"1s","mean_abs":...,"mean_square":...,"variance":...,"p2p":...}

inline void write_feature_records(const FeatureSeries& series, std::ostream& out) {
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    const auto& v = series.values[i];
    nlohmann::ordered_json rec;
    rec["t_index"] = i;
    rec["span"] = std::string(to_string(series.span));
    rec["mean_abs"] = v.mean_abs;
    rec["mean_square"] = v.mean_square;
    rec["variance"] = v.variance;
    rec["p2p"] = v.peak_to_peak;
    out << rec.dump() << '\n';
  }
}

inline FeatureSeries read_feature_records(std::istream& in, std::string tool_id = {}) {
  FeatureSeries series;
  series.tool_id = std::move(tool_id);
  std::string line;
  std::uint64_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_ws(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      const auto span = parse_span(rec.at("span").get<std::string>());
      if (!span) throw FormatError("unknown span", line_no, FormatError::Unit::line);
      if (first) series.span = *span;
      if (*span != series.span) throw FormatError("mixed spans in feature file", line_no, FormatError::Unit::line);
      if (rec.at("t_index").get<std::uint64_t>() != series.values.size())
        throw FormatError("t_index out of sequence", line_no, FormatError::Unit::line);
      series.values.push_back(FeatureVector{rec.at("mean_abs").get<double>(), rec.at("mean_square").get<double>(),
                                            rec.at("variance").get<double>(), rec.at("p2p").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed feature record: ") + e.what(), line_no, FormatError::Unit::line);
    }
    first = false;
  }
  return series;
}

inline void write_feature_file(const FeatureSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_feature_records(series, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline FeatureSeries read_feature_file(const std::filesystem::path& path, std::string tool_id = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file '" + path.string() + "'");
  return read_feature_records(in, std::move(tool_id));
}

}  // namespace toolbreak

#endif
