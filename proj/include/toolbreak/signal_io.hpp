#ifndef TOOLBREAK_SIGNAL_IO_HPP
#define TOOLBREAK_SIGNAL_IO_HPP

// Raw spindle-current traces: in-memory representation, CSV and binary
// file formats, trimming of non-machining segments, and fixed-span windows.
//
// CSV layout:
//   # sample_rate_hz=20000
//   # tool_id=tool_0
//   # segment=0,1200000,machining        (repeatable)
//   0,10.25
//   1,10.31
//
// Binary layout (all little-endian):
//   "TBTR" | u8 version=1 | u32 sample_rate_hz | u64 sample_count
//   | u32 segment_count | segment_count x (u64 start, u64 end, u8 kind)
//   | sample_count x f32
// The binary layout has no tool id field; readers take it from the file stem.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toolbreak/error.hpp"
#include "toolbreak/kv_text.hpp"

namespace toolbreak {

inline constexpr std::uint32_t kDefaultSampleRateHz = 20000;

enum class SegmentKind : std::uint8_t { machining = 0, reset = 1, idle = 2 };

inline std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::machining: return "machining";
    case SegmentKind::reset: return "reset";
    case SegmentKind::idle: return "idle";
  }
  return "?";
}

inline std::optional<SegmentKind> parse_segment_kind(std::string_view text) {
  if (text == "machining") return SegmentKind::machining;
  if (text == "reset") return SegmentKind::reset;
  if (text == "idle") return SegmentKind::idle;
  return std::nullopt;
}

/// Half-open sample range [start, end).
struct Segment {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  SegmentKind kind = SegmentKind::machining;

  std::uint64_t length() const noexcept { return end - start; }
  bool operator==(const Segment&) const = default;
};

struct SignalTrace {
  std::uint32_t sample_rate_hz = kDefaultSampleRateHz;
  std::vector<float> samples;
  std::string tool_id;
  std::vector<Segment> segments;

  bool operator==(const SignalTrace&) const = default;
};

enum class TraceFormat { csv, binary };

enum class Span { one_second, one_minute };

inline std::string_view to_string(Span span) { return span == Span::one_second ? "1s" : "1m"; }

inline std::optional<Span> parse_span(std::string_view text) {
  if (text == "1s") return Span::one_second;
  if (text == "1m") return Span::one_minute;
  return std::nullopt;
}

inline std::uint64_t span_length(Span span, std::uint32_t sample_rate_hz) {
  return span == Span::one_second ? std::uint64_t{sample_rate_hz} : 60ULL * sample_rate_hz;
}

struct Window {
  std::string tool_id;
  std::uint64_t start_index = 0;
  std::uint64_t length = 0;
  Span span = Span::one_second;
};

/// Throws DomainError when the trace violates its invariants.
inline void validate(const SignalTrace& trace) {
  if (trace.sample_rate_hz == 0) throw DomainError("sample_rate_hz must be positive");
  if (trace.tool_id.find('\n') != std::string::npos) throw DomainError("tool_id must not contain a newline");
  std::uint64_t previous_end = 0;
  for (const auto& s : trace.segments) {
    if (s.start > s.end) throw DomainError("segment start after end");
    if (s.start < previous_end) throw DomainError("segments overlap or are unsorted");
    if (s.end > trace.samples.size()) throw DomainError("segment exceeds sample range");
    previous_end = s.end;
  }
  for (std::size_t i = 0; i < trace.samples.size(); ++i)
    if (!std::isfinite(trace.samples[i])) throw DomainError("non-finite sample at index " + std::to_string(i));
}

// ---------------------------------------------------------------------------
// CSV

inline void write_trace_csv(const SignalTrace& trace, std::ostream& out) {
  out << "# sample_rate_hz=" << trace.sample_rate_hz << '\n';
  out << "# tool_id=" << trace.tool_id << '\n';
  for (const auto& s : trace.segments)
    out << "# segment=" << s.start << ',' << s.end << ',' << to_string(s.kind) << '\n';
  std::string line;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    line.clear();
    line += std::to_string(i);
    line += ',';
    line += format_float(trace.samples[i]);
    line += '\n';
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

/// Incremental parser shared by read_trace and the streaming monitor.
/// Header lines must precede the first sample row.
class CsvTraceParser {
 public:
  enum class LineKind { blank, header, sample };

  /// Parses one line. On a sample row, `value` receives the current.
  LineKind feed(std::string_view raw, float& value) {
    ++line_no_;
    auto line = trim_ws(raw);
    if (line.empty()) return LineKind::blank;
    if (line.front() == '#') {
      if (seen_samples_) fail("header line after sample rows");
      parse_header(trim_ws(line.substr(1)));
      return LineKind::header;
    }
    if (!seen_samples_ && line == "index,current") return LineKind::header;
    auto comma = line.find(',');
    if (comma == std::string_view::npos) fail("expected 'index,current' row");
    auto index = parse_number<std::uint64_t>(line.substr(0, comma));
    if (!index) fail("bad sample index");
    if (*index != next_index_) fail("sample index out of sequence");
    auto current = parse_number<float>(line.substr(comma + 1));
    if (!current) fail("bad current value");
    if (!std::isfinite(*current)) fail("non-finite sample value");
    if (!sample_rate_) fail("missing sample_rate_hz header");
    seen_samples_ = true;
    ++next_index_;
    value = *current;
    return LineKind::sample;
  }

  std::optional<std::uint32_t> sample_rate_hz() const { return sample_rate_; }
  const std::string& tool_id() const { return tool_id_; }
  const std::vector<Segment>& segments() const { return segments_; }
  std::uint64_t samples_seen() const { return next_index_; }
  std::uint64_t line() const { return line_no_; }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(what, line_no_, FormatError::Unit::line); }

  void parse_header(std::string_view body) {
    auto eq = body.find('=');
    if (eq == std::string_view::npos) fail("malformed header line");
    auto key = trim_ws(body.substr(0, eq));
    auto value = trim_ws(body.substr(eq + 1));
    if (key == "sample_rate_hz") {
      auto rate = parse_number<std::uint32_t>(value);
      if (!rate || *rate == 0) fail("malformed sample_rate_hz header");
      sample_rate_ = *rate;
    } else if (key == "tool_id") {
      tool_id_ = std::string(value);
    } else if (key == "segment") {
      auto c1 = value.find(',');
      auto c2 = c1 == std::string_view::npos ? c1 : value.find(',', c1 + 1);
      if (c2 == std::string_view::npos) fail("malformed segment header");
      auto start = parse_number<std::uint64_t>(value.substr(0, c1));
      auto end = parse_number<std::uint64_t>(value.substr(c1 + 1, c2 - c1 - 1));
      auto kind = parse_segment_kind(trim_ws(value.substr(c2 + 1)));
      if (!start || !end || !kind || *start > *end) fail("malformed segment header");
      if (!segments_.empty() && *start < segments_.back().end) fail("segments overlap or are unsorted");
      segments_.push_back(Segment{*start, *end, *kind});
    } else {
      fail("unknown header key '" + std::string(key) + "'");
    }
  }

  std::uint64_t line_no_ = 0;
  std::uint64_t next_index_ = 0;
  bool seen_samples_ = false;
  std::optional<std::uint32_t> sample_rate_;
  std::string tool_id_;
  std::vector<Segment> segments_;
};

inline SignalTrace read_trace_csv(std::istream& in) {
  CsvTraceParser parser;
  SignalTrace trace;
  std::string line;
  float value = 0.0F;
  while (std::getline(in, line))
    if (parser.feed(line, value) == CsvTraceParser::LineKind::sample) trace.samples.push_back(value);
  if (!parser.sample_rate_hz()) throw FormatError("missing sample_rate_hz header", parser.line(), FormatError::Unit::line);
  if (trace.samples.empty()) throw FormatError("no samples", parser.line(), FormatError::Unit::line);
  trace.sample_rate_hz = *parser.sample_rate_hz();
  trace.tool_id = parser.tool_id();
  trace.segments = parser.segments();
  if (!trace.segments.empty() && trace.segments.back().end > trace.samples.size())
    throw FormatError("segment exceeds sample count", parser.line(), FormatError::Unit::line);
  return trace;
}

// ---------------------------------------------------------------------------
// Binary

inline constexpr std::array<char, 4> kTraceMagic{'T', 'B', 'T', 'R'};
inline constexpr std::uint8_t kTraceVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& buf, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return static_cast<T>(u);
}

/// Reads exactly `n` bytes or throws a truncation error at `offset`.
inline void read_exact(std::istream& in, void* dst, std::size_t n, std::uint64_t offset, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw FormatError(std::string("truncated binary payload: ") + what, offset + static_cast<std::uint64_t>(in.gcount()),
                      FormatError::Unit::byte);
}

}  // namespace detail

inline void write_trace_binary(const SignalTrace& trace, std::ostream& out) {
  std::string header;
  header.append(kTraceMagic.data(), kTraceMagic.size());
  header.push_back(static_cast<char>(kTraceVersion));
  detail::put_le<std::uint32_t>(header, trace.sample_rate_hz);
  detail::put_le<std::uint64_t>(header, trace.samples.size());
  detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(trace.segments.size()));
  for (const auto& s : trace.segments) {
    detail::put_le<std::uint64_t>(header, s.start);
    detail::put_le<std::uint64_t>(header, s.end);
    header.push_back(static_cast<char>(s.kind));
  }
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  constexpr std::size_t kChunk = 1 << 16;
  std::string chunk;
  chunk.reserve(kChunk * 4);
  for (std::size_t i = 0; i < trace.samples.size(); i += kChunk) {
    chunk.clear();
    const std::size_t end = std::min(trace.samples.size(), i + kChunk);
    for (std::size_t j = i; j < end; ++j) detail::put_le<std::uint32_t>(chunk, std::bit_cast<std::uint32_t>(trace.samples[j]));
    out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  }
}

inline SignalTrace read_trace_binary(std::istream& in, std::string tool_id = {}) {
  SignalTrace trace;
  trace.tool_id = std::move(tool_id);
  std::uint64_t offset = 0;
  unsigned char fixed[4 + 1 + 4 + 8 + 4];
  detail::read_exact(in, fixed, sizeof(fixed), offset, "header");
  if (std::memcmp(fixed, kTraceMagic.data(), 4) != 0) throw FormatError("bad magic, expected TBTR", 0, FormatError::Unit::byte);
  if (fixed[4] != kTraceVersion)
    throw FormatError("unsupported trace version " + std::to_string(fixed[4]), 4, FormatError::Unit::byte);
  trace.sample_rate_hz = detail::get_le<std::uint32_t>(fixed + 5);
  if (trace.sample_rate_hz == 0) throw FormatError("malformed header: sample_rate_hz is zero", 5, FormatError::Unit::byte);
  const auto count = detail::get_le<std::uint64_t>(fixed + 9);
  const auto segment_count = detail::get_le<std::uint32_t>(fixed + 17);
  offset = sizeof(fixed);

  trace.segments.reserve(std::min<std::uint32_t>(segment_count, 1u << 16));
  for (std::uint32_t i = 0; i < segment_count; ++i) {
    unsigned char rec[17];
    detail::read_exact(in, rec, sizeof(rec), offset, "segment table");
    Segment s{detail::get_le<std::uint64_t>(rec), detail::get_le<std::uint64_t>(rec + 8), SegmentKind::machining};
    if (rec[16] > 2) throw FormatError("bad segment kind", offset + 16, FormatError::Unit::byte);
    s.kind = static_cast<SegmentKind>(rec[16]);
    if (s.start > s.end || s.end > count || (!trace.segments.empty() && s.start < trace.segments.back().end))
      throw FormatError("inconsistent segment record", offset, FormatError::Unit::byte);
    trace.segments.push_back(s);
    offset += sizeof(rec);
  }
  if (count == 0) throw FormatError("no samples", offset, FormatError::Unit::byte);

  // Grow in chunks so that a corrupt count fails as truncation, not as a huge allocation.
  constexpr std::uint64_t kChunk = 1 << 20;
  std::vector<unsigned char> raw;
  for (std::uint64_t done = 0; done < count;) {
    const std::uint64_t n = std::min(kChunk, count - done);
    raw.resize(n * 4);
    detail::read_exact(in, raw.data(), raw.size(), offset, "samples");
    trace.samples.reserve(trace.samples.size() + n);
    for (std::uint64_t j = 0; j < n; ++j) {
      const float v = std::bit_cast<float>(detail::get_le<std::uint32_t>(raw.data() + 4 * j));
      if (!std::isfinite(v)) throw FormatError("non-finite sample value", offset + 4 * j, FormatError::Unit::byte);
      trace.samples.push_back(v);
    }
    offset += raw.size();
    done += n;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// File entry points

inline SignalTrace read_trace(const std::filesystem::path& path, TraceFormat format) {
  std::ifstream in(path, format == TraceFormat::binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open trace file '" + path.string() + "'");
  if (format == TraceFormat::csv) return read_trace_csv(in);
  return read_trace_binary(in, path.stem().string());
}

/// Chooses the format from the leading magic bytes.
inline SignalTrace read_trace(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open trace file '" + path.string() + "'");
  char magic[4] = {};
  probe.read(magic, 4);
  const bool binary = probe.gcount() == 4 && std::memcmp(magic, kTraceMagic.data(), 4) == 0;
  return read_trace(path, binary ? TraceFormat::binary : TraceFormat::csv);
}

inline void write_trace(const SignalTrace& trace, const std::filesystem::path& path, TraceFormat format) {
  validate(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  if (format == TraceFormat::csv)
    write_trace_csv(trace, out);
  else
    write_trace_binary(trace, out);
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Trimming and windowing

/// Keeps only machining samples, concatenated in order. Samples not covered by
/// any segment count as machining. The rewritten table is a single machining
/// segment covering the result (empty when nothing is left).
inline SignalTrace trim_non_machining(const SignalTrace& trace) {
  SignalTrace out;
  out.sample_rate_hz = trace.sample_rate_hz;
  out.tool_id = trace.tool_id;
  out.samples.reserve(trace.samples.size());
  std::uint64_t cursor = 0;
  auto keep = [&](std::uint64_t from, std::uint64_t to) {
    out.samples.insert(out.samples.end(), trace.samples.begin() + static_cast<std::ptrdiff_t>(from),
                       trace.samples.begin() + static_cast<std::ptrdiff_t>(to));
  };
  for (const auto& s : trace.segments) {
    keep(cursor, s.start);
    if (s.kind == SegmentKind::machining) keep(s.start, s.end);
    cursor = s.end;
  }
  keep(cursor, trace.samples.size());
  if (!out.samples.empty()) out.segments.push_back(Segment{0, out.samples.size(), SegmentKind::machining});
  return out;
}

/// Non-overlapping contiguous windows; a trailing partial window is dropped.
inline std::vector<Window> windows(const SignalTrace& trace, Span span) {
  const std::uint64_t length = span_length(span, trace.sample_rate_hz);
  const std::uint64_t count = trace.samples.size() / length;
  std::vector<Window> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(Window{trace.tool_id, i * length, length, span});
  return out;
}

inline std::span<const float> window_samples(const SignalTrace& trace, const Window& w) {
  return std::span<const float>(trace.samples).subspan(w.start_index, w.length);
}

}  // namespace toolbreak

#endif
