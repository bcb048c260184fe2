#ifndef TOOLBREAK_WEAR_SYNTH_HPP
#define TOOLBREAK_WEAR_SYNTH_HPP

// Seeded synthetic spindle-current lifecycles.
//
// Machining signal: A(t) * sin(2 pi f t + phi) + N(0, noise_std^2), with
//   A(t) = base_amplitude + wear_slope * t_min,
// a smooth "decline and rise" dip of depth dip_depth over the dip_minutes
// before breakage, and inside the breakage window an amplitude surge drawn per
// 0.2 s chunk from [1.9, 2.8], noise scaled by burst_factor, and
// six alternating-sign spikes per machining second that replace the carrier
// with +-burst_factor * surged A. Flat near-zero reset segments
// are interleaved every reset_interval_min of machining time. All times in a
// profile are machining time (reset segments excluded).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "toolbreak/error.hpp"
#include "toolbreak/kv_text.hpp"
#include "toolbreak/rng.hpp"
#include "toolbreak/signal_io.hpp"

namespace toolbreak {

inline constexpr int kGeneratorVersion = 2;

/// Operator log phase (cutting sound), metadata only.
struct PhaseLabel {
  double start_min = 0.0;
  double end_min = 0.0;
  std::string sound;

  bool operator==(const PhaseLabel&) const = default;
};

struct ToolLifeProfile {
  double life_minutes = 55.0;
  double breakage_start_min = 52.0;
  double breakage_end_min = 55.0;
  double base_amplitude = 10.0;  // A
  double wear_slope = 0.05;      // A per minute
  double noise_std = 0.3;        // A
  double spindle_hz = 6500.0 / 60.0;
  std::uint32_t sample_rate_hz = kDefaultSampleRateHz;
  double burst_factor = 4.0;
  double dip_minutes = 2.0;
  double dip_depth = 0.12;
  double reset_interval_min = 10.0;
  double reset_seconds = 5.0;
  std::vector<PhaseLabel> phases{{0, 12, "slight"}, {12, 35, "normal"}, {35, 46, "slightly larger"}, {46, 55, "abnormal"}};

  bool operator==(const ToolLifeProfile&) const = default;
};

inline void validate(const ToolLifeProfile& p) {
  if (!(p.life_minutes > 0)) throw ConfigError("life_minutes must be positive");
  if (!(p.breakage_start_min > 0 && p.breakage_start_min < p.life_minutes))
    throw ConfigError("breakage start must lie inside (0, life_minutes)");
  if (!(p.breakage_end_min > p.breakage_start_min && p.breakage_end_min <= p.life_minutes))
    throw ConfigError("breakage end must lie in (breakage start, life_minutes]");
  if (!(p.base_amplitude > 0 && p.noise_std > 0 && p.spindle_hz > 0)) throw ConfigError("amplitudes must be positive");
  if (!(p.wear_slope >= 0)) throw ConfigError("wear_slope must be non-negative");
  if (p.sample_rate_hz == 0) throw ConfigError("sample_rate_hz must be positive");
  if (!(p.burst_factor >= 3)) throw ConfigError("burst_factor must be >= 3");
  if (!(p.dip_depth >= 0 && p.dip_depth < 1 && p.dip_minutes >= 0 && p.dip_minutes < p.breakage_start_min))
    throw ConfigError("dip must have depth in [0, 1) and fit before breakage");
  if (!(p.reset_interval_min > 0 && p.reset_seconds >= 0)) throw ConfigError("bad reset schedule");
}

/// A one-minute window [m, m+1) is labeled breakage iff its midpoint lies in
/// [breakage_start, breakage_end).
inline int minute_label(std::size_t minute, double breakage_start_min, double breakage_end_min) {
  const double mid = static_cast<double>(minute) + 0.5;
  return mid >= breakage_start_min && mid < breakage_end_min ? 1 : 0;
}

/// Noise-free amplitude envelope at machining minute `t_min`, before any
/// breakage surge.
inline double wear_envelope(const ToolLifeProfile& p, double t_min) {
  double a = p.base_amplitude + p.wear_slope * t_min;
  const double dip_start = p.breakage_start_min - p.dip_minutes;
  if (p.dip_minutes > 0 && t_min >= dip_start && t_min < p.breakage_start_min)
    a *= 1.0 - p.dip_depth * std::sin(std::numbers::pi * (t_min - dip_start) / p.dip_minutes);
  return a;
}

inline SignalTrace generate_tool_trace(const ToolLifeProfile& p, std::uint64_t seed, std::string tool_id = "tool") {
  validate(p);
  Rng rng = Rng(seed).split(Stream::synth);
  auto& eng = rng.engine();
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> surge(1.9, 2.8);

  const double rate = p.sample_rate_hz;
  const std::uint64_t machining = static_cast<std::uint64_t>(std::llround(p.life_minutes * 60.0 * rate));
  const std::uint64_t reset_every = static_cast<std::uint64_t>(std::llround(p.reset_interval_min * 60.0 * rate));
  const std::uint64_t reset_len = static_cast<std::uint64_t>(std::llround(p.reset_seconds * rate));
  const std::uint64_t chunk = std::max<std::uint64_t>(1, p.sample_rate_hz / 5);
  const std::uint64_t breakage_begin = static_cast<std::uint64_t>(std::ceil(p.breakage_start_min * 60.0 * rate));
  const std::uint64_t breakage_end = static_cast<std::uint64_t>(std::ceil(p.breakage_end_min * 60.0 * rate));
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(eng);
  const double omega = 2.0 * std::numbers::pi * p.spindle_hz / rate;
  constexpr int kSpikesPerSecond = 6;

  SignalTrace trace;
  trace.sample_rate_hz = p.sample_rate_hz;
  trace.tool_id = std::move(tool_id);
  const std::uint64_t resets = reset_len == 0 ? 0 : (machining - 1) / reset_every;
  trace.samples.reserve(machining + resets * reset_len);

  std::uint64_t segment_start = 0;
  double gain = 1.0;
  std::vector<std::uint64_t> spikes;  // offsets within the current second
  for (std::uint64_t n = 0; n < machining; ++n) {
    if (n > 0 && reset_len > 0 && n % reset_every == 0) {
      trace.segments.push_back({segment_start, trace.samples.size(), SegmentKind::machining});
      const std::uint64_t reset_start = trace.samples.size();
      for (std::uint64_t r = 0; r < reset_len; ++r) trace.samples.push_back(static_cast<float>(0.01 * unit(eng)));
      trace.segments.push_back({reset_start, trace.samples.size(), SegmentKind::reset});
      segment_start = trace.samples.size();
    }
    const double t_min = static_cast<double>(n) / rate / 60.0;
    const bool broken = n >= breakage_begin && n < breakage_end;
    double amplitude = wear_envelope(p, t_min);
    double noise = p.noise_std;
    double spike = 0.0;
    if (broken) {
      const std::uint64_t k = n - breakage_begin;
      const std::uint64_t offset = n % p.sample_rate_hz;
      if (k % chunk == 0) gain = surge(eng);
      // spikes are placed per machining second so every feature second sees both signs
      if (k == 0 || offset == 0) {
        spikes.clear();
        for (int s = 0; s < kSpikesPerSecond; ++s)
          spikes.push_back(std::uniform_int_distribution<std::uint64_t>(offset, p.sample_rate_hz - 1)(eng));
      }
      for (std::size_t s = 0; s < spikes.size(); ++s)
        if (spikes[s] == offset) spike = (s % 2 == 0 ? 1.0 : -1.0) * p.burst_factor * gain * amplitude;
      amplitude *= gain;
      noise *= p.burst_factor;
    }
    const double carrier = spike != 0.0 ? spike : amplitude * std::sin(omega * static_cast<double>(n) + phase);
    const double x = carrier + noise * unit(eng);
    trace.samples.push_back(static_cast<float>(x));
  }
  trace.segments.push_back({segment_start, trace.samples.size(), SegmentKind::machining});
  return trace;
}

// ---------------------------------------------------------------------------
// Profile text

inline void write_profile(const ToolLifeProfile& p, KvSection& s) {
  s.set("life_minutes", p.life_minutes);
  s.set("breakage_start_min", p.breakage_start_min);
  s.set("breakage_end_min", p.breakage_end_min);
  s.set("base_amplitude", p.base_amplitude);
  s.set("wear_slope", p.wear_slope);
  s.set("noise_std", p.noise_std);
  s.set("spindle_hz", p.spindle_hz);
  s.set("sample_rate_hz", std::uint64_t{p.sample_rate_hz});
  s.set("burst_factor", p.burst_factor);
  s.set("dip_minutes", p.dip_minutes);
  s.set("dip_depth", p.dip_depth);
  s.set("reset_interval_min", p.reset_interval_min);
  s.set("reset_seconds", p.reset_seconds);
  for (const auto& ph : p.phases)
    s.add("phase", format_double(ph.start_min) + "," + format_double(ph.end_min) + "," + ph.sound);
}

/// Reads any subset of profile keys over `base`. Without explicit phase keys the
/// base phases stretch with life_minutes.
inline ToolLifeProfile read_profile(const KvSection& s, ToolLifeProfile base = {}) {
  const double base_life = base.life_minutes;
  auto num = [&](const char* key, double& slot) { slot = s.get_number_or<double>(key, slot); };
  num("life_minutes", base.life_minutes);
  num("breakage_start_min", base.breakage_start_min);
  num("breakage_end_min", base.breakage_end_min);
  num("base_amplitude", base.base_amplitude);
  num("wear_slope", base.wear_slope);
  num("noise_std", base.noise_std);
  num("spindle_hz", base.spindle_hz);
  base.sample_rate_hz = s.get_number_or<std::uint32_t>("sample_rate_hz", base.sample_rate_hz);
  num("burst_factor", base.burst_factor);
  num("dip_minutes", base.dip_minutes);
  num("dip_depth", base.dip_depth);
  num("reset_interval_min", base.reset_interval_min);
  num("reset_seconds", base.reset_seconds);
  if (s.has("phase")) {
    base.phases.clear();
    for (const auto& text : s.all("phase")) {
      auto c1 = text.find(',');
      auto c2 = c1 == std::string::npos ? c1 : text.find(',', c1 + 1);
      if (c2 == std::string::npos) throw ConfigError("phase must be 'start,end,sound'");
      auto a = parse_number<double>(text.substr(0, c1));
      auto b = parse_number<double>(text.substr(c1 + 1, c2 - c1 - 1));
      if (!a || !b) throw ConfigError("bad phase bounds '" + text + "'");
      base.phases.push_back({*a, *b, text.substr(c2 + 1)});
    }
  } else if (base.life_minutes != base_life) {
    for (auto& ph : base.phases) {
      ph.start_min *= base.life_minutes / base_life;
      ph.end_min *= base.life_minutes / base_life;
    }
  }
  return base;
}

// ---------------------------------------------------------------------------
// Datasets

struct ToolEntry {
  std::string tool_id;
  std::uint64_t seed = 0;
  std::string file;
  ToolLifeProfile profile;

  bool operator==(const ToolEntry&) const = default;
};

struct SynthDatasetManifest {
  int generator_version = kGeneratorVersion;
  std::uint64_t master_seed = 0;
  std::vector<ToolEntry> tools;

  const ToolEntry& tool(const std::string& id) const {
    for (const auto& t : tools)
      if (t.tool_id == id) return t;
    throw ConfigError("manifest has no tool '" + id + "'");
  }

  bool operator==(const SynthDatasetManifest&) const = default;
};

inline constexpr double kProfileJitter = 0.15;

/// Per-tool profiles jittered by up to +/-15% on life, wear slope and base
/// amplitude. The breakage window keeps its position relative to the end of life.
inline SynthDatasetManifest plan_dataset(int n_tools, std::uint64_t master_seed, const ToolLifeProfile& base = {}) {
  if (n_tools < 2) throw ConfigError("need at least 2 tools for a train/test split, got " + std::to_string(n_tools));
  validate(base);
  SynthDatasetManifest m;
  m.master_seed = master_seed;
  Rng rng = Rng(master_seed).split(Stream::synth);
  std::uniform_real_distribution<double> jitter(-kProfileJitter, kProfileJitter);
  for (int i = 0; i < n_tools; ++i) {
    ToolEntry e;
    e.tool_id = "tool_" + std::to_string(i);
    e.seed = derive_seed(master_seed, 1000 + static_cast<std::uint64_t>(i));
    e.file = e.tool_id + ".tbtr";
    e.profile = base;
    const double life_scale = 1.0 + jitter(rng.engine());
    e.profile.life_minutes = base.life_minutes * life_scale;
    e.profile.breakage_start_min = base.breakage_start_min * life_scale;
    e.profile.breakage_end_min = base.breakage_end_min * life_scale;
    e.profile.wear_slope = base.wear_slope * (1.0 + jitter(rng.engine()));
    e.profile.base_amplitude = base.base_amplitude * (1.0 + jitter(rng.engine()));
    for (auto& ph : e.profile.phases) {
      ph.start_min *= life_scale;
      ph.end_min *= life_scale;
    }
    validate(e.profile);
    m.tools.push_back(std::move(e));
  }
  return m;
}

inline SignalTrace generate_tool(const ToolEntry& e) { return generate_tool_trace(e.profile, e.seed, e.tool_id); }

/// Whole minutes of machining time in a tool's lifecycle.
inline std::size_t machining_minutes(const ToolLifeProfile& p) {
  const auto samples = static_cast<std::uint64_t>(std::llround(p.life_minutes * 60.0 * p.sample_rate_hz));
  return static_cast<std::size_t>(samples / (60ULL * p.sample_rate_hz));
}

inline std::vector<int> minute_labels(const ToolLifeProfile& p) {
  std::vector<int> labels;
  for (std::size_t m = 0; m < machining_minutes(p); ++m)
    labels.push_back(minute_label(m, p.breakage_start_min, p.breakage_end_min));
  return labels;
}

inline std::string manifest_text(const SynthDatasetManifest& m) {
  KvDocument doc;
  doc.header.set("generator_version", m.generator_version);
  doc.header.set("master_seed", m.master_seed);
  doc.header.set("tool_count", std::uint64_t{m.tools.size()});
  for (const auto& t : m.tools) {
    auto& s = doc.add_section("tool");
    s.set("tool_id", t.tool_id);
    s.set("seed", t.seed);
    s.set("file", t.file);
    write_profile(t.profile, s);
    std::string positives;
    const auto labels = minute_labels(t.profile);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i]) positives += (positives.empty() ? "" : ",") + std::to_string(i);
    s.set("breakage_minutes", positives);
  }
  return doc.to_string();
}

inline SynthDatasetManifest parse_manifest(const std::string& text) {
  const auto doc = KvDocument::parse(text);
  SynthDatasetManifest m;
  m.generator_version = doc.header.get_number<int>("generator_version");
  if (m.generator_version != kGeneratorVersion)
    throw ConfigError("unsupported generator_version " + std::to_string(m.generator_version));
  m.master_seed = doc.header.get_number<std::uint64_t>("master_seed");
  for (const auto& s : doc.sections) {
    if (s.name != "tool") continue;
    ToolEntry e;
    e.tool_id = s.get("tool_id");
    e.seed = s.get_number<std::uint64_t>("seed");
    e.file = s.get("file");
    e.profile = read_profile(s);
    validate(e.profile);
    m.tools.push_back(std::move(e));
  }
  if (m.tools.size() != doc.header.get_number<std::size_t>("tool_count"))
    throw ConfigError("manifest tool_count does not match tool blocks");
  return m;
}

inline constexpr const char* kManifestFile = "manifest.txt";

inline SynthDatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestFile);
  if (!in) throw IoError("cannot open manifest in '" + dir.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

/// Writes one binary trace per tool plus manifest.txt into `out_dir`.
inline SynthDatasetManifest generate_dataset(int n_tools, std::uint64_t master_seed,
                                             const std::filesystem::path& out_dir, const ToolLifeProfile& base = {}) {
  auto m = plan_dataset(n_tools, master_seed, base);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  for (const auto& t : m.tools) write_trace(generate_tool(t), out_dir / t.file, TraceFormat::binary);
  std::ofstream out(out_dir / kManifestFile, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in '" + out_dir.string() + "'");
  out << manifest_text(m);
  if (!out) throw IoError("manifest write failed");
  return m;
}

}  // namespace toolbreak

#endif
