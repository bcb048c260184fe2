#ifndef TOOLBREAK_TRAIN_EVAL_HPP
#define TOOLBREAK_TRAIN_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolbreak/checkpoint.hpp"
#include "toolbreak/error.hpp"
#include "toolbreak/kv_text.hpp"
#include "toolbreak/layers.hpp"
#include "toolbreak/model.hpp"
#include "toolbreak/optim.hpp"
#include "toolbreak/rng.hpp"
#include "toolbreak/time_features.hpp"
#include "toolbreak/wear_synth.hpp"

namespace toolbreak {

// ---------------------------------------------------------------------------
// Samples

/// prefix: every second from time 0 up to the end of minute m.
/// sliding: the same, but only the most recent input_length seconds.
enum class SampleMode { prefix, sliding };

inline std::string_view to_string(SampleMode m) { return m == SampleMode::prefix ? "prefix" : "sliding"; }

inline SampleMode parse_sample_mode(std::string_view text) {
  if (text == "prefix") return SampleMode::prefix;
  if (text == "sliding") return SampleMode::sliding;
  throw ConfigError("sample_mode must be prefix or sliding, got '" + std::string(text) + "'");
}

struct LabeledSample {
  /// input_length raw one-second mean_abs values; only the first valid_length are real.
  std::vector<double> features;
  std::size_t valid_length = 0;
  int label = 0;
  std::string tool_id;
  /// Minute ordinal m of the window [m, m+1) the sample closes.
  std::size_t window_time = 0;

  bool operator==(const LabeledSample&) const = default;
};

struct BreakageWindow {
  double start_min = 0.0;
  double end_min = 0.0;
};

/// One sample per completed minute of `series`.
inline std::vector<LabeledSample> assemble_tool_samples(const FeatureSeries& series, BreakageWindow breakage,
                                                        std::size_t input_length, SampleMode mode) {
  if (series.span != Span::one_second) throw ConfigError("samples are built from one-second features");
  if (input_length == 0) throw ConfigError("input_length must be positive");
  std::vector<LabeledSample> out;
  const std::size_t minutes = series.values.size() / 60;
  for (std::size_t m = 0; m < minutes; ++m) {
    const std::size_t end = (m + 1) * 60;
    if (mode == SampleMode::prefix && end > input_length)
      throw ConfigError("tool '" + series.tool_id + "' minute " + std::to_string(m) + " needs " + std::to_string(end) +
                        " inputs but input_length is " + std::to_string(input_length) +
                        "; raise input_length or use sample_mode=sliding");
    const std::size_t begin = end > input_length ? end - input_length : 0;
    LabeledSample s;
    s.features.assign(input_length, 0.0);
    s.valid_length = end - begin;
    for (std::size_t i = begin; i < end; ++i) s.features[i - begin] = series.values[i].mean_abs;
    s.label = minute_label(m, breakage.start_min, breakage.end_min);
    s.tool_id = series.tool_id;
    s.window_time = m;
    out.push_back(std::move(s));
  }
  return out;
}

/// Labels come from each tool's manifest entry; output is ordered by (tool, minute)
/// in the order of `series`.
inline std::vector<LabeledSample> assemble_samples(const std::vector<FeatureSeries>& series,
                                                   const SynthDatasetManifest& manifest, std::size_t input_length,
                                                   SampleMode mode = SampleMode::prefix) {
  std::vector<LabeledSample> out;
  for (const auto& s : series) {
    const auto& p = manifest.tool(s.tool_id).profile;
    auto part = assemble_tool_samples(s, {p.breakage_start_min, p.breakage_end_min}, input_length, mode);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

/// Reads, trims and featurizes one trace per manifest entry.
inline std::vector<FeatureSeries> featurize_dataset(const SynthDatasetManifest& manifest,
                                                    const std::filesystem::path& dir) {
  std::vector<FeatureSeries> out;
  for (const auto& t : manifest.tools) {
    auto trace = read_trace(dir / t.file);
    trace.tool_id = t.tool_id;
    out.push_back(extract_features(trim_non_machining(trace), Span::one_second));
  }
  return out;
}

/// Same as featurize_dataset, regenerating each trace in memory instead of reading it.
inline std::vector<FeatureSeries> featurize_generated(const SynthDatasetManifest& manifest) {
  std::vector<FeatureSeries> out;
  for (const auto& t : manifest.tools) out.push_back(extract_features(trim_non_machining(generate_tool(t)), Span::one_second));
  return out;
}

// ---------------------------------------------------------------------------
// Split

struct SplitPlan {
  std::vector<std::string> train_tools;
  std::string test_tool;
  double validation_fraction = 0.1;
};

struct Partition {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  std::vector<LabeledSample> test;
};

inline std::vector<std::string> tool_ids(const std::vector<LabeledSample>& samples) {
  std::vector<std::string> ids;
  for (const auto& s : samples)
    if (std::find(ids.begin(), ids.end(), s.tool_id) == ids.end()) ids.push_back(s.tool_id);
  return ids;
}

/// Test is `test_tool` (the last tool seen when empty); every other tool trains.
inline SplitPlan make_split_plan(const std::vector<LabeledSample>& samples, std::string test_tool = {},
                                 double validation_fraction = 0.1) {
  auto ids = tool_ids(samples);
  if (ids.size() < 2) throw ConfigError("split needs at least 2 tools, got " + std::to_string(ids.size()));
  if (test_tool.empty()) test_tool = ids.back();
  if (std::find(ids.begin(), ids.end(), test_tool) == ids.end())
    throw ConfigError("test tool '" + test_tool + "' has no samples");
  SplitPlan plan;
  plan.test_tool = test_tool;
  plan.validation_fraction = validation_fraction;
  for (auto& id : ids)
    if (id != test_tool) plan.train_tools.push_back(id);
  return plan;
}

/// Validation is the trailing ceil(fraction * n) samples of the train tools taken
/// in order, i.e. a time block at the end of the last train tool. A trailing
/// block inside every tool would remove all breakage windows from training.
inline Partition split(const std::vector<LabeledSample>& samples, const SplitPlan& plan) {
  if (plan.train_tools.empty()) throw ConfigError("split needs at least one train tool");
  if (!(plan.validation_fraction >= 0 && plan.validation_fraction < 1))
    throw ConfigError("validation_fraction must lie in [0, 1)");
  const std::set<std::string> train_ids(plan.train_tools.begin(), plan.train_tools.end());
  if (train_ids.contains(plan.test_tool)) throw ConfigError("tool '" + plan.test_tool + "' is in both train and test");
  if (tool_ids(samples).size() < 2) throw ConfigError("split needs samples from at least 2 tools");
  Partition part;
  std::vector<LabeledSample> pool;
  for (const auto& id : plan.train_tools)
    for (const auto& s : samples)
      if (s.tool_id == id) pool.push_back(s);
  for (const auto& s : samples)
    if (s.tool_id == plan.test_tool) part.test.push_back(s);
  if (part.test.empty()) throw ConfigError("test tool '" + plan.test_tool + "' has no samples");
  const auto held = static_cast<std::size_t>(std::ceil(plan.validation_fraction * static_cast<double>(pool.size())));
  if (held >= pool.size()) throw ConfigError("validation block leaves no train samples");
  part.train.assign(pool.begin(), pool.end() - static_cast<std::ptrdiff_t>(held));
  part.validation.assign(pool.end() - static_cast<std::ptrdiff_t>(held), pool.end());
  return part;
}

// ---------------------------------------------------------------------------
// Config

struct TrainConfig {
  std::uint64_t iterations = 2400;
  std::size_t batch_size = 20;
  std::size_t test_batch_size = 1;
  double learning_rate = 1e-4;
  /// Empty: Adam for CNNs, plain gradient descent for BP.
  std::optional<OptimizerKind> optimizer;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  /// Draw each batch element from a uniformly chosen class first.
  bool balanced = false;
  SampleMode sample_mode = SampleMode::sliding;
  std::string test_tool;
  ScaleConfig scale;
  std::size_t bp_hidden = 512;

  bool operator==(const TrainConfig&) const = default;
};

inline void validate(const TrainConfig& c) {
  if (c.iterations == 0) throw ConfigError("iterations must be positive");
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.test_batch_size != 1) throw ConfigError("evaluation is sequential; test_batch_size must be 1");
  if (!(c.validation_fraction >= 0 && c.validation_fraction < 1)) throw ConfigError("validation_fraction must lie in [0, 1)");
}

inline OptimizerKind optimizer_for(const TrainConfig& c, ModelKind kind) {
  if (c.optimizer) return *c.optimizer;
  return is_cnn(kind) ? OptimizerKind::adam : OptimizerKind::gd;
}

inline std::string format_sizes(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

inline void write_train_config(const TrainConfig& c, KvSection& s) {
  s.set("iterations", c.iterations);
  s.set("batch_size", std::uint64_t{c.batch_size});
  s.set("test_batch_size", std::uint64_t{c.test_batch_size});
  s.set("learning_rate", c.learning_rate);
  if (c.optimizer) s.set("optimizer", std::string(to_string(*c.optimizer)));
  s.set("seed", c.seed);
  s.set("validation_fraction", c.validation_fraction);
  s.set("balanced", c.balanced ? "true" : "false");
  s.set("sample_mode", std::string(to_string(c.sample_mode)));
  if (!c.test_tool.empty()) s.set("test_tool", c.test_tool);
  s.set("input_length", std::uint64_t{c.scale.input_length});
  s.set("filters", format_sizes(c.scale.filters));
  s.set("dense_units", std::uint64_t{c.scale.dense_units});
  s.set("kernel", std::uint64_t{c.scale.kernel});
  s.set("dropout_rate", c.scale.dropout_rate);
  s.set("normalize_divisor", std::string(to_string(c.scale.normalize_divisor)));
  s.set("bp_hidden", std::uint64_t{c.bp_hidden});
}

/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline TrainConfig read_train_config(const KvSection& s) {
  static const std::set<std::string> known{
      "iterations", "batch_size",  "test_batch_size", "learning_rate", "optimizer", "seed",         "validation_fraction",
      "balanced",   "sample_mode", "test_tool",       "input_length",  "filters",   "dense_units",  "kernel",
      "dropout_rate", "normalize_divisor", "bp_hidden"};
  for (const auto& [k, v] : s.entries)
    if (!known.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  TrainConfig c;
  c.iterations = s.get_number_or<std::uint64_t>("iterations", c.iterations);
  c.batch_size = s.get_number_or<std::size_t>("batch_size", c.batch_size);
  c.test_batch_size = s.get_number_or<std::size_t>("test_batch_size", c.test_batch_size);
  c.learning_rate = s.get_number_or<double>("learning_rate", c.learning_rate);
  if (s.has("optimizer")) c.optimizer = parse_optimizer_kind(s.get("optimizer"));
  c.seed = s.get_number_or<std::uint64_t>("seed", c.seed);
  c.validation_fraction = s.get_number_or<double>("validation_fraction", c.validation_fraction);
  if (s.has("balanced")) {
    const auto b = s.get("balanced");
    if (b != "true" && b != "false") throw ConfigError("balanced must be true or false");
    c.balanced = b == "true";
  }
  if (s.has("sample_mode")) c.sample_mode = parse_sample_mode(s.get("sample_mode"));
  c.test_tool = s.find("test_tool").value_or("");
  c.scale.input_length = s.get_number_or<std::size_t>("input_length", c.scale.input_length);
  if (s.has("filters")) {
    c.scale.filters.clear();
    for (const auto& f : detail::split_commas(s.get("filters"))) {
      auto v = parse_number<std::size_t>(f);
      if (!v || *v == 0) throw ConfigError("bad filters entry '" + f + "'");
      c.scale.filters.push_back(*v);
    }
  }
  c.scale.dense_units = s.get_number_or<std::size_t>("dense_units", c.scale.dense_units);
  c.scale.kernel = s.get_number_or<std::size_t>("kernel", c.scale.kernel);
  c.scale.dropout_rate = s.get_number_or<double>("dropout_rate", c.scale.dropout_rate);
  if (s.has("normalize_divisor")) c.scale.normalize_divisor = parse_normalize_divisor(s.get("normalize_divisor"));
  c.bp_hidden = s.get_number_or<std::size_t>("bp_hidden", c.bp_hidden);
  validate(c);
  return c;
}

enum class ModelFamily { cnn, bp };

inline ModelFamily parse_model_family(std::string_view text) {
  if (text == "cnn") return ModelFamily::cnn;
  if (text == "bp") return ModelFamily::bp;
  throw ConfigError("model must be cnn or bp, got '" + std::string(text) + "'");
}

inline ModelSpec build_model(ModelFamily family, const TrainConfig& c) {
  ModelSpec spec = family == ModelFamily::cnn ? build_cnn_scaled(c.scale) : build_bp(c.scale.input_length, c.bp_hidden);
  spec.normalize_divisor = c.scale.normalize_divisor;
  return spec;
}

// ---------------------------------------------------------------------------
// Training

/// FNV-1a over labels, tool ids and feature bits.
inline std::string data_fingerprint(const std::vector<LabeledSample>& samples) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ULL;
  };
  for (const auto& s : samples) {
    mix(s.tool_id.data(), s.tool_id.size());
    mix(&s.label, sizeof s.label);
    mix(&s.window_time, sizeof s.window_time);
    mix(&s.valid_length, sizeof s.valid_length);
    mix(s.features.data(), s.features.size() * sizeof(double));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Mean and spread of the real (unpadded) feature values of `samples`.
inline NormalizationStats fit_sample_normalization(const std::vector<LabeledSample>& samples) {
  std::vector<double> pooled;
  for (const auto& s : samples) pooled.insert(pooled.end(), s.features.begin(), s.features.begin() + s.valid_length);
  return fit_normalization(pooled);
}

/// Writes sample `s` normalized into row `row` of x [batch, L, 1]; padding stays 0.
inline void load_sample(Tensor& x, std::size_t row, const LabeledSample& s, const NormalizationStats& stats,
                        NormalizeDivisor divisor) {
  const std::size_t length = x.extent(1);
  if (s.features.size() != length)
    throw ShapeError("sample has " + std::to_string(s.features.size()) + " features, model expects " +
                     std::to_string(length));
  double* dst = x.data().data() + row * length;
  for (std::size_t i = 0; i < length; ++i) dst[i] = i < s.valid_length ? normalize_value(s.features[i], stats, divisor) : 0.0;
}

struct TrainContext {
  std::vector<std::string> train_tools;
  std::string test_tool;
  std::uint32_t sample_rate_hz = kDefaultSampleRateHz;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_curve;
};

inline TrainResult train(const ModelSpec& spec, const std::vector<LabeledSample>& samples, const TrainConfig& config,
                         const TrainContext& context = {}) {
  validate(config);
  if (samples.empty()) throw ConfigError("train set is empty");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int label = samples[i].label;
    if (label != 0 && label != 1) throw ConfigError("labels must be 0 or 1");
    by_class[label].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty())
    throw ConfigError("train set holds a single class; both normal and breakage samples are required");

  TrainingMetadata meta;
  meta.iterations = config.iterations;
  meta.batch_size = config.batch_size;
  meta.seed = config.seed;
  meta.data_fingerprint = data_fingerprint(samples);
  meta.normalization = fit_sample_normalization(samples);
  meta.sample_rate_hz = context.sample_rate_hz;
  meta.sample_mode = std::string(to_string(config.sample_mode));
  meta.train_tools = context.train_tools.empty() ? tool_ids(samples) : context.train_tools;
  meta.test_tool = context.test_tool;
  meta.validation_fraction = config.validation_fraction;

  Model model(spec, config.seed);
  OptimizerState opt;
  opt.kind = optimizer_for(config, spec.kind);
  opt.learning_rate = config.learning_rate;
  Rng batch_rng = Rng(config.seed).split(Stream::batch);

  auto params = model.parameters();
  std::vector<Tensor*> values;
  for (auto* p : params) values.push_back(&p->value);

  TrainResult result;
  result.loss_curve.reserve(config.iterations);
  Tensor x({config.batch_size, spec.input_length, spec.input_channels});
  std::vector<int> labels(config.batch_size);
  for (std::uint64_t it = 0; it < config.iterations; ++it) {
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      std::size_t idx;
      if (config.balanced) {
        const auto& pool = by_class[batch_rng.uniform_index(2)];
        idx = pool[batch_rng.uniform_index(pool.size())];
      } else {
        idx = batch_rng.uniform_index(samples.size());
      }
      load_sample(x, b, samples[idx], meta.normalization, spec.normalize_divisor);
      labels[b] = samples[idx].label;
    }
    const Tensor logits = model.forward(x, Mode::train);
    auto xent = softmax_xent(logits, labels);
    model.backward(xent.grad);
    std::vector<const Tensor*> grads;
    for (auto* p : params) grads.push_back(&p->grad);
    optimizer_step(values, grads, opt);
    result.loss_curve.push_back(xent.loss);
  }
  result.checkpoint = make_checkpoint(model, opt, meta);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Prediction {
  std::string tool_id;
  std::size_t window_time = 0;
  int label = 0;
  int predicted = 0;
  /// Softmax probability of breakage.
  double score = 0.0;
};

struct EvalReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  /// Recall of class 0 / class 1; empty when the class does not occur.
  std::optional<double> class_accuracy[2];
  /// confusion[true][predicted].
  std::uint64_t confusion[2][2] = {{0, 0}, {0, 0}};
  /// First predicted breakage index minus first true breakage index, in windows.
  std::optional<long long> detection_latency;
  std::vector<Prediction> predictions;
};

inline EvalReport summarize(std::vector<Prediction> predictions) {
  EvalReport r;
  r.samples = predictions.size();
  std::optional<std::size_t> first_true, first_pred;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    ++r.confusion[p.label][p.predicted];
    correct += p.label == p.predicted;
    if (p.label == 1 && !first_true) first_true = i;
    if (p.predicted == 1 && !first_pred) first_pred = i;
  }
  if (r.samples > 0) r.accuracy = static_cast<double>(correct) / static_cast<double>(r.samples);
  for (int c = 0; c < 2; ++c) {
    const auto n = r.confusion[c][0] + r.confusion[c][1];
    if (n > 0) r.class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(n);
  }
  if (first_true && first_pred)
    r.detection_latency = static_cast<long long>(*first_pred) - static_cast<long long>(*first_true);
  r.predictions = std::move(predictions);
  return r;
}

/// Scores one normalized-on-the-fly sample with batch size 1.
class Scorer {
 public:
  explicit Scorer(const Checkpoint& c) : model_(restore_model(c)), stats_(c.metadata.normalization) {}

  double score(const LabeledSample& s) {
    Tensor x({1, model_.spec().input_length, model_.spec().input_channels});
    load_sample(x, 0, s, stats_, model_.spec().normalize_divisor);
    return softmax(model_.forward(x, Mode::eval))[1];
  }

  const ModelSpec& spec() const noexcept { return model_.spec(); }

 private:
  Model model_;
  NormalizationStats stats_;
};

inline int verdict(double score) { return score > 0.5 ? 1 : 0; }

/// Sequential batch-1 evaluation in sample order; batchnorm uses running
/// statistics and dropout is off.
inline EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw ConfigError("evaluate needs at least one sample");
  Scorer scorer(checkpoint);
  std::vector<Prediction> preds;
  for (const auto& s : samples) {
    const double p = scorer.score(s);
    preds.push_back({s.tool_id, s.window_time, s.label, verdict(p), p});
  }
  return summarize(std::move(preds));
}

// ---------------------------------------------------------------------------
// Whole protocol

struct ProtocolReport {
  std::string model_name;
  TrainConfig config;
  std::vector<double> loss_curve;
  EvalReport train, validation, test;
};

struct ProtocolRun {
  TrainResult trained;
  ProtocolReport report;
};

inline std::string model_display_name(ModelKind k) { return is_cnn(k) ? "CNN" : "BP"; }

/// Split, train on train, evaluate all three partitions.
inline ProtocolRun run_protocol(const ModelSpec& spec, const std::vector<LabeledSample>& samples,
                                const TrainConfig& config, std::uint32_t sample_rate_hz = kDefaultSampleRateHz) {
  const auto plan = make_split_plan(samples, config.test_tool, config.validation_fraction);
  const auto part = split(samples, plan);
  ProtocolRun run;
  run.trained = train(spec, part.train, config, {plan.train_tools, plan.test_tool, sample_rate_hz});
  auto& r = run.report;
  r.model_name = model_display_name(spec.kind);
  r.config = config;
  r.loss_curve = run.trained.loss_curve;
  r.train = evaluate(run.trained.checkpoint, part.train);
  if (!part.validation.empty()) r.validation = evaluate(run.trained.checkpoint, part.validation);
  r.test = evaluate(run.trained.checkpoint, part.test);
  return run;
}

inline std::string fixed3(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << x;
  return s.str();
}

inline std::string optional_fixed3(const std::optional<double>& x) { return x ? fixed3(*x) : "n/a"; }

/// Table laid out like the CNN/BP performance table: one column per report.
inline std::string summary_table(const std::vector<ProtocolReport>& reports) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto row = [&](std::string name, auto cell) {
    std::vector<std::string> cells;
    for (const auto& r : reports) cells.push_back(cell(r));
    rows.emplace_back(std::move(name), std::move(cells));
  };
  row("Model", [](const ProtocolReport& r) { return r.model_name; });
  row("Number of iterations", [](const ProtocolReport& r) { return std::to_string(r.config.iterations); });
  row("Size of mini-batch", [](const ProtocolReport& r) {
    return std::to_string(r.config.batch_size) + "/" + std::to_string(r.config.test_batch_size);
  });
  row("Train accuracy", [](const ProtocolReport& r) { return fixed3(r.train.accuracy); });
  row("Validation accuracy",
      [](const ProtocolReport& r) { return r.validation.samples ? fixed3(r.validation.accuracy) : std::string("n/a"); });
  row("Test accuracy", [](const ProtocolReport& r) { return fixed3(r.test.accuracy); });
  row("Test normal accuracy", [](const ProtocolReport& r) { return optional_fixed3(r.test.class_accuracy[0]); });
  row("Test breakage accuracy", [](const ProtocolReport& r) { return optional_fixed3(r.test.class_accuracy[1]); });
  row("Detection latency (windows)", [](const ProtocolReport& r) {
    return r.test.detection_latency ? std::to_string(*r.test.detection_latency) : std::string("n/a");
  });
  std::size_t name_w = 0;
  for (const auto& [n, c] : rows) name_w = std::max(name_w, n.size());
  std::ostringstream out;
  for (const auto& [n, cells] : rows) {
    out << std::left << std::setw(static_cast<int>(name_w) + 2) << n;
    for (const auto& c : cells) out << std::left << std::setw(10) << c;
    out << "\n";
  }
  std::string s = out.str();
  // drop trailing pad spaces
  std::string trimmed;
  std::istringstream lines(s);
  for (std::string line; std::getline(lines, line);) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    trimmed += line + "\n";
  }
  return trimmed;
}

inline void write_loss_curve(const std::vector<double>& curve, std::ostream& out) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    nlohmann::ordered_json j;
    j["iteration"] = i + 1;
    j["loss"] = curve[i];
    out << j.dump() << "\n";
  }
}

inline void write_predictions(const EvalReport& r, const std::string& partition, std::ostream& out) {
  for (const auto& p : r.predictions) {
    nlohmann::ordered_json j;
    j["partition"] = partition;
    j["tool_id"] = p.tool_id;
    j["window_index"] = p.window_time;
    j["label"] = p.label;
    j["prediction"] = p.predicted;
    j["score"] = p.score;
    out << j.dump() << "\n";
  }
}

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["accuracy"] = r.accuracy;
  for (int c = 0; c < 2; ++c) {
    const std::string key = c == 0 ? "normal_accuracy" : "breakage_accuracy";
    j[key] = r.class_accuracy[c] ? nlohmann::ordered_json(*r.class_accuracy[c]) : nlohmann::ordered_json(nullptr);
  }
  j["confusion"] = {{r.confusion[0][0], r.confusion[0][1]}, {r.confusion[1][0], r.confusion[1][1]}};
  j["detection_latency"] =
      r.detection_latency ? nlohmann::ordered_json(*r.detection_latency) : nlohmann::ordered_json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// CNN versus BP

/// Mean over the last `last` steps of the standard deviation inside a
/// `window`-step moving window; lower is smoother.
inline double loss_roughness(const std::vector<double>& curve, std::size_t last = 500, std::size_t window = 50) {
  if (curve.size() < window || window < 2) return 0.0;
  const std::size_t begin = curve.size() > last ? curve.size() - last : 0;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t end = std::max(begin + window, window); end <= curve.size(); ++end) {
    acc += std::sqrt(variance(std::span<const double>(curve.data() + end - window, window)));
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

struct AccuracyStats {
  double mean = 0.0, min = 0.0, max = 0.0, std_dev = 0.0;
};

/// Population statistics of `xs`.
inline AccuracyStats accuracy_stats(const std::vector<double>& xs) {
  if (xs.empty()) throw DomainError("accuracy_stats: no runs");
  AccuracyStats s;
  s.mean = arithmetic_mean(xs);
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  s.std_dev = xs.size() > 1 ? std::sqrt(variance(xs)) : 0.0;
  return s;
}

struct BenchmarkConfig {
  std::uint64_t master_seed = 42;
  int tools = 5;
  int runs = 5;
  ToolLifeProfile profile;
  TrainConfig train;
};

struct BenchmarkRun {
  std::string model_name;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::optional<long long> detection_latency;
  double final_loss = 0.0;
  double roughness = 0.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRun> runs;
  AccuracyStats cnn, bp;
  double cnn_roughness = 0.0, bp_roughness = 0.0;
};

/// Seed for run r; shared by the CNN and BP run of the same index.
inline std::uint64_t benchmark_run_seed(std::uint64_t master_seed, int run) {
  return derive_seed(master_seed, 0x6265'6e63'6800ULL + static_cast<std::uint64_t>(run));
}

inline double tail_mean(const std::vector<double>& xs, std::size_t n) {
  n = std::min(n, xs.size());
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = xs.size() - n; i < xs.size(); ++i) acc += xs[i];
  return acc / static_cast<double>(n);
}

/// Runs `runs` seeded train/evaluate cycles of the scaled CNN and BP on one
/// synthetic dataset. `samples` may be supplied to skip regeneration.
inline BenchmarkReport benchmark_compare(const BenchmarkConfig& cfg, const std::vector<LabeledSample>* samples = nullptr,
                                         std::ostream* progress = nullptr) {
  std::vector<LabeledSample> owned;
  if (!samples) {
    const auto manifest = plan_dataset(cfg.tools, cfg.master_seed, cfg.profile);
    owned = assemble_samples(featurize_generated(manifest), manifest, cfg.train.scale.input_length, cfg.train.sample_mode);
    samples = &owned;
  }
  BenchmarkReport report;
  std::vector<double> acc[2], rough[2];
  for (ModelFamily family : {ModelFamily::cnn, ModelFamily::bp}) {
    const auto spec = build_model(family, cfg.train);
    for (int r = 0; r < cfg.runs; ++r) {
      TrainConfig tc = cfg.train;
      tc.seed = benchmark_run_seed(cfg.master_seed, r);
      const auto run = run_protocol(spec, *samples, tc, cfg.profile.sample_rate_hz);
      BenchmarkRun b;
      b.model_name = run.report.model_name;
      b.seed = tc.seed;
      b.train_accuracy = run.report.train.accuracy;
      b.validation_accuracy = run.report.validation.accuracy;
      b.test_accuracy = run.report.test.accuracy;
      b.detection_latency = run.report.test.detection_latency;
      b.final_loss = tail_mean(run.report.loss_curve, 100);
      b.roughness = loss_roughness(run.report.loss_curve);
      const int k = family == ModelFamily::cnn ? 0 : 1;
      acc[k].push_back(b.test_accuracy);
      rough[k].push_back(b.roughness);
      if (progress)
        *progress << b.model_name << " run " << r << " test_accuracy=" << fixed3(b.test_accuracy) << "\n" << std::flush;
      report.runs.push_back(b);
    }
  }
  report.cnn = accuracy_stats(acc[0]);
  report.bp = accuracy_stats(acc[1]);
  report.cnn_roughness = arithmetic_mean(rough[0]);
  report.bp_roughness = arithmetic_mean(rough[1]);
  return report;
}

inline std::string benchmark_text(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "model run seed train_acc val_acc test_acc latency final_loss roughness\n";
  int idx = 0;
  std::string last;
  for (const auto& b : r.runs) {
    if (b.model_name != last) idx = 0, last = b.model_name;
    out << b.model_name << " " << idx++ << " " << b.seed << " " << fixed3(b.train_accuracy) << " "
        << fixed3(b.validation_accuracy) << " " << fixed3(b.test_accuracy) << " "
        << (b.detection_latency ? std::to_string(*b.detection_latency) : "n/a") << " " << fixed3(b.final_loss) << " "
        << fixed3(b.roughness) << "\n";
  }
  out << "\nmodel mean min max std roughness\n";
  out << "CNN " << fixed3(r.cnn.mean) << " " << fixed3(r.cnn.min) << " " << fixed3(r.cnn.max) << " "
      << fixed3(r.cnn.std_dev) << " " << fixed3(r.cnn_roughness) << "\n";
  out << "BP " << fixed3(r.bp.mean) << " " << fixed3(r.bp.min) << " " << fixed3(r.bp.max) << " "
      << fixed3(r.bp.std_dev) << " " << fixed3(r.bp_roughness) << "\n";
  return out.str();
}

}  // namespace toolbreak

#endif
