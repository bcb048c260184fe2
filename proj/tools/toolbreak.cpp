// toolbreak: generate, featurize, train, evaluate and monitor.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "toolbreak/checkpoint.hpp"
#include "toolbreak/monitor.hpp"
#include "toolbreak/signal_io.hpp"
#include "toolbreak/time_features.hpp"
#include "toolbreak/train_eval.hpp"
#include "toolbreak/wear_synth.hpp"

namespace fs = std::filesystem;
using namespace toolbreak;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

KvSection read_key_values(const fs::path& path) {
  auto doc = KvDocument::parse(slurp(path));
  if (!doc.sections.empty()) throw ConfigError("'" + path.string() + "' must hold plain key=value lines");
  return doc.header;
}

ToolLifeProfile load_profile(const std::string& path) {
  if (path.empty()) return {};
  static const std::set<std::string> known{
      "life_minutes", "breakage_start_min", "breakage_end_min", "base_amplitude", "wear_slope",
      "noise_std",    "spindle_hz",         "sample_rate_hz",   "burst_factor",   "dip_minutes",
      "dip_depth",    "reset_interval_min", "reset_seconds",    "phase"};
  const auto kv = read_key_values(path);
  for (const auto& [k, v] : kv.entries)
    if (!known.contains(k)) throw ConfigError("unknown profile key '" + k + "'");
  auto p = read_profile(kv);
  validate(p);
  return p;
}

TrainConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return read_train_config(read_key_values(path));
}

/// One-second series per manifest tool. A `<tool_id>.features.jsonl` file in
/// `dir` takes precedence over the tool's trace.
std::vector<FeatureSeries> load_series(const SynthDatasetManifest& m, const fs::path& dir) {
  std::vector<FeatureSeries> out;
  for (const auto& t : m.tools) {
    const auto feature_file = dir / (t.tool_id + ".features.jsonl");
    if (fs::exists(feature_file)) {
      auto s = read_feature_file(feature_file, t.tool_id);
      if (s.span != Span::one_second) throw ConfigError("'" + feature_file.string() + "' must use the 1s span");
      out.push_back(std::move(s));
    } else {
      auto trace = read_trace(dir / t.file);
      trace.tool_id = t.tool_id;
      out.push_back(extract_features(trim_non_machining(trace), Span::one_second));
    }
  }
  return out;
}

std::uint32_t dataset_rate(const SynthDatasetManifest& m) {
  const auto rate = m.tools.front().profile.sample_rate_hz;
  for (const auto& t : m.tools)
    if (t.profile.sample_rate_hz != rate) throw ConfigError("tools in the dataset use different sample rates");
  return rate;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  int tools = 5;
  std::uint64_t seed = 0;
  std::string out, profile;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.tools < 2) throw UsageError("--tools must be at least 2 (one tool is held out for testing)");
  const auto m = generate_dataset(a.tools, a.seed, a.out, load_profile(a.profile));
  for (const auto& t : m.tools) std::cout << (fs::path(a.out) / t.file).string() << "\n";
  std::cout << (fs::path(a.out) / kManifestFile).string() << "\n";
  return 0;
}

struct FeaturesArgs {
  std::string in, span = "1s", out;
  bool keep_resets = false;
};

int cmd_features(const FeaturesArgs& a) {
  const auto span = parse_span(a.span);
  if (!span) throw UsageError("--span must be 1s or 1m");
  auto trace = read_trace(a.in);
  if (!a.keep_resets) trace = trim_non_machining(trace);
  write_feature_file(extract_features(trace, *span), a.out);
  return 0;
}

struct ConvertArgs {
  std::string in, out, format = "csv";
};

int cmd_convert(const ConvertArgs& a) {
  if (a.format != "csv" && a.format != "binary") throw UsageError("--format must be csv or binary");
  write_trace(read_trace(a.in), a.out, a.format == "csv" ? TraceFormat::csv : TraceFormat::binary);
  return 0;
}

struct TrainArgs {
  std::string data, model = "cnn", config, out, loss_out, precision = "f64";
};

int cmd_train(const TrainArgs& a) {
  const auto family = parse_model_family(a.model);
  if (a.precision != "f64" && a.precision != "f32") throw UsageError("--precision must be f64 or f32");
  const auto cfg = load_config(a.config);
  const auto manifest = read_manifest(a.data);
  const auto samples = assemble_samples(load_series(manifest, a.data), manifest, cfg.scale.input_length, cfg.sample_mode);
  const auto spec = build_model(family, cfg);
  const auto run = run_protocol(spec, samples, cfg, dataset_rate(manifest));
  save_checkpoint(run.trained.checkpoint, a.out, a.precision == "f64" ? StoragePrecision::f64 : StoragePrecision::f32);
  if (!a.loss_out.empty()) {
    auto out = open_out(a.loss_out);
    write_loss_curve(run.report.loss_curve, out);
  }
  std::cout << summary_table({run.report});
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, predictions_out, json_out;
};

int cmd_eval(const EvalArgs& a) {
  const auto c = load_checkpoint(a.ckpt);
  const auto manifest = read_manifest(a.data);
  const auto samples = assemble_samples(load_series(manifest, a.data), manifest, c.spec.input_length,
                                        parse_sample_mode(c.metadata.sample_mode));
  SplitPlan plan{c.metadata.train_tools, c.metadata.test_tool, c.metadata.validation_fraction};
  if (plan.test_tool.empty()) plan = make_split_plan(samples, {}, c.metadata.validation_fraction);
  const auto part = split(samples, plan);
  if (data_fingerprint(part.train) != c.metadata.data_fingerprint)
    std::cerr << "warning: train partition differs from the data the checkpoint was trained on\n";

  ProtocolReport r;
  r.model_name = model_display_name(c.spec.kind);
  r.config.iterations = c.metadata.iterations;
  r.config.batch_size = c.metadata.batch_size;
  r.train = evaluate(c, part.train);
  if (!part.validation.empty()) r.validation = evaluate(c, part.validation);
  r.test = evaluate(c, part.test);
  std::cout << summary_table({r});

  if (!a.predictions_out.empty()) {
    auto out = open_out(a.predictions_out);
    write_predictions(r.train, "train", out);
    write_predictions(r.validation, "validation", out);
    write_predictions(r.test, "test", out);
  }
  if (!a.json_out.empty()) {
    nlohmann::ordered_json j;
    j["model"] = r.model_name;
    j["iterations"] = r.config.iterations;
    j["batch_size"] = r.config.batch_size;
    j["train"] = report_json(r.train);
    j["validation"] = report_json(r.validation);
    j["test"] = report_json(r.test);
    auto out = open_out(a.json_out);
    out << j.dump(2) << "\n";
  }
  return 0;
}

struct MonitorArgs {
  std::string ckpt, in = "-", alarm_out, timing_out, tool;
};

int cmd_monitor(const MonitorArgs& a) {
  const auto c = load_checkpoint(a.ckpt);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (a.in != "-") {
    file.open(a.in);
    if (!file) throw IoError("cannot open stream '" + a.in + "'");
    in = &file;
  }
  std::ofstream alarms, timing;
  MonitorSinks sinks{&std::cout, &std::cerr, nullptr};
  if (!a.alarm_out.empty()) {
    alarms = open_out(a.alarm_out);
    sinks.alarms = &alarms;
  }
  if (!a.timing_out.empty()) {
    timing = open_out(a.timing_out);
    sinks.timing = &timing;
  }
  const auto summary = run_monitor(c, *in, sinks, a.tool);
  std::cerr << summary.events.size() << " windows, " << summary.alarms << " alarms\n";
  return 0;
}

struct PlotArgs {
  std::string features, out;
};

int cmd_plot_data(const PlotArgs& a) {
  const auto series = read_feature_file(a.features);
  const std::size_t seconds = series.span == Span::one_second ? 1 : 60;
  auto out = open_out(a.out);
  out << "t,mean_abs,variance,p2p,mean_square\n";
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    const auto& v = series.values[i];
    out << i * seconds << ',' << format_double(v.mean_abs) << ',' << format_double(v.variance) << ','
        << format_double(v.peak_to_peak) << ',' << format_double(v.mean_square) << '\n';
  }
  if (!out) throw IoError("write failed for '" + a.out + "'");
  return 0;
}

struct BenchmarkArgs {
  std::uint64_t seed = 42;
  int runs = 5, tools = 5;
  std::string config, profile, out;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  if (a.runs < 1) throw UsageError("--runs must be positive");
  if (a.tools < 2) throw UsageError("--tools must be at least 2");
  BenchmarkConfig cfg;
  cfg.master_seed = a.seed;
  cfg.runs = a.runs;
  cfg.tools = a.tools;
  cfg.profile = load_profile(a.profile);
  cfg.train = load_config(a.config);
  const auto text = benchmark_text(benchmark_compare(cfg, nullptr, &std::cerr));
  if (a.out.empty()) {
    std::cout << text;
  } else {
    auto out = open_out(a.out);
    out << text;
  }
  return 0;
}

int cmd_config() {
  KvDocument doc;
  write_train_config(TrainConfig{}, doc.header);
  std::cout << doc.to_string();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tool breakage detection from spindle current"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a seeded synthetic dataset (traces + manifest)");
  g->add_option("--tools", gen.tools, "Number of tools")->capture_default_str();
  g->add_option("--seed", gen.seed, "Master seed")->required();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--profile", gen.profile, "key=value base profile overrides");

  FeaturesArgs feat;
  auto* f = app.add_subcommand("features", "Extract time-domain features from a trace");
  f->add_option("--in", feat.in, "Trace file (csv or binary)")->required();
  f->add_option("--span", feat.span, "Window span: 1s or 1m")->capture_default_str()->check(CLI::IsMember({"1s", "1m"}));
  f->add_option("--out", feat.out, "Output JSONL")->required();
  f->add_flag("--keep-resets", feat.keep_resets, "Do not drop reset/idle segments first");

  ConvertArgs conv;
  auto* cv = app.add_subcommand("convert", "Rewrite a trace as csv or binary");
  cv->add_option("--in", conv.in, "Input trace")->required();
  cv->add_option("--out", conv.out, "Output trace")->required();
  cv->add_option("--format", conv.format, "csv or binary")->capture_default_str()->check(CLI::IsMember({"csv", "binary"}));

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a CNN or BP model on a dataset directory");
  t->add_option("--data", tr.data, "Dataset directory with manifest.txt")->required();
  t->add_option("--model", tr.model, "cnn or bp")->capture_default_str()->check(CLI::IsMember({"cnn", "bp"}));
  t->add_option("--config", tr.config, "key=value training config");
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--loss-out", tr.loss_out, "Per-iteration loss JSONL");
  t->add_option("--precision", tr.precision, "Checkpoint storage: f64 or f32")->capture_default_str()->check(CLI::IsMember({"f64", "f32"}));

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on its train/validation/test partitions");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint path")->required();
  e->add_option("--data", ev.data, "Dataset directory with manifest.txt")->required();
  e->add_option("--predictions-out", ev.predictions_out, "Per-sample predictions JSONL");
  e->add_option("--json-out", ev.json_out, "Report as JSON");

  MonitorArgs mon;
  auto* m = app.add_subcommand("monitor", "Stream trace CSV rows and emit one verdict per minute");
  m->add_option("--ckpt", mon.ckpt, "Checkpoint path")->required();
  m->add_option("--in", mon.in, "Trace CSV stream, '-' for stdin")->capture_default_str();
  m->add_option("--alarm-out", mon.alarm_out, "Alarm lines (default stderr)");
  m->add_option("--timing-out", mon.timing_out, "Per-window emit latency JSONL");
  m->add_option("--tool", mon.tool, "Tool id for alarm lines");

  PlotArgs plot;
  auto* p = app.add_subcommand("plot-data", "Feature records to plot-ready CSV");
  p->add_option("--features", plot.features, "Feature JSONL")->required();
  p->add_option("--out", plot.out, "Output CSV")->required();

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "Seeded CNN versus BP comparison on synthetic data");
  b->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
  b->add_option("--runs", bench.runs, "Runs per model")->capture_default_str();
  b->add_option("--tools", bench.tools, "Synthetic tools")->capture_default_str();
  b->add_option("--config", bench.config, "key=value training config");
  b->add_option("--profile", bench.profile, "key=value base profile overrides");
  b->add_option("--out", bench.out, "Report path (default stdout)");

  auto* c = app.add_subcommand("config", "Print the default training config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (f->parsed()) return cmd_features(feat);
    if (cv->parsed()) return cmd_convert(conv);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev);
    if (m->parsed()) return cmd_monitor(mon);
    if (p->parsed()) return cmd_plot_data(plot);
    if (b->parsed()) return cmd_benchmark(bench);
    if (c->parsed()) return cmd_config();
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
