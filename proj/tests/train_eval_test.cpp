#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "toolbreak/train_eval.hpp"

using namespace toolbreak;

namespace {

FeatureSeries fake_series(const std::string& id, std::size_t minutes, double breakage_start) {
  FeatureSeries s;
  s.tool_id = id;
  for (std::size_t i = 0; i < minutes * 60; ++i) {
    const double t = static_cast<double>(i) / 60.0;
    FeatureVector v;
    v.mean_abs = 5.0 + 0.01 * t + (t >= breakage_start ? 6.0 : 0.0) + 0.1 * std::sin(0.7 * i);
    s.values.push_back(v);
  }
  return s;
}

std::vector<LabeledSample> fake_samples(std::size_t tools, std::size_t minutes, std::size_t input_length,
                                        SampleMode mode = SampleMode::sliding) {
  std::vector<LabeledSample> out;
  for (std::size_t k = 0; k < tools; ++k) {
    const double start = static_cast<double>(minutes) - 3.0;
    auto part = assemble_tool_samples(fake_series("tool_" + std::to_string(k), minutes, start),
                                      {start, static_cast<double>(minutes)}, input_length, mode);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

/// Small, fast config used wherever the protocol itself is under test.
TrainConfig quick_config() {
  TrainConfig c;
  c.iterations = 40;
  c.scale.input_length = 64;
  c.scale.filters = {2, 2, 2};
  c.scale.dense_units = 4;
  c.bp_hidden = 8;
  return c;
}

/// BP whose every weight is zero: logits equal the output bias.
Checkpoint constant_checkpoint(std::size_t input_length, double logit0, double logit1) {
  Model m(build_bp(input_length, 2), 1);
  for (auto* p : m.parameters()) p->value.fill(0.0);
  m.parameters().back()->value[0] = logit0;
  m.parameters().back()->value[1] = logit1;
  TrainingMetadata meta;
  meta.normalization = {0.0, 1.0};
  meta.sample_mode = "sliding";
  return make_checkpoint(m, OptimizerState{}, meta);
}

}  // namespace

TEST(Assemble, PrefixCountsAndPadding) {
  const auto samples = assemble_tool_samples(fake_series("t", 55, 52), {52, 55}, 7200, SampleMode::prefix);
  ASSERT_EQ(samples.size(), 55u);
  EXPECT_EQ(samples[0].valid_length, 60u);
  EXPECT_EQ(samples[0].features.size(), 7200u);
  EXPECT_TRUE(std::all_of(samples[0].features.begin() + 60, samples[0].features.end(), [](double v) { return v == 0; }));
  EXPECT_NE(samples[0].features[59], 0.0);
  EXPECT_EQ(samples[54].valid_length, 3300u);
  for (std::size_t m = 0; m < 55; ++m) {
    EXPECT_EQ(samples[m].window_time, m);
    EXPECT_EQ(samples[m].label, m >= 52 ? 1 : 0);
  }
}

TEST(Assemble, PrefixOverflowNamesTheFix) {
  try {
    assemble_tool_samples(fake_series("t", 5, 4), {4, 5}, 240, SampleMode::prefix);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("input_length"), std::string::npos);
  }
}

TEST(Assemble, SlidingKeepsMostRecent) {
  const auto series = fake_series("t", 6, 5);
  const auto samples = assemble_tool_samples(series, {5, 6}, 240, SampleMode::sliding);
  ASSERT_EQ(samples.size(), 6u);
  EXPECT_EQ(samples[1].valid_length, 120u);
  EXPECT_EQ(samples[5].valid_length, 240u);
  EXPECT_EQ(samples[5].features[0], series.values[120].mean_abs);
  EXPECT_EQ(samples[5].features[239], series.values[359].mean_abs);
}

TEST(Assemble, BreakageFractionOnSyntheticManifest) {
  const auto m = plan_dataset(5, 42);
  std::vector<FeatureSeries> series;
  for (const auto& t : m.tools) series.push_back(fake_series(t.tool_id, machining_minutes(t.profile), 0));
  const auto samples = assemble_samples(series, m, 240, SampleMode::sliding);
  const auto pos = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label == 1; });
  const double fraction = static_cast<double>(pos) / static_cast<double>(samples.size());
  EXPECT_GE(fraction, 0.05);
  EXPECT_LE(fraction, 0.10);
}

TEST(Split, CountsAndDisjointTest) {
  const auto samples = fake_samples(5, 55, 64);
  const auto plan = make_split_plan(samples);
  EXPECT_EQ(plan.test_tool, "tool_4");
  const auto part = split(samples, plan);
  EXPECT_EQ(part.test.size(), 55u);
  EXPECT_EQ(part.train.size() + part.validation.size(), 220u);
  EXPECT_EQ(part.validation.size(), 22u);
  for (const auto& s : part.test) EXPECT_EQ(s.tool_id, "tool_4");
  for (const auto* p : {&part.train, &part.validation})
    for (const auto& s : *p) EXPECT_NE(s.tool_id, "tool_4");
  // validation is the trailing time block of the last train tool
  EXPECT_EQ(part.validation.front().tool_id, "tool_3");
  EXPECT_EQ(part.validation.front().window_time, 33u);
  EXPECT_EQ(part.validation.back().window_time, 54u);
  // every train tool keeps some breakage windows in train
  std::set<std::string> with_positive;
  for (const auto& s : part.train)
    if (s.label) with_positive.insert(s.tool_id);
  EXPECT_EQ(with_positive.size(), 3u);
}

TEST(Split, DeterministicAndErrors) {
  const auto samples = fake_samples(3, 10, 64);
  const auto plan = make_split_plan(samples, "tool_0", 0.2);
  const auto a = split(samples, plan), b = split(samples, plan);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  EXPECT_THROW(make_split_plan(fake_samples(1, 10, 64)), ConfigError);
  EXPECT_THROW(make_split_plan(samples, "tool_9"), ConfigError);
  SplitPlan overlap{{"tool_0", "tool_1"}, "tool_1", 0.1};
  EXPECT_THROW(split(samples, overlap), ConfigError);
}

TEST(Config, DefaultsMatchProtocol) {
  const TrainConfig c;
  EXPECT_EQ(c.iterations, 2400u);
  EXPECT_EQ(c.batch_size, 20u);
  EXPECT_EQ(c.test_batch_size, 1u);
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.validation_fraction, 0.1);
  EXPECT_FALSE(c.balanced);
  EXPECT_EQ(optimizer_for(c, ModelKind::cnn_scaled), OptimizerKind::adam);
  EXPECT_EQ(optimizer_for(c, ModelKind::bp_scaled), OptimizerKind::gd);
  EXPECT_EQ(build_model(ModelFamily::cnn, c).init_std, 0.01);
}

TEST(Config, TextRoundTripAndErrors) {
  auto c = quick_config();
  c.optimizer = OptimizerKind::gd;
  c.balanced = true;
  c.test_tool = "tool_2";
  KvSection s;
  write_train_config(c, s);
  EXPECT_EQ(read_train_config(s), c);
  KvSection typo;
  typo.set("iteration", std::uint64_t{5});
  EXPECT_THROW(read_train_config(typo), ConfigError);
  KvSection zero;
  zero.set("learning_rate", 0.0);
  EXPECT_THROW(read_train_config(zero), ConfigError);
  KvSection batch;
  batch.set("test_batch_size", std::uint64_t{4});
  EXPECT_THROW(read_train_config(batch), ConfigError);
}

TEST(Train, SingleClassRejected) {
  auto samples = fake_samples(2, 10, 64);
  for (auto& s : samples) s.label = 0;
  EXPECT_THROW(train(build_model(ModelFamily::bp, quick_config()), samples, quick_config()), ConfigError);
}

TEST(Train, SameSeedSameCurve) {
  const auto samples = fake_samples(3, 10, 64);
  const auto cfg = quick_config();
  const auto spec = build_model(ModelFamily::cnn, cfg);
  const auto a = train(spec, samples, cfg), b = train(spec, samples, cfg);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(a.checkpoint, b.checkpoint);
  EXPECT_EQ(a.loss_curve.size(), cfg.iterations);
  auto other = cfg;
  other.seed = 1;
  EXPECT_NE(train(spec, samples, other).loss_curve, a.loss_curve);
}

TEST(Train, NormalizationFitOnTrainOnly) {
  auto samples = fake_samples(3, 10, 64);
  auto cfg = quick_config();
  const auto spec = build_model(ModelFamily::bp, cfg);
  const auto a = run_protocol(spec, samples, cfg);
  for (auto& s : samples)
    if (s.tool_id == "tool_2")
      for (auto& v : s.features) v *= 100;
  const auto b = run_protocol(spec, samples, cfg);
  EXPECT_EQ(a.trained.checkpoint, b.trained.checkpoint);
  const auto part = split(samples, make_split_plan(samples));
  EXPECT_EQ(a.trained.checkpoint.metadata.normalization, fit_sample_normalization(part.train));
}

TEST(Train, CnnLossFallsOnSyntheticData) {
  auto profile = ToolLifeProfile{};
  profile.sample_rate_hz = 1000;
  const auto m = plan_dataset(5, 42, profile);
  const auto samples = assemble_samples(featurize_generated(m), m, 240, SampleMode::sliding);
  TrainConfig cfg;
  const auto run = run_protocol(build_model(ModelFamily::cnn, cfg), samples, cfg, profile.sample_rate_hz);
  const auto& c = run.report.loss_curve;
  const double first = std::accumulate(c.begin(), c.begin() + 100, 0.0) / 100;
  const double last = std::accumulate(c.end() - 100, c.end(), 0.0) / 100;
  EXPECT_LT(last, 0.1 * first);
}

TEST(Evaluate, AllNormalPredictor) {
  // 10 samples, 1 positive
  auto samples = fake_samples(1, 10, 64);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].label = i == 9 ? 1 : 0;
  const auto r = evaluate(constant_checkpoint(64, 2.0, 0.0), samples);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.9);
  EXPECT_EQ(*r.class_accuracy[1], 0.0);
  EXPECT_EQ(*r.class_accuracy[0], 1.0);
  EXPECT_FALSE(r.detection_latency.has_value());
  EXPECT_EQ(r.confusion[0][0] + r.confusion[0][1] + r.confusion[1][0] + r.confusion[1][1], 10u);
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(r.predictions[i].label, samples[i].label);
}

TEST(Evaluate, MajorityPredictorEqualsMajorityFraction) {
  const auto samples = fake_samples(3, 17, 64);
  const auto normals = std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label == 0; });
  const auto r = evaluate(constant_checkpoint(64, 1.0, -1.0), samples);
  EXPECT_EQ(r.accuracy, static_cast<double>(normals) / static_cast<double>(samples.size()));
}

TEST(Evaluate, PerfectPredictor) {
  std::vector<Prediction> preds;
  for (int i = 0; i < 8; ++i) preds.push_back({"t", std::size_t(i), i >= 6, i >= 6, i >= 6 ? 0.9 : 0.1});
  const auto r = summarize(preds);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(*r.detection_latency, 0);
  preds[5].predicted = 1;
  EXPECT_EQ(*summarize(preds).detection_latency, -1);
}

TEST(Evaluate, PureFunction) {
  const auto samples = fake_samples(2, 8, 64);
  const auto cfg = quick_config();
  const auto trained = train(build_model(ModelFamily::cnn, cfg), samples, cfg);
  const auto a = evaluate(trained.checkpoint, samples), b = evaluate(trained.checkpoint, samples);
  ASSERT_EQ(a.predictions.size(), b.predictions.size());
  for (std::size_t i = 0; i < a.predictions.size(); ++i) EXPECT_EQ(a.predictions[i].score, b.predictions[i].score);
  EXPECT_THROW(evaluate(trained.checkpoint, {}), ConfigError);
}

TEST(Report, SummaryTableRows) {
  const auto samples = fake_samples(3, 10, 64);
  const auto cfg = quick_config();
  const auto run = run_protocol(build_model(ModelFamily::bp, cfg), samples, cfg);
  const auto table = summary_table({run.report});
  for (const char* row : {"Number of iterations", "Size of mini-batch", "Train accuracy", "Validation accuracy",
                          "Test accuracy"})
    EXPECT_NE(table.find(row), std::string::npos) << row;
  EXPECT_NE(table.find("40"), std::string::npos);
  EXPECT_NE(table.find("20/1"), std::string::npos);
  std::ostringstream loss;
  write_loss_curve(run.report.loss_curve, loss);
  const auto lines = loss.str();
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 40);
}

TEST(Stats, AccuracyAndRoughness) {
  const auto s = accuracy_stats({0.8, 0.9, 1.0});
  EXPECT_NEAR(s.mean, 0.9, 1e-15);
  EXPECT_EQ(s.min, 0.8);
  EXPECT_EQ(s.max, 1.0);
  EXPECT_NEAR(s.std_dev, std::sqrt(0.02 / 3), 1e-15);
  EXPECT_NEAR(loss_roughness(std::vector<double>(600, 0.3)), 0.0, 1e-12);
  std::vector<double> zigzag(600);
  for (std::size_t i = 0; i < zigzag.size(); ++i) zigzag[i] = i % 2 ? 1.0 : 0.0;
  EXPECT_NEAR(loss_roughness(zigzag), 0.5, 1e-12);
}

TEST(Benchmark, ReportsEveryRun) {
  BenchmarkConfig cfg;
  cfg.runs = 2;
  cfg.train = quick_config();
  const auto samples = fake_samples(3, 10, cfg.train.scale.input_length);
  const auto r = benchmark_compare(cfg, &samples);
  ASSERT_EQ(r.runs.size(), 4u);
  EXPECT_EQ(r.runs[0].model_name, "CNN");
  EXPECT_EQ(r.runs[3].model_name, "BP");
  EXPECT_EQ(r.runs[0].seed, r.runs[2].seed);
  EXPECT_NE(r.runs[0].seed, r.runs[1].seed);
  const auto text = benchmark_text(r);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 4 + 1 + 1 + 2);
}
