#ifndef TOOLBREAK_MODEL_HPP
#define TOOLBREAK_MODEL_HPP

// Declarative model specs (full-size CNN, BP baseline, scaled CNN), shape-chain
// validation, parameter counting, initialization and the runnable Model.

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "toolbreak/error.hpp"
#include "toolbreak/kv_text.hpp"
#include "toolbreak/layers.hpp"
#include "toolbreak/rng.hpp"
#include "toolbreak/tensor.hpp"
#include "toolbreak/time_features.hpp"

namespace toolbreak {

enum class LayerKind { conv1d, batchnorm, relu, maxpool1d, dropout, flatten, dense };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool1d: return "maxpool1d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view text) {
  for (auto k : {LayerKind::conv1d, LayerKind::batchnorm, LayerKind::relu, LayerKind::maxpool1d, LayerKind::dropout,
                 LayerKind::flatten, LayerKind::dense})
    if (to_string(k) == text) return k;
  throw ConfigError("unknown layer kind '" + std::string(text) + "'");
}

/// Geometry of one layer. Unused fields stay zero.
struct LayerDesc {
  LayerKind kind = LayerKind::relu;
  std::size_t kernel = 0;   // conv1d
  std::size_t stride = 1;   // conv1d
  Padding padding = Padding::same;
  std::size_t in = 0;       // conv1d channels, dense features
  std::size_t out = 0;      // conv1d channels, dense features
  std::size_t channels = 0; // batchnorm
  double rate = 0.0;        // dropout

  bool operator==(const LayerDesc&) const = default;
};

enum class ModelKind { cnn_full, bp_full, cnn_scaled, bp_scaled };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::cnn_full: return "cnn_full";
    case ModelKind::bp_full: return "bp_full";
    case ModelKind::cnn_scaled: return "cnn_scaled";
    case ModelKind::bp_scaled: return "bp_scaled";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::cnn_full, ModelKind::bp_full, ModelKind::cnn_scaled, ModelKind::bp_scaled})
    if (to_string(k) == text) return k;
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

inline bool is_cnn(ModelKind k) { return k == ModelKind::cnn_full || k == ModelKind::cnn_scaled; }

struct ModelSpec {
  ModelKind kind = ModelKind::cnn_scaled;
  std::size_t input_length = 0;
  std::size_t input_channels = 1;
  double init_std = 0.01;
  double dropout_rate = 0.5;
  NormalizeDivisor normalize_divisor = NormalizeDivisor::std_dev;
  std::vector<LayerDesc> layers;

  bool operator==(const ModelSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Canonical text form

inline std::string layer_to_text(const LayerDesc& d) {
  std::ostringstream s;
  s << to_string(d.kind);
  switch (d.kind) {
    case LayerKind::conv1d:
      s << " kernel=" << d.kernel << " in=" << d.in << " out=" << d.out << " stride=" << d.stride
        << " padding=" << (d.padding == Padding::same ? "same" : "valid");
      break;
    case LayerKind::batchnorm: s << " channels=" << d.channels; break;
    case LayerKind::dropout: s << " rate=" << format_double(d.rate); break;
    case LayerKind::dense: s << " in=" << d.in << " out=" << d.out; break;
    default: break;
  }
  return s.str();
}

inline LayerDesc layer_from_text(std::string_view text) {
  std::istringstream s{std::string(text)};
  std::string token;
  s >> token;
  LayerDesc d;
  d.kind = parse_layer_kind(token);
  while (s >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ConfigError("bad layer attribute '" + token + "'");
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    auto size = [&] {
      auto v = parse_number<std::size_t>(value);
      if (!v) throw ConfigError("bad value for layer attribute '" + key + "'");
      return *v;
    };
    if (key == "kernel") d.kernel = size();
    else if (key == "in") d.in = size();
    else if (key == "out") d.out = size();
    else if (key == "stride") d.stride = size();
    else if (key == "channels") d.channels = size();
    else if (key == "padding") {
      if (value == "same") d.padding = Padding::same;
      else if (value == "valid") d.padding = Padding::valid;
      else throw ConfigError("bad padding '" + value + "'");
    } else if (key == "rate") {
      auto v = parse_number<double>(value);
      if (!v) throw ConfigError("bad dropout rate");
      d.rate = *v;
    } else {
      throw ConfigError("unknown layer attribute '" + key + "'");
    }
  }
  return d;
}

inline void write_spec(const ModelSpec& spec, KvSection& out) {
  out.set("model_kind", std::string(to_string(spec.kind)));
  out.set("input_length", std::uint64_t{spec.input_length});
  out.set("input_channels", std::uint64_t{spec.input_channels});
  out.set("init_std", spec.init_std);
  out.set("dropout_rate", spec.dropout_rate);
  out.set("normalize_divisor", std::string(to_string(spec.normalize_divisor)));
  for (const auto& l : spec.layers) out.add("layer", layer_to_text(l));
}

inline ModelSpec read_spec(const KvSection& in) {
  ModelSpec spec;
  spec.kind = parse_model_kind(in.get("model_kind"));
  spec.input_length = in.get_number<std::size_t>("input_length");
  spec.input_channels = in.get_number<std::size_t>("input_channels");
  spec.init_std = in.get_number<double>("init_std");
  spec.dropout_rate = in.get_number<double>("dropout_rate");
  spec.normalize_divisor = parse_normalize_divisor(in.get("normalize_divisor"));
  for (const auto& text : in.all("layer")) spec.layers.push_back(layer_from_text(text));
  return spec;
}

// ---------------------------------------------------------------------------
// Shape chain and parameter count

/// Output shape (without the batch axis) of every layer, in order. Throws
/// ShapeError when adjacent layers disagree.
inline std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  if (spec.input_length == 0 || spec.input_channels == 0) throw ShapeError("model input extents must be positive");
  Shape cur{spec.input_length, spec.input_channels};
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& d = spec.layers[i];
    const std::string at = "layer " + std::to_string(i) + " (" + std::string(to_string(d.kind)) + "): ";
    switch (d.kind) {
      case LayerKind::conv1d:
        if (cur.size() != 2) throw ShapeError(at + "expects [length, channels] input");
        if (d.in != cur[1]) throw ShapeError(at + "declares " + std::to_string(d.in) + " input channels, receives " +
                                             std::to_string(cur[1]));
        if (d.kernel == 0 || d.out == 0) throw ShapeError(at + "kernel and output channels must be positive");
        if (d.padding == Padding::valid && d.kernel > cur[0]) throw ShapeError(at + "kernel longer than input");
        cur = {conv_output_length(cur[0], d.kernel, d.stride, d.padding), d.out};
        break;
      case LayerKind::batchnorm:
        if (d.channels != cur.back()) throw ShapeError(at + "declares " + std::to_string(d.channels) +
                                                       " channels, receives " + std::to_string(cur.back()));
        break;
      case LayerKind::maxpool1d:
        if (cur.size() != 2) throw ShapeError(at + "expects [length, channels] input");
        cur[0] = (cur[0] + 1) / 2;
        break;
      case LayerKind::flatten: cur = {shape_size(cur)}; break;
      case LayerKind::dense:
        if (cur.size() != 1) throw ShapeError(at + "expects flat input");
        if (d.in != cur[0]) throw ShapeError(at + "declares " + std::to_string(d.in) + " inputs, receives " +
                                             std::to_string(cur[0]));
        if (d.out == 0) throw ShapeError(at + "output width must be positive");
        cur = {d.out};
        break;
      case LayerKind::dropout:
        if (!(d.rate >= 0.0 && d.rate < 1.0)) throw ShapeError(at + "rate must be in [0, 1)");
        break;
      case LayerKind::relu: break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

inline std::uint64_t layer_parameter_count(const LayerDesc& d) {
  switch (d.kind) {
    case LayerKind::conv1d: return std::uint64_t{d.kernel} * d.in * d.out + d.out;
    case LayerKind::batchnorm: return 2ULL * d.channels;
    case LayerKind::dense: return std::uint64_t{d.in} * d.out + d.out;
    default: return 0;
  }
}

/// Trainable parameters (weights, biases, batchnorm gamma/beta). Running
/// statistics are buffers and are not counted.
inline std::uint64_t parameter_count(const ModelSpec& spec) {
  std::uint64_t n = 0;
  for (const auto& d : spec.layers) n += layer_parameter_count(d);
  return n;
}

// ---------------------------------------------------------------------------
// Builders

struct ScaleConfig {
  std::size_t input_length = 240;
  std::vector<std::size_t> filters{8, 16, 32};
  std::size_t dense_units = 64;
  std::size_t kernel = 5;
  double dropout_rate = 0.5;
  NormalizeDivisor normalize_divisor = NormalizeDivisor::std_dev;

  bool operator==(const ScaleConfig&) const = default;
};

inline ScaleConfig full_scale() {
  ScaleConfig c;
  c.input_length = 7200;
  c.filters = {128, 256, 512};
  c.dense_units = 1024;
  return c;
}

/// Three conv -> batchnorm -> relu -> maxpool blocks, dropout, flatten,
/// dense -> relu, dense -> 2 logits. A configuration equal to full_scale()
/// yields the cnn_full spec.
inline ModelSpec build_cnn_scaled(const ScaleConfig& cfg) {
  if (cfg.input_length == 0 || cfg.input_length % 8 != 0)
    throw ConfigError("scaled CNN input_length must be a positive multiple of 8, got " +
                      std::to_string(cfg.input_length));
  if (cfg.filters.size() != 3) throw ConfigError("scaled CNN needs exactly 3 filter counts");
  for (auto f : cfg.filters)
    if (f == 0) throw ConfigError("filter counts must be positive");
  if (cfg.dense_units == 0 || cfg.kernel == 0) throw ConfigError("dense_units and kernel must be positive");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");

  ModelSpec spec;
  spec.kind = cfg == full_scale() ? ModelKind::cnn_full : ModelKind::cnn_scaled;
  spec.input_length = cfg.input_length;
  spec.dropout_rate = cfg.dropout_rate;
  spec.normalize_divisor = cfg.normalize_divisor;
  std::size_t channels = 1;
  for (auto f : cfg.filters) {
    LayerDesc conv;
    conv.kind = LayerKind::conv1d;
    conv.kernel = cfg.kernel;
    conv.in = channels;
    conv.out = f;
    spec.layers.push_back(conv);
    LayerDesc bn;
    bn.kind = LayerKind::batchnorm;
    bn.channels = f;
    spec.layers.push_back(bn);
    spec.layers.push_back(LayerDesc{LayerKind::relu});
    spec.layers.push_back(LayerDesc{LayerKind::maxpool1d});
    channels = f;
  }
  LayerDesc drop;
  drop.kind = LayerKind::dropout;
  drop.rate = cfg.dropout_rate;
  spec.layers.push_back(drop);
  spec.layers.push_back(LayerDesc{LayerKind::flatten});
  const std::size_t flat = cfg.input_length / 8 * channels;
  LayerDesc fc;
  fc.kind = LayerKind::dense;
  fc.in = flat;
  fc.out = cfg.dense_units;
  spec.layers.push_back(fc);
  spec.layers.push_back(LayerDesc{LayerKind::relu});
  LayerDesc head;
  head.kind = LayerKind::dense;
  head.in = cfg.dense_units;
  head.out = 2;
  spec.layers.push_back(head);

  const auto shapes = infer_shapes(spec);
  // Each block halves the length; flatten must see input_length / 8 positions.
  if (shapes[11] != Shape{cfg.input_length / 8, channels}) throw ShapeError("scaled CNN shape chain broken");
  return spec;
}

inline ModelSpec build_cnn_full() { return build_cnn_scaled(full_scale()); }

/// input -> flatten -> dense(hidden) -> relu -> dense(2).
inline ModelSpec build_bp(std::size_t input_length, std::size_t hidden = 512) {
  if (input_length == 0 || hidden == 0) throw ConfigError("BP input_length and hidden width must be positive");
  ModelSpec spec;
  spec.kind = input_length == 7200 && hidden == 512 ? ModelKind::bp_full : ModelKind::bp_scaled;
  spec.input_length = input_length;
  spec.dropout_rate = 0.0;
  spec.layers.push_back(LayerDesc{LayerKind::flatten});
  LayerDesc h;
  h.kind = LayerKind::dense;
  h.in = input_length;
  h.out = hidden;
  spec.layers.push_back(h);
  spec.layers.push_back(LayerDesc{LayerKind::relu});
  LayerDesc out;
  out.kind = LayerKind::dense;
  out.in = hidden;
  out.out = 2;
  spec.layers.push_back(out);
  infer_shapes(spec);
  return spec;
}

inline ModelSpec build_bp_full() { return build_bp(7200, 512); }

// ---------------------------------------------------------------------------
// Runtime layers

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

struct Buffer {
  std::string name;
  Tensor value;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Returns the input gradient and overwrites the parameter gradients.
  virtual Tensor backward(const Tensor& upstream) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::vector<Buffer*> buffers() { return {}; }
  /// Discrete branch choices of the last forward pass (relu gates, pool
  /// argmaxes); a finite-difference probe that changes them crossed a kink.
  virtual void append_decisions(std::vector<std::uint64_t>&) const {}
};

class Conv1dLayer final : public Layer {
 public:
  Conv1dLayer(const LayerDesc& d, const std::string& prefix)
      : desc_(d),
        kernel_{prefix + ".kernel", Tensor({d.kernel, d.in, d.out}), {}},
        bias_{prefix + ".bias", Tensor({d.out}), {}} {}

  Tensor forward(const Tensor& x, Mode) override {
    input_ = x;
    return conv1d_forward(x, kernel_.value, bias_.value, desc_.stride, desc_.padding);
  }
  Tensor backward(const Tensor& upstream) override {
    auto g = conv1d_backward(input_, kernel_.value, desc_.stride, desc_.padding, upstream);
    kernel_.grad = std::move(g.kernel);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }
  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }

 private:
  LayerDesc desc_;
  Parameter kernel_;
  Parameter bias_;
  Tensor input_;
};

class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(const LayerDesc& d, const std::string& prefix)
      : gamma_{prefix + ".gamma", Tensor({d.channels}, 1.0), {}},
        beta_{prefix + ".beta", Tensor({d.channels}), {}},
        running_mean_{prefix + ".running_mean", Tensor({d.channels})},
        running_var_{prefix + ".running_var", Tensor({d.channels}, 1.0)} {}

  Tensor forward(const Tensor& x, Mode mode) override {
    return batchnorm_forward(x, gamma_.value, beta_.value, mode, running_mean_.value, running_var_.value, cache_);
  }
  Tensor backward(const Tensor& upstream) override {
    auto g = batchnorm_backward(cache_, gamma_.value, upstream);
    gamma_.grad = std::move(g.gamma);
    beta_.grad = std::move(g.beta);
    return std::move(g.input);
  }
  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Buffer*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  Parameter gamma_;
  Parameter beta_;
  Buffer running_mean_;
  Buffer running_var_;
  BatchNormCache cache_;
};

class ReluLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override {
    input_ = x;
    return relu_forward(x);
  }
  Tensor backward(const Tensor& upstream) override { return relu_backward(input_, upstream); }
  void append_decisions(std::vector<std::uint64_t>& out) const override {
    for (double v : input_.data()) out.push_back(v > 0.0 ? 1 : 0);
  }

 private:
  Tensor input_;
};

class MaxPoolLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override {
    input_shape_ = x.shape();
    auto r = maxpool1d_forward(x);
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }
  Tensor backward(const Tensor& upstream) override { return maxpool1d_backward(input_shape_, argmax_, upstream); }
  void append_decisions(std::vector<std::uint64_t>& out) const override {
    out.insert(out.end(), argmax_.begin(), argmax_.end());
  }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Masks come from a counter-based stream: call n uses derive_seed(stream, n).
class DropoutLayer final : public Layer {
 public:
  DropoutLayer(double rate, std::uint64_t stream_seed) : rate_(rate), stream_seed_(stream_seed) {
    check_dropout_rate(rate);
  }

  Tensor forward(const Tensor& x, Mode mode) override {
    const std::uint64_t seed = derive_seed(stream_seed_, calls_);
    if (mode == Mode::train) ++calls_;
    auto r = dropout_forward(x, rate_, mode, seed);
    mask_ = std::move(r.mask);
    return std::move(r.output);
  }
  Tensor backward(const Tensor& upstream) override { return dropout_backward(mask_, upstream); }

  std::uint64_t calls() const noexcept { return calls_; }
  void set_calls(std::uint64_t n) noexcept { calls_ = n; }

 private:
  double rate_;
  std::uint64_t stream_seed_;
  std::uint64_t calls_ = 0;
  std::vector<double> mask_;
};

class FlattenLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode) override {
    input_shape_ = x.shape();
    return x.reshaped({x.extent(0), x.size() / x.extent(0)});
  }
  Tensor backward(const Tensor& upstream) override { return upstream.reshaped(input_shape_); }

 private:
  Shape input_shape_;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(const LayerDesc& d, const std::string& prefix)
      : weight_{prefix + ".weight", Tensor({d.in, d.out}), {}},
        bias_{prefix + ".bias", Tensor({d.out}), {}} {}

  Tensor forward(const Tensor& x, Mode) override {
    input_ = x;
    return dense_forward(x, weight_.value, bias_.value);
  }
  Tensor backward(const Tensor& upstream) override {
    auto g = dense_backward(input_, weight_.value, upstream);
    weight_.grad = std::move(g.weight);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
  }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

 private:
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

// ---------------------------------------------------------------------------
// Tensor layout

struct TensorSlot {
  std::string name;
  Shape shape;
};

inline std::string layer_prefix(std::size_t index, LayerKind kind) {
  return "l" + std::to_string(index) + "." + std::string(to_string(kind));
}

/// Names and shapes of the trainable parameters, in model order.
inline std::vector<TensorSlot> parameter_layout(const ModelSpec& spec) {
  std::vector<TensorSlot> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& d = spec.layers[i];
    const auto prefix = layer_prefix(i, d.kind);
    switch (d.kind) {
      case LayerKind::conv1d:
        out.push_back({prefix + ".kernel", {d.kernel, d.in, d.out}});
        out.push_back({prefix + ".bias", {d.out}});
        break;
      case LayerKind::dense:
        out.push_back({prefix + ".weight", {d.in, d.out}});
        out.push_back({prefix + ".bias", {d.out}});
        break;
      case LayerKind::batchnorm:
        out.push_back({prefix + ".gamma", {d.channels}});
        out.push_back({prefix + ".beta", {d.channels}});
        break;
      default: break;
    }
  }
  return out;
}

/// Batchnorm running statistics, in model order.
inline std::vector<TensorSlot> buffer_layout(const ModelSpec& spec) {
  std::vector<TensorSlot> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& d = spec.layers[i];
    if (d.kind != LayerKind::batchnorm) continue;
    const auto prefix = layer_prefix(i, d.kind);
    out.push_back({prefix + ".running_mean", {d.channels}});
    out.push_back({prefix + ".running_var", {d.channels}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization

/// Weights ~ N(0, init_std^2) drawn in layer order, row-major, from the init
/// stream of `seed`. Biases and batchnorm beta are 0, gamma is 1.
inline std::vector<Parameter> init_parameters(const ModelSpec& spec, std::uint64_t seed) {
  infer_shapes(spec);
  Rng rng = Rng(seed).split(Stream::init);
  std::normal_distribution<double> normal(0.0, spec.init_std);
  std::vector<Parameter> params;
  for (auto& slot : parameter_layout(spec)) {
    Tensor t(slot.shape, slot.name.ends_with(".gamma") ? 1.0 : 0.0);
    if (slot.name.ends_with(".kernel") || slot.name.ends_with(".weight"))
      for (auto& v : t.data()) v = normal(rng.engine());
    params.push_back({std::move(slot.name), std::move(t), {}});
  }
  return params;
}

// ---------------------------------------------------------------------------
// Model

class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    infer_shapes(spec_);
    const std::uint64_t dropout_seed = Rng(seed).split(Stream::dropout).seed();
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const auto& d = spec_.layers[i];
      const std::string prefix = layer_prefix(i, d.kind);
      switch (d.kind) {
        case LayerKind::conv1d: layers_.push_back(std::make_unique<Conv1dLayer>(d, prefix)); break;
        case LayerKind::batchnorm: layers_.push_back(std::make_unique<BatchNormLayer>(d, prefix)); break;
        case LayerKind::relu: layers_.push_back(std::make_unique<ReluLayer>()); break;
        case LayerKind::maxpool1d: layers_.push_back(std::make_unique<MaxPoolLayer>()); break;
        case LayerKind::dropout:
          layers_.push_back(std::make_unique<DropoutLayer>(d.rate, derive_seed(dropout_seed, i)));
          break;
        case LayerKind::flatten: layers_.push_back(std::make_unique<FlattenLayer>()); break;
        case LayerKind::dense: layers_.push_back(std::make_unique<DenseLayer>(d, prefix)); break;
      }
    }
    auto init = init_parameters(spec_, seed);
    auto params = parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = std::move(init[i].value);
  }

  const ModelSpec& spec() const noexcept { return spec_; }

  /// x: [batch, input_length, input_channels] -> logits [batch, classes].
  Tensor forward(const Tensor& x, Mode mode) {
    require_rank(x, 3, "model input");
    if (x.extent(1) != spec_.input_length || x.extent(2) != spec_.input_channels)
      throw ShapeError("model input " + shape_string(x.shape()) + " does not match spec [batch," +
                       std::to_string(spec_.input_length) + "," + std::to_string(spec_.input_channels) + "]");
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, mode);
    return h;
  }

  Tensor backward(const Tensor& upstream) {
    Tensor g = upstream;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_)
      for (auto* p : l->parameters()) out.push_back(p);
    return out;
  }

  std::vector<Buffer*> buffers() {
    std::vector<Buffer*> out;
    for (auto& l : layers_)
      for (auto* b : l->buffers()) out.push_back(b);
    return out;
  }

  std::vector<std::uint64_t> decisions() const {
    std::vector<std::uint64_t> out;
    for (const auto& l : layers_) l->append_decisions(out);
    return out;
  }

  std::uint64_t dropout_calls() const {
    for (const auto& l : layers_)
      if (auto* d = dynamic_cast<const DropoutLayer*>(l.get())) return d->calls();
    return 0;
  }

  void set_dropout_calls(std::uint64_t n) {
    for (auto& l : layers_)
      if (auto* d = dynamic_cast<DropoutLayer*>(l.get())) d->set_calls(n);
  }

  std::size_t layer_count() const noexcept { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace toolbreak

#endif
