#ifndef TOOLBREAK_LAYERS_HPP
#define TOOLBREAK_LAYERS_HPP

// Forward and backward passes for the fixed layer set used by the CNN and
// BP models. Sequence tensors are laid out [batch, length, channels];
// dense tensors are [batch, features].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "toolbreak/error.hpp"
#include "toolbreak/rng.hpp"
#include "toolbreak/tensor.hpp"

namespace toolbreak {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// conv1d

enum class Padding { same, valid };

inline std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride, Padding padding) {
  if (stride == 0) throw ShapeError("conv1d: stride must be >= 1");
  if (padding == Padding::same) return (length + stride - 1) / stride;
  if (kernel > length) throw ShapeError("conv1d: kernel longer than input");
  return (length - kernel) / stride + 1;
}

/// Left zero-padding; `same` splits the total padding with the extra sample on the right.
inline std::size_t conv_pad_left(std::size_t length, std::size_t kernel, std::size_t stride, Padding padding) {
  if (padding == Padding::valid) return 0;
  const std::size_t out = conv_output_length(length, kernel, stride, padding);
  const std::size_t needed = (out - 1) * stride + kernel;
  const std::size_t total = needed > length ? needed - length : 0;
  return total / 2;
}

/// out[b,t,o] = bias[o] + sum_{i,c} in_padded[b, t*stride + i, c] * kernel[i,c,o]
inline Tensor conv1d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                             Padding padding) {
  require_rank(input, 3, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  const std::size_t batch = input.extent(0), length = input.extent(1), in_ch = input.extent(2);
  const std::size_t k = kernel.extent(0), out_ch = kernel.extent(2);
  if (kernel.extent(1) != in_ch) throw ShapeError("conv1d: kernel input channels do not match input");
  require_shape(bias, {out_ch}, "conv1d bias");
  const std::size_t out_len = conv_output_length(length, k, stride, padding);
  const std::size_t pad = conv_pad_left(length, k, stride, padding);

  Tensor out({batch, out_len, out_ch});
  const double* x = input.data().data();
  const double* w = kernel.data().data();
  double* y = out.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < out_len; ++t) {
      double* yrow = y + (b * out_len + t) * out_ch;
      for (std::size_t o = 0; o < out_ch; ++o) yrow[o] = bias[o];
      for (std::size_t i = 0; i < k; ++i) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + i) - static_cast<std::ptrdiff_t>(pad);
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length)) continue;
        const double* xrow = x + (b * length + static_cast<std::size_t>(pos)) * in_ch;
        for (std::size_t c = 0; c < in_ch; ++c) {
          const double xv = xrow[c];
          const double* wrow = w + (i * in_ch + c) * out_ch;
          for (std::size_t o = 0; o < out_ch; ++o) yrow[o] += xv * wrow[o];
        }
      }
    }
  }
  return out;
}

struct Conv1dGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};

inline Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& kernel, std::size_t stride, Padding padding,
                                   const Tensor& upstream) {
  const std::size_t batch = input.extent(0), length = input.extent(1), in_ch = input.extent(2);
  const std::size_t k = kernel.extent(0), out_ch = kernel.extent(2);
  const std::size_t out_len = conv_output_length(length, k, stride, padding);
  const std::size_t pad = conv_pad_left(length, k, stride, padding);
  require_shape(upstream, {batch, out_len, out_ch}, "conv1d upstream gradient");

  Conv1dGrads g{Tensor::zeros_like(input), Tensor::zeros_like(kernel), Tensor({out_ch})};
  const double* x = input.data().data();
  const double* w = kernel.data().data();
  const double* gy = upstream.data().data();
  double* gx = g.input.data().data();
  double* gw = g.kernel.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const double* grow = gy + (b * out_len + t) * out_ch;
      for (std::size_t o = 0; o < out_ch; ++o) g.bias[o] += grow[o];
      for (std::size_t i = 0; i < k; ++i) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + i) - static_cast<std::ptrdiff_t>(pad);
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length)) continue;
        const std::size_t row = (b * length + static_cast<std::size_t>(pos)) * in_ch;
        for (std::size_t c = 0; c < in_ch; ++c) {
          const double xv = x[row + c];
          const double* wrow = w + (i * in_ch + c) * out_ch;
          double* gwrow = gw + (i * in_ch + c) * out_ch;
          double acc = 0.0;
          for (std::size_t o = 0; o < out_ch; ++o) {
            gwrow[o] += xv * grow[o];
            acc += wrow[o] * grow[o];
          }
          gx[row + c] += acc;
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// relu

inline Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

/// Gradient passes where the forward input was strictly positive.
inline Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  require_shape(upstream, input.shape(), "relu upstream gradient");
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(input[i] > 0.0)) g[i] = 0.0;
  return g;
}

// ---------------------------------------------------------------------------
// maxpool1d, kernel 2, stride 2 along the length axis

struct MaxPoolResult {
  Tensor output;
  /// Flat input index chosen for each output element.
  std::vector<std::size_t> argmax;
};

/// Odd lengths behave as if right-padded with -inf, so the last output
/// copies the last sample. Ties pick the leftmost position.
inline MaxPoolResult maxpool1d_forward(const Tensor& input) {
  require_rank(input, 3, "maxpool1d input");
  const std::size_t batch = input.extent(0), length = input.extent(1), ch = input.extent(2);
  const std::size_t out_len = (length + 1) / 2;
  MaxPoolResult r{Tensor({batch, out_len, ch}), std::vector<std::size_t>(batch * out_len * ch)};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < out_len; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t left = (b * length + 2 * t) * ch + c;
        std::size_t best = left;
        if (2 * t + 1 < length) {
          const std::size_t right = left + ch;
          if (input[right] > input[left]) best = right;
        }
        const std::size_t o = (b * out_len + t) * ch + c;
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

inline Tensor maxpool1d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                 const Tensor& upstream) {
  if (upstream.size() != argmax.size()) throw ShapeError("maxpool1d upstream gradient does not match forward output");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += upstream[i];
  return g;
}

// ---------------------------------------------------------------------------
// batchnorm: per-channel statistics over every axis but the last

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

struct BatchNormCache {
  Tensor normalized;            // x-hat
  std::vector<double> inv_std;  // per channel
  Mode mode = Mode::train;
};

/// In train mode updates running_mean/running_var as
/// running = momentum * running + (1 - momentum) * batch_stat (population variance).
inline Tensor batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta, Mode mode,
                                Tensor& running_mean, Tensor& running_var, BatchNormCache& cache,
                                double momentum = kBatchNormMomentum, double eps = kBatchNormEpsilon) {
  if (input.rank() < 2) throw ShapeError("batchnorm: input rank must be >= 2");
  const std::size_t ch = input.extent(input.rank() - 1);
  const std::size_t count = input.size() / ch;
  require_shape(gamma, {ch}, "batchnorm gamma");
  require_shape(beta, {ch}, "batchnorm beta");
  require_shape(running_mean, {ch}, "batchnorm running_mean");
  require_shape(running_var, {ch}, "batchnorm running_var");

  std::vector<double> mean(ch, 0.0), var(ch, 0.0);
  if (mode == Mode::train) {
    if (count < 2) throw DomainError("batchnorm: need at least 2 values per channel in train mode");
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t c = 0; c < ch; ++c) mean[c] += input[i * ch + c];
    for (auto& m : mean) m /= static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = input[i * ch + c] - mean[c];
        var[c] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(count);
    for (std::size_t c = 0; c < ch; ++c) {
      running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean[c];
      running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = running_mean[c];
      var[c] = running_var[c];
    }
  }

  cache.mode = mode;
  cache.inv_std.resize(ch);
  for (std::size_t c = 0; c < ch; ++c) cache.inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  cache.normalized = Tensor(input.shape());
  Tensor out(input.shape());
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      const double xhat = (input[i * ch + c] - mean[c]) * cache.inv_std[c];
      cache.normalized[i * ch + c] = xhat;
      out[i * ch + c] = gamma[c] * xhat + beta[c];
    }
  return out;
}

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& upstream) {
  require_shape(upstream, cache.normalized.shape(), "batchnorm upstream gradient");
  const std::size_t ch = gamma.size();
  const std::size_t count = upstream.size() / ch;
  BatchNormGrads g{Tensor(upstream.shape()), Tensor({ch}), Tensor({ch})};
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      g.beta[c] += upstream[i * ch + c];
      g.gamma[c] += upstream[i * ch + c] * cache.normalized[i * ch + c];
    }
  const double n = static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      const double dxhat = upstream[i * ch + c] * gamma[c];
      if (cache.mode == Mode::train) {
        // dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat)); the sums are gamma*dbeta and gamma*dgamma.
        g.input[i * ch + c] = cache.inv_std[c] / n *
                              (n * dxhat - gamma[c] * g.beta[c] - cache.normalized[i * ch + c] * gamma[c] * g.gamma[c]);
      } else {
        g.input[i * ch + c] = dxhat * cache.inv_std[c];
      }
    }
  return g;
}

// ---------------------------------------------------------------------------
// dropout (inverted)

struct DropoutResult {
  Tensor output;
  /// Per-element multiplier: 0 or 1/(1-rate); empty in eval mode.
  std::vector<double> mask;
};

inline void check_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must be in [0, 1)");
}

inline DropoutResult dropout_forward(const Tensor& input, double rate, Mode mode, std::uint64_t seed) {
  check_dropout_rate(rate);
  DropoutResult r{input, {}};
  if (mode == Mode::eval || rate == 0.0) return r;
  Rng rng(seed);
  std::bernoulli_distribution drop(rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  r.mask.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    r.mask[i] = drop(rng.engine()) ? 0.0 : keep_scale;
    r.output[i] *= r.mask[i];
  }
  return r;
}

inline Tensor dropout_backward(const std::vector<double>& mask, const Tensor& upstream) {
  if (mask.empty()) return upstream;
  if (mask.size() != upstream.size()) throw ShapeError("dropout upstream gradient does not match mask");
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

// ---------------------------------------------------------------------------
// dense

inline Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  const std::size_t batch = input.extent(0), n = input.extent(1), m = weight.extent(1);
  if (weight.extent(0) != n) throw ShapeError("dense: weight rows " + std::to_string(weight.extent(0)) +
                                              " do not match input features " + std::to_string(n));
  require_shape(bias, {m}, "dense bias");
  Tensor out({batch, m});
  const double* w = weight.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    double* yrow = out.data().data() + b * m;
    for (std::size_t j = 0; j < m; ++j) yrow[j] = bias[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double xv = input[b * n + i];
      if (xv == 0.0) continue;
      const double* wrow = w + i * m;
      for (std::size_t j = 0; j < m; ++j) yrow[j] += xv * wrow[j];
    }
  }
  return out;
}

struct DenseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

inline DenseGrads dense_backward(const Tensor& input, const Tensor& weight, const Tensor& upstream) {
  const std::size_t batch = input.extent(0), n = input.extent(1), m = weight.extent(1);
  require_shape(upstream, {batch, m}, "dense upstream gradient");
  DenseGrads g{Tensor::zeros_like(input), Tensor::zeros_like(weight), Tensor({m})};
  const double* w = weight.data().data();
  double* gw = g.weight.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* grow = upstream.data().data() + b * m;
    for (std::size_t j = 0; j < m; ++j) g.bias[j] += grow[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double xv = input[b * n + i];
      const double* wrow = w + i * m;
      double* gwrow = gw + i * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        gwrow[j] += xv * grow[j];
        acc += wrow[j] * grow[j];
      }
      g.input[b * n + i] = acc;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// softmax + cross-entropy

inline Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax logits");
  const std::size_t batch = logits.extent(0), classes = logits.extent(1);
  Tensor p(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < classes; ++j) mx = std::max(mx, logits.at(b, j));
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(logits.at(b, j) - mx);
    for (std::size_t j = 0; j < classes; ++j) p.at(b, j) = std::exp(logits.at(b, j) - mx) / z;
  }
  return p;
}

struct SoftmaxXent {
  double loss = 0.0;
  Tensor grad;
};

/// Mean over the batch of -log softmax(logits)[label]; grad = (softmax - onehot) / batch.
inline SoftmaxXent softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_xent logits");
  const std::size_t batch = logits.extent(0), classes = logits.extent(1);
  if (labels.size() != batch) throw ShapeError("softmax_xent: label count does not match batch");
  SoftmaxXent r{0.0, Tensor(logits.shape())};
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw DomainError("softmax_xent: invalid label " + std::to_string(label));
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < classes; ++j) mx = std::max(mx, logits.at(b, j));
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(logits.at(b, j) - mx);
    const double log_z = std::log(z) + mx;
    r.loss += log_z - logits.at(b, static_cast<std::size_t>(label));
    for (std::size_t j = 0; j < classes; ++j) {
      const double p = std::exp(logits.at(b, j) - log_z);
      r.grad.at(b, j) = (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) / static_cast<double>(batch);
    }
  }
  r.loss /= static_cast<double>(batch);
  return r;
}

}  // namespace toolbreak

#endif
