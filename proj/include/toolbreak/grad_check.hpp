#ifndef TOOLBREAK_GRAD_CHECK_HPP
#define TOOLBREAK_GRAD_CHECK_HPP

// Central finite-difference verification of every analytic gradient a Model
// produces: inputs, weights, biases and batchnorm scale/shift.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "toolbreak/layers.hpp"
#include "toolbreak/model.hpp"
#include "toolbreak/rng.hpp"

namespace toolbreak {

enum class GradCheckLoss {
  /// sum(output * R) for a fixed random R.
  projection,
  /// softmax_xent against random labels; needs a [batch, classes] output.
  softmax_xent,
};

struct GradCheckOptions {
  std::size_t batch = 2;
  double step = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-5;
  GradCheckLoss loss = GradCheckLoss::projection;
  /// Scale of the random parameter values the check runs at.
  double parameter_scale = 0.5;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +/-step probe changed a relu gate or pool argmax.
  std::size_t skipped = 0;
  std::string worst;
};

/// Compares analytic gradients of `spec` against central differences at a
/// random point drawn from `seed`. Dropout masks are frozen across probes;
/// batchnorm runs in train mode.
inline GradCheckResult grad_check(const ModelSpec& spec, std::uint64_t seed, const GradCheckOptions& opt = {}) {
  Model model(spec, seed);
  Rng rng = Rng(seed).split(Stream::test_data);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (auto* p : model.parameters()) {
    const bool is_gamma = p->name.ends_with(".gamma");
    for (auto& v : p->value.data()) v = (is_gamma ? 1.0 : 0.0) + opt.parameter_scale * normal(rng.engine());
  }
  Tensor x({opt.batch, spec.input_length, spec.input_channels});
  for (auto& v : x.data()) v = normal(rng.engine());

  model.set_dropout_calls(0);
  Tensor out = model.forward(x, Mode::train);
  Tensor projection(out.shape());
  for (auto& v : projection.data()) v = normal(rng.engine());
  std::vector<int> labels(opt.batch);
  if (opt.loss == GradCheckLoss::softmax_xent) {
    require_rank(out, 2, "grad_check softmax_xent output");
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(out.extent(1)));
  }

  auto loss_of = [&](const Tensor& output) {
    if (opt.loss == GradCheckLoss::projection) return dot(output, projection);
    return softmax_xent(output, labels).loss;
  };
  auto upstream_of = [&](const Tensor& output) {
    if (opt.loss == GradCheckLoss::projection) return projection;
    return softmax_xent(output, labels).grad;
  };

  const auto base_decisions = model.decisions();
  Tensor input_grad = model.backward(upstream_of(out));

  GradCheckResult result;
  auto probe = [&](double& slot, double analytic, const std::string& name) {
    const double saved = slot;
    slot = saved + opt.step;
    model.set_dropout_calls(0);
    const double plus = loss_of(model.forward(x, Mode::train));
    const bool plus_same = model.decisions() == base_decisions;
    slot = saved - opt.step;
    model.set_dropout_calls(0);
    const double minus = loss_of(model.forward(x, Mode::train));
    const bool minus_same = model.decisions() == base_decisions;
    slot = saved;
    if (!plus_same || !minus_same) {
      ++result.skipped;
      return;
    }
    const double numeric = (plus - minus) / (2.0 * opt.step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++result.checked;
    if (rel > result.max_relative_error || result.worst.empty()) {
      result.max_relative_error = std::max(rel, result.max_relative_error);
      if (rel >= result.max_relative_error) result.worst = name;
    }
  };

  for (std::size_t i = 0; i < x.size(); ++i) probe(x[i], input_grad[i], "input[" + std::to_string(i) + "]");
  for (auto* p : model.parameters()) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i)
      probe(p->value[i], analytic[i], p->name + "[" + std::to_string(i) + "]");
  }
  return result;
}

}  // namespace toolbreak

#endif
