#ifndef TOOLBREAK_OPTIM_HPP
#define TOOLBREAK_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "toolbreak/error.hpp"
#include "toolbreak/tensor.hpp"

namespace toolbreak {

enum class OptimizerKind { adam, gd };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "gd"; }

inline OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "gd") return OptimizerKind::gd;
  throw ConfigError("optimizer must be 'adam' or 'gd', got '" + std::string(text) + "'");
}

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Adam moments, one per parameter in model order. Empty for gd.
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  bool operator==(const OptimizerState&) const = default;
};

namespace detail {
inline void check_congruent(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) throw ShapeError("optimizer: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->shape() != grads[i]->shape())
      throw ShapeError("optimizer: gradient shape " + shape_string(grads[i]->shape()) + " does not match parameter " +
                       shape_string(params[i]->shape()));
}
}  // namespace detail

/// p <- p - lr * g
inline void gd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, OptimizerState& state) {
  detail::check_congruent(params, grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= state.learning_rate * g[j];
  }
  ++state.step_count;
}

/// Bias-corrected Adam. Moments are created on the first call.
inline void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                      OptimizerState& state) {
  detail::check_congruent(params, grads);
  if (state.first_moment.empty() && state.second_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.push_back(Tensor::zeros_like(*p));
      state.second_moment.push_back(Tensor::zeros_like(*p));
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ShapeError("adam: moment count does not match parameter count");

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (m.shape() != p.shape() || v.shape() != p.shape()) throw ShapeError("adam: moment shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

inline void optimizer_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                           OptimizerState& state) {
  if (state.kind == OptimizerKind::adam)
    adam_step(params, grads, state);
  else
    gd_step(params, grads, state);
}

}  // namespace toolbreak

#endif
