#include "bbp/train/adamw.hpp"

#include <cmath>
#include <string>

#include "bbp/errors.hpp"

namespace bbp {

template <typename T>
OptimizerState<T> make_optimizer_state(const std::vector<DiffArray<T>>& params, double beta1, double beta2,
                                       double eps) {
  OptimizerState<T> s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const auto& p : params) {
    s.m.push_back(DiffArray<T>::zeros(p.shape()));
    s.v.push_back(DiffArray<T>::zeros(p.shape()));
  }
  return s;
}

template <typename T>
void adamw_step(std::vector<DiffArray<T>>& params, OptimizerState<T>& state, double lr, double weight_decay) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw IncompatibleShape("optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                            std::to_string(params.size()));
  }
  if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i].shape() || state.v[i].shape() != params[i].shape()) {
      throw IncompatibleShape("optimizer moment " + std::to_string(i) + " does not match its parameter");
    }
    if (!params[i].has_grad()) continue;
    for (T g : params[i].grad()) {
      if (!std::isfinite(static_cast<double>(g))) throw NonFiniteGradient("gradient of parameter " + std::to_string(i));
    }
  }
  const std::uint64_t t = state.t + 1;
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2), eps = static_cast<T>(state.eps);
  const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, static_cast<double>(t)));
  const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, static_cast<double>(t)));
  const T step = static_cast<T>(lr), wd = static_cast<T>(weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<T> theta = params[i].mutable_data();
    std::span<T> m = state.m[i].mutable_data();
    std::span<T> v = state.v[i].mutable_data();
    const bool has = params[i].has_grad();
    const std::span<const T> grad = has ? params[i].grad() : std::span<const T>();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const T g = has ? grad[k] : T(0);
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      const T mhat = m[k] / c1, vhat = v[k] / c2;
      theta[k] -= step * (mhat / (std::sqrt(vhat) + eps) + wd * theta[k]);
    }
  }
  state.t = t;
}

double lr_schedule(std::uint64_t step, const TrainConfig& cfg) {
  if (cfg.warmup_steps == 0 || step >= cfg.warmup_steps) return cfg.lr;
  return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
}

template OptimizerState<float> make_optimizer_state(const std::vector<DiffArray<float>>&, double, double, double);
template OptimizerState<double> make_optimizer_state(const std::vector<DiffArray<double>>&, double, double, double);
template void adamw_step(std::vector<DiffArray<float>>&, OptimizerState<float>&, double, double);
template void adamw_step(std::vector<DiffArray<double>>&, OptimizerState<double>&, double, double);

}  // namespace bbp
