#pragma once

#include <cstdint>
#include <vector>

#include "bbp/numerics/diff_array.hpp"
#include "bbp/train/config.hpp"

namespace bbp {

template <typename T>
struct OptimizerState {
  std::vector<DiffArray<T>> m;  // first moments, one per parameter
  std::vector<DiffArray<T>> v;  // second moments
  std::uint64_t t = 0;          // completed updates
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
OptimizerState<T> make_optimizer_state(const std::vector<DiffArray<T>>& params, double beta1 = 0.9,
                                       double beta2 = 0.999, double eps = 1e-8);

// Decoupled-weight-decay Adam on params in place, reading each param's grad
// (missing grads count as zero):
//   m ← β₁m + (1−β₁)g;  v ← β₂v + (1−β₂)g²;  m̂ = m/(1−β₁ᵗ);  v̂ = v/(1−β₂ᵗ)
//   θ ← θ − lr·(m̂/(√v̂ + ε) + wd·θ)
// Throws NonFiniteGradient before touching anything if a grad is NaN/Inf.
template <typename T>
void adamw_step(std::vector<DiffArray<T>>& params, OptimizerState<T>& state, double lr, double weight_decay);

// Linear ramp 0 → lr over warmup_steps, then constant.
double lr_schedule(std::uint64_t step, const TrainConfig& cfg);

}  // namespace bbp
