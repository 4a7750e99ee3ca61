#pragma once

#include <cstddef>
#include <vector>

#include "bbp/mc_attention.hpp"
#include "bbp/numerics/diff_array.hpp"
#include "bbp/numerics/ops.hpp"

namespace bbp {

// Feed-forward temporal convolution block. Hidden width is mlp_ratio·D.
template <typename T>
struct TcnParams {
  DiffArray<T> in_proj;               // [H×D×1]
  std::vector<DiffArray<T>> kernels;  // each [H×H×K]
  DiffArray<T> out_proj;              // [D×H×1]
  std::vector<std::size_t> dilations;
  std::size_t kernel_size = 3;

  std::size_t hidden() const { return in_proj.dim(0); }
};

struct TcnOptions {
  RunMode mode = RunMode::kEval;
  double dropout = 0.0;  // on out_proj(h), train only
};

// h⁰ = in_proj(X); hˡ = ReLU(conv1d(hˡ⁻¹, kernelˡ, dilationˡ, causal) + hˡ⁻¹);
// Z = out_proj(h^last) + X.
template <typename T>
DiffArray<T> tcn_block(const DiffArray<T>& x, const TcnParams<T>& params, const TcnOptions& options, Rng& rng);

// 1 + Σ (K−1)·dilationˡ.
std::size_t tcn_receptive_field(std::size_t kernel_size, const std::vector<std::size_t>& dilations);

}  // namespace bbp
