#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "bbp/numerics/diff_array.hpp"

namespace bbp {

// Row-major boolean matrix; true marks an allowed (kept) entry.
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  Mask() = default;
  Mask(std::size_t r, std::size_t c, bool value = true) : rows(r), cols(c), allowed(r * c, value ? 1 : 0) {}

  bool operator()(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { allowed[r * cols + c] = v ? 1 : 0; }
};

using Rng = std::mt19937_64;

// C = A·B for A[m×k], B[k×n].
template <typename T>
DiffArray<T> matmul(const DiffArray<T>& a, const DiffArray<T>& b);

template <typename T>
DiffArray<T> transpose(const DiffArray<T>& a);

template <typename T>
DiffArray<T> add(const DiffArray<T>& a, const DiffArray<T>& b);

template <typename T>
DiffArray<T> sub(const DiffArray<T>& a, const DiffArray<T>& b);

// Elementwise product.
template <typename T>
DiffArray<T> mul(const DiffArray<T>& a, const DiffArray<T>& b);

template <typename T>
DiffArray<T> scale(const DiffArray<T>& a, T factor);

template <typename T>
DiffArray<T> relu(const DiffArray<T>& a);

// Sum of all entries, shape {1}.
template <typename T>
DiffArray<T> sum(const DiffArray<T>& a);

// Row-wise softmax with row-max stabilization. Masked entries are exactly 0.
template <typename T>
DiffArray<T> softmax_rows(const DiffArray<T>& m, const Mask* mask = nullptr);

// x[C_in×L] convolved with kernel[C_out×C_in×K].
//   causal_left_pad = true:  output length L,
//     y[o,t] = Σ_{i,j} kernel[o,i,j]·x[i, t−(K−1−j)·dilation], out-of-range x = 0.
//   causal_left_pad = false: valid convolution, output length L−(K−1)·dilation.
template <typename T>
DiffArray<T> conv1d(const DiffArray<T>& x, const DiffArray<T>& kernel, std::size_t dilation,
                    bool causal_left_pad);

// Mean next-token negative log-likelihood of logits[L×V] over positions whose
// target is not in `ignore`. Shape {1}. Throws EmptyBatch if nothing remains.
template <typename T>
DiffArray<T> cross_entropy(const DiffArray<T>& logits, std::span<const int> targets,
                           std::span<const int> ignore = {});

// out[:, j] = w[:, index[j]]; gradient scatters back into w.
template <typename T>
DiffArray<T> gather_columns(const DiffArray<T>& w, std::span<const int> index);

// Columns [begin, end) of a 2-D array.
template <typename T>
DiffArray<T> slice_columns(const DiffArray<T>& x, std::size_t begin, std::size_t end);

// Rows [begin, end) of a 2-D array.
template <typename T>
DiffArray<T> slice_rows(const DiffArray<T>& x, std::size_t begin, std::size_t end);

template <typename T>
DiffArray<T> concat_columns(std::span<const DiffArray<T>> parts);

template <typename T>
DiffArray<T> concat_rows(std::span<const DiffArray<T>> parts);

// x[D×(n·width)] -> [D×n], column i is the mean of columns [i·width, (i+1)·width).
template <typename T>
DiffArray<T> column_block_mean(const DiffArray<T>& x, std::size_t width);

// Inverted dropout: identity when !train or rate == 0.
template <typename T>
DiffArray<T> dropout(const DiffArray<T>& x, double rate, Rng& rng, bool train);

// One attention block: queries and keys are column indices into Q and K/V,
// mask is [queries × keys].
struct AttentionBlock {
  std::vector<std::size_t> queries;
  std::vector<std::size_t> keys;
  Mask mask;
};

struct AttentionOptions {
  std::size_t heads = 1;
  double dropout = 0.0;  // on attention probabilities, train only
  bool train = false;
};

// Multi-head masked attention over arbitrary column subsets.
// Q[D×Lq], K[D×Lk], V[D×Lk]; head h uses rows [h·D/H, (h+1)·D/H).
// For every block and head: out[:, q] = V_h[:, keys]·softmax(Q_hᵀK_h / √d_k, mask)ᵀ.
// Output is [D×Lq]; query columns not covered by any block are zero.
template <typename T>
DiffArray<T> masked_attention(const DiffArray<T>& q, const DiffArray<T>& k, const DiffArray<T>& v,
                              std::span<const AttentionBlock> blocks, const AttentionOptions& options,
                              Rng* rng = nullptr);

}  // namespace bbp
