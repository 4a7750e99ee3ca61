#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bbp/numerics/diff_array.hpp"
#include "bbp/numerics/ops.hpp"

namespace bbp {

enum class RunMode { kTrain, kEval };

// Partition of a length-L sequence into ceil(L/P) contiguous patches of P columns.
struct PatchPlan {
  std::size_t seq_len = 0;
  std::size_t patch_size = 0;
  std::size_t n_patches = 0;
  std::size_t pad_len = 0;
  std::size_t group_size = 0;  // delegates exchanged per group (= patch_size)
  std::uint64_t rng_seed = 0;

  std::size_t padded_len() const { return n_patches * patch_size; }
};

PatchPlan make_patch_plan(std::size_t seq_len, std::size_t patch_size, std::uint64_t rng_seed = 0);

// Reorganization T: view the (padded) sequence as an N_P×P matrix with one patch
// per row, transpose to P×N_P and flatten row-major. Returns perm with
// output[i] = input[perm[i]]. Requires length % patch_size == 0.
std::vector<std::size_t> reorganize_permutation(std::size_t length, std::size_t patch_size);
std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm);

template <typename Item>
std::vector<Item> reorganize(std::span<const Item> seq, std::size_t patch_size) {
  const auto perm = reorganize_permutation(seq.size(), patch_size);
  std::vector<Item> out;
  out.reserve(seq.size());
  for (std::size_t i : perm) out.push_back(seq[i]);
  return out;
}

// Delegate groups for one application of the layer. Delegates (one per patch)
// are padded to a multiple of P, reorganized `level` times, and cut into
// consecutive groups of P. Entries are source patch ids or kNoPatch.
struct DelegateRouting {
  static constexpr std::ptrdiff_t kNoPatch = -1;
  std::size_t patch_size = 0;
  std::size_t n_patches = 0;
  std::vector<std::vector<std::ptrdiff_t>> groups;
  std::vector<std::size_t> group_of;  // patch -> index into groups

  const std::vector<std::ptrdiff_t>& group_for(std::size_t patch) const { return groups[group_of[patch]]; }
};

// Number of distinct routing levels before the rotation schedule repeats:
// smallest k ≥ 1 with P^k ≥ padded delegate count.
std::size_t routing_levels(std::size_t n_patches, std::size_t patch_size);
DelegateRouting route_delegates(std::size_t n_patches, std::size_t patch_size, std::size_t level);

// Augmented-context mask for patch `patch` ([query_rows × 2P]).
// Local key j is allowed for local query i iff j ≤ i; delegate slot s is
// allowed iff its source patch exists and precedes `patch` (self and pad slots
// are always masked). Rows beyond P (delegate queries) see only their own column.
Mask augmented_mask(const PatchPlan& plan, std::size_t patch, std::span<const std::ptrdiff_t> group,
                    std::size_t query_rows);

template <typename T>
struct McLayerParams {
  DiffArray<T> delegate_kernel;  // [D×D], the 1×1 convolution
  DiffArray<T> wq, wk, wv;       // [D×D], split across heads by rows
  DiffArray<T> wo;               // [D×D], output Linear
  std::size_t heads = 1;

  std::size_t width() const { return wq.rows(); }
};

enum class DelegateMode { kSelective, kRandom };

template <typename T>
struct Partition {
  std::vector<DiffArray<T>> patches;  // each [D×P]
  PatchPlan plan;
};

// Splits X[D×L] into patches of P columns; padding columns copy `pad_column`
// ([D×1], zeros if undefined).
template <typename T>
Partition<T> partition(const DiffArray<T>& x, std::size_t patch_size, const DiffArray<T>& pad_column = {});

// delegate i = kernel · mean(columns of patch i). Result [D×N_P].
template <typename T>
DiffArray<T> make_delegates(std::span<const DiffArray<T>> patches, const DiffArray<T>& kernel);

// Same on the concatenated padded sequence [D×N_P·P].
template <typename T>
DiffArray<T> make_delegates(const DiffArray<T>& padded, std::size_t patch_size, const DiffArray<T>& kernel);

// delegate i = kernel · (uniformly drawn column of patch i).
template <typename T>
DiffArray<T> make_random_delegates(const DiffArray<T>& padded, std::size_t patch_size, const DiffArray<T>& kernel,
                                   Rng& rng);

// Gathers the delegate columns of one routing group into [D×P]; missing
// entries are zero columns. Throws GroupSizeMismatch if group.size() != P.
template <typename T>
DiffArray<T> delegate_group(const DiffArray<T>& delegates, std::span<const std::ptrdiff_t> group,
                            std::size_t patch_size);

// [local | delegates] -> [D×2P]. Throws GroupSizeMismatch on width disagreement.
template <typename T>
DiffArray<T> augment(const DiffArray<T>& patch, const DiffArray<T>& group);

// Multi-head attention over one augmented context C[D×2P]. Queries come from
// the first mask.rows columns; output is [D×mask.rows]. No output projection.
template <typename T>
DiffArray<T> patch_attention(const DiffArray<T>& context, const McLayerParams<T>& params, const Mask& mask,
                             double attention_dropout = 0.0, RunMode mode = RunMode::kEval, Rng* rng = nullptr);

struct McLayerOptions {
  std::size_t loops = 1;
  RunMode mode = RunMode::kEval;
  double dropout = 0.0;            // on the Linear(attention) branch
  double attention_dropout = 0.0;  // on attention probabilities
  DelegateMode delegate_mode = DelegateMode::kSelective;
  std::size_t route_base = 0;      // routing level of the first loop
};

// Monte Carlo Attention layer. Each loop: partition, delegates, routing,
// augmented masked attention per patch, then Y_i = X_i + Linear(local outputs).
template <typename T>
DiffArray<T> mc_layer(const DiffArray<T>& x, const McLayerParams<T>& params, const PatchPlan& plan,
                      const McLayerOptions& options, Rng& rng, const DiffArray<T>& pad_column = {});

}  // namespace bbp
