#include "bbp/mc_attention.hpp"

#include <numeric>
#include <string>

#include "bbp/errors.hpp"

namespace bbp {

PatchPlan make_patch_plan(std::size_t seq_len, std::size_t patch_size, std::uint64_t rng_seed) {
  if (patch_size < 1) throw InvalidArgument("patch size must be >= 1");
  if (seq_len < 1) throw InvalidArgument("sequence length must be >= 1");
  PatchPlan plan;
  plan.seq_len = seq_len;
  plan.patch_size = patch_size;
  plan.n_patches = (seq_len + patch_size - 1) / patch_size;
  plan.pad_len = plan.n_patches * patch_size - seq_len;
  plan.group_size = patch_size;
  plan.rng_seed = rng_seed;
  return plan;
}

std::vector<std::size_t> reorganize_permutation(std::size_t length, std::size_t patch_size) {
  if (patch_size == 0 || length % patch_size != 0) {
    throw InvalidArgument("reorganize: length " + std::to_string(length) + " is not a multiple of patch size " +
                          std::to_string(patch_size));
  }
  const std::size_t n = length / patch_size;
  std::vector<std::size_t> perm(length);
  for (std::size_t r = 0; r < patch_size; ++r)
    for (std::size_t q = 0; q < n; ++q) perm[r * n + q] = q * patch_size + r;
  return perm;
}

std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

std::size_t routing_levels(std::size_t n_patches, std::size_t patch_size) {
  if (patch_size <= 1) return 1;
  const std::size_t padded = ((n_patches + patch_size - 1) / patch_size) * patch_size;
  std::size_t levels = 1;
  for (std::size_t reach = patch_size; reach < padded; reach *= patch_size) ++levels;
  return levels;
}

DelegateRouting route_delegates(std::size_t n_patches, std::size_t patch_size, std::size_t level) {
  if (patch_size < 1 || n_patches < 1) throw InvalidArgument("route_delegates needs P >= 1 and N_P >= 1");
  const std::size_t padded = ((n_patches + patch_size - 1) / patch_size) * patch_size;
  std::vector<std::ptrdiff_t> order(padded);
  for (std::size_t i = 0; i < padded; ++i) {
    order[i] = i < n_patches ? static_cast<std::ptrdiff_t>(i) : DelegateRouting::kNoPatch;
  }
  const std::size_t rotations = level % routing_levels(n_patches, patch_size);
  for (std::size_t r = 0; r < rotations; ++r) order = reorganize<std::ptrdiff_t>(order, patch_size);

  DelegateRouting routing;
  routing.patch_size = patch_size;
  routing.n_patches = n_patches;
  routing.group_of.assign(n_patches, 0);
  for (std::size_t g = 0; g * patch_size < padded; ++g) {
    std::vector<std::ptrdiff_t> group(order.begin() + static_cast<std::ptrdiff_t>(g * patch_size),
                                      order.begin() + static_cast<std::ptrdiff_t>((g + 1) * patch_size));
    for (std::ptrdiff_t p : group) {
      if (p != DelegateRouting::kNoPatch) routing.group_of[static_cast<std::size_t>(p)] = g;
    }
    routing.groups.push_back(std::move(group));
  }
  return routing;
}

Mask augmented_mask(const PatchPlan& plan, std::size_t patch, std::span<const std::ptrdiff_t> group,
                    std::size_t query_rows) {
  const std::size_t p = plan.patch_size;
  if (group.size() != p) {
    throw GroupSizeMismatch("group of " + std::to_string(group.size()) + " delegates for patch size " +
                            std::to_string(p));
  }
  if (query_rows > 2 * p) throw ShapeMismatch("more query rows than augmented columns");
  Mask mask(query_rows, 2 * p, false);
  for (std::size_t i = 0; i < query_rows; ++i) {
    if (i >= p) {
      mask.set(i, i, true);
      continue;
    }
    for (std::size_t j = 0; j <= i; ++j) mask.set(i, j, true);
    for (std::size_t s = 0; s < p; ++s) {
      const std::ptrdiff_t src = group[s];
      if (src != DelegateRouting::kNoPatch && static_cast<std::size_t>(src) < patch) mask.set(i, p + s, true);
    }
  }
  return mask;
}

namespace {

template <typename T>
DiffArray<T> pad_columns(const DiffArray<T>& x, std::size_t count, const DiffArray<T>& pad_column) {
  if (count == 0) return x;
  DiffArray<T> pad;
  if (pad_column.defined()) {
    if (pad_column.rows() != x.rows() || pad_column.cols() != 1) {
      throw ShapeMismatch("pad column must be [D×1], got " + shape_str(pad_column.shape()));
    }
    const std::vector<int> idx(count, 0);
    pad = gather_columns(pad_column, idx);
  } else {
    pad = DiffArray<T>::zeros(Shape{x.rows(), count});
  }
  const DiffArray<T> parts[] = {x, pad};
  return concat_columns<T>(parts);
}

template <typename T>
void check_params(const McLayerParams<T>& params, std::size_t d) {
  for (const DiffArray<T>* w : {&params.delegate_kernel, &params.wq, &params.wk, &params.wv, &params.wo}) {
    if (!w->defined() || w->ndim() != 2 || w->rows() != d || w->cols() != d) {
      throw ShapeMismatch("Monte Carlo attention weights must be [" + std::to_string(d) + "x" + std::to_string(d) +
                          "]");
    }
  }
  if (params.heads == 0 || d % params.heads != 0) {
    throw ShapeMismatch("width " + std::to_string(d) + " not divisible by " + std::to_string(params.heads) + " heads");
  }
}

}  // namespace

template <typename T>
Partition<T> partition(const DiffArray<T>& x, std::size_t patch_size, const DiffArray<T>& pad_column) {
  if (x.ndim() != 2) throw ShapeMismatch("partition input must be [D×L]");
  Partition<T> out;
  out.plan = make_patch_plan(x.cols(), patch_size);
  const DiffArray<T> padded = pad_columns(x, out.plan.pad_len, pad_column);
  for (std::size_t i = 0; i < out.plan.n_patches; ++i) {
    out.patches.push_back(slice_columns(padded, i * patch_size, (i + 1) * patch_size));
  }
  return out;
}

template <typename T>
DiffArray<T> make_delegates(const DiffArray<T>& padded, std::size_t patch_size, const DiffArray<T>& kernel) {
  return matmul(kernel, column_block_mean(padded, patch_size));
}

template <typename T>
DiffArray<T> make_delegates(std::span<const DiffArray<T>> patches, const DiffArray<T>& kernel) {
  if (patches.empty()) throw ShapeMismatch("make_delegates with no patches");
  const std::size_t p = patches[0].cols();
  for (const auto& patch : patches) {
    if (patch.cols() != p) throw ShapeMismatch("patches of unequal width");
  }
  return make_delegates(concat_columns<T>(patches), p, kernel);
}

template <typename T>
DiffArray<T> make_random_delegates(const DiffArray<T>& padded, std::size_t patch_size, const DiffArray<T>& kernel,
                                   Rng& rng) {
  if (padded.cols() % patch_size != 0) throw ShapeMismatch("padded length not a multiple of the patch size");
  const std::size_t n = padded.cols() / patch_size;
  std::uniform_int_distribution<std::size_t> pick(0, patch_size - 1);
  std::vector<int> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = static_cast<int>(i * patch_size + pick(rng));
  return matmul(kernel, gather_columns(padded, cols));
}

template <typename T>
DiffArray<T> delegate_group(const DiffArray<T>& delegates, std::span<const std::ptrdiff_t> group,
                            std::size_t patch_size) {
  if (group.size() != patch_size) {
    throw GroupSizeMismatch("group of " + std::to_string(group.size()) + " for patch size " +
                            std::to_string(patch_size));
  }
  const std::size_t d = delegates.rows();
  std::vector<DiffArray<T>> cols;
  for (std::ptrdiff_t src : group) {
    if (src == DelegateRouting::kNoPatch) {
      cols.push_back(DiffArray<T>::zeros(Shape{d, 1}));
    } else {
      const auto s = static_cast<std::size_t>(src);
      cols.push_back(slice_columns(delegates, s, s + 1));
    }
  }
  return concat_columns<T>(cols);
}

template <typename T>
DiffArray<T> augment(const DiffArray<T>& patch, const DiffArray<T>& group) {
  if (patch.ndim() != 2 || group.ndim() != 2 || patch.rows() != group.rows()) {
    throw ShapeMismatch("augment: " + shape_str(patch.shape()) + " with " + shape_str(group.shape()));
  }
  if (group.cols() != patch.cols()) {
    throw GroupSizeMismatch(std::to_string(group.cols()) + " delegates for a patch of " +
                            std::to_string(patch.cols()));
  }
  const DiffArray<T> parts[] = {patch, group};
  return concat_columns<T>(parts);
}

template <typename T>
DiffArray<T> patch_attention(const DiffArray<T>& context, const McLayerParams<T>& params, const Mask& mask,
                             double attention_dropout, RunMode mode, Rng* rng) {
  const std::size_t d = context.rows(), width = context.cols();
  check_params(params, d);
  if (mask.cols != width || mask.rows == 0 || mask.rows > width) {
    throw ShapeMismatch("patch_attention mask " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
                        " for context " + shape_str(context.shape()));
  }
  const DiffArray<T> q = matmul(params.wq, context);
  const DiffArray<T> k = matmul(params.wk, context);
  const DiffArray<T> v = matmul(params.wv, context);
  AttentionBlock block;
  block.queries.resize(mask.rows);
  std::iota(block.queries.begin(), block.queries.end(), std::size_t{0});
  block.keys.resize(width);
  std::iota(block.keys.begin(), block.keys.end(), std::size_t{0});
  block.mask = mask;
  AttentionOptions opts{params.heads, attention_dropout, mode == RunMode::kTrain};
  const AttentionBlock blocks[] = {block};
  const DiffArray<T> out = masked_attention(q, k, v, std::span<const AttentionBlock>(blocks), opts, rng);
  return mask.rows == width ? out : slice_columns(out, 0, mask.rows);
}

template <typename T>
DiffArray<T> mc_layer(const DiffArray<T>& x, const McLayerParams<T>& params, const PatchPlan& plan,
                      const McLayerOptions& options, Rng& rng, const DiffArray<T>& pad_column) {
  if (x.ndim() != 2) throw ShapeMismatch("mc_layer input must be [D×L]");
  if (options.loops < 1) throw InvalidArgument("mc_layer needs loops >= 1");
  const std::size_t d = x.rows(), len = x.cols();
  check_params(params, d);
  if (plan.seq_len != len) {
    throw ShapeMismatch("patch plan for length " + std::to_string(plan.seq_len) + " applied to length " +
                        std::to_string(len));
  }
  const std::size_t p = plan.patch_size, np = plan.n_patches, lp = plan.padded_len();
  const bool train = options.mode == RunMode::kTrain;
  const std::size_t levels = routing_levels(np, p);

  DiffArray<T> h = x;
  for (std::size_t loop = 0; loop < options.loops; ++loop) {
    const DiffArray<T> padded = pad_columns(h, plan.pad_len, pad_column);
    const DiffArray<T> delegates = options.delegate_mode == DelegateMode::kRandom
                                       ? make_random_delegates(padded, p, params.delegate_kernel, rng)
                                       : make_delegates(padded, p, params.delegate_kernel);
    const DelegateRouting routing = route_delegates(np, p, (options.route_base + loop) % levels);

    const DiffArray<T> sources_parts[] = {padded, delegates};
    const DiffArray<T> sources = concat_columns<T>(sources_parts);
    const DiffArray<T> q = matmul(params.wq, padded);
    const DiffArray<T> k = matmul(params.wk, sources);
    const DiffArray<T> v = matmul(params.wv, sources);

    std::vector<AttentionBlock> blocks(np);
    for (std::size_t i = 0; i < np; ++i) {
      const auto& group = routing.group_for(i);
      const std::size_t first = i * p;
      const std::size_t nq = std::min(p, len - first);
      auto& blk = blocks[i];
      blk.queries.resize(nq);
      std::iota(blk.queries.begin(), blk.queries.end(), first);
      blk.keys.resize(2 * p);
      std::iota(blk.keys.begin(), blk.keys.begin() + static_cast<std::ptrdiff_t>(p), first);
      for (std::size_t s = 0; s < p; ++s) {
        const std::ptrdiff_t src = group[s];
        blk.keys[p + s] = lp + (src == DelegateRouting::kNoPatch ? 0 : static_cast<std::size_t>(src));
      }
      blk.mask = augmented_mask(plan, i, group, nq);
    }
    AttentionOptions opts{params.heads, options.attention_dropout, train};
    DiffArray<T> attended = masked_attention(q, k, v, std::span<const AttentionBlock>(blocks), opts, &rng);
    if (lp > len) attended = slice_columns(attended, 0, len);
    const DiffArray<T> branch = dropout(matmul(params.wo, attended), options.dropout, rng, train);
    h = add(h, branch);
  }
  return h;
}

#define BBP_INSTANTIATE_MC(T)                                                                                       \
  template Partition<T> partition(const DiffArray<T>&, std::size_t, const DiffArray<T>&);                           \
  template DiffArray<T> make_delegates(const DiffArray<T>&, std::size_t, const DiffArray<T>&);                      \
  template DiffArray<T> make_delegates(std::span<const DiffArray<T>>, const DiffArray<T>&);                         \
  template DiffArray<T> make_random_delegates(const DiffArray<T>&, std::size_t, const DiffArray<T>&, Rng&);         \
  template DiffArray<T> delegate_group(const DiffArray<T>&, std::span<const std::ptrdiff_t>, std::size_t);          \
  template DiffArray<T> augment(const DiffArray<T>&, const DiffArray<T>&);                                          \
  template DiffArray<T> patch_attention(const DiffArray<T>&, const McLayerParams<T>&, const Mask&, double, RunMode, \
                                        Rng*);                                                                      \
  template DiffArray<T> mc_layer(const DiffArray<T>&, const McLayerParams<T>&, const PatchPlan&,                    \
                                 const McLayerOptions&, Rng&, const DiffArray<T>&);

BBP_INSTANTIATE_MC(float)
BBP_INSTANTIATE_MC(double)

}  // namespace bbp
