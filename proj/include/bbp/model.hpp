#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbp/encoding.hpp"
#include "bbp/mc_attention.hpp"
#include "bbp/numerics/diff_array.hpp"
#include "bbp/numerics/grad_check.hpp"
#include "bbp/tcn.hpp"

namespace bbp {

struct ModelConfig {
  std::size_t embedding_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  std::size_t mlp_ratio = 2;
  double dropout_rate = 0.0;
  double attention_dropout = 0.0;
  double stochastic_depth_rate = 0.0;  // drop probability per block, train only
  std::size_t patch_min = 4;
  std::size_t patch_max = 8;
  std::size_t final_patch = 8;
  std::size_t final_layers = 0;  // trailing layers that use final_patch
  std::size_t loops_per_layer = 2;
  std::size_t tcn_kernel = 3;
  std::vector<std::size_t> tcn_dilations = {1, 2, 4};
  DelegateMode delegate_mode = DelegateMode::kSelective;
  bool tie_embeddings = false;
  double init_std = 0.02;

  static constexpr std::size_t vocab = kVocabSize;

  // Table-scale architecture: D=1024, 20 layers, 4 heads, mlp_ratio 2,
  // dropout 0.15, attention dropout 0.1, stochastic depth 0.15, patches
  // drawn from [16,32] with the final two layers at 1024.
  static ModelConfig paper();
  // Small preset used for gradient checks and CPU training.
  static ModelConfig desk();

  void validate() const;
  // Patch size of `layer` in eval mode (midpoint of the range, or final_patch).
  std::size_t eval_patch(std::size_t layer) const;
  bool is_final_layer(std::size_t layer) const { return layer + final_layers >= num_layers; }
};

template <typename T>
struct LayerParams {
  McLayerParams<T> attention;
  TcnParams<T> tcn;
};

template <typename T>
struct ModelParams {
  DiffArray<T> embedding;  // [D×259]
  DiffArray<T> lm_head;    // [259×D]; undefined when tied (embeddingᵀ is used)
  std::vector<LayerParams<T>> layers;

  // Every learnable tensor with a stable name. Tied heads are listed once.
  std::vector<std::pair<std::string, DiffArray<T>>> named() const;
  std::size_t count() const;
  void zero_grad();
};

// Parameter count implied by a config, without allocating it.
std::uint64_t count_parameters(const ModelConfig& cfg);

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

// Returns a structurally identical parameter set whose tensors are watched on `tape`.
template <typename T>
ModelParams<T> watch_params(const ModelParams<T>& params, const ModelConfig& cfg, Tape<T>& tape);

// Converts between precisions (values rounded to the target type).
template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params, const ModelConfig& cfg);

// Allocates zeroed parameters with the shapes a config implies.
template <typename T>
ModelParams<T> zero_params(const ModelConfig& cfg);

// Logits [L×259]. logits[t] depends only on tokens[0..t]. When `tape` is
// non-null every parameter is watched so that backward() fills their grads.
template <typename T>
DiffArray<T> forward(std::span<const Token> tokens, const ModelConfig& cfg, const ModelParams<T>& params, RunMode mode,
                     Rng& rng, Tape<T>* tape = nullptr);

struct LossValue {
  double nll = 0.0;
  double ppl = 0.0;
};

// Mean NLL over non-pad targets and its exponential.
template <typename T>
LossValue loss_and_ppl(const DiffArray<T>& logits, std::span<const Token> targets);

// Next-token loss of a window: predicts tokens[1..] from tokens[..n-1].
template <typename T>
DiffArray<T> lm_loss(std::span<const Token> window, const ModelConfig& cfg, const ModelParams<T>& params,
                     RunMode mode, Rng& rng, Tape<T>* tape);

struct SamplingPolicy {
  enum class Kind { kGreedy, kTemperature, kTopK };
  Kind kind = Kind::kGreedy;
  double temperature = 1.0;
  std::size_t top_k = 1;

  static SamplingPolicy greedy() { return {}; }
  static SamplingPolicy with_temperature(double tau) { return {Kind::kTemperature, tau, 0}; }
  static SamplingPolicy with_top_k(std::size_t k) { return {Kind::kTopK, 1.0, k}; }
  // "greedy" | "temp:τ" | "topk:k"
  static SamplingPolicy parse(const std::string& spec);
};

// Autoregressive decoding in eval mode; stops at eos or after max_new tokens.
template <typename T>
std::string generate(std::string_view prompt, const ModelConfig& cfg, const ModelParams<T>& params,
                     const SamplingPolicy& policy, std::size_t max_new, std::uint64_t seed);

// Finite-difference check of lm_loss over every parameter tensor at 64-bit,
// with parameters drawn from init_params(cfg, seed) and `seq_len` random tokens.
// Train mode with a fixed rng, so random patch sizes are exercised.
double model_grad_check(const ModelConfig& cfg, std::uint64_t seed, std::size_t seq_len,
                        const GradCheckOptions& options);

}  // namespace bbp
