#include "bbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "bbp/errors.hpp"

namespace bbp {

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.embedding_dim = 1024;
  c.num_layers = 20;
  c.num_heads = 4;
  c.mlp_ratio = 2;
  c.dropout_rate = 0.15;
  c.attention_dropout = 0.1;
  c.stochastic_depth_rate = 0.15;
  c.patch_min = 16;
  c.patch_max = 32;
  c.final_patch = 1024;
  c.final_layers = 2;
  c.loops_per_layer = 2;
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.embedding_dim = 64;
  c.num_layers = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.patch_min = 4;
  c.patch_max = 8;
  c.final_patch = 8;
  c.final_layers = 0;
  c.loops_per_layer = 2;
  return c;
}

void ModelConfig::validate() const {
  if (embedding_dim == 0 || num_layers == 0 || num_heads == 0 || mlp_ratio == 0) {
    throw InvalidArgument("model dimensions must be positive");
  }
  if (embedding_dim % num_heads != 0) {
    throw InvalidArgument("embedding_dim " + std::to_string(embedding_dim) + " not divisible by " +
                          std::to_string(num_heads) + " heads");
  }
  if (patch_min < 1 || patch_max < patch_min) throw InvalidArgument("need 1 <= patch_min <= patch_max");
  if (final_layers > num_layers) throw InvalidArgument("final_layers exceeds num_layers");
  if (final_layers > 0 && final_patch < 1) throw InvalidArgument("final_patch must be >= 1");
  if (loops_per_layer < 1) throw InvalidArgument("loops_per_layer must be >= 1");
  if (tcn_kernel < 1 || tcn_dilations.empty()) throw InvalidArgument("tcn needs a kernel size and dilations");
  for (double r : {dropout_rate, attention_dropout, stochastic_depth_rate}) {
    if (!(r >= 0.0 && r < 1.0)) throw InvalidArgument("rates must lie in [0, 1)");
  }
  if (!(init_std > 0.0)) throw InvalidArgument("init_std must be positive");
}

std::size_t ModelConfig::eval_patch(std::size_t layer) const {
  if (is_final_layer(layer)) return final_patch;
  return (patch_min + patch_max) / 2;
}

std::uint64_t count_parameters(const ModelConfig& cfg) {
  const std::uint64_t d = cfg.embedding_dim, h = cfg.mlp_ratio * cfg.embedding_dim, v = ModelConfig::vocab;
  const std::uint64_t heads = cfg.tie_embeddings ? 0 : v * d;
  const std::uint64_t attention = 5 * d * d;
  const std::uint64_t tcn = h * d + d * h + cfg.tcn_dilations.size() * h * h * cfg.tcn_kernel;
  return v * d + heads + cfg.num_layers * (attention + tcn);
}

template <typename T>
std::vector<std::pair<std::string, DiffArray<T>>> ModelParams<T>::named() const {
  std::vector<std::pair<std::string, DiffArray<T>>> out;
  out.emplace_back("embedding", embedding);
  if (lm_head.defined()) out.emplace_back("lm_head", lm_head);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const auto& a = layers[l].attention;
    out.emplace_back(p + "delegate", a.delegate_kernel);
    out.emplace_back(p + "wq", a.wq);
    out.emplace_back(p + "wk", a.wk);
    out.emplace_back(p + "wv", a.wv);
    out.emplace_back(p + "wo", a.wo);
    const auto& t = layers[l].tcn;
    out.emplace_back(p + "tcn.in", t.in_proj);
    for (std::size_t k = 0; k < t.kernels.size(); ++k) out.emplace_back(p + "tcn.conv" + std::to_string(k), t.kernels[k]);
    out.emplace_back(p + "tcn.out", t.out_proj);
  }
  return out;
}

template <typename T>
std::size_t ModelParams<T>::count() const {
  std::size_t n = 0;
  for (const auto& [name, w] : named()) n += w.size();
  return n;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& [name, w] : named()) w.zero_grad();
}

namespace {

// Applies `make(shape)` to every tensor slot in config order.
template <typename T, typename Make>
ModelParams<T> build(const ModelConfig& cfg, Make&& make) {
  cfg.validate();
  const std::size_t d = cfg.embedding_dim, h = cfg.mlp_ratio * d, v = ModelConfig::vocab;
  ModelParams<T> p;
  p.embedding = make(Shape{d, v});
  p.lm_head = cfg.tie_embeddings ? DiffArray<T>() : make(Shape{v, d});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerParams<T> layer;
    layer.attention.delegate_kernel = make(Shape{d, d});
    layer.attention.wq = make(Shape{d, d});
    layer.attention.wk = make(Shape{d, d});
    layer.attention.wv = make(Shape{d, d});
    layer.attention.wo = make(Shape{d, d});
    layer.attention.heads = cfg.num_heads;
    layer.tcn.in_proj = make(Shape{h, d, 1});
    for (std::size_t k = 0; k < cfg.tcn_dilations.size(); ++k) layer.tcn.kernels.push_back(make(Shape{h, h, cfg.tcn_kernel}));
    layer.tcn.out_proj = make(Shape{d, h, 1});
    layer.tcn.dilations = cfg.tcn_dilations;
    layer.tcn.kernel_size = cfg.tcn_kernel;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

// Rebuilds a parameter set by mapping every named tensor through `fn`,
// then re-establishes the tied head.
template <typename To, typename From, typename Fn>
ModelParams<To> map_params(const ModelParams<From>& src, const ModelConfig& cfg, Fn&& fn) {
  ModelParams<To> out;
  out.embedding = fn(src.embedding);
  out.lm_head = cfg.tie_embeddings ? DiffArray<To>() : fn(src.lm_head);
  for (const auto& layer : src.layers) {
    LayerParams<To> l;
    l.attention.delegate_kernel = fn(layer.attention.delegate_kernel);
    l.attention.wq = fn(layer.attention.wq);
    l.attention.wk = fn(layer.attention.wk);
    l.attention.wv = fn(layer.attention.wv);
    l.attention.wo = fn(layer.attention.wo);
    l.attention.heads = layer.attention.heads;
    l.tcn.in_proj = fn(layer.tcn.in_proj);
    for (const auto& k : layer.tcn.kernels) l.tcn.kernels.push_back(fn(k));
    l.tcn.out_proj = fn(layer.tcn.out_proj);
    l.tcn.dilations = layer.tcn.dilations;
    l.tcn.kernel_size = layer.tcn.kernel_size;
    out.layers.push_back(std::move(l));
  }
  return out;
}

}  // namespace

template <typename T>
ModelParams<T> zero_params(const ModelConfig& cfg) {
  return build<T>(cfg, [](Shape s) { return DiffArray<T>::zeros(std::move(s), true); });
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, cfg.init_std);
  return build<T>(cfg, [&](Shape s) {
    std::vector<T> data(shape_numel(s));
    for (T& x : data) x = static_cast<T>(normal(rng));
    return DiffArray<T>(std::move(s), std::move(data), true);
  });
}

template <typename T>
ModelParams<T> watch_params(const ModelParams<T>& params, const ModelConfig& cfg, Tape<T>& tape) {
  return map_params<T>(params, cfg, [&](const DiffArray<T>& w) { return tape.watch(w); });
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params, const ModelConfig& cfg) {
  return map_params<To>(params, cfg, [](const DiffArray<From>& w) {
    std::vector<To> data(w.data().begin(), w.data().end());
    return DiffArray<To>(w.shape(), std::move(data), true);
  });
}

template <typename T>
DiffArray<T> forward(std::span<const Token> tokens, const ModelConfig& cfg, const ModelParams<T>& params, RunMode mode,
                     Rng& rng, Tape<T>* tape) {
  if (tokens.empty()) throw InvalidArgument("forward needs at least one token");
  if (params.layers.size() != cfg.num_layers) throw IncompatibleShape("parameter layers do not match config");
  const ModelParams<T> p = tape ? watch_params(params, cfg, *tape) : params;
  const bool train = mode == RunMode::kTrain;
  const std::size_t len = tokens.size();

  DiffArray<T> x = embed(tokens, p.embedding);
  const Token pad_index[] = {kPad};
  const DiffArray<T> pad_column = embed(std::span<const Token>(pad_index), p.embedding);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    std::size_t patch = cfg.eval_patch(l);
    if (train && !cfg.is_final_layer(l)) {
      patch = std::uniform_int_distribution<std::size_t>(cfg.patch_min, cfg.patch_max)(rng);
    }
    const double drop = train ? cfg.stochastic_depth_rate : 0.0;
    if (drop > 0.0 && unit(rng) < drop) continue;

    McLayerOptions mc;
    mc.loops = cfg.loops_per_layer;
    mc.mode = mode;
    mc.dropout = cfg.dropout_rate;
    mc.attention_dropout = cfg.attention_dropout;
    mc.delegate_mode = cfg.delegate_mode;
    mc.route_base = l * cfg.loops_per_layer;
    const PatchPlan plan = make_patch_plan(len, patch);
    const DiffArray<T> y = mc_layer(x, p.layers[l].attention, plan, mc, rng, pad_column);
    const DiffArray<T> z = tcn_block(y, p.layers[l].tcn, TcnOptions{mode, cfg.dropout_rate}, rng);
    x = drop > 0.0 ? add(x, scale(sub(z, x), static_cast<T>(1.0 / (1.0 - drop)))) : z;
  }
  const DiffArray<T> head = p.lm_head.defined() ? p.lm_head : transpose(p.embedding);
  return transpose(matmul(head, x));
}

template <typename T>
LossValue loss_and_ppl(const DiffArray<T>& logits, std::span<const Token> targets) {
  const int ignore[] = {kPad};
  const DiffArray<T> nll = cross_entropy(logits, targets, std::span<const int>(ignore));
  LossValue out;
  out.nll = static_cast<double>(nll.item());
  out.ppl = std::exp(out.nll);
  return out;
}

template <typename T>
DiffArray<T> lm_loss(std::span<const Token> window, const ModelConfig& cfg, const ModelParams<T>& params,
                     RunMode mode, Rng& rng, Tape<T>* tape) {
  if (window.size() < 2) throw EmptyBatch("window needs at least two tokens");
  const DiffArray<T> logits = forward(window.first(window.size() - 1), cfg, params, mode, rng, tape);
  const int ignore[] = {kPad};
  return cross_entropy(logits, window.subspan(1), std::span<const int>(ignore));
}

SamplingPolicy SamplingPolicy::parse(const std::string& spec) {
  if (spec == "greedy") return greedy();
  try {
    if (spec.rfind("temp:", 0) == 0) {
      const double tau = std::stod(spec.substr(5));
      if (!(tau > 0.0)) throw InvalidArgument("temperature must be positive");
      return with_temperature(tau);
    }
    if (spec.rfind("topk:", 0) == 0) {
      const long k = std::stol(spec.substr(5));
      if (k < 1) throw InvalidArgument("top_k must be >= 1");
      return with_top_k(static_cast<std::size_t>(k));
    }
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad sampling policy '" + spec + "'");
  }
  throw InvalidArgument("unknown sampling policy '" + spec + "' (greedy|temp:t|topk:k)");
}

namespace {

Token pick_token(std::span<const double> logits, const SamplingPolicy& policy, Rng& rng) {
  if (policy.kind == SamplingPolicy::Kind::kGreedy) {
    return static_cast<Token>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  std::vector<std::size_t> order(logits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double tau = policy.temperature;
  if (policy.kind == SamplingPolicy::Kind::kTopK) {
    const std::size_t k = std::min(policy.top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
    order.resize(k);
    tau = 1.0;
  }
  double top = -INFINITY;
  for (std::size_t i : order) top = std::max(top, logits[i]);
  std::vector<double> weights;
  for (std::size_t i : order) weights.push_back(std::exp((logits[i] - top) / tau));
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return static_cast<Token>(order[dist(rng)]);
}

}  // namespace

template <typename T>
std::string generate(std::string_view prompt, const ModelConfig& cfg, const ModelParams<T>& params,
                     const SamplingPolicy& policy, std::size_t max_new, std::uint64_t seed) {
  if (max_new < 1) throw InvalidArgument("max_new must be >= 1");
  std::vector<Token> tokens = encode(prompt, true);
  Rng rng(seed);
  Rng unused(seed);
  std::string out;
  for (std::size_t n = 0; n < max_new; ++n) {
    const DiffArray<T> logits = forward<T>(tokens, cfg, params, RunMode::kEval, unused);
    const std::size_t v = logits.cols();
    const auto row = logits.data().subspan((logits.rows() - 1) * v, v);
    std::vector<double> last(row.begin(), row.end());
    const Token next = pick_token(last, policy, rng);
    if (next == kEos) break;
    if (is_byte_token(next)) out.push_back(static_cast<char>(next));
    tokens.push_back(next);
  }
  return out;
}

double model_grad_check(const ModelConfig& cfg, std::uint64_t seed, std::size_t seq_len,
                        const GradCheckOptions& options) {
  if (seq_len < 2) throw InvalidArgument("grad check needs at least two tokens");
  const ModelParams<double> params = init_params<double>(cfg, seed);
  Rng token_rng(seed ^ 0x5DEECE66DULL);
  std::uniform_int_distribution<Token> byte(0, 255);
  std::vector<Token> tokens(seq_len);
  for (Token& t : tokens) t = byte(token_rng);
  std::vector<DiffArray<double>> tensors;
  for (const auto& [name, w] : params.named()) tensors.push_back(w);
  const ParamLossFn loss = [&](Tape<double>* tape) {
    Rng rng(seed + 1);
    return lm_loss<double>(tokens, cfg, params, RunMode::kTrain, rng, tape);
  };
  return grad_check(loss, tensors, options);
}

#define BBP_INSTANTIATE_MODEL(T)                                                                                     \
  template struct ModelParams<T>;                                                                                    \
  template ModelParams<T> zero_params<T>(const ModelConfig&);                                                        \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                                         \
  template ModelParams<T> watch_params(const ModelParams<T>&, const ModelConfig&, Tape<T>&);                         \
  template DiffArray<T> forward(std::span<const Token>, const ModelConfig&, const ModelParams<T>&, RunMode, Rng&,    \
                                Tape<T>*);                                                                           \
  template LossValue loss_and_ppl(const DiffArray<T>&, std::span<const Token>);                                      \
  template DiffArray<T> lm_loss(std::span<const Token>, const ModelConfig&, const ModelParams<T>&, RunMode, Rng&,    \
                                Tape<T>*);                                                                           \
  template std::string generate(std::string_view, const ModelConfig&, const ModelParams<T>&, const SamplingPolicy&, \
                                std::size_t, std::uint64_t);

BBP_INSTANTIATE_MODEL(float)
BBP_INSTANTIATE_MODEL(double)

template ModelParams<float> cast_params<float, double>(const ModelParams<double>&, const ModelConfig&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&, const ModelConfig&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&, const ModelConfig&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&, const ModelConfig&);

}  // namespace bbp
