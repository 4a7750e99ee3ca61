#include "bbp/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "bbp/corpus/cot.hpp"
#include "bbp/errors.hpp"

namespace bbp {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FTZ and DAZ for the lifetime of the object.
class FlushDenormals {
 public:
#if defined(__SSE2__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

std::size_t target_count(const std::vector<Token>& w) {
  return static_cast<std::size_t>(std::count_if(w.begin() + 1, w.end(), [](Token t) { return t != kPad; }));
}

}  // namespace

Dataset make_dataset(const Corpus& corpus, const TrainConfig& cfg) {
  std::vector<std::vector<Token>> windows;
  const std::vector<std::string> docs = corpus.document_strings();
  if (cfg.document_windows) {
    for (const auto& d : docs) {
      std::vector<Token> w = encode(d, true, true);
      if (w.size() > cfg.seq_len + 1) w.resize(cfg.seq_len + 1);
      windows.push_back(std::move(w));
    }
  } else {
    PackOptions pack;
    pack.bos_per_document = true;
    pack.eos_per_document = true;
    const PackedStream stream = pack_documents(docs, pack);
    windows = pack_windows(stream.tokens, cfg.seq_len + 1);
  }
  std::erase_if(windows, [](const std::vector<Token>& w) { return w.size() < 2 || target_count(w) == 0; });
  if (windows.empty()) throw CorpusEmpty("corpus yields no training windows");

  Rng rng(splitmix(cfg.seed ^ 0xD1B54A32D192ED03ULL));
  std::shuffle(windows.begin(), windows.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(windows.size())));
  if (cfg.val_fraction > 0.0 && n_val == 0 && windows.size() >= 2) n_val = 1;
  Dataset data;
  data.val.assign(windows.end() - static_cast<std::ptrdiff_t>(n_val), windows.end());
  windows.resize(windows.size() - n_val);
  data.train = std::move(windows);
  return data;
}

template <typename T>
EvalResult evaluate(const ModelConfig& cfg, const ModelParams<T>& params, const std::vector<std::vector<Token>>& windows,
                    std::size_t cap) {
  EvalResult r;
  double total = 0.0;
  Rng rng(0);
  for (std::size_t i = 0; i < std::min(cap, windows.size()); ++i) {
    const auto& w = windows[i];
    const std::size_t n = target_count(w);
    if (w.size() < 2 || n == 0) continue;
    const DiffArray<T> loss = lm_loss<T>(w, cfg, params, RunMode::kEval, rng, nullptr);
    total += static_cast<double>(loss.item()) * static_cast<double>(n);
    r.tokens += n;
    ++r.windows;
  }
  if (r.tokens == 0) throw EmptyBatch("no evaluation tokens");
  r.nll = total / static_cast<double>(r.tokens);
  r.ppl = std::exp(r.nll);
  return r;
}

template <typename T>
double accumulate_gradients(const ModelConfig& cfg, const ModelParams<T>& params,
                            const std::vector<std::vector<Token>>& windows, RunMode mode,
                            const std::vector<std::uint64_t>& rng_seeds) {
  if (windows.size() != rng_seeds.size()) throw InvalidArgument("one rng seed per window required");
  std::size_t total = 0;
  for (const auto& w : windows) total += w.size() >= 2 ? target_count(w) : 0;
  if (total == 0) throw EmptyBatch("no target tokens in step");
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t n = windows[i].size() >= 2 ? target_count(windows[i]) : 0;
    if (n == 0) continue;
    Rng rng(rng_seeds[i]);
    Tape<T> tape;
    const DiffArray<T> loss = lm_loss<T>(windows[i], cfg, params, mode, rng, &tape);
    const double weight = static_cast<double>(n) / static_cast<double>(total);
    loss_sum += static_cast<double>(loss.item()) * weight;
    tape.backward(scale(loss, static_cast<T>(weight)));
  }
  return loss_sum;
}

StepPlan plan_step(const TrainConfig& cfg, std::uint64_t step, std::size_t n_windows) {
  if (n_windows == 0) throw CorpusEmpty("no training windows");
  StepPlan plan;
  for (std::size_t j = 0; j < cfg.grad_accum; ++j) {
    const std::uint64_t key = splitmix(cfg.seed ^ splitmix(step * cfg.grad_accum + j));
    plan.windows.push_back(static_cast<std::size_t>(key % n_windows));
    plan.seeds.push_back(splitmix(key ^ 0xA0761D6478BD642FULL));
  }
  return plan;
}

template <typename T>
Checkpoint<T> new_session(const ModelConfig& model, const TrainConfig& train) {
  model.validate();
  train.validate();
  Checkpoint<T> s;
  s.model = model;
  s.train = train;
  s.params = init_params<T>(model, train.seed);
  std::vector<DiffArray<T>> plain;
  for (auto& [name, w] : s.params.named()) plain.push_back(w);
  s.optimizer = make_optimizer_state(plain, train.beta1, train.beta2, train.eps);
  return s;
}

template <typename T>
TrainOutcome train(Checkpoint<T>& session, const Dataset& data, const TrainHooks& hooks) {
  const TrainConfig& tc = session.train;
  const ModelConfig& mc = session.model;
  if (data.train.empty()) throw CorpusEmpty("no training windows");
  const FlushDenormals ftz;
  TrainOutcome out;
  std::ofstream metrics;
  if (!hooks.out_dir.empty()) {
    std::filesystem::create_directories(hooks.out_dir);
    out.checkpoint_path = (std::filesystem::path(hooks.out_dir) / "checkpoint.bbpt").string();
    out.metrics_path = (std::filesystem::path(hooks.out_dir) / "metrics.csv").string();
    const bool fresh = session.state.step == 0 || !std::filesystem::exists(out.metrics_path);
    metrics.open(out.metrics_path, fresh ? std::ios::trunc : std::ios::app);
    if (!metrics) throw IoError("cannot write " + out.metrics_path);
    if (fresh) metrics << "step,loss,ppl,lr,elapsed_s\n";
  }
  const auto save = [&] {
    if (!out.checkpoint_path.empty()) save_checkpoint(out.checkpoint_path, session);
  };

  std::vector<DiffArray<T>> plain;
  for (auto& [name, w] : session.params.named()) plain.push_back(w);

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  std::uint64_t limit = tc.max_steps;
  if (hooks.stop_at) limit = std::min<std::uint64_t>(limit, *hooks.stop_at);

  while (session.state.step < limit && !session.state.stopped_early) {
    if (hooks.max_seconds && elapsed() > *hooks.max_seconds) break;
    const std::uint64_t step = session.state.step;
    const StepPlan plan = plan_step(tc, step, data.train.size());
    std::vector<std::vector<Token>> windows;
    for (std::size_t i : plan.windows) windows.push_back(data.train[i]);

    session.params.zero_grad();
    const double loss = accumulate_gradients(mc, session.params, windows, RunMode::kTrain, plan.seeds);
    if (!std::isfinite(loss)) {
      throw DivergedLoss("loss " + std::to_string(loss) + " at step " + std::to_string(step + 1));
    }
    const double lr = lr_schedule(step + 1, tc);
    try {
      adamw_step(plain, session.optimizer, lr, tc.weight_decay);
    } catch (const NonFiniteGradient&) {
      ++out.skipped_steps;
    }
    session.state.step = step + 1;

    const MetricsRow row{session.state.step, loss, std::exp(loss), lr, elapsed()};
    out.history.push_back(row);
    if (tc.iter_print && session.state.step % tc.iter_print == 0) {
      if (metrics.is_open()) {
        metrics << row.step << ',' << row.loss << ',' << row.ppl << ',' << row.lr << ',' << row.elapsed_s << '\n';
        metrics.flush();
      }
      if (hooks.on_log) hooks.on_log(row);
    }
    if (tc.eval_every && session.state.step % tc.eval_every == 0 && !data.val.empty()) {
      const EvalResult ev = evaluate(mc, session.params, data.val, tc.val_cap);
      out.evals.emplace_back(session.state.step, ev);
      if (hooks.on_eval) hooks.on_eval(session.state.step, ev);
      if (ev.nll < session.state.best_eval - tc.min_delta) {
        session.state.best_eval = ev.nll;
        session.state.bad_evals = 0;
      } else {
        ++session.state.bad_evals;
      }
      if (tc.early_stopping && session.state.bad_evals >= tc.patience) session.state.stopped_early = true;
    }
    if (tc.save_every && session.state.step % tc.save_every == 0) save();
  }
  save();
  return out;
}

template <typename T>
ExactMatch exact_match(const ModelConfig& cfg, const ModelParams<T>& params, const std::vector<std::string>& records,
                       std::size_t extra_tokens) {
  ExactMatch r;
  for (const auto& line : records) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("record without '=': " + line);
    const std::string expected = extract_result(line);
    if (expected.empty()) throw InvalidArgument("record without result=: " + line);
    const std::string prompt = line.substr(0, eq + 1);
    const std::string completion =
        generate<T>(prompt, cfg, params, SamplingPolicy::greedy(), line.size() - prompt.size() + extra_tokens, 0);
    if (extract_result(completion) == expected) ++r.correct;
    ++r.total;
    r.completions.push_back(completion);
  }
  return r;
}

#define BBP_INSTANTIATE_TRAINER(T)                                                                                  \
  template EvalResult evaluate(const ModelConfig&, const ModelParams<T>&, const std::vector<std::vector<Token>>&,   \
                               std::size_t);                                                                        \
  template double accumulate_gradients(const ModelConfig&, const ModelParams<T>&,                                   \
                                       const std::vector<std::vector<Token>>&, RunMode,                             \
                                       const std::vector<std::uint64_t>&);                                          \
  template Checkpoint<T> new_session<T>(const ModelConfig&, const TrainConfig&);                                    \
  template TrainOutcome train(Checkpoint<T>&, const Dataset&, const TrainHooks&);                                   \
  template ExactMatch exact_match(const ModelConfig&, const ModelParams<T>&, const std::vector<std::string>&,       \
                                  std::size_t);

BBP_INSTANTIATE_TRAINER(float)
BBP_INSTANTIATE_TRAINER(double)

}  // namespace bbp
