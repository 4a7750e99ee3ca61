#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bbp/encoding.hpp"
#include "bbp/model.hpp"
#include "bbp/train/checkpoint.hpp"

namespace bbp {

struct Dataset {
  std::vector<std::vector<Token>> train;
  std::vector<std::vector<Token>> val;
};

// Windows of seq_len+1 tokens cut from the [bos] doc [eos] stream (or one such
// window per document), shuffled with the seed and split by val_fraction.
// Throws CorpusEmpty.
Dataset make_dataset(const Corpus& corpus, const TrainConfig& cfg);

struct MetricsRow {
  std::uint64_t step = 0;
  double loss = 0.0;
  double ppl = 0.0;
  double lr = 0.0;
  double elapsed_s = 0.0;
};

struct EvalResult {
  double nll = 0.0;
  double ppl = 0.0;
  std::size_t windows = 0;
  std::size_t tokens = 0;
};

// Token-weighted mean next-token nll over at most `cap` windows, eval mode.
template <typename T>
EvalResult evaluate(const ModelConfig& cfg, const ModelParams<T>& params, const std::vector<std::vector<Token>>& windows,
                    std::size_t cap);

// Token-weighted loss over `windows`, accumulating its gradient into params'
// grad buffers. Equivalent to one batch of the concatenated windows.
template <typename T>
double accumulate_gradients(const ModelConfig& cfg, const ModelParams<T>& params,
                            const std::vector<std::vector<Token>>& windows, RunMode mode,
                            const std::vector<std::uint64_t>& rng_seeds);

// Window indices and forward seeds for one optimizer step; a pure function
// of (seed, step) so that resumed runs replay exactly.
struct StepPlan {
  std::vector<std::size_t> windows;
  std::vector<std::uint64_t> seeds;
};
StepPlan plan_step(const TrainConfig& cfg, std::uint64_t step, std::size_t n_windows);

struct TrainHooks {
  std::string out_dir;                      // checkpoint.bbpt and metrics.csv; empty disables files
  std::optional<std::uint64_t> stop_at;     // stop after this many total steps (before max_steps)
  std::optional<double> max_seconds;        // wall-clock budget for this call
  std::function<void(const MetricsRow&)> on_log;
  std::function<void(std::uint64_t, const EvalResult&)> on_eval;
};

struct TrainOutcome {
  std::vector<MetricsRow> history;  // one row per optimizer step run by this call
  std::vector<std::pair<std::uint64_t, EvalResult>> evals;
  std::uint64_t skipped_steps = 0;  // non-finite gradients
  std::string checkpoint_path;
  std::string metrics_path;
};

template <typename T>
Checkpoint<T> new_session(const ModelConfig& model, const TrainConfig& train);

// Runs optimizer steps from session.state.step until max_steps, stop_at, the
// time budget or early stopping. Throws DivergedLoss on a non-finite loss; the
// last saved checkpoint is left in place.
template <typename T>
TrainOutcome train(Checkpoint<T>& session, const Dataset& data, const TrainHooks& hooks);

struct ExactMatch {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::string> completions;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

// For each line "<prompt>=<trace> result=<r>" the prompt (through the first
// '=') is completed greedily and its result field compared with r.
template <typename T>
ExactMatch exact_match(const ModelConfig& cfg, const ModelParams<T>& params, const std::vector<std::string>& records,
                       std::size_t extra_tokens = 8);

}  // namespace bbp
