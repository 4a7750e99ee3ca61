#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bbp/corpus/cot.hpp"
#include "bbp/corpus/records.hpp"
#include "bbp/errors.hpp"
#include "bbp/model.hpp"
#include "bbp/scaling.hpp"
#include "bbp/train/checkpoint.hpp"
#include "bbp/train/config.hpp"
#include "bbp/train/trainer.hpp"

namespace {

using namespace bbp;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

struct TrainArgs {
  std::string model_cfg, train_cfg, corpus, out, resume;
  double max_seconds = 0.0;
};

template <typename T>
int run_train(const TrainArgs& a) {
  Checkpoint<T> session = a.resume.empty()
                              ? new_session<T>(load_model_config(a.model_cfg), load_train_config(a.train_cfg))
                              : load_checkpoint<T>(a.resume);
  const Dataset data = make_dataset(read_corpus(a.corpus), session.train);
  std::printf("params %zu  train windows %zu  val windows %zu  start step %llu\n", session.params.count(),
              data.train.size(), data.val.size(), static_cast<unsigned long long>(session.state.step));
  TrainHooks hooks;
  hooks.out_dir = a.out;
  if (a.max_seconds > 0) hooks.max_seconds = a.max_seconds;
  hooks.on_log = [](const MetricsRow& r) {
    std::printf("step %llu  loss %.4f  ppl %.3f  lr %.3g  %.1fs\n", static_cast<unsigned long long>(r.step), r.loss,
                r.ppl, r.lr, r.elapsed_s);
    std::fflush(stdout);
  };
  hooks.on_eval = [](std::uint64_t step, const EvalResult& e) {
    std::printf("eval @%llu  nll %.4f  ppl %.3f  (%zu windows)\n", static_cast<unsigned long long>(step), e.nll, e.ppl,
                e.windows);
    std::fflush(stdout);
  };
  const TrainOutcome out = train(session, data, hooks);
  if (out.skipped_steps) std::printf("skipped %llu steps with non-finite gradients\n", static_cast<unsigned long long>(out.skipped_steps));
  if (session.state.stopped_early) std::printf("early stop at step %llu\n", static_cast<unsigned long long>(session.state.step));
  std::printf("checkpoint %s\nmetrics %s\n", out.checkpoint_path.c_str(), out.metrics_path.c_str());
  return 0;
}

struct EvalArgs {
  std::string ckpt, corpus, exact_match;
  std::size_t limit = 0;
};

template <typename T>
int run_eval(const EvalArgs& a) {
  const Checkpoint<T> ckpt = load_checkpoint<T>(a.ckpt);
  int status = 0;
  if (!a.corpus.empty()) {
    TrainConfig tc = ckpt.train;
    tc.val_fraction = 0.0;
    const Dataset data = make_dataset(read_corpus(a.corpus), tc);
    const EvalResult e = evaluate(ckpt.model, ckpt.params, data.train, a.limit ? a.limit : data.train.size());
    std::printf("nll %.6f  ppl %.4f  windows %zu  tokens %zu\n", e.nll, e.ppl, e.windows, e.tokens);
  }
  if (!a.exact_match.empty()) {
    std::vector<std::string> records = read_lines(a.exact_match);
    if (a.limit && records.size() > a.limit) records.resize(a.limit);
    const ExactMatch m = exact_match(ckpt.model, ckpt.params, records);
    std::printf("exact-match %zu/%zu = %.2f%%\n", m.correct, m.total, 100.0 * m.accuracy());
  }
  if (a.corpus.empty() && a.exact_match.empty()) {
    std::fprintf(stderr, "error: eval needs --corpus and/or --exact-match\n");
    status = 2;
  }
  return status;
}

struct GenerateArgs {
  std::string ckpt, prompt, prompt_file, policy = "greedy";
  std::size_t max_new = 256;
  std::uint64_t seed = 0;
};

template <typename T>
int run_generate(const GenerateArgs& a) {
  const Checkpoint<T> ckpt = load_checkpoint<T>(a.ckpt);
  std::string prompt = a.prompt;
  if (!a.prompt_file.empty()) prompt = read_file(a.prompt_file);
  const std::string out = generate<T>(prompt, ckpt.model, ckpt.params, SamplingPolicy::parse(a.policy), a.max_new, a.seed);
  std::cout << prompt << out << '\n';
  return 0;
}

int run_gen_data(const std::string& op, std::size_t digits, std::size_t count, std::uint64_t seed,
                 const std::string& out) {
  const auto records = gen_random_records(parse_op(op), digits, count, seed);
  std::vector<std::string> docs;
  docs.reserve(records.size());
  for (const auto& r : records) docs.push_back(r.text());
  write_corpus(out, make_corpus(docs, "arith-" + op, "\n"));
  std::printf("wrote %zu %s records to %s\n", docs.size(), op.c_str(), out.c_str());
  return 0;
}

int run_context_length(unsigned patch, const std::vector<unsigned>& layers) {
  std::vector<unsigned> ns = layers;
  if (ns.empty()) ns = {1, 2, 3, 4, 8, 10, 20, 40, 60, 80, 100};
  std::printf("%-6s %-48s %-26s %s\n", "N", "context_length", "reference", "status");
  for (const auto& row : context_length_table(patch, ns)) {
    const std::string exact = row.layers <= 10 ? with_commas(row.exact) : format_sci(row.exact, 12);
    const char* status = !row.reference ? "-" : row.divergent ? "DIVERGENT" : "match";
    std::printf("%-6u %-48s %-26s %s\n", row.layers, exact.c_str(), row.reference ? row.reference->c_str() : "-", status);
  }
  return 0;
}

int run_complexity(const std::string& csv) {
  const auto rows = complexity_rows(standard_complexity_configs());
  std::printf("%-10s %-4s %-12s %-12s %-10s %s\n", "L", "N", "mc_flops", "vanilla", "reduction", "speedup");
  for (const auto& r : rows) {
    std::printf("%-10s %-4u %-12s %-12s %-10s %sx\n", format_sci(r.context_length).c_str(), r.loops,
                format_sci(r.mc_flops).c_str(), format_sci(r.vanilla_flops).c_str(), (r.reduction_pct() + "%").c_str(),
                to_decimal(r.speedup).c_str());
  }
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) throw IoError("cannot write " + csv);
    out << complexity_csv(rows);
  }
  return 0;
}

int run_grad_check(const std::string& model_cfg, std::uint64_t seed, std::size_t seq_len, std::size_t coords,
                   double init_std) {
  ModelConfig cfg = model_cfg.empty() ? ModelConfig::desk() : load_model_config(model_cfg);
  cfg.init_std = init_std;
  GradCheckOptions opts;
  opts.coords_per_param = coords;
  opts.seed = seed;
  const double err = model_grad_check(cfg, seed, seq_len, opts);
  std::printf("max relative error %.3e (%s)\n", err, err < 1e-4 ? "ok" : "FAIL");
  return err < 1e-4 ? 0 : 1;
}

int dispatch_precision(int bits, auto&& f32, auto&& f64) { return bits == 64 ? f64() : f32(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byte-level language model with Monte Carlo attention"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_cmd->add_option("--model-cfg", train_args.model_cfg, "Model config JSON");
  train_cmd->add_option("--train-cfg", train_args.train_cfg, "Training config JSON");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus file")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--resume", train_args.resume, "Continue from a checkpoint");
  train_cmd->add_option("--max-seconds", train_args.max_seconds, "Wall-clock budget");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--corpus", eval_args.corpus, "Corpus for nll/ppl");
  eval_cmd->add_option("--exact-match", eval_args.exact_match, "Records file for result= exact match");
  eval_cmd->add_option("--limit", eval_args.limit, "Max windows or records");

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Sample a continuation");
  gen_cmd->add_option("--ckpt", gen_args.ckpt, "Checkpoint")->required();
  auto* prompt_opt = gen_cmd->add_option("--prompt", gen_args.prompt, "Prompt text");
  gen_cmd->add_option("--prompt-file", gen_args.prompt_file, "Prompt file")->excludes(prompt_opt);
  gen_cmd->add_option("--policy", gen_args.policy, "greedy | temp:t | topk:k");
  gen_cmd->add_option("--max-new", gen_args.max_new, "Max new tokens");
  gen_cmd->add_option("--seed", gen_args.seed, "Sampling seed");

  auto* data_cmd = app.add_subcommand("gen-data", "Generate datasets");
  data_cmd->require_subcommand(1);
  std::string op = "add", data_out;
  std::size_t digits = 3, count = 1000;
  std::uint64_t data_seed = 0;
  auto* arith_cmd = data_cmd->add_subcommand("arithmetic", "Arithmetic chain-of-thought records");
  arith_cmd->add_option("--op", op, "add | sub | mul")->check(CLI::IsMember({"add", "sub", "mul"}));
  arith_cmd->add_option("--digits", digits, "Max operand digits");
  arith_cmd->add_option("--count", count, "Records");
  arith_cmd->add_option("--seed", data_seed, "Seed");
  arith_cmd->add_option("--out", data_out, "Corpus path")->required();

  auto* analyze_cmd = app.add_subcommand("analyze", "Scaling tables");
  analyze_cmd->require_subcommand(1);
  unsigned patch = 32;
  std::vector<unsigned> layers;
  auto* ctx_cmd = analyze_cmd->add_subcommand("context-length", "Reachable context per layer count");
  ctx_cmd->add_option("--patch", patch, "Patch size");
  ctx_cmd->add_option("--layers", layers, "Layer counts (default: the standard table)");
  std::string csv;
  auto* cx_cmd = analyze_cmd->add_subcommand("complexity", "FLOP model vs dense attention");
  cx_cmd->add_option("--csv", csv, "Write CSV here");
  std::string params_cfg;
  auto* params_cmd = analyze_cmd->add_subcommand("params", "Parameter count of a model config");
  params_cmd->add_option("--model-cfg", params_cfg, "Model config JSON (default: paper preset)");

  std::string gc_cfg;
  std::uint64_t gc_seed = 0;
  std::size_t gc_len = 24, gc_coords = 6;
  double gc_std = 0.1;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of the full model");
  gc_cmd->add_option("--model-cfg", gc_cfg, "Model config JSON (default: desk preset)");
  gc_cmd->add_option("--seed", gc_seed, "Seed");
  gc_cmd->add_option("--seq-len", gc_len, "Tokens");
  gc_cmd->add_option("--coords", gc_coords, "Coordinates probed per tensor");
  gc_cmd->add_option("--init-std", gc_std, "Weight scale for the check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (*train_cmd) {
      if (train_args.resume.empty() && (train_args.model_cfg.empty() || train_args.train_cfg.empty())) {
        throw InvalidArgument("train needs --model-cfg and --train-cfg (or --resume)");
      }
      const int bits = train_args.resume.empty() ? load_train_config(train_args.train_cfg).precision
                                                 : checkpoint_precision(train_args.resume);
      return dispatch_precision(bits, [&] { return run_train<float>(train_args); },
                                [&] { return run_train<double>(train_args); });
    }
    if (*eval_cmd) {
      return dispatch_precision(checkpoint_precision(eval_args.ckpt), [&] { return run_eval<float>(eval_args); },
                                [&] { return run_eval<double>(eval_args); });
    }
    if (*gen_cmd) {
      if (gen_args.prompt.empty() && gen_args.prompt_file.empty()) throw InvalidArgument("generate needs --prompt or --prompt-file");
      return dispatch_precision(checkpoint_precision(gen_args.ckpt), [&] { return run_generate<float>(gen_args); },
                                [&] { return run_generate<double>(gen_args); });
    }
    if (*arith_cmd) return run_gen_data(op, digits, count, data_seed, data_out);
    if (*ctx_cmd) return run_context_length(patch, layers);
    if (*cx_cmd) return run_complexity(csv);
    if (*params_cmd) {
      const ModelConfig cfg = params_cfg.empty() ? ModelConfig::paper() : load_model_config(params_cfg);
      std::printf("%s parameters\n", with_commas(BigInt(count_parameters(cfg))).c_str());
      return 0;
    }
    if (*gc_cmd) return run_grad_check(gc_cfg, gc_seed, gc_len, gc_coords, gc_std);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
