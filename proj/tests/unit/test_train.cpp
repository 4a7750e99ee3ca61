#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bbp/errors.hpp"
#include "bbp/train/trainer.hpp"
#include "doctest.h"

using namespace bbp;

namespace {

ModelConfig small_model() {
  ModelConfig c = ModelConfig::desk();
  c.embedding_dim = 16;
  c.num_heads = 2;
  c.patch_min = 2;
  c.patch_max = 4;
  c.final_patch = 4;
  c.tcn_dilations = {1, 2};
  return c;
}

TrainConfig small_train() {
  TrainConfig t;
  t.lr = 3e-3;
  t.warmup_steps = 5;
  t.weight_decay = 0.0;
  t.grad_accum = 2;
  t.max_steps = 20;
  t.eval_every = 0;
  t.save_every = 0;
  t.iter_print = 5;
  t.seed = 3;
  t.seq_len = 16;
  t.precision = 64;
  t.early_stopping = false;
  t.val_fraction = 0.1;
  return t;
}

Corpus text_corpus(std::size_t docs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> d;
  for (std::size_t i = 0; i < docs; ++i) {
    std::string s;
    const std::size_t n = 5 + rng() % 20;
    for (std::size_t j = 0; j < n; ++j) s.push_back(static_cast<char>('a' + rng() % 6));
    d.push_back(s);
  }
  return make_corpus(d, "t");
}

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("bbp_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("AdamW first step moves each weight by lr against the gradient sign") {
  auto p = DiffArray<double>({3}, {1.0, -2.0, 0.5}, true);
  auto g = p.mutable_grad();
  g[0] = 0.3;
  g[1] = -4.0;
  g[2] = 0.0;
  std::vector<DiffArray<double>> params = {p};
  auto state = make_optimizer_state(params);
  const double lr = 0.01, wd = 0.1, eps = 1e-8;
  adamw_step(params, state, lr, wd);
  CHECK(state.t == 1);
  const double want0 = 1.0 - lr * (0.3 / (0.3 + eps) + wd * 1.0);
  const double want1 = -2.0 - lr * (-4.0 / (4.0 + eps) + wd * -2.0);
  const double want2 = 0.5 - lr * (wd * 0.5);
  CHECK(p.data()[0] == doctest::Approx(want0).epsilon(1e-14));
  CHECK(p.data()[1] == doctest::Approx(want1).epsilon(1e-14));
  CHECK(p.data()[2] == doctest::Approx(want2).epsilon(1e-14));
  CHECK(state.m[0].data()[1] == doctest::Approx(-0.4));
  CHECK(state.v[0].data()[1] == doctest::Approx(0.016));

  // Second step from the closed-form moments.
  g[0] = -0.1;
  g[1] = -4.0;
  g[2] = 0.0;
  const double th = p.data()[0];
  adamw_step(params, state, lr, 0.0);
  const double m = 0.9 * 0.03 + 0.1 * -0.1, v = 0.999 * 0.00009 + 0.001 * 0.01;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(p.data()[0] == doctest::Approx(th - lr * mh / (std::sqrt(vh) + eps)).epsilon(1e-12));
}

TEST_CASE("AdamW leaves parameters alone with zero gradient and no decay") {
  auto p = DiffArray<double>({2}, {1.0, 2.0}, true);
  std::vector<DiffArray<double>> params = {p};
  auto state = make_optimizer_state(params);
  adamw_step(params, state, 0.1, 0.0);
  CHECK(p.data()[0] == 1.0);
  CHECK(p.data()[1] == 2.0);
}

TEST_CASE("non-finite gradients are rejected without touching state") {
  auto a = DiffArray<double>({2}, {1.0, 2.0}, true);
  auto b = DiffArray<double>({1}, {3.0}, true);
  a.mutable_grad()[0] = 1.0;
  b.mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<DiffArray<double>> params = {a, b};
  auto state = make_optimizer_state(params);
  CHECK_THROWS_AS(adamw_step(params, state, 0.1, 0.1), NonFiniteGradient);
  CHECK(state.t == 0);
  CHECK(a.data()[0] == 1.0);
  CHECK(state.m[0].data()[0] == 0.0);
  CHECK(state.v[0].data()[0] == 0.0);
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.lr = 4e-5;
  c.warmup_steps = 100;
  CHECK(lr_schedule(0, c) == 0.0);
  CHECK(lr_schedule(50, c) == doctest::Approx(2e-5));
  CHECK(lr_schedule(100, c) == 4e-5);
  CHECK(lr_schedule(61381, c) == 4e-5);
  double prev = 0.0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const double v = lr_schedule(s, c);
    CHECK(v >= 0.0);
    CHECK(std::abs(v - prev) <= c.lr / 100 + 1e-18);
    prev = v;
  }
  c.warmup_steps = 0;
  CHECK(lr_schedule(0, c) == 4e-5);
}

TEST_CASE("configs round trip through JSON and reject unknown keys") {
  const ModelConfig m = ModelConfig::paper();
  const ModelConfig m2 = model_config_from_json(to_json(m));
  CHECK(to_json(m2) == to_json(m));
  const TrainConfig t = TrainConfig::finetune();
  CHECK(t.lr == 1e-5);
  CHECK(to_json(train_config_from_json(to_json(t))) == to_json(t));
  CHECK(train_config_from_json(nlohmann::json{{"preset", "paper"}}).save_every == 280);
  CHECK(model_config_from_json(nlohmann::json{{"preset", "desk"}, {"num_layers", 3}}).num_layers == 3);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json{{"layers", 3}}), InvalidArgument);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"precision", 16}}), InvalidArgument);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json{{"preset", "huge"}}), InvalidArgument);
  const TrainConfig p = TrainConfig::paper();
  CHECK(p.lr == 4e-5);
  CHECK(p.warmup_steps == 100);
  CHECK(p.weight_decay == 3e-3);
  CHECK(p.grad_accum == 4);
  CHECK(p.val_cap == 300);
  CHECK(p.seq_len == 65536);
}

TEST_CASE("gradient accumulation equals one batch of the concatenated windows") {
  const ModelConfig cfg = small_model();
  const auto params = init_params<double>(cfg, 4);
  const Dataset data = make_dataset(text_corpus(30, 1), small_train());
  const std::vector<std::vector<Token>> windows(data.train.begin(), data.train.begin() + 4);
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4};

  auto p1 = params;
  p1.zero_grad();
  const double accumulated = accumulate_gradients(cfg, p1, windows, RunMode::kTrain, seeds);
  std::vector<std::vector<double>> g1;
  for (auto& [n, w] : p1.named()) g1.emplace_back(w.grad().begin(), w.grad().end());

  auto p2 = params.named();
  ModelParams<double> fresh = zero_params<double>(cfg);
  auto fn = fresh.named();
  for (std::size_t i = 0; i < fn.size(); ++i) {
    auto dst = fn[i].second.mutable_data();
    std::copy(p2[i].second.data().begin(), p2[i].second.data().end(), dst.begin());
  }
  Tape<double> tape;
  std::size_t total = 0;
  std::vector<std::size_t> counts;
  for (const auto& w : windows) {
    std::size_t n = 0;
    for (std::size_t i = 1; i < w.size(); ++i) n += w[i] != kPad;
    counts.push_back(n);
    total += n;
  }
  DiffArray<double> batch;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    Rng rng(seeds[i]);
    const auto l = scale(lm_loss<double>(windows[i], cfg, fresh, RunMode::kTrain, rng, &tape),
                         static_cast<double>(counts[i]) / static_cast<double>(total));
    batch = batch.defined() ? add(batch, l) : l;
  }
  tape.backward(batch);
  CHECK(std::abs(batch.item() - accumulated) < 1e-10);
  const auto fg = fresh.named();
  double worst = 0.0;
  for (std::size_t i = 0; i < fg.size(); ++i)
    for (std::size_t j = 0; j < g1[i].size(); ++j) worst = std::max(worst, std::abs(fg[i].second.grad()[j] - g1[i][j]));
  CHECK(worst < 1e-10);
}

TEST_CASE("step plans depend only on seed and step") {
  TrainConfig t = small_train();
  const auto a = plan_step(t, 17, 100), b = plan_step(t, 17, 100), c = plan_step(t, 18, 100);
  CHECK(a.windows == b.windows);
  CHECK(a.seeds == b.seeds);
  CHECK(a.seeds != c.seeds);
  CHECK(a.windows.size() == t.grad_accum);
  CHECK_THROWS_AS(plan_step(t, 0, 0), CorpusEmpty);
}

TEST_CASE("datasets split deterministically") {
  const Corpus corpus = text_corpus(50, 2);
  TrainConfig t = small_train();
  t.document_windows = true;
  t.seq_len = 32;
  const Dataset a = make_dataset(corpus, t), b = make_dataset(corpus, t);
  CHECK(a.train == b.train);
  CHECK(a.val.size() == 5);
  CHECK(a.train.size() == 45);
  for (const auto& w : a.train) {
    CHECK(w.front() == kBos);
    CHECK(w.back() == kEos);
  }
  CHECK_THROWS_AS(make_dataset(Corpus{}, t), CorpusEmpty);
}

TEST_CASE("checkpoints round trip bit-exactly") {
  const ModelConfig cfg = small_model();
  TrainConfig t = small_train();
  auto s = new_session<double>(cfg, t);
  Dataset data = make_dataset(text_corpus(30, 3), t);
  TrainHooks hooks;
  hooks.stop_at = 3;
  train(s, data, hooks);
  s.state.best_eval = 1.25;
  const std::string bytes = serialize_checkpoint(s);
  const auto back = deserialize_checkpoint<double>(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.state.step == 3);
  CHECK(back.optimizer.t == 3);
  CHECK(back.state.best_eval == 1.25);
  CHECK(to_json(back.model) == to_json(cfg));
  CHECK(to_json(back.train) == to_json(t));
  const auto a = s.params.named(), b = back.params.named();
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::memcmp(a[i].second.data().data(), b[i].second.data().data(), a[i].second.size() * sizeof(double)) == 0);

  const std::string dir = temp_dir("ckpt");
  const std::string path = dir + "/c.bbpt";
  save_checkpoint(path, s);
  CHECK(checkpoint_precision(path) == 64);
  CHECK(serialize_checkpoint(load_checkpoint<double>(path)) == bytes);
  CHECK_THROWS_AS(load_checkpoint<float>(path), IncompatibleShape);

  CHECK_THROWS_AS(deserialize_checkpoint<double>(bytes.substr(0, bytes.size() - 1)), CorruptCheckpoint);
  CHECK_THROWS_AS(deserialize_checkpoint<double>(bytes.substr(0, 10)), CorruptCheckpoint);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint<double>(bad), CorruptCheckpoint);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(deserialize_checkpoint<double>(bad), CorruptCheckpoint);
  std::filesystem::remove_all(dir);
}

TEST_CASE("infinite best eval survives the header") {
  auto s = new_session<float>(small_model(), small_train());
  const auto back = deserialize_checkpoint<float>(serialize_checkpoint(s));
  CHECK(std::isinf(back.state.best_eval));
}

TEST_CASE("resumed training matches an uninterrupted run") {
  const ModelConfig cfg = small_model();
  TrainConfig t = small_train();
  t.max_steps = 12;
  const Dataset data = make_dataset(text_corpus(40, 4), t);

  auto full = new_session<double>(cfg, t);
  const auto whole = train(full, data, TrainHooks{});

  const std::string dir = temp_dir("resume");
  auto first = new_session<double>(cfg, t);
  TrainHooks h;
  h.out_dir = dir;
  h.stop_at = 5;
  const auto part1 = train(first, data, h);
  auto resumed = load_checkpoint<double>(part1.checkpoint_path);
  const auto part2 = train(resumed, data, TrainHooks{});
  REQUIRE(part1.history.size() + part2.history.size() == whole.history.size());
  for (std::size_t i = 0; i < whole.history.size(); ++i) {
    const auto& r = i < 5 ? part1.history[i] : part2.history[i - 5];
    CHECK(r.loss == whole.history[i].loss);
    CHECK(r.step == whole.history[i].step);
  }
  CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(full));
  std::filesystem::remove_all(dir);
}

TEST_CASE("metrics log and early stopping") {
  TrainConfig t = small_train();
  t.max_steps = 40;
  t.eval_every = 2;
  t.early_stopping = true;
  t.patience = 2;
  t.min_delta = 10.0;  // no eval can improve this much after the first
  const Dataset data = make_dataset(text_corpus(40, 5), t);
  auto s = new_session<float>(small_model(), t);
  const std::string dir = temp_dir("metrics");
  TrainHooks h;
  h.out_dir = dir;
  const auto out = train(s, data, h);
  CHECK(s.state.stopped_early);
  CHECK(s.state.step == 6);
  CHECK(out.evals.size() == 3);
  std::ifstream in(out.metrics_path);
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "step,loss,ppl,lr,elapsed_s");
  std::getline(in, line);
  CHECK(line.rfind("5,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a constant-byte corpus is memorised") {
  TrainConfig t = small_train();
  t.max_steps = 200;
  t.lr = 1e-2;
  t.precision = 32;
  t.document_windows = true;
  const std::vector<std::string> docs(20, std::string(40, 'z'));
  const Dataset data = make_dataset(make_corpus(docs, "z"), t);
  auto s = new_session<float>(small_model(), t);
  const auto out = train(s, data, TrainHooks{});
  CHECK(out.history.back().loss < 0.01);
}

TEST_CASE("identical seeds give identical loss curves") {
  TrainConfig t = small_train();
  t.max_steps = 8;
  const Dataset data = make_dataset(text_corpus(30, 6), t);
  auto a = new_session<double>(small_model(), t), b = new_session<double>(small_model(), t);
  const auto ra = train(a, data, TrainHooks{}), rb = train(b, data, TrainHooks{});
  for (std::size_t i = 0; i < ra.history.size(); ++i) CHECK(ra.history[i].loss == rb.history[i].loss);
}

TEST_CASE("exact match scores generated results") {
  const ModelConfig cfg = small_model();
  const auto params = init_params<float>(cfg, 1);
  const std::vector<std::string> recs = {"1+2=2+1, result=3", "5+5=5+5, result=10"};
  const auto em = exact_match(cfg, params, recs, 2);
  CHECK(em.total == 2);
  CHECK(em.completions.size() == 2);
  CHECK(em.accuracy() == doctest::Approx(static_cast<double>(em.correct) / 2.0));
  const std::vector<std::string> bad = {"no equals sign"};
  CHECK_THROWS_AS(exact_match(cfg, params, bad), InvalidArgument);
}
