// Acceptance runner: `bbp_acceptance N [workdir]` checks one criterion and
// prints a single PASS/FAIL line. Exit status is nonzero on FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bbp/corpus/cot.hpp"
#include "bbp/encoding.hpp"
#include "bbp/errors.hpp"
#include "bbp/mc_attention.hpp"
#include "bbp/model.hpp"
#include "bbp/scaling.hpp"
#include "bbp/train/checkpoint.hpp"
#include "bbp/train/trainer.hpp"

using namespace bbp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict timed(double limit_s, const std::function<Verdict()>& body) {
  const auto t0 = Clock::now();
  Verdict v = body();
  const double s = seconds_since(t0);
  v.detail += "; " + fmt("%.2f", s) + " s (limit " + fmt("%.0f", limit_s) + " s)";
  if (s >= limit_s) v.pass = false;
  return v;
}

// 1. Context-length table.
Verdict context_lengths() {
  const std::map<unsigned, std::string> exact = {{1, "992"},
                                                 {2, "32,736"},
                                                 {3, "1,048,544"},
                                                 {4, "33,554,400"},
                                                 {8, "35,184,372,088,800"},
                                                 {10, "36,028,797,018,963,936"}};
  const auto rows = context_length_table(32, {1, 2, 3, 4, 8, 10, 20, 40, 60, 80, 100});
  std::size_t matched = 0, flagged = 0, large = 0;
  std::string bad;
  for (const auto& r : rows) {
    if (r.exact != context_length_closed(32, r.layers)) bad += " N=" + std::to_string(r.layers) + "(recurrence)";
    if (auto it = exact.find(r.layers); it != exact.end()) {
      if (with_commas(r.exact) == it->second && !r.divergent) ++matched;
      else bad += " N=" + std::to_string(r.layers);
    } else if (r.layers >= 20) {
      ++large;
      if (r.reference && r.divergent) ++flagged;
      else bad += " N=" + std::to_string(r.layers) + "(unflagged)";
    }
  }
  Verdict v;
  v.pass = matched == exact.size() && flagged == large && bad.empty();
  v.detail = std::to_string(matched) + "/6 exact rows, " + std::to_string(flagged) + "/" + std::to_string(large) +
             " rows N>=20 flagged divergent" + (bad.empty() ? "" : "; mismatched:" + bad);
  return v;
}

// 2. Complexity table, compared cell by cell with the printed values.
Verdict complexity_table() {
  struct Printed {
    const char* mc;
    const char* vanilla;
    const char* pct;
    unsigned speedup;
  };
  const std::vector<Printed> printed = {
      {"5.12e7", "1.0e10", "99.49", 195},     {"2.048e8", "1.0e10", "97.95", 49},
      {"4.096e8", "1.0e10", "95.90", 24},     {"5.12e8", "1.0e12", "99.95", 1953},
      {"2.048e9", "1.0e12", "99.80", 488},    {"4.096e9", "1.0e12", "99.59", 244},
      {"2.56e9", "2.5e13", "99.99", 9766},    {"1.024e10", "2.5e13", "99.96", 2441},
      {"2.048e10", "2.5e13", "99.92", 1221},  {"5.12e9", "1.0e14", "99.99", 19531},
      {"2.048e10", "1.0e14", "99.98", 4883},  {"4.096e10", "1.0e14", "99.96", 2441},
      {"5.12e10", "1.0e16", "99.99", 195313}, {"2.048e11", "1.0e16", "99.98", 48828},
      {"4.096e11", "1.0e16", "99.96", 24414},
  };
  const auto rows = complexity_rows(standard_complexity_configs());
  std::size_t cells = 0, ok = 0;
  std::string bad;
  for (std::size_t i = 0; i < rows.size() && i < printed.size(); ++i) {
    const auto& r = rows[i];
    const auto& p = printed[i];
    const std::string where = format_sci(r.context_length) + "/N=" + std::to_string(r.loops);
    const std::pair<std::string, std::string> got[] = {{format_sci(r.mc_flops), p.mc},
                                                       {format_sci(r.vanilla_flops), p.vanilla},
                                                       {r.reduction_pct(), p.pct},
                                                       {to_decimal(r.speedup), std::to_string(p.speedup)}};
    for (const auto& [g, want] : got) {
      ++cells;
      if (g == want) ++ok;
      else bad += " " + where + " " + g + " vs " + want;
    }
  }
  Verdict v;
  v.pass = rows.size() == printed.size() && ok == cells;
  v.detail = std::to_string(ok) + "/" + std::to_string(cells) + " cells exact over " + std::to_string(rows.size()) +
             " rows" + (bad.empty() ? "" : "; differing:" + bad);
  return v;
}

// 3. Reorganization golden case and bijectivity fuzz.
Verdict reorganization() {
  std::vector<int> seq(12);
  for (int i = 0; i < 12; ++i) seq[i] = i + 1;
  const auto out = reorganize<int>(seq, 4);
  const bool golden = std::vector<int>(out.begin(), out.begin() + 4) == std::vector<int>{1, 5, 9, 2};
  std::mt19937_64 rng(2024);
  std::size_t ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t p = 1 + rng() % 64, n = 1 + rng() % 64;
    const auto perm = reorganize_permutation(n * p, p);
    std::vector<char> seen(perm.size(), 0);
    bool bij = perm.size() == n * p;
    for (auto v : perm) {
      if (v >= seen.size() || seen[v]) {
        bij = false;
        break;
      }
      seen[v] = 1;
    }
    const auto inv = invert_permutation(perm);
    for (std::size_t i = 0; bij && i < perm.size(); ++i) bij = inv[perm[i]] == i;
    ok += bij;
  }
  Verdict v;
  v.pass = golden && ok == 1000;
  v.detail = std::string("first patch ") + (golden ? "[1,5,9,2]" : "wrong") + ", " + std::to_string(ok) +
             "/1000 random (L,P) permutations bijective";
  return v;
}

// 4. End-to-end gradient check on the desk config.
Verdict gradients() {
  const ModelConfig cfg = ModelConfig::desk();
  GradCheckOptions o;
  o.coords_per_param = 24;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    o.seed = seed;
    worst = std::max(worst, model_grad_check(cfg, seed, 24, o));
  }
  Verdict v;
  v.pass = worst < 1e-4;
  v.detail = "max relative error " + fmt("%.3e", worst) + " over 5 seeds (tolerance 1e-4, 64-bit, " +
             std::to_string(count_parameters(cfg)) + " params)";
  return v;
}

// 5. Suffix perturbations leave prefix logits untouched.
Verdict causality() {
  const ModelConfig cfg = ModelConfig::desk();
  std::mt19937_64 rng(77);
  std::size_t clean = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto params = init_params<double>(cfg, 100 + trial);
    const std::size_t len = 8 + rng() % 57;
    std::vector<Token> a(len);
    for (auto& t : a) t = static_cast<Token>(rng() % 256);
    const std::size_t cut = 1 + rng() % (len - 1);
    auto b = a;
    for (std::size_t i = cut; i < len; ++i) b[i] = static_cast<Token>((b[i] + 1 + rng() % 255) % 256);
    Rng r1(0), r2(0);
    const auto la = forward<double>(a, cfg, params, RunMode::kEval, r1);
    const auto lb = forward<double>(b, cfg, params, RunMode::kEval, r2);
    const std::size_t prefix = cut * la.cols();
    clean += std::memcmp(la.data().data(), lb.data().data(), prefix * sizeof(double)) == 0;
  }
  Verdict v;
  v.pass = clean == 50;
  v.detail = std::to_string(clean) + "/50 trials with bit-identical prefix logits (eval mode, 64-bit)";
  return v;
}

bool rejected(const std::string& text) {
  try {
    return !verify_cot(text).valid;
  } catch (const ParseError&) {
    return true;
  }
}

// 6. Chain-of-thought generation, verification and the copy-error trace.
Verdict cot_round_trip() {
  std::size_t total = 0, false_rejects = 0;
  std::vector<CotRecord> pool;
  const struct {
    CotOp op;
    std::size_t digits, count;
  } plan[] = {{CotOp::kAdd, 50, 3334}, {CotOp::kSub, 50, 3333}, {CotOp::kMul, 12, 3333}};
  for (const auto& p : plan) {
    for (auto& r : gen_random_records(p.op, p.digits, p.count, 1000 + static_cast<int>(p.op))) {
      ++total;
      if (rejected(r.text())) ++false_rejects;
      pool.push_back(std::move(r));
    }
  }
  std::mt19937_64 rng(31);
  std::size_t mutated = 0, false_accepts = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& r = pool[rng() % pool.size()];
    std::string t = r.text();
    std::vector<std::size_t> digits;
    for (std::size_t j = r.prompt().size(); j < t.size(); ++j)
      if (t[j] >= '0' && t[j] <= '9') digits.push_back(j);
    const std::size_t at = digits[rng() % digits.size()];
    t[at] = static_cast<char>('0' + (t[at] - '0' + 1 + rng() % 9) % 10);
    ++mutated;
    if (!rejected(t)) ++false_accepts;
  }
  std::ifstream in(std::string(BBP_TEST_DATA) + "/mul_copy_error.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  bool copy_caught = false;
  std::string where = "unreadable";
  try {
    const auto rep = verify_cot(ss.str());
    copy_caught = !rep.valid && rep.first_error && rep.first_error->kind == CotErrorKind::kCopy &&
                  rep.first_error->description.find("final") != std::string::npos;
    where = rep.first_error ? std::string(error_kind_name(rep.first_error->kind)) + " error at " +
                                  rep.first_error->description
                            : "no error found";
  } catch (const ParseError& e) {
    where = std::string("parse error: ") + e.what();
  }
  const BigInt product = BigInt(21019625) * BigInt(451301517);
  const bool oracle = with_commas(product) == "9,486,188,649,271,125";
  Verdict v;
  v.pass = false_rejects == 0 && false_accepts == 0 && copy_caught && oracle;
  v.detail = std::to_string(false_rejects) + "/" + std::to_string(total) + " false rejections, " +
             std::to_string(false_accepts) + "/" + std::to_string(mutated) + " false acceptances; listing: " + where +
             "; 21019625 x 451301517 = " + with_commas(product);
  return v;
}

// 7. Desk-scale training: arithmetic exact match and random-byte NLL.
// One record per window, inside a single patch.
ModelConfig desk_arith_model() {
  ModelConfig c = ModelConfig::desk();
  c.embedding_dim = 96;
  c.num_heads = 4;
  c.tcn_dilations = {1, 2, 4, 8};
  c.patch_min = c.patch_max = c.final_patch = 48;
  return c;
}

TrainConfig desk_arith_train() {
  TrainConfig t;
  t.lr = 2e-3;
  t.beta2 = 0.95;
  t.warmup_steps = 100;
  t.weight_decay = 0.0;
  t.grad_accum = 16;
  t.max_steps = 100000;
  t.eval_every = 0;
  t.save_every = 2000;
  t.iter_print = 1000;
  t.seed = 1;
  t.seq_len = 48;
  t.precision = 32;
  t.document_windows = true;
  t.val_fraction = 0.02;
  t.val_cap = 100;
  t.early_stopping = false;
  return t;
}

Verdict desk_training(const std::string& workdir) {
  const double budget_s = 30 * 60;
  const auto t0 = Clock::now();
  const ModelConfig mcfg = desk_arith_model();
  const TrainConfig tcfg = desk_arith_train();

  std::vector<std::string> docs;
  std::set<std::string> prompts;
  for (const auto& r : gen_random_records(CotOp::kAdd, 3, 10000, 11)) {
    docs.push_back(r.text());
    prompts.insert(r.prompt());
  }
  std::vector<std::string> heldout;
  for (std::uint64_t seed = 12; heldout.size() < 200; ++seed)
    for (const auto& r : gen_random_records(CotOp::kAdd, 3, 400, seed))
      if (heldout.size() < 200 && prompts.insert(r.prompt()).second) heldout.push_back(r.text());

  std::filesystem::create_directories(workdir);
  auto session = new_session<float>(mcfg, tcfg);
  TrainHooks hooks;
  hooks.out_dir = workdir + "/arith";
  hooks.max_seconds = budget_s - 180;
  hooks.on_log = [](const MetricsRow& m) {
    std::cerr << "step " << m.step << " loss " << m.loss << " " << fmt("%.0f", m.elapsed_s) << " s\n";
  };
  const auto outcome = train(session, make_dataset(make_corpus(docs, "arith-add"), tcfg), hooks);
  const ExactMatch em = exact_match(mcfg, session.params, heldout);
  const double arith_s = seconds_since(t0);

  std::mt19937_64 rng(5);
  std::vector<std::string> noise(400);
  for (auto& d : noise) {
    d.resize(512);
    for (auto& c : d) c = static_cast<char>(rng() & 0xff);
  }
  TrainConfig ncfg = tcfg;
  ncfg.max_steps = 300;
  ncfg.grad_accum = 4;
  ncfg.seq_len = 128;
  ncfg.document_windows = false;
  ncfg.val_fraction = 0.1;
  const Dataset noise_data = make_dataset(make_corpus(noise, "random"), ncfg);
  auto nsession = new_session<float>(mcfg, ncfg);
  TrainHooks nhooks;
  nhooks.out_dir = workdir + "/random";
  train(nsession, noise_data, nhooks);
  const EvalResult ev = evaluate(mcfg, nsession.params, noise_data.val, ncfg.val_cap);
  const double target = std::log(256.0);
  const bool nll_ok = std::abs(ev.nll - target) <= 0.02 * target;

  Verdict v;
  v.pass = count_parameters(mcfg) <= 2000000 && em.accuracy() >= 0.95 && arith_s < budget_s && nll_ok;
  v.detail = std::to_string(count_parameters(mcfg)) + " params, " + std::to_string(outcome.history.size()) +
             " steps, exact match " + std::to_string(em.correct) + "/" + std::to_string(em.total) + " (" +
             fmt("%.1f", 100 * em.accuracy()) + "%, need >=95%) in " + fmt("%.0f", arith_s) +
             " s (limit 1800 s); random-byte eval nll " + fmt("%.4f", ev.nll) + " vs ln 256 = " +
             fmt("%.4f", target) + " +/- 2%";
  return v;
}

// 8. Checkpoint round trip and resume equivalence at 64-bit.
Verdict persistence(const std::string& workdir) {
  ModelConfig cfg = ModelConfig::desk();
  cfg.dropout_rate = 0.1;
  TrainConfig t = desk_arith_train();
  t.precision = 64;
  t.max_steps = 100;
  t.grad_accum = 2;
  t.seq_len = 32;
  t.warmup_steps = 10;
  t.iter_print = 10;
  std::vector<std::string> docs;
  for (const auto& r : gen_random_records(CotOp::kAdd, 3, 300, 21)) docs.push_back(r.text());
  const Dataset data = make_dataset(make_corpus(docs, "arith-add"), t);

  auto whole = new_session<double>(cfg, t);
  const auto full = train(whole, data, TrainHooks{});

  std::filesystem::remove_all(workdir);
  auto first = new_session<double>(cfg, t);
  TrainHooks h;
  h.out_dir = workdir;
  h.stop_at = 50;
  const auto part1 = train(first, data, h);

  const std::string bytes = read_file(part1.checkpoint_path);
  auto resumed = load_checkpoint<double>(part1.checkpoint_path);
  const bool bytes_equal = serialize_checkpoint(resumed) == bytes && serialize_checkpoint(first) == bytes;
  bool params_equal = true;
  const auto a = first.params.named(), b = resumed.params.named();
  for (std::size_t i = 0; i < a.size(); ++i)
    params_equal &= std::memcmp(a[i].second.data().data(), b[i].second.data().data(),
                                a[i].second.size() * sizeof(double)) == 0;

  const auto part2 = train(resumed, data, TrainHooks{});
  std::size_t same = 0;
  const std::size_t n = full.history.size();
  for (std::size_t i = 0; i < n && part1.history.size() + part2.history.size() == n; ++i) {
    const auto& r = i < part1.history.size() ? part1.history[i] : part2.history[i - part1.history.size()];
    same += r.step == full.history[i].step && std::memcmp(&r.loss, &full.history[i].loss, sizeof(double)) == 0;
  }
  const auto fa = whole.params.named(), fb = resumed.params.named();
  bool final_equal = true;
  for (std::size_t i = 0; i < fa.size(); ++i)
    final_equal &= std::memcmp(fa[i].second.data().data(), fb[i].second.data().data(),
                               fa[i].second.size() * sizeof(double)) == 0;
  Verdict v;
  v.pass = bytes_equal && params_equal && n == 100 && same == 100 && final_equal;
  v.detail = std::string("checkpoint round trip ") + (bytes_equal && params_equal ? "bit-exact" : "differs") + ", " +
             std::to_string(same) + "/100 loss values identical after resuming at step 50, final weights " +
             (final_equal ? "identical" : "differ");
  return v;
}

// 9. Byte round trip.
Verdict bytes_round_trip() {
  std::mt19937_64 rng(9);
  std::size_t ok = 0;
  std::vector<bool> covered(256, false);
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    if (i == 0) {
      for (int b = 0; b < 256; ++b) s.push_back(static_cast<char>(b));
    } else {
      s.resize(rng() % (64 * 1024 + 1));
      for (auto& c : s) c = static_cast<char>(rng() & 0xff);
    }
    for (unsigned char c : s) covered[c] = true;
    ok += decode(encode(s)) == s;
  }
  Verdict v;
  v.pass = ok == 1000 && std::count(covered.begin(), covered.end(), true) == 256;
  v.detail = std::to_string(ok) + "/1000 strings (up to 64 KiB) identical after decode(encode(.)), " +
             std::to_string(std::count(covered.begin(), covered.end(), true)) + "/256 byte values covered";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: bbp_acceptance N [workdir]\n";
    return 2;
  }
  const int n = std::atoi(argv[1]);
  const std::string workdir =
      argc > 2 ? argv[2] : (std::filesystem::temp_directory_path() / ("bbp_acceptance_" + std::to_string(n))).string();
  Verdict v;
  try {
    switch (n) {
      case 1: v = timed(1, context_lengths); break;
      case 2: v = timed(1, complexity_table); break;
      case 3: v = timed(1, reorganization); break;
      case 4: v = timed(120, gradients); break;
      case 5: v = timed(60, causality); break;
      case 6: v = timed(120, cot_round_trip); break;
      case 7: v = timed(1800, [&] { return desk_training(workdir); }); break;
      case 8: v = timed(300, [&] { return persistence(workdir); }); break;
      case 9: v = timed(10, bytes_round_trip); break;
      default: std::cerr << "unknown criterion " << argv[1] << "\n"; return 2;
    }
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << v.detail << std::endl;
  return v.pass ? 0 : 1;
}
