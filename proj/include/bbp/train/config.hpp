#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "bbp/model.hpp"
#include "json.hpp"

namespace bbp {

struct TrainConfig {
  double lr = 4e-5;
  std::size_t warmup_steps = 100;
  double weight_decay = 3e-3;
  std::size_t grad_accum = 4;
  std::size_t max_steps = 1000;
  std::size_t eval_every = 100;
  std::size_t save_every = 280;
  std::size_t iter_print = 10;
  std::uint64_t seed = 0;
  std::size_t seq_len = 8192 * 8;
  int precision = 32;  // 32 | 64

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Stop when eval nll has not improved by min_delta for `patience` evals.
  bool early_stopping = true;
  std::size_t patience = 3;
  double min_delta = 1e-3;
  std::size_t val_cap = 300;     // eval windows per evaluation
  double val_fraction = 0.05;    // share of windows held out
  // One document per window ([bos] doc [eos]) instead of a packed stream.
  bool document_windows = false;

  static TrainConfig paper();
  static TrainConfig finetune();  // paper() with lr 1e-5

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

// Missing keys keep their defaults; an optional "preset" key ("paper" | "desk")
// selects the base. Unknown keys throw InvalidArgument.
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

ModelConfig load_model_config(const std::string& path);
TrainConfig load_train_config(const std::string& path);

}  // namespace bbp
