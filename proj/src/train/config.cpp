#include "bbp/train/config.hpp"

#include <fstream>

#include "bbp/errors.hpp"

namespace bbp {

using nlohmann::json;

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::finetune() {
  TrainConfig c;
  c.lr = 1e-5;
  return c;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw InvalidArgument("lr must be >= 0");
  if (grad_accum < 1) throw InvalidArgument("grad_accum must be >= 1");
  if (seq_len < 1) throw InvalidArgument("seq_len must be >= 1");
  if (precision != 32 && precision != 64) throw InvalidArgument("precision must be 32 or 64");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw InvalidArgument("val_fraction must lie in [0, 1)");
}

namespace {

const char* delegate_name(DelegateMode m) { return m == DelegateMode::kRandom ? "random" : "selective"; }

DelegateMode parse_delegate(const std::string& s) {
  if (s == "selective") return DelegateMode::kSelective;
  if (s == "random") return DelegateMode::kRandom;
  throw InvalidArgument("delegate_mode must be selective or random");
}

void reject_unknown(const json& j, const json& known, const char* what) {
  if (!j.is_object()) throw InvalidArgument(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "preset" && !known.contains(key)) throw InvalidArgument(std::string("unknown ") + what + " key '" + key + "'");
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return json{{"embedding_dim", c.embedding_dim},
              {"num_layers", c.num_layers},
              {"num_heads", c.num_heads},
              {"mlp_ratio", c.mlp_ratio},
              {"dropout_rate", c.dropout_rate},
              {"attention_dropout", c.attention_dropout},
              {"stochastic_depth_rate", c.stochastic_depth_rate},
              {"patch_min", c.patch_min},
              {"patch_max", c.patch_max},
              {"final_patch", c.final_patch},
              {"final_layers", c.final_layers},
              {"loops_per_layer", c.loops_per_layer},
              {"tcn_kernel", c.tcn_kernel},
              {"tcn_dilations", c.tcn_dilations},
              {"delegate_mode", delegate_name(c.delegate_mode)},
              {"tie_embeddings", c.tie_embeddings},
              {"init_std", c.init_std},
              {"vocab", ModelConfig::vocab}};
}

json to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"warmup_steps", c.warmup_steps},
              {"weight_decay", c.weight_decay},
              {"grad_accum", c.grad_accum},
              {"max_steps", c.max_steps},
              {"eval_every", c.eval_every},
              {"save_every", c.save_every},
              {"iter_print", c.iter_print},
              {"seed", c.seed},
              {"seq_len", c.seq_len},
              {"precision", c.precision},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"early_stopping", c.early_stopping},
              {"patience", c.patience},
              {"min_delta", c.min_delta},
              {"val_cap", c.val_cap},
              {"val_fraction", c.val_fraction},
              {"document_windows", c.document_windows}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    if (j.is_object() && j.contains("preset")) {
      const std::string preset = j.at("preset").get<std::string>();
      if (preset == "paper") c = ModelConfig::paper();
      else if (preset == "desk") c = ModelConfig::desk();
      else throw InvalidArgument("unknown model preset '" + preset + "'");
    }
    reject_unknown(j, to_json(c), "model config");
    read(j, "embedding_dim", c.embedding_dim);
    read(j, "num_layers", c.num_layers);
    read(j, "num_heads", c.num_heads);
    read(j, "mlp_ratio", c.mlp_ratio);
    read(j, "dropout_rate", c.dropout_rate);
    read(j, "attention_dropout", c.attention_dropout);
    read(j, "stochastic_depth_rate", c.stochastic_depth_rate);
    read(j, "patch_min", c.patch_min);
    read(j, "patch_max", c.patch_max);
    read(j, "final_patch", c.final_patch);
    read(j, "final_layers", c.final_layers);
    read(j, "loops_per_layer", c.loops_per_layer);
    read(j, "tcn_kernel", c.tcn_kernel);
    read(j, "tcn_dilations", c.tcn_dilations);
    read(j, "tie_embeddings", c.tie_embeddings);
    read(j, "init_std", c.init_std);
    if (j.contains("delegate_mode")) c.delegate_mode = parse_delegate(j.at("delegate_mode").get<std::string>());
    if (j.contains("vocab") && j.at("vocab").get<std::size_t>() != ModelConfig::vocab) {
      throw InvalidArgument("vocab is fixed at 259");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    if (j.is_object() && j.contains("preset")) {
      const std::string preset = j.at("preset").get<std::string>();
      if (preset == "paper") c = TrainConfig::paper();
      else if (preset == "finetune") c = TrainConfig::finetune();
      else throw InvalidArgument("unknown train preset '" + preset + "'");
    }
    reject_unknown(j, to_json(c), "train config");
    read(j, "lr", c.lr);
    read(j, "warmup_steps", c.warmup_steps);
    read(j, "weight_decay", c.weight_decay);
    read(j, "grad_accum", c.grad_accum);
    read(j, "max_steps", c.max_steps);
    read(j, "eval_every", c.eval_every);
    read(j, "save_every", c.save_every);
    read(j, "iter_print", c.iter_print);
    read(j, "seed", c.seed);
    read(j, "seq_len", c.seq_len);
    read(j, "precision", c.precision);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "eps", c.eps);
    read(j, "early_stopping", c.early_stopping);
    read(j, "patience", c.patience);
    read(j, "min_delta", c.min_delta);
    read(j, "val_cap", c.val_cap);
    read(j, "val_fraction", c.val_fraction);
    read(j, "document_windows", c.document_windows);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig load_model_config(const std::string& path) { return model_config_from_json(load_json(path)); }
TrainConfig load_train_config(const std::string& path) { return train_config_from_json(load_json(path)); }

}  // namespace bbp
