#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "bbp/model.hpp"
#include "bbp/train/adamw.hpp"
#include "bbp/train/config.hpp"

namespace bbp {

struct TrainerState {
  std::uint64_t step = 0;  // completed optimizer steps
  double best_eval = std::numeric_limits<double>::infinity();
  std::uint64_t bad_evals = 0;
  bool stopped_early = false;
};

template <typename T>
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ModelParams<T> params;
  OptimizerState<T> optimizer;
  TrainerState state;
};

inline constexpr char kCheckpointMagic[4] = {'B', 'B', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// "BBPT", u32 version, u64 header length, JSON header (configs, trainer state,
// tensor directory of name/dtype/shape/offset), then the raw little-endian payload.
template <typename T>
std::string serialize_checkpoint(const Checkpoint<T>& ckpt);

// Throws CorruptCheckpoint on bad magic, version, lengths or header, and
// IncompatibleShape when the tensors do not fit the stored model config.
template <typename T>
Checkpoint<T> deserialize_checkpoint(const std::string& bytes);

// Writes atomically (temporary file then rename).
template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt);

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

// 32 or 64, read from the header.
int checkpoint_precision(const std::string& path);

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace bbp
