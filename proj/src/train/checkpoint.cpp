#include "bbp/train/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbp/errors.hpp"

namespace bbp {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

namespace {

template <typename T>
constexpr int precision_of() {
  return sizeof(T) * 8;
}

template <typename Int>
void put(std::string& out, Int v) {
  char buf[sizeof(Int)];
  std::memcpy(buf, &v, sizeof(Int));
  out.append(buf, sizeof(Int));
}

template <typename Int>
Int get(const std::string& in, std::size_t at) {
  Int v;
  std::memcpy(&v, in.data() + at, sizeof(Int));
  return v;
}

template <typename T>
std::vector<std::pair<std::string, DiffArray<T>>> all_tensors(const ModelParams<T>& params,
                                                               const OptimizerState<T>& opt) {
  auto named = params.named();
  const std::size_t n = named.size();
  if (opt.m.size() != n || opt.v.size() != n) throw IncompatibleShape("optimizer state does not match parameters");
  for (std::size_t i = 0; i < n; ++i) named.emplace_back("adam.m." + named[i].first, opt.m[i]);
  for (std::size_t i = 0; i < n; ++i) named.emplace_back("adam.v." + named[i].first, opt.v[i]);
  return named;
}

json state_json(const TrainerState& s) {
  return json{{"step", s.step},
              {"best_eval", std::isfinite(s.best_eval) ? json(s.best_eval) : json(nullptr)},
              {"bad_evals", s.bad_evals},
              {"stopped_early", s.stopped_early}};
}

TrainerState state_from_json(const json& j) {
  TrainerState s;
  s.step = j.at("step").get<std::uint64_t>();
  if (!j.at("best_eval").is_null()) s.best_eval = j.at("best_eval").get<double>();
  s.bad_evals = j.at("bad_evals").get<std::uint64_t>();
  s.stopped_early = j.at("stopped_early").get<bool>();
  return s;
}

struct Header {
  json meta;
  std::size_t payload_start = 0;
};

Header parse_header(const std::string& bytes) {
  constexpr std::size_t fixed = 4 + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < fixed) throw CorruptCheckpoint("file of " + std::to_string(bytes.size()) + " bytes is too short");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw CorruptCheckpoint("bad magic");
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw CorruptCheckpoint("version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = get<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - fixed) throw CorruptCheckpoint("header length exceeds file size");
  Header h;
  try {
    h.meta = json::parse(bytes.substr(fixed, header_len));
  } catch (const json::exception& e) {
    throw CorruptCheckpoint(std::string("unreadable header: ") + e.what());
  }
  h.payload_start = fixed + header_len;
  return h;
}

}  // namespace

template <typename T>
std::string serialize_checkpoint(const Checkpoint<T>& ckpt) {
  const auto tensors = all_tensors(ckpt.params, ckpt.optimizer);
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    dir.push_back(json{{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(T);
  }
  const json meta{{"precision", precision_of<T>()},
                  {"model", to_json(ckpt.model)},
                  {"train", to_json(ckpt.train)},
                  {"state", state_json(ckpt.state)},
                  {"optimizer", json{{"t", ckpt.optimizer.t},
                                     {"beta1", ckpt.optimizer.beta1},
                                     {"beta2", ckpt.optimizer.beta2},
                                     {"eps", ckpt.optimizer.eps}}},
                  {"tensors", dir},
                  {"payload_bytes", offset}};
  const std::string header = meta.dump();
  std::string out(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header.size());
  out += header;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : tensors) {
    const auto data = t.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(T));
  }
  return out;
}

template <typename T>
Checkpoint<T> deserialize_checkpoint(const std::string& bytes) {
  const Header h = parse_header(bytes);
  Checkpoint<T> ckpt;
  std::vector<std::pair<std::string, DiffArray<T>>> tensors;
  json dir;
  std::uint64_t payload = 0;
  try {
    if (h.meta.at("precision").get<int>() != precision_of<T>()) {
      throw IncompatibleShape("checkpoint holds " + std::to_string(h.meta.at("precision").get<int>()) +
                              "-bit tensors, requested " + std::to_string(precision_of<T>()));
    }
    ckpt.model = model_config_from_json(h.meta.at("model"));
    ckpt.train = train_config_from_json(h.meta.at("train"));
    ckpt.state = state_from_json(h.meta.at("state"));
    const json& opt = h.meta.at("optimizer");
    ckpt.params = zero_params<T>(ckpt.model);
    std::vector<DiffArray<T>> plain;
    for (auto& [name, w] : ckpt.params.named()) plain.push_back(w);
    ckpt.optimizer = make_optimizer_state(plain, opt.at("beta1").get<double>(), opt.at("beta2").get<double>(),
                                          opt.at("eps").get<double>());
    ckpt.optimizer.t = opt.at("t").get<std::uint64_t>();
    tensors = all_tensors(ckpt.params, ckpt.optimizer);
    dir = h.meta.at("tensors");
    payload = h.meta.at("payload_bytes").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed header: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CorruptCheckpoint(std::string("bad config in header: ") + e.what());
  }
  if (bytes.size() - h.payload_start != payload) {
    throw CorruptCheckpoint("payload is " + std::to_string(bytes.size() - h.payload_start) + " bytes, header says " +
                            std::to_string(payload));
  }
  if (dir.size() != tensors.size()) {
    throw IncompatibleShape(std::to_string(dir.size()) + " stored tensors, model needs " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, t] = tensors[i];
    Shape shape;
    std::uint64_t offset = 0;
    try {
      if (dir[i].at("name").get<std::string>() != name) {
        throw IncompatibleShape("tensor " + std::to_string(i) + " is '" + dir[i].at("name").get<std::string>() +
                                "', expected '" + name + "'");
      }
      shape = dir[i].at("shape").get<Shape>();
      offset = dir[i].at("offset").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw CorruptCheckpoint(std::string("malformed tensor entry: ") + e.what());
    }
    if (shape != t.shape()) throw IncompatibleShape(name + " stored as " + shape_str(shape) + ", model needs " + shape_str(t.shape()));
    const std::uint64_t len = t.size() * sizeof(T);
    if (offset > payload || len > payload - offset) throw CorruptCheckpoint(name + " lies outside the payload");
    std::memcpy(t.mutable_data().data(), bytes.data() + h.payload_start + offset, len);
  }
  return ckpt;
}

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  return deserialize_checkpoint<T>(read_file(path));
}

int checkpoint_precision(const std::string& path) {
  const Header h = parse_header(read_file(path));
  try {
    return h.meta.at("precision").get<int>();
  } catch (const json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed header: ") + e.what());
  }
}

#define BBP_INSTANTIATE_CKPT(T)                                              \
  template std::string serialize_checkpoint(const Checkpoint<T>&);           \
  template Checkpoint<T> deserialize_checkpoint<T>(const std::string&);      \
  template void save_checkpoint(const std::string&, const Checkpoint<T>&);   \
  template Checkpoint<T> load_checkpoint<T>(const std::string&);

BBP_INSTANTIATE_CKPT(float)
BBP_INSTANTIATE_CKPT(double)

}  // namespace bbp
