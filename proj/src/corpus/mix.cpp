#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "bbp/corpus/records.hpp"
#include "bbp/errors.hpp"

namespace bbp {

std::vector<double> MixManifest::normalized() const {
  if (sources.empty()) throw InvalidArgument("mix manifest has no sources");
  double total = 0.0;
  for (const auto& s : sources) {
    if (!(s.ratio > 0.0)) throw InvalidArgument("ratio of source '" + s.tag + "' must be positive");
    total += s.ratio;
  }
  std::vector<double> out;
  for (const auto& s : sources) out.push_back(s.ratio / total);
  return out;
}

MixManifest read_mix_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mix manifest " + path);
  MixManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string a, b, c;
    std::getline(fields, a, '\t');
    std::getline(fields, b, '\t');
    if (a == "seed") {
      m.seed = std::stoull(b);
      continue;
    }
    std::getline(fields, c, '\t');
    if (b.empty() || c.empty()) throw ParseError(path + ":" + std::to_string(lineno) + ": expected tag\\tpath\\tratio", 0);
    m.sources.push_back({a, b, std::stod(c)});
  }
  return m;
}

MixResult mix_datasets(const MixManifest& manifest, std::uint64_t total_bytes) {
  const std::vector<double> ratios = manifest.normalized();
  const std::size_t n = manifest.sources.size();
  std::vector<Corpus> corpora;
  std::vector<std::vector<std::size_t>> order(n);
  std::vector<std::uint64_t> quota(n), taken(n, 0);
  std::vector<std::size_t> cursor(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    corpora.push_back(read_corpus(manifest.sources[i].path));
    order[i].resize(corpora[i].documents.size());
    std::iota(order[i].begin(), order[i].end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(manifest.seed * 0x9E3779B97F4A7C15ULL + i + 1);
    std::shuffle(order[i].begin(), order[i].end(), shuffle_rng);
    quota[i] = static_cast<std::uint64_t>(std::llround(ratios[i] * static_cast<double>(total_bytes)));
  }

  MixResult out;
  std::mt19937_64 rng(manifest.seed);
  for (;;) {
    std::vector<double> weights(n, 0.0);
    double open = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i] < quota[i]) weights[i] = static_cast<double>(quota[i] - taken[i]);
      open += weights[i];
    }
    if (open == 0.0) break;
    const std::size_t s = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
    if (cursor[s] >= order[s].size()) {
      throw SourceExhausted("source '" + manifest.sources[s].tag + "' supplied " + std::to_string(taken[s]) + " of " +
                            std::to_string(quota[s]) + " bytes");
    }
    const std::string_view doc = corpora[s].document(order[s][cursor[s]++]);
    taken[s] += doc.size();
    out.documents.emplace_back(doc);
    out.document_tags.push_back(manifest.sources[s].tag);
  }
  PackOptions pack;
  pack.eos_per_document = true;
  out.stream = pack_documents(out.documents, pack);
  out.bytes_per_source = taken;
  return out;
}

}  // namespace bbp
