#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bbp/encoding.hpp"

namespace bbp {

// A measured quantity paired with its natural-language description.
struct AlignedField {
  std::string name;
  std::string value;
  std::string caption;

  bool operator==(const AlignedField&) const = default;
};

// "caption (name): value" per field, joined by "; ". Names must be unique and
// no part may contain the delimiters "; " or "): ". Throws InvalidArgument.
std::string format_aligned_record(const std::vector<AlignedField>& fields);

// Inverse of format_aligned_record. Throws ParseError.
std::vector<AlignedField> parse_aligned_record(std::string_view text);

// The four per-particle jet quantities with their captions.
std::vector<AlignedField> jet_fields(double delta_eta, double delta_phi, double log_pt, double log_e);

struct MixSource {
  std::string tag;
  std::string path;  // corpus file; read with read_corpus
  double ratio = 0.0;
};

struct MixManifest {
  std::vector<MixSource> sources;
  std::uint64_t seed = 0;

  // Ratios divided by their sum. Throws InvalidArgument on non-positive ratios.
  std::vector<double> normalized() const;
};

// Lines "tag\tpath\tratio"; an optional first line "seed\t<n>".
MixManifest read_mix_manifest(const std::string& path);

struct MixResult {
  PackedStream stream;
  std::vector<std::string> documents;         // in stream order
  std::vector<std::string> document_tags;     // source tag of each document
  std::vector<std::uint64_t> bytes_per_source;  // manifest order
};

// Draws documents without replacement from each source (seeded shuffle) and
// interleaves sources by weighted sampling on their remaining quota until every
// quota ratio·total_bytes is met. Documents are eos-terminated in the stream.
// Throws SourceExhausted when a source cannot meet its quota.
MixResult mix_datasets(const MixManifest& manifest, std::uint64_t total_bytes);

}  // namespace bbp
