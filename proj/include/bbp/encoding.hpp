#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbp/numerics/diff_array.hpp"

namespace bbp {

// 0..255 are raw byte values; the rest are the three specials.
using Token = std::int32_t;

inline constexpr Token kBos = 256;
inline constexpr Token kEos = 257;
inline constexpr Token kPad = 258;
inline constexpr std::size_t kVocabSize = 259;

inline constexpr bool is_byte_token(Token t) noexcept { return t >= 0 && t < 256; }
inline constexpr bool is_valid_token(Token t) noexcept { return t >= 0 && t < static_cast<Token>(kVocabSize); }

std::vector<Token> encode(std::string_view data, bool add_bos = false, bool add_eos = false);

// Drops specials and emits byte tokens verbatim.
std::string decode(std::span<const Token> tokens);

// Dense indicator of dimension 259. Throws OutOfRange.
std::vector<double> one_hot(Token t);

// Column l of the result is column tokens[l] of w[D×259]; differentiable in w.
template <typename T>
DiffArray<T> embed(std::span<const Token> tokens, const DiffArray<T>& w);

struct PackedStream {
  std::vector<Token> tokens;
  // Token offsets just past each document's terminator, strictly increasing.
  std::vector<std::size_t> document_boundaries;
  std::string separator;
};

struct PackOptions {
  std::string separator;  // may be empty when eos terminates documents
  bool bos_per_document = false;
  bool eos_per_document = false;
};

// tokens = encode(doc₁ ∥ sep ∥ doc₂ ∥ sep ∥ …); a boundary follows every separator.
// Throws InvalidArgument on an empty separator.
PackedStream pack_corpus(std::span<const std::string> docs, std::string_view separator);

// General form: each document is optionally wrapped in bos/eos, then followed by the separator.
PackedStream pack_documents(std::span<const std::string> docs, const PackOptions& options);

// Cuts a stream into fixed windows by greedy concatenation and hard truncation;
// the tail window is filled with kPad.
std::vector<std::vector<Token>> pack_windows(std::span<const Token> tokens, std::size_t window);

// On-disk corpus: raw bytes plus a manifest with one line per document
// "<offset>\t<length>\t<tag>".
struct CorpusDocument {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::string tag;
};

struct Corpus {
  std::string bytes;
  std::vector<CorpusDocument> documents;

  std::string_view document(std::size_t i) const { return std::string_view(bytes).substr(documents[i].offset, documents[i].length); }
  std::vector<std::string> document_strings() const;
};

std::string manifest_path_for(const std::string& corpus_path);

// Builds a corpus where each document is followed by `terminator` bytes (which
// are stored in the raw file but not counted in the document length).
Corpus make_corpus(std::span<const std::string> docs, std::string_view tag, std::string_view terminator = "");

void write_corpus(const std::string& path, const Corpus& corpus);

// Reads the raw file and its manifest. Without a manifest the whole file is one
// document tagged "raw".
Corpus read_corpus(const std::string& path);

}  // namespace bbp
