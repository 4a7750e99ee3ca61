#include "bbp/encoding.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbp/errors.hpp"
#include "bbp/numerics/ops.hpp"

namespace bbp {

std::vector<Token> encode(std::string_view data, bool add_bos, bool add_eos) {
  std::vector<Token> out;
  out.reserve(data.size() + 2);
  if (add_bos) out.push_back(kBos);
  for (char c : data) out.push_back(static_cast<Token>(static_cast<unsigned char>(c)));
  if (add_eos) out.push_back(kEos);
  return out;
}

std::string decode(std::span<const Token> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    if (is_byte_token(t)) out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

std::vector<double> one_hot(Token t) {
  if (!is_valid_token(t)) throw OutOfRange("token " + std::to_string(t) + " outside [0,258]");
  std::vector<double> v(kVocabSize, 0.0);
  v[static_cast<std::size_t>(t)] = 1.0;
  return v;
}

template <typename T>
DiffArray<T> embed(std::span<const Token> tokens, const DiffArray<T>& w) {
  if (w.ndim() != 2 || w.cols() != kVocabSize) {
    throw ShapeMismatch("embedding table must be [D×259], got " + shape_str(w.shape()));
  }
  return gather_columns(w, tokens);
}

template DiffArray<float> embed(std::span<const Token>, const DiffArray<float>&);
template DiffArray<double> embed(std::span<const Token>, const DiffArray<double>&);

PackedStream pack_corpus(std::span<const std::string> docs, std::string_view separator) {
  if (separator.empty()) throw InvalidArgument("pack_corpus separator must be non-empty");
  PackOptions options;
  options.separator = std::string(separator);
  return pack_documents(docs, options);
}

PackedStream pack_documents(std::span<const std::string> docs, const PackOptions& options) {
  PackedStream out;
  out.separator = options.separator;
  const std::vector<Token> sep = encode(options.separator);
  for (const std::string& doc : docs) {
    if (options.bos_per_document) out.tokens.push_back(kBos);
    const auto body = encode(doc);
    out.tokens.insert(out.tokens.end(), body.begin(), body.end());
    if (options.eos_per_document) out.tokens.push_back(kEos);
    out.tokens.insert(out.tokens.end(), sep.begin(), sep.end());
    if (out.document_boundaries.empty() || out.document_boundaries.back() != out.tokens.size()) {
      out.document_boundaries.push_back(out.tokens.size());
    }
  }
  return out;
}

std::vector<std::vector<Token>> pack_windows(std::span<const Token> tokens, std::size_t window) {
  if (window == 0) throw InvalidArgument("window length must be positive");
  std::vector<std::vector<Token>> out;
  for (std::size_t at = 0; at < tokens.size(); at += window) {
    const std::size_t n = std::min(window, tokens.size() - at);
    std::vector<Token> w(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                         tokens.begin() + static_cast<std::ptrdiff_t>(at + n));
    w.resize(window, kPad);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::string> Corpus::document_strings() const {
  std::vector<std::string> out;
  out.reserve(documents.size());
  for (std::size_t i = 0; i < documents.size(); ++i) out.emplace_back(document(i));
  return out;
}

std::string manifest_path_for(const std::string& corpus_path) { return corpus_path + ".manifest"; }

Corpus make_corpus(std::span<const std::string> docs, std::string_view tag, std::string_view terminator) {
  Corpus c;
  for (const auto& d : docs) {
    c.documents.push_back({c.bytes.size(), d.size(), std::string(tag)});
    c.bytes += d;
    c.bytes += terminator;
  }
  return c;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(corpus.bytes.data(), static_cast<std::streamsize>(corpus.bytes.size()));
    if (!out) throw IoError("short write to " + path);
  }
  std::ofstream manifest(manifest_path_for(path), std::ios::binary | std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + manifest_path_for(path));
  for (const auto& d : corpus.documents) {
    if (d.tag.find_first_of("\t\n") != std::string::npos) throw InvalidArgument("document tag contains tab or newline");
    manifest << d.offset << '\t' << d.length << '\t' << d.tag << '\n';
  }
}

Corpus read_corpus(const std::string& path) {
  Corpus c;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    c.bytes = ss.str();
  }
  const std::string mpath = manifest_path_for(path);
  if (!std::filesystem::exists(mpath)) {
    if (!c.bytes.empty()) c.documents.push_back({0, c.bytes.size(), "raw"});
    return c;
  }
  std::ifstream manifest(mpath, std::ios::binary);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    CorpusDocument d;
    std::string off, len;
    if (!std::getline(ls, off, '\t') || !std::getline(ls, len, '\t')) {
      throw IoError(mpath + ":" + std::to_string(lineno) + ": expected offset<TAB>length<TAB>tag");
    }
    std::getline(ls, d.tag);
    try {
      d.offset = std::stoull(off);
      d.length = std::stoull(len);
    } catch (const std::exception&) {
      throw IoError(mpath + ":" + std::to_string(lineno) + ": bad number");
    }
    if (d.offset + d.length > c.bytes.size()) {
      throw IoError(mpath + ":" + std::to_string(lineno) + ": document extends past end of " + path);
    }
    c.documents.push_back(std::move(d));
  }
  return c;
}

}  // namespace bbp
