#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bbp/encoding.hpp"
#include "bbp/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bbp;

TEST_CASE("encode/decode round trip over every byte value") {
  std::string all;
  for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
  const auto t = encode(all, true, true);
  REQUIRE(t.size() == 258);
  CHECK(t.front() == kBos);
  CHECK(t.back() == kEos);
  for (int b = 0; b < 256; ++b) CHECK(t[static_cast<std::size_t>(b) + 1] == b);
  CHECK(decode(t) == all);
  const std::vector<Token> with_pad = {72, kPad, 105, kEos};
  CHECK(decode(with_pad) == "Hi");
}

TEST_CASE("one-hot vectors") {
  const auto v = one_hot(kPad);
  CHECK(v.size() == 259);
  CHECK(v[258] == 1.0);
  double s = 0.0;
  for (double x : v) s += x;
  CHECK(s == 1.0);
  CHECK_THROWS_AS(one_hot(259), OutOfRange);
  CHECK_THROWS_AS(one_hot(-1), OutOfRange);
}

TEST_CASE("embedding of a token is W times its one-hot vector") {
  const auto w = bbp::test::randn({3, kVocabSize}, 4);
  const std::vector<Token> tokens = {5, kBos, 255};
  const auto e = embed<double>(tokens, w);
  REQUIRE(e.shape() == Shape{3, 3});
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto oh = one_hot(tokens[j]);
    for (std::size_t r = 0; r < 3; ++r) {
      double want = 0.0;
      for (std::size_t c = 0; c < kVocabSize; ++c) want += w.at(r, c) * oh[c];
      CHECK(e.at(r, j) == want);
    }
  }
  CHECK_THROWS_AS(embed<double>(tokens, bbp::test::randn({3, 10}, 1)), ShapeMismatch);
}

TEST_CASE("corpus packing with separators") {
  const std::vector<std::string> docs = {"ab", "", "cde"};
  const auto s = pack_corpus(docs, "<|im_end|>");
  CHECK(decode(s.tokens) == "ab<|im_end|><|im_end|>cde<|im_end|>");
  CHECK(s.document_boundaries == std::vector<std::size_t>{12, 22, 35});
  CHECK_THROWS_AS(pack_corpus(docs, ""), InvalidArgument);

  PackOptions o;
  o.bos_per_document = true;
  o.eos_per_document = true;
  const auto w = pack_documents(docs, o);
  CHECK(w.tokens == std::vector<Token>{kBos, 'a', 'b', kEos, kBos, kEos, kBos, 'c', 'd', 'e', kEos});
  CHECK(w.document_boundaries == std::vector<std::size_t>{4, 6, 11});
}

TEST_CASE("fixed windows pad the tail") {
  const std::vector<Token> t = {1, 2, 3, 4, 5};
  const auto w = pack_windows(t, 2);
  REQUIRE(w.size() == 3);
  CHECK(w[2] == std::vector<Token>{5, kPad});
  CHECK_THROWS_AS(pack_windows(t, 0), InvalidArgument);
}

TEST_CASE("corpus files round trip with their manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "bbp_unit_corpus";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "c.txt").string();
  const std::vector<std::string> docs = {"x=1", std::string("\0\xff", 2), "last"};
  write_corpus(path, make_corpus(docs, "demo", "\n"));
  const Corpus back = read_corpus(path);
  CHECK(back.document_strings() == docs);
  CHECK(back.documents[1].tag == "demo");
  CHECK(back.bytes.size() == 3 + 2 + 4 + 3);

  std::filesystem::remove(manifest_path_for(path));
  const Corpus raw = read_corpus(path);
  REQUIRE(raw.documents.size() == 1);
  CHECK(raw.documents[0].tag == "raw");
  CHECK_THROWS_AS(read_corpus((dir / "missing").string()), IoError);
  std::filesystem::remove_all(dir);
}
