#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bbp {

// Base class for every error raised by the library. The CLI prints what()
// as its one-line diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BBP_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

BBP_DEFINE_ERROR(ShapeMismatch);
BBP_DEFINE_ERROR(AllMaskedRow);
BBP_DEFINE_ERROR(EmptyBatch);
BBP_DEFINE_ERROR(NonFiniteGradient);
BBP_DEFINE_ERROR(OutOfRange);
BBP_DEFINE_ERROR(GroupSizeMismatch);
BBP_DEFINE_ERROR(SourceExhausted);
BBP_DEFINE_ERROR(CorpusEmpty);
BBP_DEFINE_ERROR(DivergedLoss);
BBP_DEFINE_ERROR(CorruptCheckpoint);
BBP_DEFINE_ERROR(IncompatibleShape);
BBP_DEFINE_ERROR(InvalidArgument);
BBP_DEFINE_ERROR(IoError);

#undef BBP_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error("ParseError at byte " + std::to_string(offset) + ": " + msg), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace bbp
