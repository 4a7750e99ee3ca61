#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace bbp {

using BigInt = boost::multiprecision::cpp_int;

// Decimal digits only; leading zeros are allowed. Throws InvalidArgument.
BigInt parse_decimal(std::string_view digits);
std::string to_decimal(const BigInt& value);

enum class CotOp { kAdd, kSub, kMul };

char op_symbol(CotOp op);
CotOp parse_op(std::string_view name);  // "add" | "sub" | "mul"

// One generated arithmetic example. `trace` excludes the prompt "a<op>b=".
struct CotRecord {
  CotOp op = CotOp::kAdd;
  BigInt a;
  BigInt b;
  std::string trace;
  BigInt result;

  std::string prompt() const;
  std::string text() const { return prompt() + trace; }
};

// "d_a+d_b" pairs, least significant first, shorter operand zero-padded,
// then ", result=<a+b>".
CotRecord gen_addition(const BigInt& a, const BigInt& b);

// "d_a-d_b" pairs, then ",A-B,A>B, result=<a-b>". When a < b the operands are
// swapped, the marker becomes "B-A,A<B" and the result is negative; equal
// operands give "A-B,A=B".
CotRecord gen_subtraction(const BigInt& a, const BigInt& b);

// Per digit d_k of b (LSB first):
//   "a*d_ke<k>:" steps "x*d+B=p+c=s b=c'" ",res=<a·d_k>e<k>;"
//   with "case0*,res=0e<k>;" for d_k = 0 and "case2*,res=<a>e<k>;" for d_k = 1.
// Then "sum:p0e0+p1e1+...;" and an addition chain, one segment per k ≥ 1:
//   "<acc>+<p_k>e<k>:tail=<low k digits of acc, LSB first>," steps "x+y+B=s b=c" ",res=<acc'>;"
//   or "<acc>+0e<k>:case2+,res=<acc>;". Ends with " result=<a·b>".
CotRecord gen_multiplication(const BigInt& a, const BigInt& b);

CotRecord gen_record(CotOp op, const BigInt& a, const BigInt& b);

// Uniform operand with a uniformly drawn length in [1, max_digits].
BigInt random_operand(std::size_t max_digits, std::mt19937_64& rng);

// `count` records with operands of 1..max_digits digits. Deterministic in seed.
std::vector<CotRecord> gen_random_records(CotOp op, std::size_t max_digits, std::size_t count, std::uint64_t seed);

enum class CotErrorKind { kDigit, kCarry, kCopy, kPartial, kResult, kMarker, kStructure };

const char* error_kind_name(CotErrorKind kind);

struct CotError {
  std::size_t step_index = 0;  // counts checked items in trace order
  CotErrorKind kind = CotErrorKind::kStructure;
  std::string description;
};

struct VerifyReport {
  bool valid = true;
  CotOp op = CotOp::kAdd;
  std::optional<CotError> first_error;
  std::optional<BigInt> claimed_result;
  std::optional<BigInt> expected_result;  // exact value implied by the operands
};

// Checks every digit step, carry, partial product, copy between steps and the
// final result against exact arithmetic. Whitespace is ignored. The prompt
// "a<op>b=" is optional. Throws ParseError (byte offset into `trace`).
VerifyReport verify_cot(std::string_view trace);

// Text after "result=" in a generated completion, up to the first byte that is
// not a sign or digit. Empty when absent.
std::string extract_result(std::string_view text);

}  // namespace bbp
