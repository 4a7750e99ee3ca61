#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "bbp/corpus/cot.hpp"
#include "bbp/errors.hpp"
#include "doctest.h"

using namespace bbp;

namespace {

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(BBP_TEST_DATA) + "/" + name);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_ws(std::string_view s) {
  std::string out;
  for (char ch : s)
    if (!std::isspace(static_cast<unsigned char>(ch))) out += ch;
  return out;
}

bool rejected(const std::string& text) {
  try {
    return !verify_cot(text).valid;
  } catch (const ParseError&) {
    return true;
  }
}

}  // namespace

TEST_CASE("decimal parsing") {
  CHECK(parse_decimal("000123") == 123);
  CHECK(parse_decimal("0") == 0);
  CHECK(to_decimal(parse_decimal("98765432109876543210")) == "98765432109876543210");
  CHECK_THROWS_AS(parse_decimal(""), InvalidArgument);
  CHECK_THROWS_AS(parse_decimal("12a"), InvalidArgument);
  CHECK(parse_op("mul") == CotOp::kMul);
  CHECK_THROWS_AS(parse_op("div"), InvalidArgument);
}

TEST_CASE("addition trace format") {
  const auto r = gen_addition(918, 7);
  CHECK(r.text() == "918+7=8+7,1+0,9+0, result=925");
  const auto big = gen_addition(parse_decimal("123123457457352354"), parse_decimal("7467458472832"));
  CHECK(big.trace.rfind("4+2,5+3,3+8,2+2,", 0) == 0);
  CHECK(big.result == parse_decimal("123130924915825186"));
  CHECK(extract_result(big.trace) == "123130924915825186");
}

TEST_CASE("subtraction trace format and markers") {
  CHECK(gen_subtraction(471, 5).text() == "471-5=1-5,7-0,4-0,A-B,A>B, result=466");
  CHECK(gen_subtraction(25, 63).text() == "25-63=3-5,6-2,B-A,A<B, result=-38");
  CHECK(gen_subtraction(40, 40).text() == "40-40=0-0,4-4,A-B,A=B, result=0");
  const BigInt a = parse_decimal("6202787477498670348"), b = parse_decimal("3854189905091895848");
  const auto r = gen_subtraction(a, b);
  CHECK(r.trace.rfind("8-8,4-4,3-8,0-5,7-9,6-8,8-1,9-9,4-0,7-5,7-0,4-9,7-9,8-8,7-1,2-4,0-5,2-8,6-3,A-B,A>B", 0) == 0);
  CHECK(r.result == parse_decimal("2348597572406774500"));
}

TEST_CASE("the borrow-error subtraction output is rejected at its result") {
  const std::string model_output =
      "6202787477498670348-3854189905091895848="
      "8-8,4-4,3-8,0-5,7-9,6-8,8-1,9-9,4-0,7-5,7-0,4-9,7-9,8-8,7-1,2-4,0-5,2-8,6-3,A-B,A>B\n"
      "result=2348597572406774499";
  const auto rep = verify_cot(model_output);
  CHECK_FALSE(rep.valid);
  REQUIRE(rep.first_error);
  CHECK(rep.first_error->kind == CotErrorKind::kResult);
  CHECK(*rep.expected_result == parse_decimal("2348597572406774500"));
}

TEST_CASE("multiplication trace reproduces the worked product up to the corrupted copy") {
  const std::string listing = strip_ws(read_data("mul_copy_error.txt"));
  const auto r = gen_multiplication(21019625, 451301517);
  CHECK(r.result == parse_decimal("9486188649271125"));
  const std::string gen = strip_ws(r.trace);
  std::size_t common = 0;
  while (common < gen.size() && common < listing.size() && gen[common] == listing[common]) ++common;
  const std::size_t final_segment = listing.find("1078338649271125+84078505e8");
  REQUIRE(final_segment != std::string::npos);
  CHECK(common == final_segment + std::string("1078338649271125+8407850").size());
  CHECK(gen.find("1078338649271125+84078500e8:tail=52117294,") != std::string::npos);
  CHECK(extract_result(r.trace) == "9486188649271125");
}

TEST_CASE("the copy-error multiplication trace is rejected at the final addition step") {
  const std::string listing = read_data("mul_copy_error.txt");
  const auto rep = verify_cot(listing);
  CHECK(rep.op == CotOp::kMul);
  CHECK_FALSE(rep.valid);
  REQUIRE(rep.first_error);
  CHECK(rep.first_error->kind == CotErrorKind::kCopy);
  CHECK(rep.first_error->description.find("final") != std::string::npos);
  CHECK(rep.first_error->description.find("84078505e8") != std::string::npos);
  CHECK(*rep.claimed_result == parse_decimal("9486189149271125"));
  CHECK(*rep.expected_result == BigInt(21019625) * BigInt(451301517));
  CHECK(*rep.expected_result == parse_decimal("9486188649271125"));
}

TEST_CASE("special multiplier digits") {
  const auto r = gen_multiplication(37, 102);
  CHECK(r.trace.find("37*0e1:case0*,res=0e1;") != std::string::npos);
  CHECK(r.trace.find("37*1e2:case2*,res=37e2;") != std::string::npos);
  CHECK(r.trace.find("+0e1:case2+,res=") != std::string::npos);
  CHECK(r.result == 3774);
  CHECK(verify_cot(r.text()).valid);
}

TEST_CASE("generated records verify for every operation") {
  for (CotOp op : {CotOp::kAdd, CotOp::kSub, CotOp::kMul}) {
    for (const auto& r : gen_random_records(op, op == CotOp::kMul ? 8 : 30, 150, 11)) {
      const auto with_prompt = verify_cot(r.text());
      REQUIRE_MESSAGE(with_prompt.valid, r.text());
      CHECK(*with_prompt.claimed_result == r.result);
      CHECK(verify_cot(r.trace).valid);
      const BigInt want = op == CotOp::kAdd ? BigInt(r.a + r.b) : op == CotOp::kSub ? BigInt(r.a - r.b) : BigInt(r.a * r.b);
      CHECK(r.result == want);
    }
  }
}

TEST_CASE("single-digit mutations are caught") {
  std::mt19937_64 rng(3);
  for (CotOp op : {CotOp::kAdd, CotOp::kSub, CotOp::kMul}) {
    for (const auto& r : gen_random_records(op, 6, 60, 12)) {
      std::string t = r.text();
      std::vector<std::size_t> digits;
      for (std::size_t i = r.prompt().size(); i < t.size(); ++i)
        if (std::isdigit(static_cast<unsigned char>(t[i]))) digits.push_back(i);
      const std::size_t at = digits[rng() % digits.size()];
      t[at] = static_cast<char>('0' + (t[at] - '0' + 1 + rng() % 9) % 10);
      CHECK_MESSAGE(rejected(t), t);
    }
  }
}

TEST_CASE("whitespace is ignored and parse errors carry offsets") {
  CHECK(verify_cot("12 + 9 =\n2+9,\t1+0, result=21").valid);
  try {
    verify_cot("12+9=2+9;1+0, result=21");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 8);
  }
  CHECK_THROWS_AS(verify_cot(""), ParseError);
  CHECK_THROWS_AS(verify_cot("12+9=2+9,1+0, result=21 extra"), ParseError);
}

TEST_CASE("result extraction") {
  CHECK(extract_result("1+2=1+2, result=3<junk") == "3");
  CHECK(extract_result("x result=-42 result=7") == "7");
  CHECK(extract_result("no answer") == "");
  CHECK(extract_result("result=-") == "");
}

TEST_CASE("random operands respect the digit bound and the seed") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const BigInt v = random_operand(3, rng);
    CHECK(v >= 0);
    CHECK(v < 1000);
  }
  const auto a = gen_random_records(CotOp::kAdd, 3, 20, 5), b = gen_random_records(CotOp::kAdd, 3, 20, 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text() == b[i].text());
}
