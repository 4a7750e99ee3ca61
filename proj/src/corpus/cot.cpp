#include "bbp/corpus/cot.hpp"

#include <algorithm>
#include <cctype>

#include "bbp/errors.hpp"

namespace bbp {

BigInt parse_decimal(std::string_view digits) {
  if (digits.empty()) throw InvalidArgument("empty decimal literal");
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c))) throw InvalidArgument("not a decimal literal: " + std::string(digits));
  }
  // Strip leading zeros: the string constructor treats them as an octal prefix.
  const std::size_t first = std::min(digits.find_first_not_of('0'), digits.size());
  if (first == digits.size()) return BigInt(0);
  return BigInt(std::string(digits.substr(first)));
}

std::string to_decimal(const BigInt& value) { return value.str(); }

char op_symbol(CotOp op) {
  switch (op) {
    case CotOp::kAdd: return '+';
    case CotOp::kSub: return '-';
    case CotOp::kMul: return '*';
  }
  return '?';
}

CotOp parse_op(std::string_view name) {
  if (name == "add") return CotOp::kAdd;
  if (name == "sub") return CotOp::kSub;
  if (name == "mul") return CotOp::kMul;
  throw InvalidArgument("unknown op '" + std::string(name) + "' (add|sub|mul)");
}

std::string CotRecord::prompt() const { return to_decimal(a) + op_symbol(op) + to_decimal(b) + "="; }

namespace {

// Least significant first; zero has the single digit 0.
std::vector<int> digits_lsb(const BigInt& v) {
  const std::string s = to_decimal(v);
  std::vector<int> out;
  for (auto it = s.rbegin(); it != s.rend(); ++it) out.push_back(*it - '0');
  return out;
}

std::vector<int> digits_lsb(std::string_view s) {
  std::vector<int> out;
  for (auto it = s.rbegin(); it != s.rend(); ++it) out.push_back(*it - '0');
  return out;
}

BigInt pow10(std::size_t k) {
  BigInt p = 1;
  for (std::size_t i = 0; i < k; ++i) p *= 10;
  return p;
}

void check_nonnegative(const BigInt& a, const BigInt& b) {
  if (a < 0 || b < 0) throw InvalidArgument("operands must be nonnegative");
}

std::string digit_pairs(const BigInt& x, const BigInt& y, char sym) {
  std::vector<int> dx = digits_lsb(x), dy = digits_lsb(y);
  const std::size_t n = std::max(dx.size(), dy.size());
  dx.resize(n, 0);
  dy.resize(n, 0);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ',';
    out += static_cast<char>('0' + dx[i]);
    out += sym;
    out += static_cast<char>('0' + dy[i]);
  }
  return out;
}

}  // namespace

CotRecord gen_addition(const BigInt& a, const BigInt& b) {
  check_nonnegative(a, b);
  CotRecord r{CotOp::kAdd, a, b, "", a + b};
  r.trace = digit_pairs(a, b, '+') + ", result=" + to_decimal(r.result);
  return r;
}

CotRecord gen_subtraction(const BigInt& a, const BigInt& b) {
  check_nonnegative(a, b);
  CotRecord r{CotOp::kSub, a, b, "", a - b};
  if (a < b) {
    r.trace = digit_pairs(b, a, '-') + ",B-A,A<B";
  } else {
    r.trace = digit_pairs(a, b, '-') + (a == b ? ",A-B,A=B" : ",A-B,A>B");
  }
  r.trace += ", result=" + to_decimal(r.result);
  return r;
}

CotRecord gen_multiplication(const BigInt& a, const BigInt& b) {
  check_nonnegative(a, b);
  CotRecord r{CotOp::kMul, a, b, "", a * b};
  const std::string as = to_decimal(a);
  const std::vector<int> ad = digits_lsb(a), bd = digits_lsb(b);
  std::vector<BigInt> partials;
  std::string& t = r.trace;
  for (std::size_t k = 0; k < bd.size(); ++k) {
    const int d = bd[k];
    const std::string ek = "e" + std::to_string(k);
    t += as + "*" + std::to_string(d) + ek + ":";
    const BigInt partial = a * d;
    if (d == 0) {
      t += "case0*,res=0" + ek + ";";
    } else if (d == 1) {
      t += "case2*,res=" + as + ek + ";";
    } else {
      int carry = 0;
      for (int x : ad) {
        const int p = x * d, s = p + carry;
        t += std::to_string(x) + "*" + std::to_string(d) + "+B=" + std::to_string(p) + "+" + std::to_string(carry) +
             "=" + std::to_string(s) + " b=" + std::to_string(s / 10) + ",";
        carry = s / 10;
      }
      t += "res=" + to_decimal(partial) + ek + ";";
    }
    partials.push_back(partial);
  }
  t += "sum:";
  for (std::size_t k = 0; k < partials.size(); ++k) {
    if (k) t += "+";
    t += to_decimal(partials[k]) + "e" + std::to_string(k);
  }
  t += ";";
  BigInt acc = partials[0];
  for (std::size_t k = 1; k < partials.size(); ++k) {
    const BigInt& pk = partials[k];
    t += to_decimal(acc) + "+" + to_decimal(pk) + "e" + std::to_string(k) + ":";
    if (pk == 0) {
      t += "case2+,res=" + to_decimal(acc) + ";";
      continue;
    }
    std::vector<int> low = digits_lsb(acc);
    low.resize(std::max(low.size(), k), 0);
    t += "tail=";
    for (std::size_t i = 0; i < k; ++i) t += static_cast<char>('0' + low[i]);
    t += ",";
    const BigInt high_value = acc / pow10(k);
    const std::vector<int> high = high_value == 0 ? std::vector<int>{} : digits_lsb(high_value);
    const std::vector<int> yd = digits_lsb(pk);
    const std::size_t m = std::max(high.size(), yd.size());
    int carry = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const int x = j < high.size() ? high[j] : 0, y = j < yd.size() ? yd[j] : 0, s = x + y + carry;
      t += std::to_string(x) + "+" + std::to_string(y) + "+B=" + std::to_string(s) + " b=" + std::to_string(s / 10) + ",";
      carry = s / 10;
    }
    acc += pk * pow10(k);
    t += "res=" + to_decimal(acc) + ";";
  }
  t += " result=" + to_decimal(r.result);
  return r;
}

CotRecord gen_record(CotOp op, const BigInt& a, const BigInt& b) {
  switch (op) {
    case CotOp::kAdd: return gen_addition(a, b);
    case CotOp::kSub: return gen_subtraction(a, b);
    case CotOp::kMul: return gen_multiplication(a, b);
  }
  throw InvalidArgument("unknown op");
}

BigInt random_operand(std::size_t max_digits, std::mt19937_64& rng) {
  if (max_digits < 1) throw InvalidArgument("max_digits must be >= 1");
  const std::size_t len = std::uniform_int_distribution<std::size_t>(1, max_digits)(rng);
  std::uniform_int_distribution<int> digit(0, 9), lead(1, 9);
  std::string s;
  s += static_cast<char>('0' + (len == 1 ? digit(rng) : lead(rng)));
  while (s.size() < len) s += static_cast<char>('0' + digit(rng));
  return parse_decimal(s);
}

std::vector<CotRecord> gen_random_records(CotOp op, std::size_t max_digits, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CotRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const BigInt a = random_operand(max_digits, rng);
    const BigInt b = random_operand(max_digits, rng);
    out.push_back(gen_record(op, a, b));
  }
  return out;
}

const char* error_kind_name(CotErrorKind kind) {
  switch (kind) {
    case CotErrorKind::kDigit: return "digit";
    case CotErrorKind::kCarry: return "carry";
    case CotErrorKind::kCopy: return "copy";
    case CotErrorKind::kPartial: return "partial";
    case CotErrorKind::kResult: return "result";
    case CotErrorKind::kMarker: return "marker";
    case CotErrorKind::kStructure: return "structure";
  }
  return "?";
}

namespace {

// Whitespace-free view of the input that remembers original byte offsets.
class Cursor {
 public:
  explicit Cursor(std::string_view text) : end_offset_(text.size()) {
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (!std::isspace(static_cast<unsigned char>(text[i]))) {
        s_ += text[i];
        offsets_.push_back(i);
      }
    }
  }

  std::size_t offset() const { return pos_ < offsets_.size() ? offsets_[pos_] : end_offset_; }
  bool done() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }
  bool peek_digit() const { return std::isdigit(static_cast<unsigned char>(peek())) != 0; }
  std::size_t pos() const { return pos_; }
  void reset(std::size_t pos) { pos_ = pos; }
  std::string_view rest() const { return std::string_view(s_).substr(std::min(pos_, s_.size())); }

  bool starts_with(std::string_view lit) const { return rest().substr(0, lit.size()) == lit; }

  bool accept(std::string_view lit) {
    if (!starts_with(lit)) return false;
    pos_ += lit.size();
    return true;
  }

  void expect(std::string_view lit) {
    if (!accept(lit)) fail("expected '" + std::string(lit) + "'");
  }

  std::string digits(const char* what) {
    const std::size_t start = pos_;
    while (peek_digit()) ++pos_;
    if (pos_ == start) fail(std::string("expected ") + what);
    return s_.substr(start, pos_ - start);
  }

  int digit(const char* what) {
    if (!peek_digit()) fail(std::string("expected ") + what);
    return s_[pos_++] - '0';
  }

  long long small(const char* what) {
    const std::size_t at = pos_;
    const std::string d = digits(what);
    if (d.size() > 6) {
      pos_ = at;
      fail(std::string(what) + " has too many digits");
    }
    return std::stoll(d);
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, offset()); }

 private:
  std::string s_;
  std::vector<std::size_t> offsets_;
  std::size_t pos_ = 0;
  std::size_t end_offset_;
};

class Checker {
 public:
  void next() { ++index_; }
  void require(bool ok, CotErrorKind kind, const std::string& description) {
    if (!ok && !error_) error_ = CotError{index_, kind, description};
  }
  const std::optional<CotError>& error() const { return error_; }

 private:
  std::size_t index_ = 0;
  std::optional<CotError> error_;
};

struct Prompt {
  std::string a, b;
  char op = 0;
};

std::optional<Prompt> parse_prompt(Cursor& c) {
  const std::size_t start = c.pos();
  Prompt p;
  while (c.peek_digit()) p.a += c.peek(), c.reset(c.pos() + 1);
  const char op = c.peek();
  if (!p.a.empty() && (op == '+' || op == '-' || op == '*')) {
    c.reset(c.pos() + 1);
    while (c.peek_digit()) p.b += c.peek(), c.reset(c.pos() + 1);
    if (!p.b.empty() && c.accept("=")) {
      p.op = op;
      return p;
    }
  }
  c.reset(start);
  return std::nullopt;
}

BigInt parse_result(Cursor& c) {
  c.accept(",");
  c.expect("result=");
  const bool negative = c.accept("-");
  const BigInt v = parse_decimal(c.digits("result digits"));
  if (!c.done()) c.fail("trailing bytes after result");
  return negative ? BigInt(-v) : v;
}

std::string pad_digits(std::string_view s, std::size_t n) {
  std::string out(s.rbegin(), s.rend());
  out.resize(std::max(out.size(), n), '0');
  return out;  // LSB first
}

void verify_pairs(Cursor& c, Checker& chk, char sym, const std::optional<Prompt>& prompt, VerifyReport& report) {
  std::string x, y;  // LSB first
  for (;;) {
    x += static_cast<char>('0' + c.digit("pair digit"));
    if (!c.accept(std::string(1, sym))) c.fail(std::string("expected '") + sym + "'");
    y += static_cast<char>('0' + c.digit("pair digit"));
    chk.next();
    if (!c.accept(",")) break;
    if (!c.peek_digit()) break;
  }
  const std::string xs(x.rbegin(), x.rend()), ys(y.rbegin(), y.rend());

  std::string marker;
  if (sym == '-') {
    for (const char* m : {"A-B,A>B", "A-B,A=B", "B-A,A<B"}) {
      if (c.accept(m)) marker = m;
    }
    if (marker.empty()) c.fail("expected comparison marker");
    chk.next();
  }
  const bool swapped = marker == "B-A,A<B";

  BigInt a = parse_decimal(swapped ? ys : xs), b = parse_decimal(swapped ? xs : ys);
  if (prompt) {
    const std::size_t n = std::max(prompt->a.size(), prompt->b.size());
    const std::string pa = pad_digits(prompt->a, n), pb = pad_digits(prompt->b, n);
    const std::string& first = swapped ? pb : pa;
    const std::string& second = swapped ? pa : pb;
    chk.require(x.size() == n, CotErrorKind::kStructure,
                std::to_string(x.size()) + " digit pairs for operands of " + std::to_string(n) + " digits");
    for (std::size_t i = 0; i < std::min(n, x.size()); ++i) {
      chk.require(x[i] == first[i] && y[i] == second[i], CotErrorKind::kCopy,
                  "digit pair " + std::to_string(i) + " does not match the operands");
    }
    a = parse_decimal(prompt->a);
    b = parse_decimal(prompt->b);
  }
  if (sym == '-') {
    const BigInt px = parse_decimal(xs), py = parse_decimal(ys);
    const bool ok = marker == "A-B,A>B" ? px > py : marker == "A-B,A=B" ? px == py : px > py;
    chk.require(ok, CotErrorKind::kMarker, "comparison marker " + marker + " contradicts the digits");
  }
  report.expected_result = sym == '+' ? BigInt(a + b) : BigInt(a - b);
  const BigInt claimed = parse_result(c);
  chk.next();
  report.claimed_result = claimed;
  chk.require(claimed == *report.expected_result, CotErrorKind::kResult,
              "result " + to_decimal(claimed) + " but exact value is " + to_decimal(*report.expected_result));
}

struct Term {
  std::string value;
  std::size_t exponent = 0;
  std::string str() const { return value + "e" + std::to_string(exponent); }
};

void verify_multiplication(Cursor& c, Checker& chk, const std::optional<Prompt>& prompt, VerifyReport& report) {
  std::string a_ref = prompt ? prompt->a : std::string();
  std::string b_lsb;
  std::vector<Term> partials;

  while (c.peek_digit()) {
    const std::size_t k = partials.size();
    const std::string x = c.digits("multiplicand");
    c.expect("*");
    const int d = c.digit("multiplier digit");
    c.expect("e");
    const long long ek = c.small("exponent");
    c.expect(":");
    chk.next();
    if (a_ref.empty()) a_ref = x;
    chk.require(x == a_ref, CotErrorKind::kCopy, "multiplicand " + x + " in segment " + std::to_string(k) + " differs from " + a_ref);
    chk.require(ek == static_cast<long long>(k), CotErrorKind::kStructure, "segment " + std::to_string(k) + " labelled e" + std::to_string(ek));
    if (prompt) {
      const bool ok = k < prompt->b.size() && prompt->b[prompt->b.size() - 1 - k] - '0' == d;
      chk.require(ok, CotErrorKind::kCopy, "multiplier digit " + std::to_string(d) + " is not digit " + std::to_string(k) + " of " + prompt->b);
    }
    b_lsb += static_cast<char>('0' + d);

    const BigInt xv = parse_decimal(x);
    if (c.accept("case0*,")) {
      chk.require(d == 0, CotErrorKind::kMarker, "case0* used for digit " + std::to_string(d));
    } else if (c.accept("case2*,")) {
      chk.require(d == 1, CotErrorKind::kMarker, "case2* used for digit " + std::to_string(d));
    } else {
      chk.require(d > 1, CotErrorKind::kMarker, "digit " + std::to_string(d) + " needs its special case");
      const std::vector<int> xd = digits_lsb(std::string_view(x));
      long long carry = 0;
      std::size_t j = 0;
      while (!c.starts_with("res=")) {
        const int sx = c.digit("step digit");
        c.expect("*");
        const int sd = c.digit("step multiplier");
        c.expect("+B=");
        const long long p = c.small("product");
        c.expect("+");
        const long long cin = c.small("carry in");
        c.expect("=");
        const long long s = c.small("step sum");
        c.expect("b=");
        const long long cout = c.small("carry out");
        c.expect(",");
        chk.next();
        const std::string at = "segment " + std::to_string(k) + " step " + std::to_string(j);
        chk.require(j < xd.size() && sx == xd[j], CotErrorKind::kCopy, at + ": digit " + std::to_string(sx) + " is not digit " + std::to_string(j) + " of " + x);
        chk.require(sd == d, CotErrorKind::kCopy, at + ": multiplier " + std::to_string(sd) + " instead of " + std::to_string(d));
        chk.require(p == sx * sd, CotErrorKind::kDigit, at + ": " + std::to_string(sx) + "*" + std::to_string(sd) + " != " + std::to_string(p));
        chk.require(cin == carry, CotErrorKind::kCarry, at + ": carry in " + std::to_string(cin) + " but previous b=" + std::to_string(carry));
        chk.require(s == p + cin, CotErrorKind::kDigit, at + ": " + std::to_string(p) + "+" + std::to_string(cin) + " != " + std::to_string(s));
        chk.require(cout == s / 10, CotErrorKind::kCarry, at + ": b=" + std::to_string(cout) + " for sum " + std::to_string(s));
        carry = cout;
        ++j;
      }
      chk.require(j == xd.size(), CotErrorKind::kStructure, "segment " + std::to_string(k) + " has " + std::to_string(j) + " steps for " + std::to_string(xd.size()) + " digits");
    }
    c.expect("res=");
    Term t{c.digits("partial product"), 0};
    c.expect("e");
    t.exponent = static_cast<std::size_t>(c.small("exponent"));
    c.expect(";");
    chk.next();
    chk.require(parse_decimal(t.value) == xv * d && t.exponent == k, CotErrorKind::kPartial,
                "segment " + std::to_string(k) + ": res=" + t.str() + " but " + x + "*" + std::to_string(d) + " = " + to_decimal(xv * d) + "e" + std::to_string(k));
    partials.push_back(std::move(t));
  }
  if (partials.empty()) c.fail("expected a multiplication segment");
  if (prompt) {
    chk.require(partials.size() == prompt->b.size(), CotErrorKind::kStructure,
                std::to_string(partials.size()) + " segments for a " + std::to_string(prompt->b.size()) + "-digit multiplier");
  }

  c.expect("sum:");
  std::vector<Term> sum;
  do {
    Term t{c.digits("sum term"), 0};
    c.expect("e");
    t.exponent = static_cast<std::size_t>(c.small("exponent"));
    const std::size_t k = sum.size();
    chk.next();
    chk.require(k < partials.size() && t.str() == partials[k].str(), CotErrorKind::kCopy,
                "copy mismatch in sum term " + std::to_string(k) + ": " + t.str() +
                    (k < partials.size() ? " vs partial " + partials[k].str() : std::string(" has no partial")));
    sum.push_back(std::move(t));
  } while (c.accept("+"));
  c.expect(";");
  chk.require(sum.size() == partials.size(), CotErrorKind::kStructure, "sum lists " + std::to_string(sum.size()) + " of " + std::to_string(partials.size()) + " partials");

  std::string acc = sum.empty() ? std::string("0") : sum[0].value;
  const std::size_t chain_len = sum.size() - 1;
  std::size_t k = 1;
  while (c.peek_digit()) {
    const std::string x = c.digits("accumulator");
    c.expect("+");
    Term y{c.digits("addend"), 0};
    c.expect("e");
    y.exponent = static_cast<std::size_t>(c.small("exponent"));
    c.expect(":");
    chk.next();
    const std::string at = "addition step " + std::to_string(k) + (k == chain_len ? " (final)" : "");
    chk.require(x == acc, CotErrorKind::kCopy, "copy mismatch at " + at + ": accumulator " + x + " vs previous res " + acc);
    chk.require(k < sum.size() && y.str() == sum[k].str(), CotErrorKind::kCopy,
                "copy mismatch at " + at + ": " + y.str() + (k < sum.size() ? " vs sum term " + sum[k].str() : std::string(" has no sum term")));
    const BigInt xv = parse_decimal(x), yv = parse_decimal(y.value);
    const std::size_t e = y.exponent;
    if (c.accept("case2+,")) {
      chk.require(yv == 0, CotErrorKind::kMarker, at + ": case2+ used for a nonzero addend");
    } else {
      chk.require(yv != 0, CotErrorKind::kMarker, at + ": zero addend needs case2+");
      c.expect("tail=");
      const std::string tail = c.digits("tail");
      c.expect(",");
      chk.next();
      const std::string want_tail = pad_digits(x, e).substr(0, e);
      chk.require(tail == want_tail, CotErrorKind::kCopy, at + ": tail=" + tail + " but low digits of " + x + " give " + want_tail);
      const BigInt hv = xv / pow10(e);
      const std::vector<int> hd = hv == 0 ? std::vector<int>{} : digits_lsb(hv);
      const std::vector<int> yd = digits_lsb(std::string_view(y.value));
      long long carry = 0;
      std::size_t j = 0;
      while (!c.starts_with("res=")) {
        const int sx = c.digit("step digit");
        c.expect("+");
        const int sy = c.digit("step digit");
        c.expect("+B=");
        const long long s = c.small("step sum");
        c.expect("b=");
        const long long cout = c.small("carry out");
        c.expect(",");
        chk.next();
        const std::string st = at + " digit " + std::to_string(j);
        chk.require(sx == (j < hd.size() ? hd[j] : 0), CotErrorKind::kCopy, st + ": " + std::to_string(sx) + " is not the accumulator digit");
        chk.require(sy == (j < yd.size() ? yd[j] : 0), CotErrorKind::kCopy, st + ": " + std::to_string(sy) + " is not the addend digit");
        chk.require(s == sx + sy + carry, CotErrorKind::kDigit, st + ": " + std::to_string(sx) + "+" + std::to_string(sy) + "+" + std::to_string(carry) + " != " + std::to_string(s));
        chk.require(cout == s / 10, CotErrorKind::kCarry, st + ": b=" + std::to_string(cout) + " for sum " + std::to_string(s));
        carry = cout;
        ++j;
      }
      chk.require(j == std::max(hd.size(), yd.size()), CotErrorKind::kStructure, at + ": " + std::to_string(j) + " digit steps");
    }
    c.expect("res=");
    const std::string res = c.digits("running sum");
    c.expect(";");
    chk.next();
    const BigInt want = xv + yv * pow10(e);
    chk.require(parse_decimal(res) == want, CotErrorKind::kPartial, at + ": res=" + res + " but " + x + "+" + y.str() + " = " + to_decimal(want));
    acc = res;
    ++k;
  }
  chk.require(k - 1 == chain_len, CotErrorKind::kStructure, std::to_string(k - 1) + " addition steps for " + std::to_string(chain_len) + " partials");

  const std::string b_msb(b_lsb.rbegin(), b_lsb.rend());
  report.expected_result = parse_decimal(a_ref) * parse_decimal(prompt ? prompt->b : b_msb);
  const BigInt claimed = parse_result(c);
  chk.next();
  report.claimed_result = claimed;
  chk.require(claimed == parse_decimal(acc), CotErrorKind::kCopy, "result " + to_decimal(claimed) + " differs from last res " + acc);
  chk.require(claimed == *report.expected_result, CotErrorKind::kResult,
              "result " + to_decimal(claimed) + " but exact product is " + to_decimal(*report.expected_result));
}

}  // namespace

VerifyReport verify_cot(std::string_view trace) {
  Cursor c(trace);
  if (c.done()) throw ParseError("empty trace", 0);
  VerifyReport report;
  Checker chk;
  const std::optional<Prompt> prompt = parse_prompt(c);

  char sym = prompt ? prompt->op : 0;
  if (!sym) {
    const std::string_view rest = c.rest();
    const std::size_t at = rest.find_first_not_of("0123456789");
    if (at == std::string_view::npos) c.fail("no operator found");
    sym = rest[at];
  }
  switch (sym) {
    case '+':
      report.op = CotOp::kAdd;
      verify_pairs(c, chk, '+', prompt, report);
      break;
    case '-':
      report.op = CotOp::kSub;
      verify_pairs(c, chk, '-', prompt, report);
      break;
    case '*':
      report.op = CotOp::kMul;
      verify_multiplication(c, chk, prompt, report);
      break;
    default: c.fail(std::string("unknown operator '") + sym + "'");
  }
  report.first_error = chk.error();
  report.valid = !report.first_error.has_value();
  return report;
}

std::string extract_result(std::string_view text) {
  const std::size_t at = text.rfind("result=");
  if (at == std::string_view::npos) return {};
  std::size_t i = at + 7;
  std::string out;
  if (i < text.size() && text[i] == '-') out += text[i++];
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) out += text[i++];
  return out == "-" ? std::string() : out;
}

}  // namespace bbp
