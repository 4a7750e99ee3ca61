#include "bbp/scaling.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "bbp/errors.hpp"

namespace bbp {

BigInt context_length(unsigned patch, unsigned layers) {
  if (patch < 2) throw InvalidArgument("context_length needs P >= 2");
  BigInt c = 0, power = 1;
  for (unsigned n = 1; n <= layers; ++n) {
    power *= patch;
    c += (patch - 1) * power;
  }
  return c;
}

BigInt context_length_closed(unsigned patch, unsigned layers) {
  if (patch < 2) throw InvalidArgument("context_length needs P >= 2");
  BigInt power = 1;
  for (unsigned n = 0; n <= layers; ++n) power *= patch;
  return power - patch;
}

BigInt mc_flops(const BigInt& context, unsigned patch, unsigned loops) {
  if (patch < 1 || context < patch) throw InvalidArgument("mc_flops needs L >= P >= 1");
  return BigInt(4) * loops * patch * context;
}

BigInt vanilla_flops(const BigInt& context) {
  if (context < 1) throw InvalidArgument("vanilla_flops needs L >= 1");
  return context * context;
}

BigInt round_ratio(const BigInt& num, const BigInt& den) {
  if (den <= 0 || num < 0) throw InvalidArgument("round_ratio needs num >= 0 and den > 0");
  return (2 * num + den) / (2 * den);
}

std::string format_sci(const BigInt& value, int decimals) {
  if (value < 0) return "-" + format_sci(BigInt(-value), decimals);
  if (value == 0) return decimals < 0 ? "0.0e0" : "0." + std::string(static_cast<std::size_t>(decimals), '0') + "e0";
  std::string digits = to_decimal(value);
  long exponent = static_cast<long>(digits.size()) - 1;
  std::string mantissa;
  if (decimals < 0) {
    mantissa = digits.substr(1);
    while (!mantissa.empty() && mantissa.back() == '0') mantissa.pop_back();
    if (mantissa.empty()) mantissa = "0";
  } else {
    const std::size_t keep = static_cast<std::size_t>(decimals) + 1;
    if (digits.size() > keep) {
      BigInt head = parse_decimal(digits.substr(0, keep));
      if (digits[keep] >= '5') head += 1;
      std::string rounded = to_decimal(head);
      if (rounded.size() > keep) {
        ++exponent;
        rounded.pop_back();
      }
      digits = rounded;
    }
    digits.resize(keep, '0');
    mantissa = digits.substr(1);
  }
  std::string out(1, digits[0]);
  if (!mantissa.empty()) out += "." + mantissa;
  return out + "e" + (decimals < 0 ? "" : "+") + std::to_string(exponent);
}

std::string ComplexityRow::reduction_pct() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%ld.%02ld", reduction_hundredths / 100, reduction_hundredths % 100);
  return buf;
}

ComplexityRow complexity_row(const ComplexityConfig& config) {
  ComplexityRow r;
  r.context_length = config.context_length;
  r.loops = config.loops;
  r.patch = config.patch;
  r.mc_flops = mc_flops(config.context_length, config.patch, config.loops);
  r.vanilla_flops = vanilla_flops(config.context_length);
  if (r.mc_flops >= r.vanilla_flops) {
    r.reduction_hundredths = 0;
  } else {
    BigInt hundredths = round_ratio((r.vanilla_flops - r.mc_flops) * 10000, r.vanilla_flops);
    if (hundredths >= 10000) hundredths = 9999;
    r.reduction_hundredths = static_cast<long>(hundredths);
  }
  r.speedup = round_ratio(r.vanilla_flops, r.mc_flops);
  return r;
}

std::vector<ComplexityRow> complexity_rows(const std::vector<ComplexityConfig>& configs) {
  std::vector<ComplexityRow> rows;
  for (const auto& c : configs) rows.push_back(complexity_row(c));
  return rows;
}

std::vector<ComplexityConfig> standard_complexity_configs() {
  std::vector<ComplexityConfig> out;
  for (const char* l : {"100000", "1000000", "5000000", "10000000", "100000000"}) {
    for (unsigned n : {4u, 16u, 32u}) out.push_back({parse_decimal(l), n, 32});
  }
  return out;
}

std::string complexity_csv(const std::vector<ComplexityRow>& rows) {
  std::ostringstream out;
  out << "context_length,loops,patch,mc_flops,vanilla_flops,reduction_pct,speedup\n";
  for (const auto& r : rows) {
    out << r.context_length << ',' << r.loops << ',' << r.patch << ',' << r.mc_flops << ',' << r.vanilla_flops << ','
        << r.reduction_pct() << ',' << r.speedup << '\n';
  }
  return out.str();
}

std::vector<std::pair<unsigned, std::string>> reference_context_lengths() {
  return {
      {1, "992"},
      {2, "32,736"},
      {3, "1,048,544"},
      {4, "33,554,400"},
      {8, "35,184,372,088,800"},
      {10, "36,028,797,018,963,936"},
      {20, "3.741444191567e+30"},
      {40, "4.056481920730e+60"},
      {60, "4.398046511104e+90"},
      {80, "4.767240170282e+120"},
      {100, "5.165034368751e+150"},
  };
}

std::string with_commas(const BigInt& value) {
  const std::string s = to_decimal(value);
  const std::size_t start = s[0] == '-' ? 1 : 0;
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > start && (s.size() - i) % 3 == 0) out += ',';
    out += s[i];
  }
  return out;
}

std::vector<ContextLengthRow> context_length_table(unsigned patch, const std::vector<unsigned>& layers) {
  const auto refs = reference_context_lengths();
  std::vector<ContextLengthRow> out;
  for (unsigned n : layers) {
    ContextLengthRow row;
    row.layers = n;
    row.exact = context_length(patch, n);
    if (patch == 32) {
      const auto it = std::find_if(refs.begin(), refs.end(), [&](const auto& r) { return r.first == n; });
      if (it != refs.end()) {
        row.reference = it->second;
        const bool is_float = it->second.find('e') != std::string::npos;
        row.divergent = is_float ? format_sci(row.exact, 12) != it->second : with_commas(row.exact) != it->second;
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace bbp
