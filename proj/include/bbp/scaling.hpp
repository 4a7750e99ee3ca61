#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bbp/corpus/cot.hpp"

namespace bbp {

// C(N) = (P−1)·P^N + C(N−1), C(0) = 0. Requires P ≥ 2.
BigInt context_length(unsigned patch, unsigned layers);
// P^(N+1) − P.
BigInt context_length_closed(unsigned patch, unsigned layers);

// 4·N·P·L. Requires L ≥ P.
BigInt mc_flops(const BigInt& context, unsigned patch, unsigned loops);
// L². Requires L ≥ 1.
BigInt vanilla_flops(const BigInt& context);

// Half-up rounding of num/den to an integer (both positive).
BigInt round_ratio(const BigInt& num, const BigInt& den);

// d.ddd…e<exp> with `decimals` digits after the point (half-up), or, when
// decimals < 0, the shortest mantissa with at least one decimal ("5.12e7", "1.0e10").
std::string format_sci(const BigInt& value, int decimals = -1);

struct ComplexityConfig {
  BigInt context_length;
  unsigned loops = 4;
  unsigned patch = 32;
};

struct ComplexityRow {
  BigInt context_length;
  unsigned loops = 0;
  unsigned patch = 0;
  BigInt mc_flops;
  BigInt vanilla_flops;
  // (1 − mc/vanilla)·100 in hundredths, half-up. A reduction below 100% is
  // capped at 9999 so it never displays as 100.00.
  long reduction_hundredths = 0;
  BigInt speedup;  // vanilla/mc, half-up

  std::string reduction_pct() const;  // "99.49"
};

ComplexityRow complexity_row(const ComplexityConfig& config);
std::vector<ComplexityRow> complexity_rows(const std::vector<ComplexityConfig>& configs);

// L ∈ {1e5, 1e6, 5e6, 1e7, 1e8} × N ∈ {4, 16, 32} with P = 32.
std::vector<ComplexityConfig> standard_complexity_configs();

// Header "context_length,loops,patch,mc_flops,vanilla_flops,reduction_pct,speedup";
// exact integers for the first five columns.
std::string complexity_csv(const std::vector<ComplexityRow>& rows);

struct ContextLengthRow {
  unsigned layers = 0;
  BigInt exact;
  std::optional<std::string> reference;  // printed reference value, when one exists
  bool divergent = false;                // exact value disagrees with the reference
};

// Printed reference values for P = 32: exact integers for N ≤ 10 and
// 13-significant-digit floats for N ≥ 20.
std::vector<std::pair<unsigned, std::string>> reference_context_lengths();

// One row per requested N, compared against the reference when P = 32.
std::vector<ContextLengthRow> context_length_table(unsigned patch, const std::vector<unsigned>& layers);

// Groups digits in threes: 32736 -> "32,736".
std::string with_commas(const BigInt& value);

}  // namespace bbp
