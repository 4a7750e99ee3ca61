#include <algorithm>
#include <vector>

#include "bbp/errors.hpp"
#include "bbp/numerics/grad_check.hpp"
#include "bbp/tcn.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bbp;
using bbp::test::randn;

namespace {

TcnParams<double> tcn_params(std::size_t d, std::size_t hidden, std::vector<std::size_t> dil, std::uint64_t seed) {
  TcnParams<double> p;
  p.in_proj = randn({hidden, d, 1}, seed, 0.5, true);
  for (std::size_t i = 0; i < dil.size(); ++i) p.kernels.push_back(randn({hidden, hidden, 3}, seed + 1 + i, 0.4, true));
  p.out_proj = randn({d, hidden, 1}, seed + 50, 0.5, true);
  p.dilations = std::move(dil);
  p.kernel_size = 3;
  return p;
}

using Grid = std::vector<std::vector<double>>;  // [channel][time]

Grid direct_tcn(const DiffArray<double>& x, const TcnParams<double>& p) {
  const std::size_t d = x.rows(), len = x.cols(), hid = p.hidden();
  Grid h(hid, std::vector<double>(len, 0.0));
  for (std::size_t o = 0; o < hid; ++o)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t i = 0; i < d; ++i) h[o][t] += p.in_proj.data()[o * d + i] * x.at(i, t);
  for (std::size_t l = 0; l < p.kernels.size(); ++l) {
    Grid next(hid, std::vector<double>(len, 0.0));
    const auto k = p.kernels[l].data();
    for (std::size_t o = 0; o < hid; ++o) {
      for (std::size_t t = 0; t < len; ++t) {
        double s = h[o][t];
        for (std::size_t i = 0; i < hid; ++i)
          for (std::size_t j = 0; j < 3; ++j) {
            const long src = static_cast<long>(t) - static_cast<long>((2 - j) * p.dilations[l]);
            if (src >= 0) s += k[(o * hid + i) * 3 + j] * h[i][static_cast<std::size_t>(src)];
          }
        next[o][t] = std::max(0.0, s);
      }
    }
    h = std::move(next);
  }
  Grid z(d, std::vector<double>(len, 0.0));
  for (std::size_t o = 0; o < d; ++o)
    for (std::size_t t = 0; t < len; ++t) {
      z[o][t] = x.at(o, t);
      for (std::size_t i = 0; i < hid; ++i) z[o][t] += p.out_proj.data()[o * hid + i] * h[i][t];
    }
  return z;
}

}  // namespace

TEST_CASE("tcn block matches a direct evaluation") {
  const auto p = tcn_params(3, 6, {1, 2, 4}, 1);
  const auto x = randn({3, 17}, 2);
  Rng rng(0);
  const auto z = tcn_block(x, p, TcnOptions{}, rng);
  const auto want = direct_tcn(x, p);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t t = 0; t < 17; ++t) CHECK(z.at(o, t) == doctest::Approx(want[o][t]).epsilon(1e-12));
}

TEST_CASE("receptive field") {
  CHECK(tcn_receptive_field(3, {1, 2, 4}) == 15);
  CHECK(tcn_receptive_field(2, {1}) == 2);
  CHECK(tcn_receptive_field(3, {}) == 1);
}

TEST_CASE("output at t depends on exactly the receptive field") {
  const auto p = tcn_params(2, 4, {1, 2}, 3);
  const std::size_t len = 20, field = tcn_receptive_field(3, p.dilations);
  auto x = randn({2, len}, 4);
  Rng rng(0);
  const auto z0 = tcn_block(x, p, TcnOptions{}, rng);
  const std::size_t at = 9;
  x.mutable_data()[at] += 1.0;
  const auto z1 = tcn_block(x, p, TcnOptions{}, rng);
  for (std::size_t t = 0; t < at; ++t) CHECK(z0.at(0, t) == z1.at(0, t));
  for (std::size_t t = at + field; t < len; ++t) CHECK(z0.at(1, t) == z1.at(1, t));
}

TEST_CASE("tcn gradients pass finite differences") {
  auto p = tcn_params(3, 4, {1, 2}, 5);
  const auto x = randn({3, 9}, 6);
  std::vector<DiffArray<double>> all = {p.in_proj, p.kernels[0], p.kernels[1], p.out_proj};
  const double err = grad_check(
      [&](Tape<double>* tape) {
        TcnParams<double> q = p;
        if (tape) {
          q.in_proj = tape->watch(p.in_proj);
          q.kernels = {tape->watch(p.kernels[0]), tape->watch(p.kernels[1])};
          q.out_proj = tape->watch(p.out_proj);
        }
        Rng rng(0);
        const auto z = tcn_block(x, q, TcnOptions{}, rng);
        return sum(mul(z, z));
      },
      all, GradCheckOptions{});
  CHECK(err < 1e-6);
}

TEST_CASE("mismatched kernels and dilations are rejected") {
  auto p = tcn_params(3, 4, {1, 2}, 7);
  p.dilations = {1};
  Rng rng(0);
  CHECK_THROWS_AS(tcn_block(randn({3, 5}, 1), p, TcnOptions{}, rng), ShapeMismatch);
}
