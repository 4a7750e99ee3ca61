#include "bbp/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bbp/errors.hpp"

namespace bbp {

namespace {

double relative_error(double fd, double an) {
  if (!std::isfinite(fd) || !std::isfinite(an)) {
    throw NonFiniteGradient("finite-difference " + std::to_string(fd) + " vs tape " + std::to_string(an));
  }
  return std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
}

double central_difference(DiffArray<double>& x, std::size_t i, double eps,
                          const std::function<double()>& evaluate) {
  auto data = x.mutable_data();
  const double saved = data[i];
  data[i] = saved + eps;
  const double up = evaluate();
  data[i] = saved - eps;
  const double down = evaluate();
  data[i] = saved;
  return (up - down) / (2.0 * eps);
}

}  // namespace

double grad_check(const ScalarFn& f, const DiffArray<double>& x, double eps) {
  DiffArray<double> probe = x.clone();
  probe.zero_grad();
  std::vector<double> analytic;
  {
    Tape<double> tape;
    DiffArray<double> watched = tape.watch(probe);
    DiffArray<double> loss = f(watched);
    tape.backward(loss);
    analytic.assign(probe.grad().begin(), probe.grad().end());
  }
  if (analytic.size() != probe.size()) analytic.assign(probe.size(), 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double fd = central_difference(probe, i, eps, [&] { return f(probe).item(); });
    worst = std::max(worst, relative_error(fd, analytic[i]));
  }
  return worst;
}

double grad_check(const ParamLossFn& loss, std::vector<DiffArray<double>> params, const GradCheckOptions& options) {
  for (auto& p : params) p.zero_grad();
  {
    Tape<double> tape;
    DiffArray<double> value = loss(&tape);
    tape.backward(value);
  }
  Rng rng(options.seed);
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    if (analytic.size() != p.size()) analytic.assign(p.size(), 0.0);
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.coords_per_param && *options.coords_per_param < coords.size()) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(*options.coords_per_param);
    }
    for (std::size_t i : coords) {
      const double fd = central_difference(p, i, options.eps, [&] { return loss(nullptr).item(); });
      worst = std::max(worst, relative_error(fd, analytic[i]));
    }
    p.zero_grad();
  }
  return worst;
}

}  // namespace bbp
