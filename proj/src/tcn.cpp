#include "bbp/tcn.hpp"

#include "bbp/errors.hpp"

namespace bbp {

namespace {

// A K=1 convolution is a channel map; run it as a plain matmul.
template <typename T>
DiffArray<T> pointwise(const DiffArray<T>& kernel, const DiffArray<T>& x) {
  if (kernel.ndim() != 3 || kernel.dim(2) != 1) throw ShapeMismatch("projection kernel must be [C_out×C_in×1]");
  return matmul(kernel.reshaped(Shape{kernel.dim(0), kernel.dim(1)}), x);
}

}  // namespace

template <typename T>
DiffArray<T> tcn_block(const DiffArray<T>& x, const TcnParams<T>& params, const TcnOptions& options, Rng& rng) {
  if (x.ndim() != 2) throw ShapeMismatch("tcn_block input must be [D×L]");
  if (params.kernels.size() != params.dilations.size()) {
    throw ShapeMismatch("tcn: " + std::to_string(params.kernels.size()) + " kernels but " +
                        std::to_string(params.dilations.size()) + " dilations");
  }
  if (params.in_proj.dim(1) != x.rows() || params.out_proj.dim(0) != x.rows()) {
    throw ShapeMismatch("tcn projections do not match width " + std::to_string(x.rows()));
  }
  DiffArray<T> h = pointwise(params.in_proj, x);
  for (std::size_t l = 0; l < params.kernels.size(); ++l) {
    h = relu(add(conv1d(h, params.kernels[l], params.dilations[l], true), h));
  }
  const DiffArray<T> branch =
      dropout(pointwise(params.out_proj, h), options.dropout, rng, options.mode == RunMode::kTrain);
  return add(branch, x);
}

std::size_t tcn_receptive_field(std::size_t kernel_size, const std::vector<std::size_t>& dilations) {
  std::size_t field = 1;
  for (std::size_t d : dilations) field += (kernel_size - 1) * d;
  return field;
}

template DiffArray<float> tcn_block(const DiffArray<float>&, const TcnParams<float>&, const TcnOptions&, Rng&);
template DiffArray<double> tcn_block(const DiffArray<double>&, const TcnParams<double>&, const TcnOptions&, Rng&);

}  // namespace bbp
