#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

#include "bbp/numerics/diff_array.hpp"

namespace bbp {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
CMatMap<T> cmap(const DiffArray<T>& a) {
  return CMatMap<T>(a.data().data(), a.rows(), a.cols());
}

// Gradient buffer of a 2-D array as a matrix.
template <typename T>
MatMap<T> gmap(const DiffArray<T>& a) {
  return MatMap<T>(a.grad_buffer_().data(), a.rows(), a.cols());
}

namespace detail {

// Wraps an op result: untracked constant, or a tape output whose backward
// rule receives the output gradient.
template <typename T, typename Backward>
DiffArray<T> finish(Tape<T>* tape, Shape shape, std::vector<T> data, Backward&& backward) {
  if (tape == nullptr) return DiffArray<T>(std::move(shape), std::move(data));
  DiffArray<T> out = tape->make_output(std::move(shape), std::move(data));
  tape->record([out, bw = std::forward<Backward>(backward)]() {
    if (!out.has_grad()) return;
    bw(out.grad());
  });
  return out;
}

}  // namespace detail
}  // namespace bbp
