#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bbp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tape;

// Shaped row-major array that can participate in reverse-mode differentiation.
//
// A DiffArray is a cheap handle. Values produced by ops are never mutated
// afterwards; only parameters (leaves created with requires_grad) are updated
// in place by the optimizer. Data and gradient live in shared buffers so that
// Tape::watch can hand out a recorded alias of a parameter without copying.
template <typename T>
class DiffArray {
 public:
  using value_type = T;

  DiffArray() = default;
  DiffArray(Shape shape, std::vector<T> data, bool requires_grad = false);

  static DiffArray zeros(Shape shape, bool requires_grad = false);
  static DiffArray full(Shape shape, T value);
  static DiffArray scalar(T value);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t size() const { return impl_->data->size(); }
  std::size_t rows() const { return impl_->shape.at(0); }
  std::size_t cols() const { return impl_->shape.size() > 1 ? impl_->shape[1] : 1; }

  std::span<const T> data() const { return *impl_->data; }
  // Mutable access is for parameter updates and finite-difference probing only.
  std::span<T> mutable_data() { return *impl_->data; }
  T item() const;
  T at(std::size_t r, std::size_t c) const { return (*impl_->data)[r * cols() + c]; }

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
  bool has_grad() const noexcept { return impl_ && impl_->grad && !impl_->grad->empty(); }
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  Tape<T>* tape() const noexcept { return impl_ ? impl_->tape : nullptr; }
  // True if ops consuming this array must record a backward rule.
  bool tracked() const noexcept { return impl_ && impl_->requires_grad && impl_->tape != nullptr; }

  // Deep copy detached from any tape; keeps requires_grad.
  DiffArray clone() const;
  // Same data, new shape (product must match). Shares buffers.
  DiffArray reshaped(Shape shape) const;

  bool same_storage(const DiffArray& other) const noexcept {
    return impl_ && other.impl_ && impl_->data == other.impl_->data;
  }

 private:
  friend class Tape<T>;
  struct Impl {
    Shape shape;
    std::shared_ptr<std::vector<T>> data;
    std::shared_ptr<std::vector<T>> grad;
    bool requires_grad = false;
    Tape<T>* tape = nullptr;
  };
  std::shared_ptr<Impl> impl_;

 public:
  // Internal: grad buffer, allocated (zero-filled) on first use.
  std::vector<T>& grad_buffer_() const;
};

// Define-by-run record of differentiable operations. Confined to one thread.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Returns a recorded alias of a parameter: shares data and grad buffers.
  DiffArray<T> watch(const DiffArray<T>& param);

  // Creates the output handle of an op recorded on this tape.
  DiffArray<T> make_output(Shape shape, std::vector<T> data);

  void record(std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, newest first.
  void backward(const DiffArray<T>& loss);

  std::size_t size() const noexcept { return records_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  std::vector<std::function<void()>> records_;
  bool consumed_ = false;
};

// Picks the tape shared by the tracked inputs (nullptr if none are tracked).
template <typename T>
Tape<T>* common_tape(std::initializer_list<const DiffArray<T>*> inputs);

extern template class DiffArray<float>;
extern template class DiffArray<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace bbp
