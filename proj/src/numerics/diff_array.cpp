#include "bbp/numerics/diff_array.hpp"

#include <algorithm>
#include <sstream>

#include "bbp/errors.hpp"

namespace bbp {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
DiffArray<T>::DiffArray(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape.empty()) throw ShapeMismatch("empty shape");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeMismatch("zero-length dimension in " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeMismatch("shape " + shape_str(shape) + " does not hold " +
                        std::to_string(data.size()) + " values");
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->data = std::make_shared<std::vector<T>>(std::move(data));
  impl_->grad = std::make_shared<std::vector<T>>();
  impl_->requires_grad = requires_grad;
}

template <typename T>
DiffArray<T> DiffArray<T>::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return DiffArray(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
DiffArray<T> DiffArray<T>::full(Shape shape, T value) {
  const std::size_t n = shape_numel(shape);
  return DiffArray(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
DiffArray<T> DiffArray<T>::scalar(T value) {
  return DiffArray(Shape{1}, std::vector<T>{value});
}

template <typename T>
T DiffArray<T>::item() const {
  if (size() != 1) throw ShapeMismatch("item() on array of shape " + shape_str(shape()));
  return (*impl_->data)[0];
}

template <typename T>
std::span<const T> DiffArray<T>::grad() const {
  if (!impl_ || !impl_->grad) return {};
  return *impl_->grad;
}

template <typename T>
std::span<T> DiffArray<T>::mutable_grad() {
  return grad_buffer_();
}

template <typename T>
std::vector<T>& DiffArray<T>::grad_buffer_() const {
  auto& g = *impl_->grad;
  if (g.size() != impl_->data->size()) g.assign(impl_->data->size(), T(0));
  return g;
}

template <typename T>
void DiffArray<T>::zero_grad() {
  if (impl_ && impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), T(0));
}

template <typename T>
DiffArray<T> DiffArray<T>::clone() const {
  DiffArray out(impl_->shape, *impl_->data, impl_->requires_grad);
  return out;
}

template <typename T>
DiffArray<T> DiffArray<T>::reshaped(Shape shape) const {
  if (shape_numel(shape) != size()) {
    throw ShapeMismatch("cannot reshape " + shape_str(this->shape()) + " to " + shape_str(shape));
  }
  DiffArray out;
  out.impl_ = std::make_shared<Impl>(*impl_);
  out.impl_->shape = std::move(shape);
  return out;
}

template <typename T>
DiffArray<T> Tape<T>::watch(const DiffArray<T>& param) {
  if (!param.defined()) throw InvalidArgument("watch() on undefined array");
  DiffArray<T> alias;
  alias.impl_ = std::make_shared<typename DiffArray<T>::Impl>(*param.impl_);
  alias.impl_->requires_grad = true;
  alias.impl_->tape = this;
  return alias;
}

template <typename T>
DiffArray<T> Tape<T>::make_output(Shape shape, std::vector<T> data) {
  DiffArray<T> out(std::move(shape), std::move(data), true);
  out.impl_->tape = this;
  return out;
}

template <typename T>
void Tape<T>::record(std::function<void()> backward) {
  records_.push_back(std::move(backward));
}

template <typename T>
void Tape<T>::backward(const DiffArray<T>& loss) {
  if (consumed_) throw InvalidArgument("tape already consumed by backward()");
  if (loss.size() != 1) throw ShapeMismatch("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  if (loss.tape() != this) throw InvalidArgument("loss was not recorded on this tape");
  loss.grad_buffer_()[0] += T(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  consumed_ = true;
  records_.clear();
}

template <typename T>
Tape<T>* common_tape(std::initializer_list<const DiffArray<T>*> inputs) {
  Tape<T>* tape = nullptr;
  for (const DiffArray<T>* a : inputs) {
    if (a == nullptr || !a->tracked()) continue;
    if (tape != nullptr && a->tape() != tape) throw InvalidArgument("inputs recorded on different tapes");
    tape = a->tape();
  }
  return tape;
}

template class DiffArray<float>;
template class DiffArray<double>;
template class Tape<float>;
template class Tape<double>;
template Tape<float>* common_tape(std::initializer_list<const DiffArray<float>*>);
template Tape<double>* common_tape(std::initializer_list<const DiffArray<double>*>);

}  // namespace bbp
