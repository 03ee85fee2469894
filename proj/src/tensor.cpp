/*
 * Copyright (c) 2026 The CAIR Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cair/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace cair {

Shape::Shape(std::initializer_list<int64_t> dims)
    : Shape(std::span<const int64_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const int64_t> dims) {
  require(dims.size() <= kMaxRank, "tensor rank exceeds 4");
  rank_ = static_cast<int>(dims.size());
  for (size_t i = 0; i < dims.size(); ++i) {
    require(dims[i] >= 0, "negative extent in shape");
    dims_[i] = dims[i];
  }
}

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int i = 0; i < rank_; ++i) n *= dims_[static_cast<size_t>(i)];
  return n;
}

int64_t Shape::dim4(int axis) const {
  if (rank_ != 4) throw ContractError("expected a rank-4 tensor, got shape " + str());
  return dims_[static_cast<size_t>(axis)];
}

bool Shape::operator==(const Shape& other) const {
  if (rank_ != other.rank_) return false;
  for (int i = 0; i < rank_; ++i)
    if (dims_[static_cast<size_t>(i)] != other.dims_[static_cast<size_t>(i)]) return false;
  return true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (int i = 0; i < rank_; ++i) os << (i ? "," : "") << dims_[static_cast<size_t>(i)];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<Impl>()) {
  impl_->values.assign(static_cast<size_t>(shape.numel()), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
  require(static_cast<int64_t>(values.size()) == shape.numel(),
          "value count " + std::to_string(values.size()) + " does not match shape " + shape.str());
  impl_->values.assign(values.begin(), values.end());
  impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T> Tensor<T>::empty(Shape shape) {
  Tensor<T> t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->values.resize(static_cast<size_t>(shape.numel()));
  t.impl_->shape = std::move(shape);
  return t;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  require(defined(), "use of an undefined tensor");
  return impl_->shape;
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  require(defined(), "use of an undefined tensor");
  return impl_->values;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  require(defined(), "use of an undefined tensor");
  return impl_->values;
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, "item() needs a single-element tensor, got " + shape().str());
  return impl_->values[0];
}

template <typename T>
T Tensor<T>::at(int64_t n, int64_t c, int64_t h, int64_t w) const {
  const Shape& s = shape();
  return impl_->values[static_cast<size_t>(((n * s.c() + c) * s.h() + h) * s.w() + w)];
}

template <typename T>
T& Tensor<T>::at(int64_t n, int64_t c, int64_t h, int64_t w) {
  const Shape& s = shape();
  return impl_->values[static_cast<size_t>(((n * s.c() + c) * s.h() + h) * s.w() + w)];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  require(defined(), "use of an undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  require(has_grad(), "tensor has no gradient");
  return impl_->grad;
}

template <typename T>
std::span<T> Tensor<T>::grad_mut() const {
  require(defined(), "use of an undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), T{0});
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor<T>(shape(), std::vector<T>(data().begin(), data().end()));
}

namespace {
template <typename T>
Tape<T>*& tape_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}

std::atomic<bool> g_checked{false};
}  // namespace

template <typename T>
Tape<T>* active_tape() {
  return tape_slot<T>();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(tape_slot<T>()) {
  tape_slot<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
  tape_slot<T>() = previous_;
}

template <typename T>
NoGradScope<T>::NoGradScope() : previous_(tape_slot<T>()) {
  tape_slot<T>() = nullptr;
}

template <typename T>
NoGradScope<T>::~NoGradScope() {
  tape_slot<T>() = previous_;
}

template <typename T>
void Tape<T>::backward(Tensor<T>& loss) {
  require(loss.numel() == 1 && loss.shape().rank() <= 1,
          "backward needs a scalar loss, got shape " + loss.shape().str());
  require(loss.requires_grad(), "loss was not produced under a recording tape");
  loss.grad_mut()[0] += T{1};
  // Backward closures may record nothing; suspend the tape while replaying.
  NoGradScope<T> guard;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

void set_checked_mode(bool on) { g_checked.store(on); }
bool checked_mode() { return g_checked.load(); }

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& stage) {
  if (!checked_mode()) return;
  if (!all_finite(t)) throw NonFiniteError("non-finite activation at stage '" + stage + "'");
}

#define CAIR_INSTANTIATE(T)                                        \
  template class Tensor<T>;                                        \
  template class Tape<T>;                                          \
  template class TapeScope<T>;                                     \
  template class NoGradScope<T>;                                   \
  template Tape<T>* active_tape<T>();                              \
  template bool all_finite<T>(const Tensor<T>&);                   \
  template void check_finite<T>(const Tensor<T>&, const std::string&);

CAIR_INSTANTIATE(float)
CAIR_INSTANTIATE(double)
#undef CAIR_INSTANTIATE

}  // namespace cair
