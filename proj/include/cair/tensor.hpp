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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace cair {

/// Allocator whose value-initialization is default-initialization, so
/// resize() on arithmetic types leaves memory untouched.
template <typename T, typename A = std::allocator<T>>
class DefaultInitAllocator : public A {
  using Traits = std::allocator_traits<A>;

 public:
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U, typename Traits::template rebind_alloc<U>>;
  };

  using A::A;

  template <typename U>
  void construct(U* ptr) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(ptr)) U;
  }
  template <typename U, typename... Args>
  void construct(U* ptr, Args&&... args) {
    Traits::construct(static_cast<A&>(*this), ptr, std::forward<Args>(args)...);
  }
};

/// Scratch buffer that is not zeroed on resize.
template <typename T>
using Buffer = std::vector<T, DefaultInitAllocator<T>>;

/// Raised when an operation is called with arguments that break its contract
/// (shape mismatch, non-divisible extents, bad hyperparameters).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised in checked mode when a stage produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a file cannot be read, written or decoded.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape of a rank <= 4 tensor. Rank-4 tensors use N, C, H, W order.
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<int64_t> dims);
  explicit Shape(std::span<const int64_t> dims);

  int rank() const { return rank_; }
  int64_t operator[](int axis) const { return dims_.at(static_cast<size_t>(axis)); }
  int64_t numel() const;
  std::span<const int64_t> dims() const { return {dims_.data(), static_cast<size_t>(rank_)}; }

  // Rank-4 accessors; throw ContractError on other ranks.
  int64_t n() const { return dim4(0); }
  int64_t c() const { return dim4(1); }
  int64_t h() const { return dim4(2); }
  int64_t w() const { return dim4(3); }

  bool operator==(const Shape& other) const;
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string str() const;

 private:
  int64_t dim4(int axis) const;

  std::array<int64_t, kMaxRank> dims_{};
  int rank_ = 0;
};

/// Throws ContractError with `what` when `cond` is false.
inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

/// Dense row-major tensor handle. Copies share storage; values are treated as
/// immutable once an op has produced them, only the gradient buffer changes.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  /// Values left uninitialized; the caller must write every element.
  static Tensor empty(Shape shape);
  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t numel() const { return shape().numel(); }

  std::span<const T> data() const;
  /// Writable view for kernels filling a freshly created tensor.
  std::span<T> mutable_data();

  T item() const;
  T at(int64_t n, int64_t c, int64_t h, int64_t w) const;
  T& at(int64_t n, int64_t c, int64_t h, int64_t w);

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const T> grad() const;
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<T> grad_mut() const;
  void zero_grad() const;

  /// Deep copy of values; the copy does not require grad.
  Tensor clone() const;

  /// True when both handles refer to the same storage.
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    Buffer<T> values;
    Buffer<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Records backward closures in execution order; replay runs them in reverse.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> backward_fn) { entries_.push_back(std::move(backward_fn)); }
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and replays. Gradients accumulate into leaves.
  void backward(Tensor<T>& loss);

 private:
  std::vector<std::function<void()>> entries_;
};

/// Tape that ops on this thread record into, or nullptr when not recording.
template <typename T>
Tape<T>* active_tape();

/// Makes `tape` the active tape of the calling thread for its lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Suspends recording on the calling thread.
template <typename T>
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <typename T>
void backward(Tensor<T>& loss, Tape<T>& tape) {
  tape.backward(loss);
}

/// Active tape if any defined input requires grad, else nullptr. Ops use this
/// to decide whether to attach a backward rule to their output.
template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) return nullptr;
  for (const Tensor<T>* in : inputs)
    if (in != nullptr && in->defined() && in->requires_grad()) return tape;
  return nullptr;
}

// Checked mode: ops and model stages verify their outputs are finite.
void set_checked_mode(bool on);
bool checked_mode();

/// In checked mode, throws NonFiniteError naming `stage` if `t` holds NaN/Inf.
template <typename T>
void check_finite(const Tensor<T>& t, const std::string& stage);

/// True when every value is finite, regardless of mode.
template <typename T>
bool all_finite(const Tensor<T>& t);

/// Converts element type, dropping any autograd state.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  std::vector<To> out(t.data().begin(), t.data().end());
  return Tensor<To>(t.shape(), std::move(out));
}

}  // namespace cair
