#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace camda::ad {

/// 4-D tensor extent in NCHW order.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op produces a non-finite value while checked mode is on.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Misuse of the tape (backward on a non-scalar, consumed tape, ...).
class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Allocator handing out 64-byte aligned blocks. Eigen picks its vector
/// peeling from the buffer address, so unaligned storage makes reductions
/// sum in an address-dependent order.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct Node {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;  // empty until a gradient flows in
  bool requires_grad = false;
  std::uint64_t generation = 0;  // tape generation that produced it; 0 for leaves

  Buffer<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

/// Value handle over a shared graph node. Copies alias the same storage.
/// A default-constructed tensor is "undefined" and stands for an absent
/// optional input (e.g. no bias).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr<T> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, Buffer<T> values, bool requires_grad = false);
  static Tensor from(Shape shape, std::initializer_list<T> values, bool requires_grad = false) {
    return from(shape, Buffer<T>(values), requires_grad);
  }
  static Tensor from(Shape shape, const std::vector<T>& values, bool requires_grad = false) {
    return from(shape, Buffer<T>(values.begin(), values.end()), requires_grad);
  }
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node().shape; }
  std::size_t numel() const { return node().value.size(); }

  std::span<const T> data() const { return node().value; }
  std::span<T> mutable_data() { return node().value; }
  T item() const;
  T at(int n, int c, int h, int w) const;

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool on) { node().requires_grad = on; }

  bool has_grad() const { return !node().grad.empty(); }
  /// Gradient view; empty span when no gradient reached this tensor.
  std::span<const T> grad() const { return node().grad; }
  std::span<T> mutable_grad() { return node().ensure_grad(); }
  void zero_grad() { node().grad.clear(); }

  /// Fresh leaf holding a copy of the current value.
  Tensor detach() const;

  Node<T>& node() const {
    if (!node_) throw std::logic_error("access to undefined tensor");
    return *node_;
  }
  const NodePtr<T>& ptr() const { return node_; }

 private:
  NodePtr<T> node_;
};

/// Define-by-run record of executed ops. One active tape per thread and
/// scalar type; every backward() consumes it.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Node<T>& out)>;

  static Tape& active();

  /// Appends an op whose output is `out`. No-op when recording is off.
  void record(const NodePtr<T>& out, BackwardFn backward);
  /// Runs reverse accumulation from a scalar loss, then clears the tape.
  void backward(const Tensor<T>& loss);
  void clear();

  std::size_t size() const { return entries_.size(); }
  std::uint64_t generation() const { return generation_; }

 private:
  struct Entry {
    NodePtr<T> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::uint64_t generation_ = 1;
};

template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>::active().backward(loss);
}

/// Grad mode is global per thread; NoGradGuard disables recording in scope.
bool grad_enabled();
void set_grad_enabled(bool on);

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS on every step. Call once at program start; a no-op off glibc.
void tune_allocator();

class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Checked mode: every op scans its output for NaN/Inf and throws
/// NumericError. On by default.
bool checked_mode();
void set_checked_mode(bool on);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace camda::ad
