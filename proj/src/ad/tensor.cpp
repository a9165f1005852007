#include "camda/ad/tensor.hpp"

#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace camda::ad {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
bool g_checked = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }
bool checked_mode() { return g_checked; }
void set_checked_mode(bool on) { g_checked = on; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative extent in shape " + shape.str());
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value.assign(shape.numel(), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, Buffer<T> values, bool requires_grad) {
  if (values.size() != shape.numel()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape.str());
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return full(Shape{1, 1, 1, 1}, value, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape().str());
  }
  return node().value[0];
}

template <typename T>
T Tensor<T>::at(int n, int c, int h, int w) const {
  const Shape& s = shape();
  return node().value[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node().value, false);
}

template <typename T>
Tape<T>& Tape<T>::active() {
  thread_local Tape tape;
  return tape;
}

template <typename T>
void Tape<T>::record(const NodePtr<T>& out, BackwardFn backward) {
  if (!grad_enabled() || !out->requires_grad) return;
  out->generation = generation_;
  entries_.push_back(Entry{out, std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined()) throw TapeError("backward on undefined tensor");
  Node<T>& root = loss.node();
  if (root.value.size() != 1) {
    throw TapeError("backward requires a scalar loss, got shape " + root.shape.str());
  }
  if (!root.requires_grad) {
    throw TapeError("loss does not depend on any tensor that requires grad");
  }
  if (root.generation != generation_) {
    throw TapeError("loss was not produced on the active tape (tape already consumed?)");
  }
  root.ensure_grad()[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    Node<T>& out = *it->output;
    if (out.grad.empty()) continue;
    it->backward(out);
  }
  clear();
}

template <typename T>
void Tape<T>::clear() {
  entries_.clear();
  ++generation_;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace camda::ad
