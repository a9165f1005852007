#include "camda/ad/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace camda::ad {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (options_.lr < 0) throw std::invalid_argument("Adam: learning rate must be >= 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), T(0));
    v_.emplace_back(p.numel(), T(0));
  }
}

template <typename T>
void Adam<T>::set_lr(double lr) {
  if (lr < 0) throw std::invalid_argument("Adam: learning rate must be >= 0");
  options_.lr = lr;
}

template <typename T>
void Adam<T>::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto g = params_[k].grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("Adam: non-finite gradient in parameter " + std::to_string(k) +
                           " element " + std::to_string(i) + " (shape " +
                           params_[k].shape().str() + ")");
      }
    }
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.lr;
  const double eps = options_.eps;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto value = p.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double m = b1 * m_[k][i] + (1 - b1) * g[i];
      const double v = b2 * v_[k][i] + (1 - b2) * double(g[i]) * g[i];
      m_[k][i] = static_cast<T>(m);
      v_[k][i] = static_cast<T>(v);
      value[i] = static_cast<T>(value[i] - lr * (m / c1) / (std::sqrt(v / c2) + eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace camda::ad
