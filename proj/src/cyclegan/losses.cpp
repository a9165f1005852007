#include "camda/cyclegan/losses.hpp"

namespace camda::cyclegan {

namespace {

template <typename T>
ad::Tensor<T> constant_like(const ad::Tensor<T>& t, T value) {
  return ad::Tensor<T>::full(t.shape(), value);
}

}  // namespace

template <typename T>
ad::Tensor<T> lsgan_d_loss(const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake) {
  return ad::scale(ad::add(ad::mse_loss(d_real, constant_like(d_real, T(1))),
                           ad::mse_loss(d_fake, constant_like(d_fake, T(0)))),
                   0.5);
}

template <typename T>
ad::Tensor<T> lsgan_g_loss(const ad::Tensor<T>& d_fake) {
  return ad::mse_loss(d_fake, constant_like(d_fake, T(1)));
}

template <typename T>
ad::Tensor<T> cycle_loss(const ad::Tensor<T>& x, const ad::Tensor<T>& x_rec, const ad::Tensor<T>& y,
                         const ad::Tensor<T>& y_rec) {
  return ad::add(ad::l1_loss(x_rec, x), ad::l1_loss(y_rec, y));
}

template <typename T>
ad::Tensor<T> identity_loss(const ad::Tensor<T>& g_y, const ad::Tensor<T>& y, const ad::Tensor<T>& f_x,
                            const ad::Tensor<T>& x) {
  return ad::add(ad::l1_loss(g_y, y), ad::l1_loss(f_x, x));
}

double full_objective(const LossComponents& c, double lambda_c, double lambda_i) {
  return c.gan_g + c.gan_f + lambda_c * c.cycle + lambda_i * c.identity;
}

template <typename T>
ad::Tensor<T> full_objective(const ad::Tensor<T>& gan_g, const ad::Tensor<T>& gan_f,
                             const ad::Tensor<T>& cycle, const ad::Tensor<T>& identity, double lambda_c,
                             double lambda_i) {
  auto total = ad::add(ad::add(gan_g, gan_f), ad::scale(cycle, lambda_c));
  if (identity.defined() && lambda_i != 0) total = ad::add(total, ad::scale(identity, lambda_i));
  return total;
}

#define CAMDA_INSTANTIATE_LOSSES(T)                                                                  \
  template ad::Tensor<T> lsgan_d_loss(const ad::Tensor<T>&, const ad::Tensor<T>&);                  \
  template ad::Tensor<T> lsgan_g_loss(const ad::Tensor<T>&);                                        \
  template ad::Tensor<T> cycle_loss(const ad::Tensor<T>&, const ad::Tensor<T>&, const ad::Tensor<T>&, \
                                    const ad::Tensor<T>&);                                          \
  template ad::Tensor<T> identity_loss(const ad::Tensor<T>&, const ad::Tensor<T>&,                  \
                                       const ad::Tensor<T>&, const ad::Tensor<T>&);                 \
  template ad::Tensor<T> full_objective(const ad::Tensor<T>&, const ad::Tensor<T>&,                 \
                                        const ad::Tensor<T>&, const ad::Tensor<T>&, double, double);

CAMDA_INSTANTIATE_LOSSES(float)
CAMDA_INSTANTIATE_LOSSES(double)

}  // namespace camda::cyclegan
