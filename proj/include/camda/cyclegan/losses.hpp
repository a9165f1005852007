#pragma once

#include "camda/ad/ops.hpp"

namespace camda::cyclegan {

/// 0.5 * [mse(D(real), 1) + mse(D(fake), 0)], given the discriminator patch maps.
template <typename T>
ad::Tensor<T> lsgan_d_loss(const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake);
/// mse(D(fake), 1)
template <typename T>
ad::Tensor<T> lsgan_g_loss(const ad::Tensor<T>& d_fake);
/// l1(x, F(G(x))) + l1(y, G(F(y)))
template <typename T>
ad::Tensor<T> cycle_loss(const ad::Tensor<T>& x, const ad::Tensor<T>& x_rec, const ad::Tensor<T>& y,
                         const ad::Tensor<T>& y_rec);
/// l1(G(y), y) + l1(F(x), x)
template <typename T>
ad::Tensor<T> identity_loss(const ad::Tensor<T>& g_y, const ad::Tensor<T>& y, const ad::Tensor<T>& f_x,
                            const ad::Tensor<T>& x);

/// Components of the full objective for one step.
struct LossComponents {
  double gan_g = 0;  // L_GAN(G, D_Y)
  double gan_f = 0;  // L_GAN(F, D_X)
  double cycle = 0;
  double identity = 0;
};

/// L_GAN(G, D_Y) + L_GAN(F, D_X) + lambda_c L_c + lambda_i L_i
double full_objective(const LossComponents& c, double lambda_c, double lambda_i);

template <typename T>
ad::Tensor<T> full_objective(const ad::Tensor<T>& gan_g, const ad::Tensor<T>& gan_f,
                             const ad::Tensor<T>& cycle, const ad::Tensor<T>& identity, double lambda_c,
                             double lambda_i);

}  // namespace camda::cyclegan
