#pragma once

#include <cmath>
#include <cstddef>

#include "probtsf/core.hpp"

namespace probtsf {

// Point-wise loss: (1/N) sum_n sum_tau (x - mu)^2.
inline double pretrain_loss(const Matrix& mu, const Matrix& futures) {
  require(mu.same_shape(futures), "pretrain_loss: shape mismatch");
  if (mu.rows() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.data().size(); ++k) {
    const double r = futures.data()[k] - mu.data()[k];
    acc += r * r;
  }
  return acc / static_cast<double>(mu.rows());
}

inline Matrix pretrain_loss_grad(const Matrix& mu, const Matrix& futures) {
  require(mu.same_shape(futures), "pretrain_loss_grad: shape mismatch");
  Matrix g(mu.rows(), mu.cols());
  if (mu.rows() == 0) return g;
  const double scale = -2.0 / static_cast<double>(mu.rows());
  for (std::size_t k = 0; k < mu.data().size(); ++k) {
    g.data()[k] = scale * (futures.data()[k] - mu.data()[k]);
  }
  return g;
}

inline void check_nll_args(const Matrix& mu, const Matrix& sigma, const Matrix& futures) {
  require(mu.same_shape(futures) && sigma.same_shape(futures), "nll_loss: shape mismatch");
  for (double s : sigma.data()) require(s > 0.0, "nll_loss: sigma must be strictly positive");
}

// Gaussian negative log-likelihood without the constant:
// (1/N) sum_n sum_tau [ ((x - mu)/sigma)^2 / 2 + ln sigma ].
inline double nll_loss(const Matrix& mu, const Matrix& sigma, const Matrix& futures) {
  check_nll_args(mu, sigma, futures);
  if (mu.rows() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.data().size(); ++k) {
    const double z = (futures.data()[k] - mu.data()[k]) / sigma.data()[k];
    acc += 0.5 * z * z + std::log(sigma.data()[k]);
  }
  return acc / static_cast<double>(mu.rows());
}

struct NllGrad {
  Matrix d_mu;
  Matrix d_sigma;
};

inline NllGrad nll_loss_grad(const Matrix& mu, const Matrix& sigma, const Matrix& futures) {
  check_nll_args(mu, sigma, futures);
  NllGrad g{Matrix(mu.rows(), mu.cols()), Matrix(mu.rows(), mu.cols())};
  if (mu.rows() == 0) return g;
  const double inv_n = 1.0 / static_cast<double>(mu.rows());
  for (std::size_t k = 0; k < mu.data().size(); ++k) {
    const double s = sigma.data()[k];
    const double r = futures.data()[k] - mu.data()[k];
    g.d_mu.data()[k] = -inv_n * r / (s * s);
    g.d_sigma.data()[k] = inv_n * (1.0 / s - r * r / (s * s * s));
  }
  return g;
}

}  // namespace probtsf
