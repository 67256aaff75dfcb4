#pragma once

// Helpers shared by the unit tests and the acceptance binary: random model
// configurations and central finite-difference gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "probtsf/probtsf.hpp"

namespace probtsf::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradTol = 1e-4;

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Central differences of f over every entry of the flat parameter vector.
template <class Params, class F>
std::vector<double> fd_gradient(const Params& p, F&& f, double eps = kFdStep) {
  std::vector<double> theta = flatten(p);
  std::vector<double> g(theta.size());
  Params q = p;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + eps;
    assign_flat(q, theta);
    const double up = f(q);
    theta[i] = keep - eps;
    assign_flat(q, theta);
    const double down = f(q);
    theta[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

template <class F>
std::vector<double> fd_gradient(Matrix m, F&& f, double eps = kFdStep) {
  std::vector<double> g(m.data().size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double keep = m.data()[i];
    m.data()[i] = keep + eps;
    const double up = f(m);
    m.data()[i] = keep - eps;
    const double down = f(m);
    m.data()[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> normal_vector(std::size_t n, Pcg64& rng, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline std::size_t uniform_int(Pcg64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Random SSM head. Some draws push a_raw far negative so that dt * a falls
// into the small-argument branches of the discretization.
inline SsmParams random_ssm(std::size_t P, std::size_t T, std::size_t D, Pcg64& rng, bool normalize) {
  SsmParams p = SsmParams::zeros(P, T, D, normalize);
  std::normal_distribution<double> n01(0.0, 1.0);
  const bool tiny_rates = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.2;
  for (std::size_t i = 0; i < D; ++i) p.a_raw[i] = tiny_rates ? -9.0 + 0.5 * n01(rng) : n01(rng);
  p.b = normal_vector(D, rng);
  p.c = normal_vector(D, rng, 0.0, 0.5);
  p.delta_raw = 0.5 * n01(rng);
  p.readout_w = normal_vector(T * D, rng, 0.0, 0.5);
  p.readout_b = normal_vector(T, rng, 0.0, 0.5);
  return p;
}

inline MlpParams random_sigma(std::size_t P, std::size_t T, Pcg64& rng, bool normalize, VarianceArch arch) {
  if (arch == VarianceArch::ssm_backed) {
    MlpParams p;
    p.arch = arch;
    p.normalize = normalize;
    p.ssm = random_ssm(P, T, uniform_int(rng, 1, 4), rng, normalize);
    return p;
  }
  const std::size_t depth = uniform_int(rng, 1, 3);
  std::vector<std::size_t> dims{P};
  for (std::size_t l = 0; l < depth; ++l) dims.push_back(uniform_int(rng, 1, 6));
  dims.push_back(T);
  MlpParams p = init_mlp(dims, rng, normalize);
  // Non-zero biases so hidden units sit away from the ReLU kink.
  for (DenseLayer& L : p.layers) L.b = normal_vector(L.out, rng, 0.0, 0.5);
  return p;
}

struct GradSuite {
  std::size_t configs = 0;
  double worst_mean = 0.0;
  double worst_sigma = 0.0;
  double worst_pretrain = 0.0;
  double worst_nll = 0.0;

  double worst() const { return std::max({worst_mean, worst_sigma, worst_pretrain, worst_nll}); }
};

// Gradient of upstream . head(lookback) against finite differences, for
// `configs` random shapes, parameters, lookbacks and upstream vectors.
inline GradSuite run_gradient_suite(std::size_t configs, std::uint64_t seed) {
  GradSuite s;
  s.configs = configs;
  for (std::size_t k = 0; k < configs; ++k) {
    Pcg64 rng(seed, k);
    const std::size_t P = uniform_int(rng, 2, 12);
    const std::size_t T = uniform_int(rng, 1, 6);
    const std::size_t D = uniform_int(rng, 1, 5);
    const bool normalize = k % 2 == 0;
    const std::vector<double> x = normal_vector(P, rng, 3.0, 2.0);
    const std::vector<double> up = normal_vector(T, rng);

    const SsmParams m = random_ssm(P, T, D, rng, normalize);
    const std::vector<double> gm = flatten(backward_mean(m, x, up));
    const std::vector<double> fm =
        fd_gradient(m, [&](const SsmParams& q) { return dot(up, forecast_mean(q, x)); });
    s.worst_mean = std::max(s.worst_mean, relative_error(gm, fm));

    const VarianceArch arch = k % 3 == 2 ? VarianceArch::ssm_backed : VarianceArch::fully_connected;
    const MlpParams sp = random_sigma(P, T, rng, normalize, arch);
    const std::vector<double> gs = flatten(backward_sigma(sp, x, up));
    const std::vector<double> fs =
        fd_gradient(sp, [&](const MlpParams& q) { return dot(up, forward_sigma(q, x)); });
    s.worst_sigma = std::max(s.worst_sigma, relative_error(gs, fs));

    const std::size_t N = uniform_int(rng, 1, 5);
    Matrix mu(N, T), sd(N, T), fut(N, T);
    std::uniform_real_distribution<double> pos(0.3, 3.0);
    for (std::size_t i = 0; i < mu.data().size(); ++i) {
      mu.data()[i] = normal_vector(1, rng)[0];
      fut.data()[i] = normal_vector(1, rng, 0.0, 2.0)[0];
      sd.data()[i] = pos(rng);
    }
    const Matrix gp = pretrain_loss_grad(mu, fut);
    const std::vector<double> fp = fd_gradient(mu, [&](const Matrix& q) { return pretrain_loss(q, fut); });
    s.worst_pretrain = std::max(s.worst_pretrain, relative_error(gp.data(), fp));

    const NllGrad gn = nll_loss_grad(mu, sd, fut);
    const std::vector<double> fn_mu = fd_gradient(mu, [&](const Matrix& q) { return nll_loss(q, sd, fut); });
    const std::vector<double> fn_sd = fd_gradient(sd, [&](const Matrix& q) { return nll_loss(mu, q, fut); });
    s.worst_nll = std::max({s.worst_nll, relative_error(gn.d_mu.data(), fn_mu),
                            relative_error(gn.d_sigma.data(), fn_sd)});
  }
  return s;
}

}  // namespace probtsf::testing
