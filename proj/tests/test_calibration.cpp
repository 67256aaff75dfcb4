#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "probtsf/calibration.hpp"
#include "probtsf/training.hpp"

using namespace probtsf;

namespace {

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  Pcg64 rng(seed, 0);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// x = mu + sigma * eps with known (mu, sigma) per entry.
struct Simulated {
  Forecasts f;
  Matrix x;
};

Simulated calibrated(std::size_t n, std::size_t T, std::uint64_t seed) {
  Pcg64 rng(seed, 1);
  std::normal_distribution<double> eps(0.0, 1.0), loc(0.0, 5.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  Simulated s{{Matrix(n, T), Matrix(n, T)}, Matrix(n, T)};
  for (std::size_t k = 0; k < n * T; ++k) {
    s.f.mu.data()[k] = loc(rng);
    s.f.sigma.data()[k] = scale(rng);
    s.x.data()[k] = s.f.mu.data()[k] + s.f.sigma.data()[k] * eps(rng);
  }
  return s;
}

}  // namespace

TEST(Kl, ClosedFormCases) {
  EXPECT_NEAR(kl_to_standard_normal(std::vector<double>{-1.0, 1.0}), 0.0, 1e-12);
  EXPECT_NEAR(kl_to_standard_normal(std::vector<double>{0.0, 2.0}), 0.5, 1e-12);
  EXPECT_NEAR(kl_to_standard_normal(std::vector<double>{-2.0, 2.0}), 0.5 * (3.0 - std::log(4.0)), 1e-12);
  EXPECT_NEAR(kl_to_standard_normal(std::vector<double>{-0.5, 0.5}), 0.5 * (0.25 - 1.0 - std::log(0.25)), 1e-12);
  EXPECT_EQ(kl_to_standard_normal(std::vector<double>{3.0, 3.0, 3.0}), std::numeric_limits<double>::infinity());
  EXPECT_THROW(kl_to_standard_normal(std::vector<double>{1.0}), ValidationError);
}

TEST(Kl, StandardNormalDrawsAreClose) {
  const std::vector<double> z = normal_draws(100000, 3);
  EXPECT_LT(kl_to_standard_normal(z), 1e-3);
  EXPECT_LT(kl_to_standard_normal_binned(z), 1e-3);
}

TEST(Kl, DetectsMiscalibration) {
  EXPECT_GT(kl_to_standard_normal(normal_draws(100000, 4, 0.0, 2.0)), 0.3);
  EXPECT_GT(kl_to_standard_normal_binned(normal_draws(100000, 5, 1.0, 1.0)), 0.4);
  // Same variance, heavy tails: invisible to the moment estimator only.
  std::vector<double> mix = normal_draws(100000, 6, 0.0, 1.0);
  for (std::size_t i = 0; i < mix.size(); i += 2) mix[i] *= 0.4;
  const double m = moments(mix).variance;
  for (double& x : mix) x /= std::sqrt(m);
  EXPECT_LT(kl_to_standard_normal(mix), 1e-4);
  EXPECT_GT(kl_to_standard_normal_binned(mix), 0.02);
}

TEST(Coverage, CalibratedSimulationHitsNormalMasses) {
  const Simulated s = calibrated(1000, 100, 7);
  const double expect[] = {0.683, 0.954, 0.997};
  for (int k = 1; k <= 3; ++k) {
    const Coverage c = coverage(s.f, s.x, k);
    EXPECT_NEAR(c.fraction, expect[k - 1], 0.01) << "k=" << k;
    EXPECT_EQ(c.per_tau.size(), 100u);
  }
}

TEST(Residuals, AndPerTauVariance) {
  Forecasts f{Matrix(2, 2), Matrix(2, 2, 2.0)};
  Matrix x(2, 2);
  x.data() = {2.0, -2.0, -2.0, 4.0};
  const Matrix z = residuals(f, x);
  EXPECT_EQ(z.data(), (std::vector<double>{1.0, -1.0, -1.0, 2.0}));
  const std::vector<double> v = variance_per_tau(z);
  EXPECT_DOUBLE_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v[1], 2.25);
  EXPECT_THROW(variance_per_tau(Matrix(1, 2)), ValidationError);
  f.sigma(0, 0) = 0.0;
  EXPECT_THROW(residuals(f, x), ValidationError);
}

TEST(Histogram, CountsAndDensity) {
  const std::vector<double> xs{-6.0, -5.0, -0.1, 0.0, 0.1, 4.99, 5.0};
  const Histogram h = histogram(xs);
  EXPECT_EQ(h.counts.size(), 40u);
  EXPECT_EQ(h.underflow, 1u);
  EXPECT_EQ(h.overflow, 1u);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[19], 1u);
  EXPECT_EQ(h.counts[20], 2u);
  EXPECT_EQ(h.counts[39], 1u);
  double mass = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) mass += h.density(i) * h.width;
  EXPECT_NEAR(mass, 5.0 / 7.0, 1e-15);
}

TEST(Mae, HandValue) {
  Matrix mu(1, 4), x(1, 4);
  x.data() = {1.0, -1.0, 0.5, 2.0};
  EXPECT_DOUBLE_EQ(mae(mu, x), 1.125);
}

TEST(Report, BrownianOracleIsCalibrated) {
  // 40000 paths: the pooled variance then has std 0.005.
  const TrajectorySet s = gen_brownian(40000, 192, 8);
  const WindowedDataset d = window(s, 96, 96, 0.0, 0).second;
  const CalibrationReport r = build_report(brownian_oracle_forecasts(d), d);
  EXPECT_GE(r.z.data().size(), 100000u);
  EXPECT_LE(r.pooled_kl, 1e-3);
  EXPECT_NEAR(r.pooled_variance, 1.0, 0.02);
  EXPECT_NEAR(r.coverage[0].fraction, 0.683, 0.01);
}

TEST(Report, PanelsAndDeterministicMae) {
  const WindowedDataset d = window(gen_sines(30, 20, 2), 10, 10, 0.0, 0).second;
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.latent_dim = 3;
  const DualModel m = init_model(10, 10, cfg);
  const CalibrationReport r = build_report(m, d, KlEstimator::binned);
  ASSERT_EQ(r.histograms.size(), 4u);
  EXPECT_EQ(r.histograms[0].tau, 1u);
  EXPECT_EQ(r.histograms[1].tau, 5u);
  EXPECT_EQ(r.histograms[2].tau, 10u);
  EXPECT_EQ(r.histograms[3].tau, 0u);
  EXPECT_EQ(r.histograms[3].hist.total(), 300u);
  ASSERT_TRUE(r.mae_deterministic.has_value());
  EXPECT_DOUBLE_EQ(*r.mae_deterministic, r.mae);  // untrained: mean == pretrained mean
  EXPECT_EQ(r.pooled_kl, r.pooled_kl_binned);
  EXPECT_EQ(r.variance_per_tau.size(), 10u);
  EXPECT_EQ(r.n_test, 30u);

  const WindowedDataset wrong = window(gen_sines(30, 20, 2), 12, 8, 0.0, 0).second;
  EXPECT_THROW(build_report(m, wrong), ValidationError);
}
