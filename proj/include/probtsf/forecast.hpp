#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "probtsf/core.hpp"
#include "probtsf/ssm.hpp"
#include "probtsf/variance_head.hpp"

namespace probtsf {

// Per-horizon Gaussian forecast for one lookback.
struct ForecastDistribution {
  std::vector<double> mu;
  std::vector<double> sigma;
};

// Forecasts for a batch of lookbacks, one row per trajectory.
struct Forecasts {
  Matrix mu;
  Matrix sigma;

  std::size_t size() const { return mu.rows(); }
};

// The trained pair of networks. pretrained_mean is the mean head as it stood
// after the point-wise phase; it serves as the deterministic baseline.
struct DualModel {
  SsmParams mean;
  SsmParams pretrained_mean;
  MlpParams sigma;

  std::size_t lookback() const { return mean.lookback; }
  std::size_t horizon() const { return mean.horizon; }

  void validate() const {
    mean.validate();
    pretrained_mean.validate();
    sigma.validate();
    require(sigma.lookback() == mean.lookback && sigma.horizon() == mean.horizon &&
                pretrained_mean.lookback == mean.lookback && pretrained_mean.horizon == mean.horizon,
            "DualModel: mean and sigma heads disagree on lookback/horizon");
  }

  friend bool operator==(const DualModel&, const DualModel&) = default;
};

inline ForecastDistribution predict(const SsmParams& mean, const MlpParams& sigma,
                                    std::span<const double> lookback) {
  return {forecast_mean(mean, lookback), forward_sigma(sigma, lookback)};
}

inline Forecasts predict(const SsmParams& mean, const MlpParams& sigma, const Matrix& lookbacks) {
  Forecasts f{Matrix(lookbacks.rows(), mean.horizon), Matrix(lookbacks.rows(), mean.horizon)};
  for (std::size_t n = 0; n < lookbacks.rows(); ++n) {
    const std::vector<double> mu = forecast_mean(mean, lookbacks.row(n));
    const std::vector<double> sd = forward_sigma(sigma, lookbacks.row(n));
    std::copy(mu.begin(), mu.end(), f.mu.row(n).begin());
    std::copy(sd.begin(), sd.end(), f.sigma.row(n).begin());
  }
  return f;
}

inline Forecasts predict(const DualModel& m, const Matrix& lookbacks) {
  return predict(m.mean, m.sigma, lookbacks);
}

}  // namespace probtsf
