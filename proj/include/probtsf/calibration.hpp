#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probtsf/core.hpp"
#include "probtsf/datagen.hpp"
#include "probtsf/forecast.hpp"

namespace probtsf {

// z = (x - mu) / sigma elementwise.
inline Matrix residuals(const Forecasts& f, const Matrix& futures) {
  require(f.mu.same_shape(futures) && f.sigma.same_shape(futures), "residuals: shape mismatch");
  Matrix z(futures.rows(), futures.cols());
  for (std::size_t k = 0; k < z.data().size(); ++k) {
    const double s = f.sigma.data()[k];
    require(s > 0.0, "residuals: sigma must be strictly positive");
    z.data()[k] = (futures.data()[k] - f.mu.data()[k]) / s;
  }
  return z;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // population (divisor n)
};

inline Moments moments(std::span<const double> xs) {
  Moments m;
  if (xs.empty()) return m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= n;
  return m;
}

inline std::vector<double> column(const Matrix& z, std::size_t c) {
  std::vector<double> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) out[r] = z(r, c);
  return out;
}

// Population variance of z over trajectories, per horizon step.
inline std::vector<double> variance_per_tau(const Matrix& z) {
  require(z.rows() >= 2, "variance_per_tau: need at least 2 test trajectories");
  std::vector<double> v(z.cols());
  for (std::size_t c = 0; c < z.cols(); ++c) v[c] = moments(column(z, c)).variance;
  return v;
}

// KL(N(m, v) || N(0, 1)) = (v + m^2 - 1 - ln v) / 2 with (m, v) the sample
// mean and population variance. Zero variance gives +infinity.
inline double kl_to_standard_normal(std::span<const double> samples) {
  require(samples.size() >= 2, "kl_to_standard_normal: need at least 2 samples");
  const Moments m = moments(samples);
  if (!(m.variance > 0.0)) return std::numeric_limits<double>::infinity();
  return 0.5 * (m.variance + m.mean * m.mean - 1.0 - std::log(m.variance));
}

// Fixed-width histogram; values outside [lo, hi) go to underflow/overflow.
struct Histogram {
  double lo = -5.0;
  double hi = 5.0;
  double width = 0.25;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  std::size_t total() const {
    std::size_t n = underflow + overflow;
    for (std::size_t c : counts) n += c;
    return n;
  }
  double bin_lo(std::size_t i) const { return lo + width * static_cast<double>(i); }
  double bin_center(std::size_t i) const { return bin_lo(i) + 0.5 * width; }
  // counts / (total * width): comparable to a probability density.
  double density(std::size_t i) const {
    const std::size_t n = total();
    return n == 0 ? 0.0 : static_cast<double>(counts[i]) / (static_cast<double>(n) * width);
  }
};

inline constexpr double kHistLo = -5.0;
inline constexpr double kHistHi = 5.0;
inline constexpr double kHistWidth = 0.25;

inline Histogram histogram(std::span<const double> xs, double lo = kHistLo, double hi = kHistHi,
                           double width = kHistWidth) {
  require(hi > lo && width > 0.0, "histogram: invalid binning");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.width = width;
  h.counts.assign(static_cast<std::size_t>(std::llround((hi - lo) / width)), 0);
  for (double x : xs) {
    if (x < lo) {
      ++h.underflow;
    } else if (x >= hi) {
      ++h.overflow;
    } else {
      const auto i = std::min(h.counts.size() - 1, static_cast<std::size_t>((x - lo) / width));
      ++h.counts[i];
    }
  }
  return h;
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Mass of N(0, 1) in [a, b).
inline double standard_normal_mass(double a, double b) {
  return standard_normal_cdf(b) - standard_normal_cdf(a);
}

// Discrete KL between the binned empirical distribution (including the two
// tail bins) and the standard normal masses of the same bins.
inline double kl_to_standard_normal_binned(std::span<const double> samples, double lo = kHistLo,
                                           double hi = kHistHi, double width = kHistWidth) {
  require(samples.size() >= 2, "kl_to_standard_normal_binned: need at least 2 samples");
  const Histogram h = histogram(samples, lo, hi, width);
  const double n = static_cast<double>(h.total());
  double kl = 0.0;
  const auto term = [&](std::size_t count, double q) {
    if (count == 0) return;
    const double p = static_cast<double>(count) / n;
    kl += p * std::log(p / q);
  };
  term(h.underflow, standard_normal_cdf(lo));
  term(h.overflow, 1.0 - standard_normal_cdf(hi));
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    term(h.counts[i], standard_normal_mass(h.bin_lo(i), h.bin_lo(i) + width));
  }
  return std::max(0.0, kl);
}

enum class KlEstimator { moment, binned };

inline std::string to_string(KlEstimator e) { return e == KlEstimator::moment ? "moment" : "binned"; }

inline KlEstimator kl_estimator_from_string(const std::string& s) {
  if (s == "moment") return KlEstimator::moment;
  if (s == "binned") return KlEstimator::binned;
  throw ValidationError("unknown KL estimator '" + s + "'");
}

inline double kl_divergence(std::span<const double> samples, KlEstimator e) {
  return e == KlEstimator::moment ? kl_to_standard_normal(samples)
                                  : kl_to_standard_normal_binned(samples);
}

struct Coverage {
  double k = 1.0;
  double fraction = 0.0;
  std::vector<double> per_tau;
};

// Fraction of (n, tau) with |x - mu| <= k sigma, overall and per tau.
inline Coverage coverage(const Forecasts& f, const Matrix& futures, double k) {
  require(k > 0.0, "coverage: k must be positive");
  require(f.mu.same_shape(futures) && f.sigma.same_shape(futures), "coverage: shape mismatch");
  Coverage c;
  c.k = k;
  c.per_tau.assign(futures.cols(), 0.0);
  if (futures.rows() == 0) return c;
  std::size_t inside_total = 0;
  for (std::size_t tau = 0; tau < futures.cols(); ++tau) {
    std::size_t inside = 0;
    for (std::size_t n = 0; n < futures.rows(); ++n) {
      if (std::abs(futures(n, tau) - f.mu(n, tau)) <= k * f.sigma(n, tau)) ++inside;
    }
    c.per_tau[tau] = static_cast<double>(inside) / static_cast<double>(futures.rows());
    inside_total += inside;
  }
  c.fraction = static_cast<double>(inside_total) / static_cast<double>(futures.data().size());
  return c;
}

// Mean absolute error over all (n, tau).
inline double mae(const Matrix& mu, const Matrix& futures) {
  require(mu.same_shape(futures), "mae: shape mismatch");
  if (futures.data().empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.data().size(); ++k) acc += std::abs(futures.data()[k] - mu.data()[k]);
  return acc / static_cast<double>(mu.data().size());
}

struct HistogramPanel {
  std::string label;
  std::size_t tau = 0;  // 1-based; 0 for the pooled panel
  Histogram hist;
};

struct CalibrationReport {
  std::size_t n_test = 0;
  std::size_t horizon = 0;
  KlEstimator estimator = KlEstimator::moment;

  std::vector<double> mean_per_tau;
  std::vector<double> variance_per_tau;
  std::vector<double> kl_per_tau;
  double pooled_mean = 0.0;
  double pooled_variance = 0.0;
  double pooled_kl = 0.0;
  double pooled_kl_moment = 0.0;
  double pooled_kl_binned = 0.0;

  std::vector<Coverage> coverage;  // k = 1, 2, 3
  double mae = 0.0;
  std::optional<double> mae_deterministic;

  std::vector<HistogramPanel> histograms;  // tau = 1, floor(T/2), T, pooled
  Matrix z;
};

struct ReportOptions {
  KlEstimator estimator = KlEstimator::moment;
  // Mean forecasts of a point-wise-only model, for the MAE comparison.
  std::optional<Matrix> deterministic_mu;
};

inline CalibrationReport build_report(const Forecasts& f, const WindowedDataset& test,
                                      const ReportOptions& opts = {}) {
  require(!test.empty(), "build_report: test set is empty");
  require(test.size() >= 2, "build_report: need at least 2 test trajectories");
  require(f.size() == test.size() && f.mu.cols() == test.horizon,
          "build_report: forecasts do not match the test set");

  CalibrationReport r;
  r.n_test = test.size();
  r.horizon = test.horizon;
  r.estimator = opts.estimator;
  r.z = residuals(f, test.futures);

  r.variance_per_tau = variance_per_tau(r.z);
  r.mean_per_tau.resize(r.horizon);
  r.kl_per_tau.resize(r.horizon);
  for (std::size_t tau = 0; tau < r.horizon; ++tau) {
    const std::vector<double> col = column(r.z, tau);
    r.mean_per_tau[tau] = moments(col).mean;
    r.kl_per_tau[tau] = kl_divergence(col, opts.estimator);
  }
  const Moments pooled = moments(r.z.data());
  r.pooled_mean = pooled.mean;
  r.pooled_variance = pooled.variance;
  r.pooled_kl_moment = kl_to_standard_normal(r.z.data());
  r.pooled_kl_binned = kl_to_standard_normal_binned(r.z.data());
  r.pooled_kl = opts.estimator == KlEstimator::moment ? r.pooled_kl_moment : r.pooled_kl_binned;

  for (double k : {1.0, 2.0, 3.0}) r.coverage.push_back(coverage(f, test.futures, k));
  r.mae = mae(f.mu, test.futures);
  if (opts.deterministic_mu) r.mae_deterministic = mae(*opts.deterministic_mu, test.futures);

  const std::size_t T = r.horizon;
  const std::size_t mid = std::max<std::size_t>(1, T / 2);
  for (const auto& [label, tau] :
       {std::pair<std::string, std::size_t>{"tau_first", 1}, {"tau_mid", mid}, {"tau_last", T}}) {
    r.histograms.push_back({label, tau, histogram(column(r.z, tau - 1))});
  }
  r.histograms.push_back({"pooled", 0, histogram(r.z.data())});
  return r;
}

inline CalibrationReport build_report(const DualModel& model, const WindowedDataset& test,
                                      KlEstimator estimator = KlEstimator::moment) {
  require(model.lookback() == test.lookback && model.horizon() == test.horizon,
          "build_report: model (P=" + std::to_string(model.lookback()) + ", T=" +
              std::to_string(model.horizon()) + ") does not match data (P=" +
              std::to_string(test.lookback) + ", T=" + std::to_string(test.horizon) + ")");
  ReportOptions opts;
  opts.estimator = estimator;
  const Forecasts f = predict(model, test.lookbacks);
  Matrix det(test.size(), test.horizon);
  for (std::size_t n = 0; n < test.size(); ++n) {
    const std::vector<double> m = forecast_mean(model.pretrained_mean, test.lookbacks.row(n));
    std::copy(m.begin(), m.end(), det.row(n).begin());
  }
  opts.deterministic_mu = std::move(det);
  return build_report(f, test, opts);
}

// Exact random-walk forecasts: mu = last lookback value, sigma = sqrt(tau).
inline Forecasts brownian_oracle_forecasts(const WindowedDataset& data) {
  Forecasts f{Matrix(data.size(), data.horizon), Matrix(data.size(), data.horizon)};
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double last = data.lookbacks(n, data.lookback - 1);
    for (std::size_t tau = 1; tau <= data.horizon; ++tau) {
      const GaussianForecast g = brownian_oracle(last, tau);
      f.mu(n, tau - 1) = g.mu;
      f.sigma(n, tau - 1) = g.sigma;
    }
  }
  return f;
}

}  // namespace probtsf
