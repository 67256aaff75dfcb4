#pragma once

#include <cmath>
#include <numeric>
#include <span>

namespace probtsf {

// ln(1 + e^x) without overflow for large x or underflow to zero for very
// negative x.
inline double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Logistic function; the derivative of softplus.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Inverse of softplus for y > 0: ln(e^y - 1).
inline double softplus_inv(double y) {
  if (y > 30.0) return y + std::log(-std::expm1(-y));
  return std::log(std::expm1(y));
}

// Location/scale used to standardize a lookback window and to map head
// outputs back to data units.
struct WindowScale {
  double mean = 0.0;
  double std = 1.0;

  static constexpr double kMinStd = 1e-12;

  // Population mean and std of the window. A (near-)constant window gets
  // std = 1 so the standardized input is all zeros rather than undefined.
  static WindowScale of(std::span<const double> xs) {
    WindowScale s;
    if (xs.empty()) return s;
    const double n = static_cast<double>(xs.size());
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / n);
    if (!(s.std >= kMinStd)) s.std = 1.0;
    return s;
  }

  static WindowScale identity() { return {}; }
};

}  // namespace probtsf
