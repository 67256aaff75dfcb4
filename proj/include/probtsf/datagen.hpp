#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "probtsf/core.hpp"
#include "probtsf/rng.hpp"

namespace probtsf {

struct Trajectory {
  std::size_t id = 0;
  std::vector<double> values;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// A set of equal-length series sharing one time axis.
struct TrajectorySet {
  std::vector<double> time;
  std::vector<Trajectory> trajectories;

  std::size_t length() const { return time.size(); }
  std::size_t size() const { return trajectories.size(); }

  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

// One (lookback, future) pair per trajectory.
struct WindowedDataset {
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  Split split = Split::train;
  std::vector<std::size_t> ids;
  Matrix lookbacks;  // N x P
  Matrix futures;    // N x T

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct SinesConfig {
  double omega1 = kTwoPi / 24.0;
  double omega2_mean = kTwoPi / 12.0;
  double amplitude1 = 4.0;
  double amplitude2 = 1.0;
  double noise_std = 1.0;
  // Pin the per-trajectory draws (tests and illustrations).
  std::optional<double> phase_fixed;
  std::optional<double> omega2_fixed;
};

enum class VdpForm {
  standard,  // y'' - w^2 lambda (1 - y^2) y' + w^2 y = 0
  literal,   // y'' - w^2 (lambda (1 - y^2) y' + y) = 0
};

inline std::string to_string(VdpForm f) { return f == VdpForm::standard ? "standard" : "literal"; }

inline VdpForm vdp_form_from_string(const std::string& s) {
  if (s == "standard") return VdpForm::standard;
  if (s == "literal") return VdpForm::literal;
  throw ValidationError("unknown Van der Pol form '" + s + "'");
}

struct VdpConfig {
  double omega1 = kTwoPi / 24.0;
  double lambda_mean = 5.0;
  double y0 = 0.0;
  double v0 = 1.0;
  double dt_int = 0.05;
  double noise_std = 1.0;
  VdpForm form = VdpForm::standard;
  std::optional<double> lambda_fixed;
  std::size_t max_redraws = 1000;
};

struct BrownianConfig {
  double x0_low = 0.0;
  double x0_high = 1.0;
  double increment_std = 1.0;
};

// Sines sample at time t: a1 sin(w1 t + phi) + a2 sin(w2 t).
inline double sines_value(double t, const SinesConfig& cfg, double phase, double omega2) {
  return cfg.amplitude1 * std::sin(cfg.omega1 * t + phase) + cfg.amplitude2 * std::sin(omega2 * t);
}

namespace detail {

inline void check_gen_args(std::size_t n_traj, std::size_t length) {
  require(n_traj >= 1, "generator: n_traj must be >= 1");
  require(length >= 1, "generator: length must be >= 1");
}

inline std::vector<double> time_axis(std::size_t length, double t0) {
  std::vector<double> t(length);
  for (std::size_t i = 0; i < length; ++i) t[i] = t0 + static_cast<double>(i);
  return t;
}

}  // namespace detail

// x_t = 4 sin(w1 t + phi) + sin(w2 t) + noise at t = 1..length, with
// phi ~ U[0, 2pi) and w2 ~ Exp(mean w2_mean) drawn once per trajectory.
inline TrajectorySet gen_sines(std::size_t n_traj, std::size_t length, std::uint64_t seed,
                               const SinesConfig& cfg = {}) {
  detail::check_gen_args(n_traj, length);
  require(cfg.omega1 > 0 && cfg.omega2_mean > 0 && cfg.noise_std >= 0,
          "SinesConfig: frequencies must be positive and noise_std non-negative");
  TrajectorySet set;
  set.time = detail::time_axis(length, 1.0);
  set.trajectories.resize(n_traj);
  for (std::size_t n = 0; n < n_traj; ++n) {
    Pcg64 rng(seed, n);
    std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);
    std::exponential_distribution<double> omega_dist(1.0 / cfg.omega2_mean);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double phase = cfg.phase_fixed ? *cfg.phase_fixed : phase_dist(rng);
    const double omega2 = cfg.omega2_fixed ? *cfg.omega2_fixed : omega_dist(rng);
    Trajectory& tr = set.trajectories[n];
    tr.id = n;
    tr.values.resize(length);
    for (std::size_t i = 0; i < length; ++i) {
      tr.values[i] = sines_value(set.time[i], cfg, phase, omega2) + cfg.noise_std * noise(rng);
    }
  }
  return set;
}

// Integrates the oscillator with classical RK4 at step dt_int from (y0, v0) at
// t = 0 and returns y at t = 1..length. Empty when the state goes non-finite.
inline std::optional<std::vector<double>> vdp_integrate(double lambda, std::size_t length,
                                                        const VdpConfig& cfg) {
  const double steps_per_unit_f = 1.0 / cfg.dt_int;
  const auto steps_per_unit = static_cast<std::size_t>(std::llround(steps_per_unit_f));
  const double w2 = cfg.omega1 * cfg.omega1;
  const auto accel = [&](double y, double v) {
    if (cfg.form == VdpForm::standard) return w2 * lambda * (1.0 - y * y) * v - w2 * y;
    return w2 * (lambda * (1.0 - y * y) * v + y);
  };
  const double h = cfg.dt_int;
  double y = cfg.y0;
  double v = cfg.v0;
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t k = 0; k < steps_per_unit; ++k) {
      const double k1y = v, k1v = accel(y, v);
      const double k2y = v + 0.5 * h * k1v, k2v = accel(y + 0.5 * h * k1y, v + 0.5 * h * k1v);
      const double k3y = v + 0.5 * h * k2v, k3v = accel(y + 0.5 * h * k2y, v + 0.5 * h * k2v);
      const double k4y = v + h * k3v, k4v = accel(y + h * k3y, v + h * k3v);
      y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    if (!std::isfinite(y) || !std::isfinite(v)) return std::nullopt;
    out[t] = y;
  }
  return out;
}

inline void validate(const VdpConfig& cfg) {
  require(cfg.dt_int > 0.0 && std::isfinite(cfg.dt_int), "VdpConfig: dt_int must be positive");
  const double k = 1.0 / cfg.dt_int;
  require(std::abs(k - std::round(k)) < 1e-9 * std::max(1.0, k),
          "VdpConfig: dt_int must divide 1 evenly");
  require(cfg.omega1 > 0 && cfg.lambda_mean > 0 && cfg.noise_std >= 0,
          "VdpConfig: omega1 and lambda_mean must be positive, noise_std non-negative");
}

// Van der Pol trajectories observed at t = 1..length with additive noise and
// lambda ~ Exp(mean lambda_mean) per trajectory. A draw whose integration
// leaves the finite range is discarded and lambda is redrawn from the same
// stream.
inline TrajectorySet gen_vdp(std::size_t n_traj, std::size_t length, std::uint64_t seed,
                             const VdpConfig& cfg = {}) {
  detail::check_gen_args(n_traj, length);
  validate(cfg);
  TrajectorySet set;
  set.time = detail::time_axis(length, 1.0);
  set.trajectories.resize(n_traj);
  for (std::size_t n = 0; n < n_traj; ++n) {
    Pcg64 rng(seed, n);
    std::exponential_distribution<double> lambda_dist(1.0 / cfg.lambda_mean);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::optional<std::vector<double>> y;
    for (std::size_t attempt = 0; !y; ++attempt) {
      if (attempt > cfg.max_redraws) {
        throw std::runtime_error("gen_vdp: trajectory " + std::to_string(n) +
                                 " diverged on every lambda draw");
      }
      const double lambda = cfg.lambda_fixed ? *cfg.lambda_fixed : lambda_dist(rng);
      y = vdp_integrate(lambda, length, cfg);
      if (!y) {
        std::clog << "gen_vdp: trajectory " << n << " diverged with lambda=" << lambda
                  << ", redrawing\n";
        if (cfg.lambda_fixed) {
          throw std::runtime_error("gen_vdp: integration diverged for fixed lambda");
        }
      }
    }
    Trajectory& tr = set.trajectories[n];
    tr.id = n;
    tr.values = std::move(*y);
    for (double& x : tr.values) x += cfg.noise_std * noise(rng);
  }
  return set;
}

// Random walk x_t = x_{t-1} + xi_t. The first stored value is x_0 ~ U[x0_low,
// x0_high]; the time axis therefore starts at 0.
inline TrajectorySet gen_brownian(std::size_t n_traj, std::size_t length, std::uint64_t seed,
                                  const BrownianConfig& cfg = {}) {
  detail::check_gen_args(n_traj, length);
  require(cfg.increment_std > 0 && cfg.x0_high >= cfg.x0_low, "BrownianConfig: invalid ranges");
  TrajectorySet set;
  set.time = detail::time_axis(length, 0.0);
  set.trajectories.resize(n_traj);
  for (std::size_t n = 0; n < n_traj; ++n) {
    Pcg64 rng(seed, n);
    std::uniform_real_distribution<double> start(cfg.x0_low, cfg.x0_high);
    std::normal_distribution<double> step(0.0, cfg.increment_std);
    Trajectory& tr = set.trajectories[n];
    tr.id = n;
    tr.values.resize(length);
    tr.values[0] = start(rng);
    for (std::size_t i = 1; i < length; ++i) tr.values[i] = tr.values[i - 1] + step(rng);
  }
  return set;
}

struct GaussianForecast {
  double mu = 0.0;
  double sigma = 1.0;
};

// Exact conditional law of a unit random walk tau steps past its last
// observation x_P: Normal(x_P, tau).
inline GaussianForecast brownian_oracle(double x_last, std::size_t tau) {
  require(tau >= 1, "brownian_oracle: tau must be >= 1");
  return {x_last, std::sqrt(static_cast<double>(tau))};
}

// Splits trajectories by id into train/test sets after a seeded shuffle and
// cuts one (lookback, future) pair from the first P + T points of each.
inline std::pair<WindowedDataset, WindowedDataset> window(const TrajectorySet& set,
                                                          std::size_t lookback, std::size_t horizon,
                                                          double train_fraction,
                                                          std::uint64_t seed) {
  require(lookback >= 1 && horizon >= 1, "window: lookback and horizon must be >= 1");
  require(train_fraction >= 0.0 && train_fraction <= 1.0, "window: train_fraction must be in [0, 1]");
  require(set.length() >= lookback + horizon,
          "window: series length " + std::to_string(set.length()) + " is shorter than lookback + horizon = " +
              std::to_string(lookback + horizon));

  std::vector<std::size_t> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Pcg64 rng(seed, streams::kSplit);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(set.size())));

  std::pair<WindowedDataset, WindowedDataset> out;
  auto& [train, test] = out;
  for (WindowedDataset* ds : {&train, &test}) {
    ds->lookback = lookback;
    ds->horizon = horizon;
    ds->lookbacks = Matrix(0, lookback);
    ds->futures = Matrix(0, horizon);
  }
  train.split = Split::train;
  test.split = Split::test;

  for (std::size_t k = 0; k < order.size(); ++k) {
    const Trajectory& tr = set.trajectories[order[k]];
    require(tr.values.size() == set.length(), "window: ragged trajectory set");
    WindowedDataset& ds = k < n_train ? train : test;
    const std::span<const double> v(tr.values);
    ds.ids.push_back(tr.id);
    ds.lookbacks.append_row(v.subspan(0, lookback));
    ds.futures.append_row(v.subspan(lookback, horizon));
  }
  return out;
}

}  // namespace probtsf
