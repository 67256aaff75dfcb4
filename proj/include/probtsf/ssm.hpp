#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "probtsf/core.hpp"
#include "probtsf/numeric.hpp"
#include "probtsf/rng.hpp"

namespace probtsf {

// Diagonal linear state-space forecaster.
//
// Continuous dynamics dh/dt = A h + B u with A = diag(-softplus(a_raw)) are
// discretized by zero-order hold over the learned step dt = softplus(delta_raw)
// and scanned over the (standardized) lookback from h_0 = 0. The final state
// h_P feeds the forecast head
//
//   y_tau = readout_w[tau] . h_P + readout_b[tau] + c . h_P
//
// where c . h_P is the SSM's own output projection at the last step, shared by
// every horizon, and the readout adds per-horizon corrections.
struct SsmParams {
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::size_t latent_dim = 0;

  std::vector<double> a_raw;
  std::vector<double> b;
  std::vector<double> c;
  double delta_raw = 0.0;
  std::vector<double> readout_w;  // horizon x latent_dim, row-major
  std::vector<double> readout_b;  // horizon

  // Standardize each lookback by its own mean/std and map the head output
  // back to data units.
  bool normalize = true;

  static SsmParams zeros(std::size_t lookback, std::size_t horizon, std::size_t latent_dim,
                         bool normalize = true) {
    SsmParams p;
    p.lookback = lookback;
    p.horizon = horizon;
    p.latent_dim = latent_dim;
    p.a_raw.assign(latent_dim, 0.0);
    p.b.assign(latent_dim, 0.0);
    p.c.assign(latent_dim, 0.0);
    p.readout_w.assign(horizon * latent_dim, 0.0);
    p.readout_b.assign(horizon, 0.0);
    p.normalize = normalize;
    return p;
  }

  // Effective continuous-time diagonal, strictly negative.
  std::vector<double> a_diag() const {
    std::vector<double> a(latent_dim);
    for (std::size_t i = 0; i < latent_dim; ++i) a[i] = -softplus(a_raw[i]);
    return a;
  }

  double step() const { return softplus(delta_raw); }

  void validate() const {
    require(lookback >= 1 && horizon >= 1 && latent_dim >= 1, "SsmParams: empty dimensions");
    require(a_raw.size() == latent_dim && b.size() == latent_dim && c.size() == latent_dim,
            "SsmParams: latent arrays must have latent_dim entries");
    require(readout_w.size() == horizon * latent_dim && readout_b.size() == horizon,
            "SsmParams: readout shape mismatch");
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    using Elem = std::conditional_t<std::is_const_v<Self>, const double, double>;
    f(std::string("a_raw"), std::span<Elem>(self.a_raw));
    f(std::string("b"), std::span<Elem>(self.b));
    f(std::string("c"), std::span<Elem>(self.c));
    f(std::string("delta_raw"), std::span<Elem>(&self.delta_raw, 1));
    f(std::string("readout_w"), std::span<Elem>(self.readout_w));
    f(std::string("readout_b"), std::span<Elem>(self.readout_b));
  }

  friend bool operator==(const SsmParams&, const SsmParams&) = default;
};

struct Discretized {
  std::vector<double> a_bar;
  std::vector<double> b_bar;
};

// Below this |dt * a| the input gain uses its second-order series.
inline constexpr double kDiscretizeSeriesThreshold = 1e-8;

// Zero-order hold for a diagonal system:
//   a_bar = exp(dt a),  b_bar = (exp(dt a) - 1) / a * b.
inline Discretized discretize(std::span<const double> a_diag, std::span<const double> b, double dt) {
  require(a_diag.size() == b.size(), "discretize: a and b lengths differ");
  require(std::isfinite(dt) && all_finite(a_diag) && all_finite(b), "discretize: non-finite input");
  require(dt > 0.0, "discretize: dt must be positive");
  Discretized d;
  d.a_bar.resize(a_diag.size());
  d.b_bar.resize(a_diag.size());
  for (std::size_t i = 0; i < a_diag.size(); ++i) {
    require(a_diag[i] < 0.0, "discretize: diagonal entries must be negative");
    const double z = dt * a_diag[i];
    d.a_bar[i] = std::exp(z);
    const double gain = std::abs(z) < kDiscretizeSeriesThreshold ? dt * (1.0 + 0.5 * z)
                                                                   : std::expm1(z) / a_diag[i];
    d.b_bar[i] = gain * b[i];
  }
  return d;
}

struct ScanResult {
  std::vector<double> outputs;
  std::vector<double> h_final;
};

// h_t = a_bar (.) h_{t-1} + b_bar * input_t,  output_t = c . h_t.
inline ScanResult scan(std::span<const double> a_bar, std::span<const double> b_bar,
                       std::span<const double> c, std::span<const double> inputs,
                       std::span<const double> h0) {
  const std::size_t d = a_bar.size();
  require(b_bar.size() == d && c.size() == d && h0.size() == d, "scan: inconsistent latent sizes");
  ScanResult r;
  r.h_final.assign(h0.begin(), h0.end());
  r.outputs.resize(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    double out = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      r.h_final[i] = a_bar[i] * r.h_final[i] + b_bar[i] * inputs[t];
      out += c[i] * r.h_final[i];
    }
    r.outputs[t] = out;
  }
  return r;
}

namespace detail {

inline std::vector<double> standardize(std::span<const double> x, const WindowScale& s) {
  std::vector<double> u(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) u[t] = (x[t] - s.mean) / s.std;
  return u;
}

inline WindowScale scale_for(std::span<const double> lookback, bool normalize) {
  return normalize ? WindowScale::of(lookback) : WindowScale::identity();
}

inline void check_lookback(const SsmParams& p, std::span<const double> lookback) {
  require(lookback.size() == p.lookback, "lookback length " + std::to_string(lookback.size()) +
                                             " does not match model lookback " +
                                             std::to_string(p.lookback));
  require(all_finite(lookback), "lookback contains non-finite values");
}

// Forecast head in standardized units.
inline std::vector<double> ssm_head(const SsmParams& p, std::span<const double> u) {
  const Discretized d = discretize(p.a_diag(), p.b, p.step());
  const std::vector<double> h0(p.latent_dim, 0.0);
  const ScanResult sr = scan(d.a_bar, d.b_bar, p.c, u, h0);
  const std::vector<double>& h = sr.h_final;
  const double level = sr.outputs.empty() ? 0.0 : sr.outputs.back();
  std::vector<double> y(p.horizon);
  for (std::size_t tau = 0; tau < p.horizon; ++tau) {
    const double* w = p.readout_w.data() + tau * p.latent_dim;
    double acc = p.readout_b[tau] + level;
    for (std::size_t i = 0; i < p.latent_dim; ++i) acc += w[i] * h[i];
    y[tau] = acc;
  }
  return y;
}

// Reverse-mode gradient of gy . ssm_head(p, u) with respect to every field.
inline SsmParams ssm_head_backward(const SsmParams& p, std::span<const double> u,
                                   std::span<const double> gy) {
  const std::size_t D = p.latent_dim;
  const std::size_t L = u.size();
  const std::vector<double> a = p.a_diag();
  const double dt = p.step();
  const Discretized d = discretize(a, p.b, dt);

  // states[t] holds h_t for t = 0..L (h_0 = 0).
  std::vector<double> states((L + 1) * D, 0.0);
  for (std::size_t t = 1; t <= L; ++t) {
    for (std::size_t i = 0; i < D; ++i) {
      states[t * D + i] = d.a_bar[i] * states[(t - 1) * D + i] + d.b_bar[i] * u[t - 1];
    }
  }
  const double* hP = states.data() + L * D;

  SsmParams g = zeros_like(p);
  double gsum = 0.0;
  for (double v : gy) gsum += v;

  std::vector<double> lam(D, 0.0);
  for (std::size_t tau = 0; tau < p.horizon; ++tau) {
    g.readout_b[tau] = gy[tau];
    const double* w = p.readout_w.data() + tau * D;
    double* gw = g.readout_w.data() + tau * D;
    for (std::size_t i = 0; i < D; ++i) {
      gw[i] = gy[tau] * hP[i];
      lam[i] += gy[tau] * w[i];
    }
  }
  for (std::size_t i = 0; i < D; ++i) {
    g.c[i] = gsum * hP[i];
    lam[i] += gsum * p.c[i];
  }

  // Back through the scan: lam holds dL/dh_t.
  std::vector<double> g_abar(D, 0.0), g_bbar(D, 0.0);
  for (std::size_t t = L; t >= 1; --t) {
    for (std::size_t i = 0; i < D; ++i) {
      g_abar[i] += lam[i] * states[(t - 1) * D + i];
      g_bbar[i] += lam[i] * u[t - 1];
      lam[i] *= d.a_bar[i];
    }
  }

  // Back through the discretization and the positivity maps.
  double g_dt = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    const double z = dt * a[i];
    const double abar = d.a_bar[i];
    double gain, dgain_da;
    if (std::abs(z) < kDiscretizeSeriesThreshold) {
      gain = dt * (1.0 + 0.5 * z);
    } else {
      gain = std::expm1(z) / a[i];
    }
    // d/da [expm1(dt a)/a] = dt^2 * (z e^z - expm1(z)) / z^2
    if (std::abs(z) < 1e-3) {
      dgain_da = dt * dt * (0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0);
    } else {
      dgain_da = dt * dt * (z * abar - std::expm1(z)) / (z * z);
    }
    const double dgain_ddt = abar;

    const double g_a = g_abar[i] * dt * abar + g_bbar[i] * p.b[i] * dgain_da;
    g_dt += g_abar[i] * a[i] * abar + g_bbar[i] * p.b[i] * dgain_ddt;
    g.b[i] = g_bbar[i] * gain;
    g.a_raw[i] = -g_a * sigmoid(p.a_raw[i]);
  }
  g.delta_raw = g_dt * sigmoid(p.delta_raw);
  return g;
}

}  // namespace detail

// Mean forecast mu_{1:T} for one lookback window.
inline std::vector<double> forecast_mean(const SsmParams& p, std::span<const double> lookback) {
  detail::check_lookback(p, lookback);
  const WindowScale s = detail::scale_for(lookback, p.normalize);
  std::vector<double> y = detail::ssm_head(p, detail::standardize(lookback, s));
  for (double& v : y) v = s.mean + s.std * v;
  return y;
}

// Gradient of upstream . forecast_mean(p, lookback) with respect to p.
inline SsmParams backward_mean(const SsmParams& p, std::span<const double> lookback,
                               std::span<const double> upstream) {
  detail::check_lookback(p, lookback);
  require(upstream.size() == p.horizon, "backward_mean: upstream length must equal horizon");
  const WindowScale s = detail::scale_for(lookback, p.normalize);
  std::vector<double> gy(upstream.begin(), upstream.end());
  for (double& v : gy) v *= s.std;
  return detail::ssm_head_backward(p, detail::standardize(lookback, s), gy);
}

// Decay rates are log-spaced so the latent channels span memories from about
// one step to the whole lookback. The readout uses Glorot-uniform weights.
inline SsmParams init_ssm(std::size_t lookback, std::size_t horizon, std::size_t latent_dim,
                          Pcg64& rng, bool normalize = true) {
  SsmParams p = SsmParams::zeros(lookback, horizon, latent_dim, normalize);
  const double r_lo = 1.0 / static_cast<double>(lookback);
  const double r_hi = 2.0;
  for (std::size_t i = 0; i < latent_dim; ++i) {
    const double f = latent_dim == 1 ? 0.0 : static_cast<double>(i) / (latent_dim - 1);
    p.a_raw[i] = softplus_inv(r_lo * std::pow(r_hi / r_lo, f));
    p.b[i] = 1.0;
  }
  p.delta_raw = softplus_inv(1.0);
  const double lim = std::sqrt(6.0 / static_cast<double>(latent_dim + horizon));
  std::uniform_real_distribution<double> uni(-lim, lim);
  for (double& w : p.readout_w) w = uni(rng);
  return p;
}

}  // namespace probtsf
