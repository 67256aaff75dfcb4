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
#include "probtsf/ssm.hpp"

namespace probtsf {

enum class VarianceArch { fully_connected, ssm_backed };

inline std::string to_string(VarianceArch a) {
  return a == VarianceArch::fully_connected ? "fully_connected" : "ssm_backed";
}

inline VarianceArch variance_arch_from_string(const std::string& s) {
  if (s == "fully_connected" || s == "mlp") return VarianceArch::fully_connected;
  if (s == "ssm_backed" || s == "ssm") return VarianceArch::ssm_backed;
  throw ValidationError("unknown variance architecture '" + s + "'");
}

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Parameters of the standard-deviation network.
//
// fully_connected: layer_dims = (P, H, ..., T), ReLU between layers, softplus
// on the output. ssm_backed: the pre-activation is the head output of an
// independent SsmParams (in standardized units), followed by softplus.
// Either way sigma is multiplied by the lookback std when normalize is set.
struct MlpParams {
  VarianceArch arch = VarianceArch::fully_connected;
  std::vector<std::size_t> layer_dims;
  std::vector<DenseLayer> layers;
  SsmParams ssm;
  bool normalize = true;

  std::size_t lookback() const {
    return arch == VarianceArch::ssm_backed ? ssm.lookback : layer_dims.front();
  }
  std::size_t horizon() const {
    return arch == VarianceArch::ssm_backed ? ssm.horizon : layer_dims.back();
  }

  void validate() const {
    if (arch == VarianceArch::ssm_backed) {
      ssm.validate();
      return;
    }
    require(layer_dims.size() >= 2, "MlpParams: need at least input and output dims");
    require(layers.size() + 1 == layer_dims.size(), "MlpParams: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const DenseLayer& L = layers[l];
      require(L.in == layer_dims[l] && L.out == layer_dims[l + 1] && L.w.size() == L.in * L.out &&
                  L.b.size() == L.out,
              "MlpParams: layer " + std::to_string(l) + " shape mismatch");
    }
  }

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    using Elem = std::conditional_t<std::is_const_v<Self>, const double, double>;
    if (self.arch == VarianceArch::ssm_backed) {
      SsmParams::visit(self.ssm, [&](const std::string& name, std::span<Elem> a) {
        f("ssm." + name, a);
      });
      return;
    }
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      f("layer" + std::to_string(l) + ".weight", std::span<Elem>(self.layers[l].w));
      f("layer" + std::to_string(l) + ".bias", std::span<Elem>(self.layers[l].b));
    }
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Final bias softplus^-1(1) so the untrained head predicts sigma ~ 1 in
// standardized units.
inline const double kSigmaInitBias = softplus_inv(1.0);

inline MlpParams init_mlp(std::span<const std::size_t> dims, Pcg64& rng, bool normalize = true) {
  require(dims.size() >= 2, "init_mlp: need at least two layer dims");
  MlpParams p;
  p.arch = VarianceArch::fully_connected;
  p.layer_dims.assign(dims.begin(), dims.end());
  p.normalize = normalize;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer L;
    L.in = dims[l];
    L.out = dims[l + 1];
    const double lim = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
    std::uniform_real_distribution<double> uni(-lim, lim);
    L.w.resize(L.in * L.out);
    for (double& w : L.w) w = uni(rng);
    L.b.assign(L.out, 0.0);
    p.layers.push_back(std::move(L));
  }
  for (double& b : p.layers.back().b) b = kSigmaInitBias;
  return p;
}

inline MlpParams init_mlp(std::size_t lookback, std::size_t horizon, std::size_t hidden, Pcg64& rng,
                          bool normalize = true) {
  const std::vector<std::size_t> dims{lookback, hidden, hidden, horizon};
  return init_mlp(dims, rng, normalize);
}

inline MlpParams init_ssm_sigma(std::size_t lookback, std::size_t horizon, std::size_t latent_dim,
                                Pcg64& rng, bool normalize = true) {
  MlpParams p;
  p.arch = VarianceArch::ssm_backed;
  p.normalize = normalize;
  p.ssm = init_ssm(lookback, horizon, latent_dim, rng, normalize);
  for (double& b : p.ssm.readout_b) b = kSigmaInitBias;
  return p;
}

namespace detail {

struct MlpTrace {
  // acts[0] is the input; acts[l + 1] the post-activation of layer l
  // (pre-softplus for the last layer).
  std::vector<std::vector<double>> acts;
};

inline MlpTrace mlp_forward(const MlpParams& p, std::span<const double> u) {
  MlpTrace tr;
  tr.acts.reserve(p.layers.size() + 1);
  tr.acts.emplace_back(u.begin(), u.end());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const DenseLayer& L = p.layers[l];
    const std::vector<double>& x = tr.acts.back();
    std::vector<double> z(L.out);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* w = L.w.data() + o * L.in;
      double acc = L.b[o];
      for (std::size_t i = 0; i < L.in; ++i) acc += w[i] * x[i];
      const bool hidden = l + 1 < p.layers.size();
      z[o] = hidden && acc < 0.0 ? 0.0 : acc;
    }
    tr.acts.push_back(std::move(z));
  }
  return tr;
}

inline void check_sigma_input(const MlpParams& p, std::span<const double> lookback) {
  require(lookback.size() == p.lookback(), "lookback length " + std::to_string(lookback.size()) +
                                               " does not match sigma head lookback " +
                                               std::to_string(p.lookback()));
  require(all_finite(lookback), "lookback contains non-finite values");
}

// Pre-softplus output in standardized units.
inline std::vector<double> sigma_preactivation(const MlpParams& p, std::span<const double> u) {
  if (p.arch == VarianceArch::ssm_backed) return ssm_head(p.ssm, u);
  return mlp_forward(p, u).acts.back();
}

}  // namespace detail

// Strictly positive sigma_{1:T} for one lookback.
inline std::vector<double> forward_sigma(const MlpParams& p, std::span<const double> lookback) {
  detail::check_sigma_input(p, lookback);
  const WindowScale s = detail::scale_for(lookback, p.normalize);
  std::vector<double> out = detail::sigma_preactivation(p, detail::standardize(lookback, s));
  for (double& v : out) v = s.std * softplus(v);
  return out;
}

// Gradient of upstream . forward_sigma(p, lookback) with respect to p.
inline MlpParams backward_sigma(const MlpParams& p, std::span<const double> lookback,
                                std::span<const double> upstream) {
  detail::check_sigma_input(p, lookback);
  require(upstream.size() == p.horizon(), "backward_sigma: upstream length must equal horizon");
  const WindowScale s = detail::scale_for(lookback, p.normalize);
  const std::vector<double> u = detail::standardize(lookback, s);

  if (p.arch == VarianceArch::ssm_backed) {
    const std::vector<double> pre = detail::ssm_head(p.ssm, u);
    std::vector<double> gy(pre.size());
    for (std::size_t t = 0; t < pre.size(); ++t) gy[t] = upstream[t] * s.std * sigmoid(pre[t]);
    MlpParams g = zeros_like(p);
    g.ssm = detail::ssm_head_backward(p.ssm, u, gy);
    return g;
  }

  const detail::MlpTrace tr = detail::mlp_forward(p, u);
  MlpParams g = zeros_like(p);
  std::vector<double> delta(tr.acts.back().size());
  for (std::size_t t = 0; t < delta.size(); ++t) {
    delta[t] = upstream[t] * s.std * sigmoid(tr.acts.back()[t]);
  }
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const DenseLayer& L = p.layers[l];
    DenseLayer& G = g.layers[l];
    const std::vector<double>& x = tr.acts[l];
    std::vector<double> dx(L.in, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      G.b[o] = d;
      const double* w = L.w.data() + o * L.in;
      double* gw = G.w.data() + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) {
        gw[i] = d * x[i];
        dx[i] += d * w[i];
      }
    }
    if (l > 0) {
      // ReLU mask: the layer input is the post-activation of layer l - 1.
      for (std::size_t i = 0; i < L.in; ++i) {
        if (x[i] <= 0.0) dx[i] = 0.0;
      }
    }
    delta = std::move(dx);
  }
  return g;
}

}  // namespace probtsf
