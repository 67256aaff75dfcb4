#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "probtsf/adam.hpp"
#include "probtsf/core.hpp"
#include "probtsf/datagen.hpp"
#include "probtsf/forecast.hpp"
#include "probtsf/losses.hpp"
#include "probtsf/rng.hpp"
#include "probtsf/ssm.hpp"
#include "probtsf/variance_head.hpp"

namespace probtsf {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t pretrain_epochs = 50;
  // Held-out calibration degrades with longer joint training: the sigma
  // network starts fitting noise in the training residuals.
  std::size_t joint_epochs = 10;
  std::uint64_t seed = 0;
  AdamConfig adam{};
  double clip_norm = 10.0;

  std::size_t latent_dim = 16;
  std::size_t hidden = 32;
  VarianceArch variance_arch = VarianceArch::fully_connected;
  std::size_t sigma_latent_dim = 16;
  bool normalize = true;

  // Test harness: hold sigma at 1 (data units) during the joint phase, so
  // the NLL reduces to half the point-wise loss.
  bool fixed_unit_sigma = false;

  void validate() const {
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(adam.learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
    require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
            "TrainConfig: Adam betas must be in [0, 1)");
    require(adam.epsilon > 0.0, "TrainConfig: Adam epsilon must be > 0");
    require(clip_norm >= 0.0, "TrainConfig: clip_norm must be >= 0 (0 disables clipping)");
    require(latent_dim >= 1 && hidden >= 1 && sigma_latent_dim >= 1,
            "TrainConfig: network sizes must be >= 1");
  }
};

enum class Phase { pretrain, joint };

inline std::string to_string(Phase p) { return p == Phase::pretrain ? "pretrain" : "joint"; }

struct HistoryEntry {
  Phase phase = Phase::pretrain;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;            // minibatch objective of the phase
  double pointwise_loss = 0.0;  // minibatch point-wise loss, any phase
};

struct EpochSummary {
  Phase phase = Phase::pretrain;
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<HistoryEntry> steps;
  std::vector<EpochSummary> epochs;
};

struct TrainResult {
  DualModel model;
  TrainHistory history;
};

// Thrown when a minibatch produces a non-finite loss or gradient. Carries the
// parameters from just before the offending update.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, DualModel last_good, HistoryEntry at)
      : std::runtime_error(what), last_good_(std::move(last_good)), at_(at) {}

  const DualModel& last_good() const { return last_good_; }
  const HistoryEntry& at() const { return at_; }

 private:
  DualModel last_good_;
  HistoryEntry at_;
};

inline DualModel init_model(std::size_t lookback, std::size_t horizon, const TrainConfig& cfg) {
  Pcg64 mean_rng(cfg.seed, streams::kMeanInit);
  Pcg64 sigma_rng(cfg.seed, streams::kSigmaInit);
  DualModel m;
  m.mean = init_ssm(lookback, horizon, cfg.latent_dim, mean_rng, cfg.normalize);
  m.sigma = cfg.variance_arch == VarianceArch::fully_connected
                ? init_mlp(lookback, horizon, cfg.hidden, sigma_rng, cfg.normalize)
                : init_ssm_sigma(lookback, horizon, cfg.sigma_latent_dim, sigma_rng, cfg.normalize);
  m.pretrained_mean = m.mean;
  return m;
}

namespace detail {

struct BatchOutcome {
  double loss = 0.0;
  double pointwise = 0.0;
  std::vector<double> grad;  // flat; mean head first, then sigma head in joint steps
};

inline void gather_rows(const Matrix& src, std::span<const std::size_t> idx, Matrix& dst) {
  dst = Matrix(idx.size(), src.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy(src.row(idx[k]).begin(), src.row(idx[k]).end(), dst.row(k).begin());
  }
}

inline BatchOutcome pretrain_batch(const SsmParams& mean, const WindowedDataset& data,
                                   std::span<const std::size_t> idx) {
  Matrix lb, fut;
  gather_rows(data.lookbacks, idx, lb);
  gather_rows(data.futures, idx, fut);
  Matrix mu(idx.size(), data.horizon);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::vector<double> m = forecast_mean(mean, lb.row(k));
    std::copy(m.begin(), m.end(), mu.row(k).begin());
  }
  BatchOutcome out;
  out.loss = out.pointwise = pretrain_loss(mu, fut);
  const Matrix g = pretrain_loss_grad(mu, fut);
  // Per-sample gradients are summed in batch order.
  SsmParams acc = zeros_like(mean);
  for (std::size_t k = 0; k < idx.size(); ++k) add_scaled(acc, backward_mean(mean, lb.row(k), g.row(k)));
  out.grad = flatten(acc);
  return out;
}

inline BatchOutcome joint_batch(const SsmParams& mean, const MlpParams& sigma,
                                const WindowedDataset& data, std::span<const std::size_t> idx,
                                bool fixed_unit_sigma) {
  Matrix lb, fut;
  gather_rows(data.lookbacks, idx, lb);
  gather_rows(data.futures, idx, fut);
  Matrix mu(idx.size(), data.horizon), sd(idx.size(), data.horizon, 1.0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::vector<double> m = forecast_mean(mean, lb.row(k));
    std::copy(m.begin(), m.end(), mu.row(k).begin());
    if (!fixed_unit_sigma) {
      const std::vector<double> s = forward_sigma(sigma, lb.row(k));
      std::copy(s.begin(), s.end(), sd.row(k).begin());
    }
  }
  BatchOutcome out;
  out.pointwise = pretrain_loss(mu, fut);
  out.loss = nll_loss(mu, sd, fut);
  const NllGrad g = nll_loss_grad(mu, sd, fut);
  SsmParams gm = zeros_like(mean);
  MlpParams gs = zeros_like(sigma);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    add_scaled(gm, backward_mean(mean, lb.row(k), g.d_mu.row(k)));
    if (!fixed_unit_sigma) add_scaled(gs, backward_sigma(sigma, lb.row(k), g.d_sigma.row(k)));
  }
  out.grad = flatten(gm);
  if (!fixed_unit_sigma) {
    const std::vector<double> fs = flatten(gs);
    out.grad.insert(out.grad.end(), fs.begin(), fs.end());
  }
  return out;
}

}  // namespace detail

// Two-phase training. Phase 1 fits the mean head alone on the point-wise
// loss; phase 2 fits both heads on the Gaussian NLL. Each epoch visits the
// training set in a fresh seeded order, in minibatches of batch_size (the last
// one may be smaller).
inline TrainResult train(const WindowedDataset& data, const TrainConfig& cfg,
                         const std::function<void(const EpochSummary&)>& on_epoch = {}) {
  cfg.validate();
  require(!data.empty(), "train: training set is empty");
  require(data.lookbacks.rows() == data.size() && data.futures.rows() == data.size(),
          "train: dataset shape mismatch");

  TrainResult res;
  DualModel& model = res.model;
  model = init_model(data.lookback, data.horizon, cfg);

  Pcg64 shuffle_rng(cfg.seed, streams::kShuffle);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  const auto run_phase = [&](Phase phase, std::size_t epochs) {
    const std::size_t n_mean = param_count(model.mean);
    const std::size_t n_sigma = cfg.fixed_unit_sigma ? 0 : param_count(model.sigma);
    const std::size_t n_total = phase == Phase::pretrain ? n_mean : n_mean + n_sigma;
    Adam opt(n_total, cfg.adam);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, stop - start);

        detail::BatchOutcome b =
            phase == Phase::pretrain
                ? detail::pretrain_batch(model.mean, data, idx)
                : detail::joint_batch(model.mean, model.sigma, data, idx, cfg.fixed_unit_sigma);

        const HistoryEntry entry{phase, epoch, step, b.loss, b.pointwise};
        if (!std::isfinite(b.loss) || !all_finite(b.grad)) {
          throw TrainingDiverged("train: non-finite " + std::string(std::isfinite(b.loss) ? "gradient" : "loss") +
                                     " in " + to_string(phase) + " epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(step),
                                 model, entry);
        }
        clip_global_norm(b.grad, cfg.clip_norm);

        std::vector<double> flat = flatten(model.mean);
        if (phase == Phase::joint && !cfg.fixed_unit_sigma) {
          const std::vector<double> fs = flatten(model.sigma);
          flat.insert(flat.end(), fs.begin(), fs.end());
        }
        opt.step(flat, b.grad);
        const std::span<const double> fv(flat);
        assign_flat(model.mean, fv.subspan(0, n_mean));
        if (phase == Phase::joint && !cfg.fixed_unit_sigma) assign_flat(model.sigma, fv.subspan(n_mean));

        res.history.steps.push_back(entry);
        loss_sum += b.loss;
        ++batches;
        ++step;
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const EpochSummary summary{phase, epoch, loss_sum / static_cast<double>(batches), secs};
      res.history.epochs.push_back(summary);
      if (on_epoch) on_epoch(summary);
    }
  };

  run_phase(Phase::pretrain, cfg.pretrain_epochs);
  model.pretrained_mean = model.mean;
  run_phase(Phase::joint, cfg.joint_epochs);
  return res;
}

}  // namespace probtsf
