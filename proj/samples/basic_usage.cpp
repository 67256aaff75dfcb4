// Train a small dual network on noisy sines and print calibration metrics.

#include <iostream>

#include "probtsf/probtsf.hpp"

int main() {
  using namespace probtsf;

  const TrajectorySet set = gen_sines(400, 96, /*seed=*/7);
  auto [train_set, test_set] = window(set, 48, 48, 0.8, /*seed=*/1);

  TrainConfig cfg;
  cfg.pretrain_epochs = 20;
  cfg.joint_epochs = 5;
  cfg.hidden = 32;
  const TrainResult res = train(train_set, cfg, [](const EpochSummary& e) {
    std::cout << to_string(e.phase) << " epoch " << e.epoch + 1 << " loss " << e.mean_loss << "\n";
  });

  const CalibrationReport r = build_report(res.model, test_set);
  std::cout << "test series:      " << r.n_test << "\n"
            << "pooled Var[z]:    " << r.pooled_variance << "\n"
            << "pooled KL:        " << r.pooled_kl << "\n"
            << "coverage 1/2/3:   " << r.coverage[0].fraction << " " << r.coverage[1].fraction << " "
            << r.coverage[2].fraction << "\n"
            << "MAE (mean head):  " << r.mae << "\n";

  const ForecastDistribution f = predict(res.model.mean, res.model.sigma, test_set.lookbacks.row(0));
  std::cout << "first forecast step: mu " << f.mu[0] << ", sigma " << f.sigma[0] << "\n";
}
